// Radial scan of the gbm2 minor and the Bochner minor 1 - |Phi(beta)|^2 for
// a thermal state mixed with photon-added thermal states. Prints CSV.

#include <cstdio>

#include "qbochner/gbm.hpp"
#include "qbochner/states.hpp"

using namespace qbochner;
using states::StateModel;

int main() {
  const auto state = StateModel::mixture(
      {0.944, 0.03, 0.026}, {StateModel::thermal(0.1), StateModel::photon_added_thermal(3, 0.12),
                             StateModel::photon_added_thermal(4, 0.182)});
  const states::AnalyticCf src(state);
  const auto criterion = gbm::analytic_criterion(src);
  const gbm::Grid radial{0.0, 7.0, 0.05, 0.0, 0.0, 1.0};
  const auto g2 = gbm::grid_scan(criterion, gbm::preset_family("gbm2"), radial);
  const auto bo = gbm::grid_scan(criterion, gbm::preset_family("bochner2"), radial);

  std::printf("abs_beta,gbm2,bochner\n");
  std::size_t best = 0;
  for (std::size_t i = 0; i < g2.size(); ++i) {
    std::printf("%.2f,%.6e,%.6e\n", g2[i].beta.real(), g2[i].result->det, bo[i].result->det);
    if (g2[i].result->det < g2[best].result->det) best = i;
  }
  std::fprintf(stderr, "gbm2 minimum %.4e at |beta| = %.2f; mom2 = %.4f\n",
               g2[best].result->det, g2[best].beta.real(),
               gbm::evaluate(src, gbm::preset("mom2")).det);
}
