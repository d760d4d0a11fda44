// Simulated homodyne data of a squeezed vacuum: the 3x3 squeezing determinant
// at the origin, then the significance of the example3x3 family, which equals
// it at beta = 0, along the two axes of phase space.

#include <cmath>
#include <cstdio>

#include "qbochner/bhdsim.hpp"
#include "qbochner/estimator.hpp"
#include "qbochner/gbm.hpp"

using namespace qbochner;

int main(int argc, char** argv) {
  const std::size_t samples = argc > 1 ? std::stoul(argv[1]) : 1000000;
  bhdsim::SimConfig config;
  config.state = states::StateModel::squeezed_vacuum_db(-4.13, 6.11);
  config.samples = samples;
  config.seed = 7;
  const auto data = bhdsim::generate(config);

  const auto at_origin = estimator::det_with_error(
      estimator::estimate_gbm(data, gbm::preset("squeezing")));
  std::printf("M = %zu, det = %.4f +- %.4f, significance %.1f\n", samples, at_origin.det,
              at_origin.sigma, at_origin.significance.value_or(0.0));

  const auto family = gbm::preset_family("example3x3");
  std::printf("axis,t,det,sigma,significance\n");
  for (const char* axis : {"re", "im"}) {
    for (double t = -1.0; t <= 1.0 + 1e-9; t += 0.25) {
      const Complex beta = axis[0] == 'r' ? Complex(t, 0.0) : Complex(0.0, t);
      try {
        const auto r =
            estimator::det_with_error(estimator::estimate_gbm(data, family(beta)));
        std::printf("%s,%.2f,%.5f,%.5f,%.2f\n", axis, t, r.det, r.sigma,
                    r.significance.value_or(0.0));
      } catch (const Error& e) {
        std::printf("%s,%.2f,,,error: %s\n", axis, t, e.what());
      }
    }
  }
}
