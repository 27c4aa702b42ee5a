#include <cmath>

#include "crowdforge/kernels.hpp"

namespace crowdforge::kernels {

std::vector<double> gaussian_weights(double sigma, int radius) {
  if (!(sigma > 0.0)) throw ConfigError("Gaussian sigma must be positive");
  if (radius < 0) throw ConfigError("Gaussian radius must be non-negative");
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    w[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

long long nearest_index(double v) noexcept { return static_cast<long long>(std::floor(v + 0.5)); }

}  // namespace crowdforge::kernels
