#include "critfield/rng.hpp"

#include <cmath>

namespace critfield {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

McEstimate batch_means(const std::vector<double>& means) {
  McEstimate e;
  const double B = static_cast<double>(means.size());
  if (means.empty()) return e;
  double s = 0.0;
  for (double m : means) s += m;
  e.value = s / B;
  if (means.size() > 1) {
    double ss = 0.0;
    for (double m : means) ss += (m - e.value) * (m - e.value);
    e.std_error = std::sqrt(ss / (B - 1.0) / B);
  }
  return e;
}

}  // namespace critfield
