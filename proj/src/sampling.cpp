#include "svcal/sampling.hpp"

#include <algorithm>
#include <numeric>

namespace svcal {

Matrix latin_hypercube(const std::vector<std::array<double, 2>>& bounds,
                       std::size_t n, std::mt19937_64& rng) {
  require(n >= 1, "sample count must be >= 1");
  for (const auto& b : bounds) {
    require(b[0] < b[1], "degenerate bounds (low >= high)");
  }
  const std::size_t dim = bounds.size();
  Matrix out(n, dim);
  std::vector<std::size_t> perm(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t d = 0; d < dim; ++d) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const double lo = bounds[d][0];
    const double width = (bounds[d][1] - lo) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.at(i, d) = lo + (static_cast<double>(perm[i]) + unit(rng)) * width;
    }
  }
  return out;
}

}  // namespace svcal
