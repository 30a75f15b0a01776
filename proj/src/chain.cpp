#include "rankshrink/chain.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>

#include "rankshrink/errors.hpp"
#include "rankshrink/matrix_completer.hpp"
#include "sampler_common.hpp"

namespace rankshrink {

void ChainConfig::validate() const {
  if (rank < 1) throw Error(ErrorKind::InvalidParameter, "K must be at least 1");
  if (thin < 1) throw Error(ErrorKind::InvalidParameter, "thin must be at least 1");
  if (n_samples < 1) throw Error(ErrorKind::InvalidParameter, "at least one retained sample is required");
  if (!(a_sigma > 0.0) || !(b_sigma > 0.0))
    throw Error(ErrorKind::InvalidParameter, "a_sigma and b_sigma must be positive");
}

unsigned env_thread_count() {
  const char* raw = std::getenv("RANKSHRINK_THREADS");
  if (raw == nullptr) return 1;
  unsigned value = 0;
  const auto* end = raw + std::strlen(raw);
  const auto [ptr, ec] = std::from_chars(raw, end, value);
  if (ec != std::errc() || ptr != end || value == 0) return 1;
  return value;
}

unsigned resolve_threads(const ChainConfig& config) {
  return config.threads > 0 ? config.threads : env_thread_count();
}

namespace detail {

double draw_sigma2(RngStream& rng, const ChainConfig& config, std::size_t n_obs, double rss,
                   const std::vector<double>& ss, const std::vector<double>& gamma, std::size_t total_rows) {
  double shape = config.a_sigma + static_cast<double>(n_obs) / 2.0;
  double scale = config.b_sigma + rss / 2.0;
  if (!config.sigma2_paper_compat) {
    shape += static_cast<double>(ss.size() * total_rows) / 2.0;
    for (std::size_t k = 0; k < ss.size(); ++k) scale += ss[k] / (2.0 * gamma[k]);
  }
  return std::max(dist::inverse_gamma(rng, shape, scale), matrix::kSigma2Floor);
}

std::vector<double> column_sums_of_squares(const std::vector<const FactorMatrix*>& factors) {
  const auto rank = static_cast<std::size_t>(factors.front()->cols());
  std::vector<double> ss(rank, 0.0);
  for (std::size_t k = 0; k < rank; ++k) {
    double acc = 0.0;
    for (const FactorMatrix* f : factors)
      for (Eigen::Index r = 0; r < f->rows(); ++r) {
        const double v = (*f)(r, static_cast<Eigen::Index>(k));
        acc += v * v;
      }
    ss[k] = acc;
  }
  return ss;
}

}  // namespace detail
}  // namespace rankshrink
