#pragma once

// Pieces shared by the matrix and tensor samplers. Both must consume random
// numbers identically so that a D=2 tensor chain replays the matrix chain.

#include <cstdint>
#include <exception>
#include <vector>

#include <Eigen/Dense>

#include "rankshrink/chain.hpp"
#include "rankshrink/priors.hpp"
#include "rankshrink/random.hpp"

namespace rankshrink::detail {

// Stream slot for a global (non-level) draw.
inline constexpr std::uint64_t kGlobalMode = 0xffff;

inline RngStream level_stream(const ChainConfig& config, StreamRole role, std::uint64_t sweep, std::size_t mode,
                              std::uint64_t level) {
  if (mode < config.stream_labels.size() && !config.stream_labels[mode].empty())
    level = config.stream_labels[mode][level];
  return RngStream(config.seed, stream_id(role, sweep, mode, level));
}

inline RngStream global_stream(const ChainConfig& config, StreamRole role, std::uint64_t sweep) {
  return RngStream(config.seed, stream_id(role, sweep, kGlobalMode, 0));
}

/// Row posterior N((S'S + G^-1)^-1 S'r, sigma^2 (S'S + G^-1)^-1).
inline Eigen::VectorXd draw_factor_row(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                                       const std::vector<double>& gamma, double sigma2, RngStream& rng) {
  const Eigen::Index k = design.cols();
  Eigen::MatrixXd precision(k, k);
  precision.noalias() = design.transpose() * design;
  for (Eigen::Index c = 0; c < k; ++c) precision(c, c) += 1.0 / gamma[static_cast<std::size_t>(c)];
  precision /= sigma2;
  Eigen::VectorXd h = design.transpose() * response;
  h /= sigma2;
  return dist::mvn_precision(rng, h, precision);
}

/// Runs body(level) for every level; exceptions from workers are rethrown
/// on the calling thread. Each level owns its RNG stream, so the result does
/// not depend on the worker count.
template <class Body>
void for_each_level(std::size_t levels, unsigned threads, Body&& body) {
  if (threads <= 1 || levels < 2) {
    for (std::size_t l = 0; l < levels; ++l) body(l);
    return;
  }
  std::exception_ptr failure;
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::size_t l = 0; l < levels; ++l) {
    try {
      body(l);
    } catch (...) {
#pragma omp critical(rankshrink_level_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Noise variance conditional. The factor prior N(0, gamma_k sigma^2) adds
/// K * total_rows / 2 to the shape and sum_k ss_k / (2 gamma_k) to the scale
/// unless the compatibility form is requested.
double draw_sigma2(RngStream& rng, const ChainConfig& config, std::size_t n_obs, double rss,
                   const std::vector<double>& ss, const std::vector<double>& gamma, std::size_t total_rows);

std::vector<double> column_sums_of_squares(const std::vector<const FactorMatrix*>& factors);

}  // namespace rankshrink::detail
