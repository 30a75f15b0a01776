#pragma once

#include <cstdint>
#include <vector>

#include "rankshrink/dense_tensor.hpp"

namespace rankshrink {

struct ChainConfig {
  std::size_t rank = 20;
  std::size_t burn_in = 500;
  std::size_t thin = 5;
  std::size_t n_samples = 100;
  std::uint64_t seed = 0;
  double a_sigma = 1.0;
  double b_sigma = 1.0;
  bool use_intercepts = true;
  // Use the noise-variance update that ignores the factor prior's
  // dependence on sigma^2 (shape a + |S|/2, scale b + RSS/2).
  bool sigma2_paper_compat = false;
  // Worker cap; 0 reads RANKSHRINK_THREADS, defaulting to 1.
  unsigned threads = 0;
  // Optional per-dimension relabelling of the level -> RNG stream map. Empty
  // means identity. Used to replay a chain on a permuted input.
  std::vector<std::vector<std::uint64_t>> stream_labels;

  void validate() const;
};

struct SampleDiagnostics {
  std::size_t sweep = 0;
  double sigma2 = 0.0;
  double train_se = 0.0;  // sqrt of the training residual sum of squares
  std::vector<double> gamma;
};

/// Posterior means accumulated over the retained draws.
struct PosteriorEstimate {
  DenseTensor theta_hat;  // low-rank part only
  DenseTensor y_hat;      // low-rank part plus intercepts
  double sigma2_mean = 0.0;
  std::vector<double> gamma_mean;
  std::size_t n_samples_used = 0;
  std::uint64_t floor_events = 0;
  std::vector<SampleDiagnostics> trace;
};

/// Worker count from RANKSHRINK_THREADS (>= 1).
unsigned env_thread_count();
unsigned resolve_threads(const ChainConfig& config);

}  // namespace rankshrink
