#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "rankshrink/chain.hpp"
#include "rankshrink/priors.hpp"
#include "rankshrink/sparse_store.hpp"

namespace rankshrink::matrix {

/// Y_ij = (M N^T)_ij + rho_i + omega_j + mu + E_ij.
struct ModelState {
  FactorMatrix M;
  FactorMatrix N;
  Eigen::VectorXd rho;
  Eigen::VectorXd omega;
  double mu = 0.0;
  double sigma2 = 1.0;
  PriorState prior;
};

inline constexpr double kSigma2Floor = 1e-8;
inline constexpr double kInitFactorVariance = 0.1;

/// Requires a covered order-2 store. Factors start i.i.d. N(0, 0.1), rho and
/// omega at zero, mu and sigma^2 at the observed mean and variance (mu = 0
/// when intercepts are off).
ModelState init_chain(const ObservedTensor& obs, const ChainConfig& config, const PriorSpec& spec);

/// Y - rho_i - omega_j - mu, or Y - Theta - rho_i - omega_j - mu when
/// include_theta is set.
double residual(const ModelState& s, const ObservedTensor& obs, std::size_t pos, bool include_theta);

void update_factor_rows(ModelState& s, const ObservedTensor& obs, const ChainConfig& config, std::uint64_t sweep);
void update_intercepts(ModelState& s, const ObservedTensor& obs, const ChainConfig& config, std::uint64_t sweep);
void update_sigma2(ModelState& s, const ObservedTensor& obs, const ChainConfig& config, std::uint64_t sweep);
void refresh_prior(ModelState& s, const PriorSpec& spec, const ChainConfig& config, std::uint64_t sweep);

/// Factor rows, intercepts (if enabled), sigma^2, then the prior.
void sweep(ModelState& s, const ObservedTensor& obs, const ChainConfig& config, const PriorSpec& spec,
           std::uint64_t sweep_index);

Eigen::MatrixXd theta(const ModelState& s);

PosteriorEstimate run(const ObservedTensor& obs, const ChainConfig& config, const PriorSpec& spec);

}  // namespace rankshrink::matrix
