#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rankshrink/chain.hpp"
#include "rankshrink/priors.hpp"
#include "rankshrink/sparse_store.hpp"

namespace rankshrink::tensor {

/// Y = sum_k M1[:,k] o M2[:,k] o ... o MD[:,k] + sum_d intercept_d + mu + E.
struct ModelState {
  std::vector<FactorMatrix> factors;
  std::vector<Eigen::VectorXd> intercepts;  // empty when intercepts are off
  double mu = 0.0;
  double sigma2 = 1.0;
  PriorState prior;

  bool has_intercepts() const noexcept { return !intercepts.empty(); }
};

/// Hadamard design of one slice: row s is the entrywise product of the
/// factor rows of every other dimension at observation s.
struct SliceDesign {
  Eigen::MatrixXd design;
  Eigen::VectorXd response;
};

ModelState init_chain(const ObservedTensor& obs, const ChainConfig& config, const PriorSpec& spec);

/// CP reconstruction at one index.
double cp_value(const ModelState& s, std::span<const Index> idx);
double intercept_sum(const ModelState& s, std::span<const Index> idx);

SliceDesign build_slice_design(const ModelState& s, const ObservedTensor& obs, std::size_t dim, Index level);

void update_factor_rows(ModelState& s, const ObservedTensor& obs, const ChainConfig& config, std::uint64_t sweep);
void update_intercepts(ModelState& s, const ObservedTensor& obs, const ChainConfig& config, std::uint64_t sweep);
void update_sigma2(ModelState& s, const ObservedTensor& obs, const ChainConfig& config, std::uint64_t sweep);
void refresh_prior(ModelState& s, const PriorSpec& spec, const ChainConfig& config, std::uint64_t sweep);

void sweep(ModelState& s, const ObservedTensor& obs, const ChainConfig& config, const PriorSpec& spec,
           std::uint64_t sweep_index);

/// Materialised CP reconstruction.
DenseTensor theta(const ModelState& s);

PosteriorEstimate run(const ObservedTensor& obs, const ChainConfig& config, const PriorSpec& spec);

}  // namespace rankshrink::tensor
