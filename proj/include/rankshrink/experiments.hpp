#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rankshrink/chain.hpp"
#include "rankshrink/dense_tensor.hpp"
#include "rankshrink/priors.hpp"
#include "rankshrink/sparse_store.hpp"

namespace rankshrink::experiments {

struct SimConfig {
  std::vector<Index> dims;
  std::size_t true_rank = 1;
  std::vector<double> column_variances;
  double noise_sigma2 = 0.5;
  double keep_fraction = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SimData {
  DenseTensor truth;  // noiseless low-rank mean
  ObservedTensor obs;
};

/// Factor entries of column l drawn N(0, v_l); Y = Theta + N(0, sigma^2).
/// Keeps round(p * N) entries uniformly at random, then repairs coverage by
/// adding one uniformly chosen entry of each uncovered level and dropping a
/// random kept entry whose removal uncovers nothing.
SimData generate(const SimConfig& sim);

/// sqrt(sum of squared entrywise errors over every index).
double standard_error(const DenseTensor& estimate, const DenseTensor& truth);
/// sqrt(mean of squared entrywise errors): standard_error / sqrt(N).
double rms_error(const DenseTensor& estimate, const DenseTensor& truth);

/// 1 - SSE / SST over the test entries, SST about the test mean.
double percent_explained(const DenseTensor& y_hat, const ObservedTensor& test);
/// sqrt(sum of squared prediction errors) over the test entries.
double holdout_se(const DenseTensor& y_hat, const ObservedTensor& test);
double holdout_rmse(const DenseTensor& y_hat, const ObservedTensor& test);

/// Leading singular values, descending. Requires an order-2 tensor.
std::vector<double> scree(const DenseTensor& theta_hat, std::size_t top_n);

enum class Protocol { MatrixRankSweep, TensorRankSweep, MissingnessSweep, ScreeRecovery };

std::string_view to_string(Protocol protocol);
std::optional<Protocol> parse_protocol(std::string_view name);

enum class SeScale {
  Sum,   // sqrt of the summed squared error
  Mean,  // root mean squared error
};

struct TableOverrides {
  std::size_t n_trials = 20;
  std::uint64_t base_seed = 1;
  std::optional<std::size_t> rank;
  std::optional<std::size_t> burn_in;
  std::optional<std::size_t> thin;
  std::optional<std::size_t> n_samples;
  std::optional<std::vector<double>> sweep_values;  // subset of the protocol's sweep
  std::optional<double> v0;
  std::optional<double> beta;  // replaces every per-point beta
  std::optional<IggParams> igg;
  bool gamma_paper_compat = false;
  bool sigma2_paper_compat = false;
  SeScale se_scale = SeScale::Sum;
  bool record_timing = true;
  unsigned threads = 0;
};

struct ProtocolPoint {
  double sweep_value = 0.0;
  SimConfig sim;
  double gamma_beta = 1.0;  // oracle-tuned beta at this point
};

struct ProtocolDefinition {
  Protocol protocol;
  std::string sweep_param;
  std::vector<ProtocolPoint> points;
  ChainConfig chain;
  std::size_t scree_top_n = 0;
};

/// Settings of each simulation study. Seeds inside are placeholders; trials
/// overwrite them with base_seed + trial.
ProtocolDefinition protocol_definition(Protocol protocol);

PriorSpec prior_for_point(PriorFamily family, const ProtocolPoint& point, const TableOverrides& overrides);

struct TrialRecord {
  PriorFamily prior;
  double sweep_value;
  std::size_t trial;
  double se;
  double rmse;
  std::vector<double> singular_values;  // scree protocol only
  double wall_time_s;
};

struct ResultRow {
  std::string protocol;
  PriorFamily prior;
  std::string sweep_param;
  double sweep_value;
  std::size_t n_trials;
  double mean_se;
  double mc_se;
  double wall_time_s;
};

struct ScreeRow {
  std::string method;  // prior name or "truth"
  std::vector<double> mean_singular_values;
};

struct ResultTable {
  Protocol protocol;
  std::vector<ResultRow> rows;
  std::vector<TrialRecord> trials;
  std::vector<ScreeRow> scree;
};

struct TrialOutcome {
  double se;
  double rmse;
  std::vector<double> singular_values;
  std::vector<double> truth_singular_values;
};

/// generate -> run -> error for one trial of one protocol point.
TrialOutcome run_trial(const ProtocolDefinition& def, const ProtocolPoint& point, PriorFamily family,
                       std::size_t trial, const TableOverrides& overrides);

ResultTable run_table(Protocol protocol, const std::vector<PriorFamily>& priors, const TableOverrides& overrides);

void write_result_csv(const ResultTable& table, const std::string& path);
void write_long_csv(const ResultTable& table, const std::string& path);
void write_scree_csv(const ResultTable& table, const std::string& path);

/// Rating-style matrix with row, column and global intercepts, used for the
/// holdout comparison.
struct RatingSimConfig {
  Index users = 500;
  Index items = 50;
  std::size_t true_rank = 3;
  double factor_variance = 0.5;
  double row_intercept_variance = 0.5;
  double column_intercept_variance = 0.5;
  double global_mean = 6.5;
  double noise_sigma2 = 1.5;
  double keep_fraction = 0.1;
  std::uint64_t seed = 0;
};

SimData generate_ratings(const RatingSimConfig& sim);

struct HoldoutOutcome {
  double test_se;
  double test_rmse;
  double percent_explained;
};

HoldoutOutcome run_holdout_trial(const RatingSimConfig& sim, double user_fraction, const ChainConfig& chain,
                                 const PriorSpec& spec);

}  // namespace rankshrink::experiments
