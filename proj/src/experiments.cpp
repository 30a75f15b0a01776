#include "rankshrink/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "rankshrink/errors.hpp"
#include "rankshrink/io.hpp"
#include "rankshrink/matrix_completer.hpp"
#include "rankshrink/random.hpp"
#include "rankshrink/tensor_completer.hpp"

namespace rankshrink::experiments {

namespace {

constexpr std::uint64_t kFactorStream = 0x73696d666163;
constexpr std::uint64_t kNoiseStream = 0x73696d6e6f6973;
constexpr std::uint64_t kMaskStream = 0x73696d6d61736b;
constexpr std::uint64_t kInterceptStream = 0x73696d696e74;

std::size_t product(const std::vector<Index>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

void require_same_shape(const DenseTensor& a, const DenseTensor& b) {
  if (a.dims() != b.dims()) throw Error(ErrorKind::ShapeMismatch, "estimate and truth differ in shape");
}

// Keeps llround(p * N) flat offsets, then repairs level coverage.
std::vector<std::size_t> draw_mask(const std::vector<Index>& dims, double keep_fraction, RngStream& rng) {
  const std::size_t total = product(dims);
  const std::size_t level_sum = std::accumulate(dims.begin(), dims.end(), std::size_t{0});
  if (keep_fraction * static_cast<double>(total) < static_cast<double>(level_sum))
    throw Error(ErrorKind::InfeasibleMask, "too few kept entries to cover every level");
  const auto keep = std::min<std::size_t>(total, static_cast<std::size_t>(std::llround(keep_fraction * static_cast<double>(total))));

  std::vector<char> kept(total, 0);
  if (keep == total) {
    std::fill(kept.begin(), kept.end(), 1);
  } else {
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t k = 0; k < keep; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, total - 1);
      std::swap(order[k], order[pick(rng)]);
      kept[order[k]] = 1;
    }
  }

  DenseTensor shape(dims);
  std::vector<std::vector<std::size_t>> counts(dims.size());
  for (std::size_t d = 0; d < dims.size(); ++d) counts[d].assign(dims[d], 0);
  std::vector<Index> idx(dims.size());
  for (std::size_t flat = 0; flat < total; ++flat) {
    if (!kept[flat]) continue;
    shape.unravel(flat, idx);
    for (std::size_t d = 0; d < dims.size(); ++d) ++counts[d][idx[d]];
  }

  auto kept_offsets = [&] {
    std::vector<std::size_t> out;
    for (std::size_t flat = 0; flat < total; ++flat)
      if (kept[flat]) out.push_back(flat);
    return out;
  };

  std::size_t added = 0;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    for (Index level = 0; level < dims[d]; ++level) {
      if (counts[d][level] > 0) continue;
      for (std::size_t e = 0; e < dims.size(); ++e) {
        if (e == d) {
          idx[e] = level;
        } else {
          std::uniform_int_distribution<Index> pick(0, dims[e] - 1);
          idx[e] = pick(rng);
        }
      }
      kept[shape.offset(idx)] = 1;
      for (std::size_t e = 0; e < dims.size(); ++e) ++counts[e][idx[e]];
      ++added;
    }
  }

  if (added > 0) {
    std::vector<std::size_t> candidates = kept_offsets();
    for (std::size_t attempt = 0; added > 0 && attempt < 64 * candidates.size(); ++attempt) {
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      const std::size_t slot = pick(rng);
      const std::size_t flat = candidates[slot];
      if (!kept[flat]) continue;
      shape.unravel(flat, idx);
      bool removable = true;
      for (std::size_t d = 0; d < dims.size(); ++d) removable = removable && counts[d][idx[d]] > 1;
      if (!removable) continue;
      kept[flat] = 0;
      for (std::size_t d = 0; d < dims.size(); ++d) --counts[d][idx[d]];
      --added;
    }
  }
  return kept_offsets();
}

ObservedTensor observe(const DenseTensor& y, const std::vector<std::size_t>& offsets) {
  std::vector<Entry> entries;
  entries.reserve(offsets.size());
  std::vector<Index> idx(y.order());
  for (std::size_t flat : offsets) {
    y.unravel(flat, idx);
    entries.push_back({idx, y.data()[flat]});
  }
  return ObservedTensor::build(y.order(), y.dims(), entries);
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

double mc_standard_error(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

void SimConfig::validate() const {
  if (dims.size() < 2) throw Error(ErrorKind::InvalidParameter, "at least two dimensions are required");
  for (Index d : dims)
    if (d == 0) throw Error(ErrorKind::InvalidParameter, "dimensions must be positive");
  if (true_rank < 1 || true_rank >= *std::min_element(dims.begin(), dims.end()))
    throw Error(ErrorKind::InvalidParameter, "true rank must satisfy 1 <= r < min(dims)");
  if (column_variances.size() != true_rank)
    throw Error(ErrorKind::InvalidParameter, "one column variance per true rank component is required");
  for (double v : column_variances)
    if (!(v > 0.0)) throw Error(ErrorKind::InvalidParameter, "column variances must be positive");
  if (!(noise_sigma2 >= 0.0)) throw Error(ErrorKind::InvalidParameter, "noise variance must be nonnegative");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw Error(ErrorKind::InvalidParameter, "keep fraction must lie in (0, 1]");
}

SimData generate(const SimConfig& sim) {
  sim.validate();
  const std::size_t order = sim.dims.size();
  RngStream factor_rng(sim.seed, kFactorStream);
  std::vector<Eigen::MatrixXd> factors;
  for (std::size_t d = 0; d < order; ++d) {
    Eigen::MatrixXd f(static_cast<Eigen::Index>(sim.dims[d]), static_cast<Eigen::Index>(sim.true_rank));
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      for (Eigen::Index l = 0; l < f.cols(); ++l)
        f(i, l) = dist::normal(factor_rng, 0.0, sim.column_variances[static_cast<std::size_t>(l)]);
    factors.push_back(std::move(f));
  }

  DenseTensor truth(sim.dims);
  DenseTensor y(sim.dims);
  RngStream noise_rng(sim.seed, kNoiseStream);
  std::vector<Index> idx(order);
  for (std::size_t flat = 0; flat < truth.size(); ++flat) {
    truth.unravel(flat, idx);
    double acc = 0.0;
    for (std::size_t l = 0; l < sim.true_rank; ++l) {
      double prod = 1.0;
      for (std::size_t d = 0; d < order; ++d) prod *= factors[d](static_cast<Eigen::Index>(idx[d]), static_cast<Eigen::Index>(l));
      acc += prod;
    }
    truth.data()[flat] = acc;
    y.data()[flat] = acc + dist::normal(noise_rng, 0.0, sim.noise_sigma2);
  }

  RngStream mask_rng(sim.seed, kMaskStream);
  const auto offsets = draw_mask(sim.dims, sim.keep_fraction, mask_rng);
  return {std::move(truth), observe(y, offsets)};
}

double standard_error(const DenseTensor& estimate, const DenseTensor& truth) {
  require_same_shape(estimate, truth);
  double ss = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const double e = estimate.data()[k] - truth.data()[k];
    ss += e * e;
  }
  return std::sqrt(ss);
}

double rms_error(const DenseTensor& estimate, const DenseTensor& truth) {
  return standard_error(estimate, truth) / std::sqrt(static_cast<double>(truth.size()));
}

double percent_explained(const DenseTensor& y_hat, const ObservedTensor& test) {
  if (test.is_empty()) throw Error(ErrorKind::EmptyObservations, "test set is empty");
  if (y_hat.dims() != test.dims()) throw Error(ErrorKind::ShapeMismatch, "prediction and test set differ in shape");
  const double mean = test.mean();
  double sse = 0.0;
  double sst = 0.0;
  for (std::size_t pos = 0; pos < test.size(); ++pos) {
    const double y = test.value(pos);
    const double e = y - y_hat.at(test.index(pos));
    sse += e * e;
    sst += (y - mean) * (y - mean);
  }
  if (sst == 0.0) throw Error(ErrorKind::ZeroVariance, "test values have zero variance");
  return 1.0 - sse / sst;
}

double holdout_se(const DenseTensor& y_hat, const ObservedTensor& test) {
  if (y_hat.dims() != test.dims()) throw Error(ErrorKind::ShapeMismatch, "prediction and test set differ in shape");
  double sse = 0.0;
  for (std::size_t pos = 0; pos < test.size(); ++pos) {
    const double e = test.value(pos) - y_hat.at(test.index(pos));
    sse += e * e;
  }
  return std::sqrt(sse);
}

double holdout_rmse(const DenseTensor& y_hat, const ObservedTensor& test) {
  if (test.is_empty()) throw Error(ErrorKind::EmptyObservations, "test set is empty");
  return holdout_se(y_hat, test) / std::sqrt(static_cast<double>(test.size()));
}

std::vector<double> scree(const DenseTensor& theta_hat, std::size_t top_n) {
  if (theta_hat.order() != 2) throw Error(ErrorKind::InvalidParameter, "scree needs a matrix");
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(theta_hat.to_matrix());
  const Eigen::VectorXd& sv = svd.singularValues();
  const auto n = std::min<std::size_t>(top_n, static_cast<std::size_t>(sv.size()));
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = sv(static_cast<Eigen::Index>(k));
  return out;
}

std::string_view to_string(Protocol protocol) {
  switch (protocol) {
    case Protocol::MatrixRankSweep: return "matrix_rank_sweep";
    case Protocol::TensorRankSweep: return "tensor_rank_sweep";
    case Protocol::MissingnessSweep: return "missingness_sweep";
    case Protocol::ScreeRecovery: return "scree_recovery";
  }
  return "unknown";
}

std::optional<Protocol> parse_protocol(std::string_view name) {
  for (Protocol p : {Protocol::MatrixRankSweep, Protocol::TensorRankSweep, Protocol::MissingnessSweep,
                     Protocol::ScreeRecovery})
    if (to_string(p) == name) return p;
  return std::nullopt;
}

ProtocolDefinition protocol_definition(Protocol protocol) {
  ProtocolDefinition def;
  def.protocol = protocol;
  def.chain.rank = 20;
  def.chain.burn_in = 500;
  def.chain.thin = 5;
  def.chain.n_samples = 100;
  def.chain.use_intercepts = false;

  auto point = [](std::vector<Index> dims, std::size_t r, std::vector<double> v, double p, double sweep_value,
                  double beta) {
    ProtocolPoint pt;
    pt.sweep_value = sweep_value;
    pt.sim.dims = std::move(dims);
    pt.sim.true_rank = r;
    pt.sim.column_variances = std::move(v);
    pt.sim.noise_sigma2 = 0.5;
    pt.sim.keep_fraction = p;
    pt.gamma_beta = beta;
    return pt;
  };

  switch (protocol) {
    case Protocol::MatrixRankSweep: {
      def.sweep_param = "rank";
      const std::size_t ranks[] = {2, 4, 8, 16};
      const double betas[] = {40, 27, 12, 10};
      for (std::size_t k = 0; k < 4; ++k)
        def.points.push_back(point({100, 100}, ranks[k], std::vector<double>(ranks[k], 5.0), 0.2,
                                   static_cast<double>(ranks[k]), betas[k]));
      break;
    }
    case Protocol::TensorRankSweep: {
      def.sweep_param = "rank";
      const std::size_t ranks[] = {2, 4, 8, 16};
      const double betas[] = {20, 17, 15, 15};
      for (std::size_t k = 0; k < 4; ++k)
        def.points.push_back(point({20, 20, 25}, ranks[k], std::vector<double>(ranks[k], 5.0), 0.1,
                                   static_cast<double>(ranks[k]), betas[k]));
      break;
    }
    case Protocol::MissingnessSweep: {
      def.sweep_param = "keep_fraction";
      const double fractions[] = {0.075, 0.15, 0.3, 0.8, 1.0};
      const double betas[] = {15, 30, 40, 50, 60};
      for (std::size_t k = 0; k < 5; ++k)
        def.points.push_back(point({100, 100}, 4, std::vector<double>(4, 5.0), fractions[k], fractions[k], betas[k]));
      break;
    }
    case Protocol::ScreeRecovery: {
      def.sweep_param = "rank";
      def.scree_top_n = 15;
      def.points.push_back(point({100, 100}, 5, {6, 6, 3, 3, 1}, 0.15, 5.0, 40.0));
      break;
    }
  }
  return def;
}

PriorSpec prior_for_point(PriorFamily family, const ProtocolPoint& point, const TableOverrides& overrides) {
  switch (family) {
    case PriorFamily::Gaussian: return PriorSpec::gaussian(overrides.v0.value_or(GaussianParams{}.v0));
    case PriorFamily::Gamma:
      return PriorSpec::gamma(overrides.beta.value_or(point.gamma_beta), overrides.gamma_paper_compat);
    case PriorFamily::Horseshoe: return PriorSpec::horseshoe();
    case PriorFamily::HorseshoePlus: return PriorSpec::horseshoe_plus();
    case PriorFamily::Igg: {
      const IggParams p = overrides.igg.value_or(IggParams{});
      return PriorSpec::igg(p.a, p.b, p.c);
    }
  }
  throw Error(ErrorKind::InvalidParameter, "unknown prior family");
}

namespace {

ChainConfig chain_for(const ProtocolDefinition& def, const TableOverrides& overrides, std::uint64_t seed) {
  ChainConfig chain = def.chain;
  if (overrides.rank) chain.rank = *overrides.rank;
  if (overrides.burn_in) chain.burn_in = *overrides.burn_in;
  if (overrides.thin) chain.thin = *overrides.thin;
  if (overrides.n_samples) chain.n_samples = *overrides.n_samples;
  chain.sigma2_paper_compat = overrides.sigma2_paper_compat;
  chain.threads = overrides.threads;
  chain.seed = seed;
  return chain;
}

std::vector<ProtocolPoint> selected_points(const ProtocolDefinition& def, const TableOverrides& overrides) {
  if (!overrides.sweep_values) return def.points;
  std::vector<ProtocolPoint> out;
  for (double v : *overrides.sweep_values) {
    auto it = std::find_if(def.points.begin(), def.points.end(),
                           [&](const ProtocolPoint& p) { return std::abs(p.sweep_value - v) < 1e-12; });
    if (it == def.points.end()) {
      std::ostringstream msg;
      msg << "sweep value " << v << " is not part of " << to_string(def.protocol);
      throw Error(ErrorKind::InvalidParameter, msg.str());
    }
    out.push_back(*it);
  }
  return out;
}

}  // namespace

TrialOutcome run_trial(const ProtocolDefinition& def, const ProtocolPoint& point, PriorFamily family,
                       std::size_t trial, const TableOverrides& overrides) {
  const std::uint64_t seed = overrides.base_seed + trial;
  SimConfig sim = point.sim;
  sim.seed = seed;
  const SimData data = generate(sim);
  const ChainConfig chain = chain_for(def, overrides, seed);
  const PriorSpec spec = prior_for_point(family, point, overrides);
  const PosteriorEstimate est =
      data.obs.order() == 2 ? matrix::run(data.obs, chain, spec) : tensor::run(data.obs, chain, spec);

  TrialOutcome out;
  out.se = standard_error(est.theta_hat, data.truth);
  out.rmse = rms_error(est.theta_hat, data.truth);
  if (def.scree_top_n > 0) {
    out.singular_values = scree(est.theta_hat, def.scree_top_n);
    out.truth_singular_values = scree(data.truth, def.scree_top_n);
  }
  return out;
}

ResultTable run_table(Protocol protocol, const std::vector<PriorFamily>& priors, const TableOverrides& overrides) {
  if (overrides.n_trials < 1) throw Error(ErrorKind::InvalidParameter, "at least one trial is required");
  const ProtocolDefinition def = protocol_definition(protocol);
  const auto points = selected_points(def, overrides);

  ResultTable table;
  table.protocol = protocol;
  std::vector<std::vector<double>> truth_sv;

  for (PriorFamily family : priors) {
    std::vector<std::vector<double>> prior_sv;
    for (const ProtocolPoint& point : points) {
      std::vector<double> errors;
      double wall = 0.0;
      for (std::size_t trial = 0; trial < overrides.n_trials; ++trial) {
        const auto start = std::chrono::steady_clock::now();
        TrialOutcome outcome = run_trial(def, point, family, trial, overrides);
        const double elapsed =
            overrides.record_timing
                ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
                : 0.0;
        wall += elapsed;
        errors.push_back(overrides.se_scale == SeScale::Sum ? outcome.se : outcome.rmse);
        if (def.scree_top_n > 0) {
          prior_sv.push_back(outcome.singular_values);
          if (truth_sv.size() < overrides.n_trials) truth_sv.push_back(outcome.truth_singular_values);
        }
        table.trials.push_back({family, point.sweep_value, trial, outcome.se, outcome.rmse,
                                std::move(outcome.singular_values), elapsed});
      }
      table.rows.push_back({std::string(to_string(protocol)), family, def.sweep_param, point.sweep_value,
                            overrides.n_trials, mean_of(errors), mc_standard_error(errors),
                            wall / static_cast<double>(overrides.n_trials)});
    }
    if (def.scree_top_n > 0) {
      ScreeRow row{std::string(to_string(family)), std::vector<double>(def.scree_top_n, 0.0)};
      for (const auto& sv : prior_sv)
        for (std::size_t k = 0; k < sv.size(); ++k) row.mean_singular_values[k] += sv[k] / static_cast<double>(prior_sv.size());
      table.scree.push_back(std::move(row));
    }
  }
  if (def.scree_top_n > 0 && !truth_sv.empty()) {
    ScreeRow row{"truth", std::vector<double>(def.scree_top_n, 0.0)};
    for (const auto& sv : truth_sv)
      for (std::size_t k = 0; k < sv.size(); ++k) row.mean_singular_values[k] += sv[k] / static_cast<double>(truth_sv.size());
    table.scree.push_back(std::move(row));
  }
  return table;
}

namespace {

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path + " for writing");
  return out;
}

void close_output(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path);
}

}  // namespace

void write_result_csv(const ResultTable& table, const std::string& path) {
  auto out = open_output(path);
  out << "protocol,prior,sweep_param,sweep_value,n_trials,mean_se,mc_se,wall_time_s\n";
  for (const ResultRow& r : table.rows)
    out << r.protocol << ',' << to_string(r.prior) << ',' << r.sweep_param << ',' << io::format_double(r.sweep_value)
        << ',' << r.n_trials << ',' << io::format_double(r.mean_se) << ',' << io::format_double(r.mc_se) << ','
        << io::format_double(r.wall_time_s) << '\n';
  close_output(out, path);
}

void write_long_csv(const ResultTable& table, const std::string& path) {
  auto out = open_output(path);
  const ProtocolDefinition def = protocol_definition(table.protocol);
  out << "protocol,prior,sweep_param,sweep_value,trial,metric,value\n";
  for (const TrialRecord& t : table.trials) {
    const auto prefix = std::string(to_string(table.protocol)) + ',' + std::string(to_string(t.prior)) + ',' +
                        def.sweep_param + ',' + io::format_double(t.sweep_value) + ',' + std::to_string(t.trial) + ',';
    out << prefix << "se," << io::format_double(t.se) << '\n';
    out << prefix << "rmse," << io::format_double(t.rmse) << '\n';
    out << prefix << "wall_time_s," << io::format_double(t.wall_time_s) << '\n';
  }
  close_output(out, path);
}

void write_scree_csv(const ResultTable& table, const std::string& path) {
  auto out = open_output(path);
  out << "method,index,singular_value\n";
  for (const ScreeRow& row : table.scree)
    for (std::size_t k = 0; k < row.mean_singular_values.size(); ++k)
      out << row.method << ',' << (k + 1) << ',' << io::format_double(row.mean_singular_values[k]) << '\n';
  close_output(out, path);
}

SimData generate_ratings(const RatingSimConfig& sim) {
  if (sim.users < 2 || sim.items < 2 || sim.true_rank < 1)
    throw Error(ErrorKind::InvalidParameter, "rating simulation needs at least a 2 x 2 matrix and rank 1");
  const auto m = static_cast<Eigen::Index>(sim.users);
  const auto n = static_cast<Eigen::Index>(sim.items);
  const auto r = static_cast<Eigen::Index>(sim.true_rank);

  RngStream factor_rng(sim.seed, kFactorStream);
  Eigen::MatrixXd M(m, r);
  Eigen::MatrixXd N(n, r);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index k = 0; k < r; ++k) M(i, k) = dist::normal(factor_rng, 0.0, sim.factor_variance);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < r; ++k) N(j, k) = dist::normal(factor_rng, 0.0, sim.factor_variance);

  RngStream intercept_rng(sim.seed, kInterceptStream);
  Eigen::VectorXd rho(m);
  Eigen::VectorXd omega(n);
  for (Eigen::Index i = 0; i < m; ++i) rho(i) = dist::normal(intercept_rng, 0.0, sim.row_intercept_variance);
  for (Eigen::Index j = 0; j < n; ++j) omega(j) = dist::normal(intercept_rng, 0.0, sim.column_intercept_variance);

  Eigen::MatrixXd mean = M * N.transpose();
  mean.colwise() += rho;
  mean.rowwise() += omega.transpose();
  mean.array() += sim.global_mean;
  DenseTensor truth = DenseTensor::from_matrix(mean);

  DenseTensor y = truth;
  RngStream noise_rng(sim.seed, kNoiseStream);
  for (double& v : y.data()) v += dist::normal(noise_rng, 0.0, sim.noise_sigma2);

  RngStream mask_rng(sim.seed, kMaskStream);
  const auto offsets = draw_mask(truth.dims(), sim.keep_fraction, mask_rng);
  return {std::move(truth), observe(y, offsets)};
}

HoldoutOutcome run_holdout_trial(const RatingSimConfig& sim, double user_fraction, const ChainConfig& chain,
                                 const PriorSpec& spec) {
  const SimData data = generate_ratings(sim);
  const HoldoutSplit split = holdout_split(data.obs, user_fraction, sim.seed);
  if (split.test.is_empty()) throw Error(ErrorKind::EmptyObservations, "holdout produced an empty test set");
  ChainConfig config = chain;
  config.use_intercepts = true;
  const PosteriorEstimate est = matrix::run(split.train, config, spec);
  return {holdout_se(est.y_hat, split.test), holdout_rmse(est.y_hat, split.test),
          percent_explained(est.y_hat, split.test)};
}

}  // namespace rankshrink::experiments
