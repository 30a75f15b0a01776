#include "rankshrink/tensor_completer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rankshrink/errors.hpp"
#include "rankshrink/matrix_completer.hpp"
#include "sampler_common.hpp"

namespace rankshrink::tensor {

namespace {

void recenter(Eigen::VectorXd& v) {
  double sum = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) sum += v(k);
  v.array() -= sum / static_cast<double>(v.size());
}

// Y - Theta - every intercept - mu.
double full_residual(const ModelState& s, const ObservedTensor& obs, std::size_t pos) {
  const auto idx = obs.index(pos);
  double r = obs.value(pos) - cp_value(s, idx);
  if (s.has_intercepts())
    for (std::size_t d = 0; d < s.intercepts.size(); ++d) r -= s.intercepts[d](static_cast<Eigen::Index>(idx[d]));
  r -= s.mu;
  return r;
}

double residual_sum_of_squares(const ModelState& s, const ObservedTensor& obs) {
  double rss = 0.0;
  for (std::size_t pos = 0; pos < obs.size(); ++pos) {
    const double r = full_residual(s, obs, pos);
    rss += r * r;
  }
  return rss;
}

std::vector<const FactorMatrix*> factor_pointers(const ModelState& s) {
  std::vector<const FactorMatrix*> out;
  for (const auto& f : s.factors) out.push_back(&f);
  return out;
}

std::size_t total_rows(const ModelState& s) {
  std::size_t rows = 0;
  for (const auto& f : s.factors) rows += static_cast<std::size_t>(f.rows());
  return rows;
}

}  // namespace

double cp_value(const ModelState& s, std::span<const Index> idx) {
  const Eigen::Index rank = s.factors.front().cols();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < rank; ++k) {
    double prod = s.factors[0](static_cast<Eigen::Index>(idx[0]), k);
    for (std::size_t d = 1; d < s.factors.size(); ++d) prod *= s.factors[d](static_cast<Eigen::Index>(idx[d]), k);
    acc += prod;
  }
  return acc;
}

double intercept_sum(const ModelState& s, std::span<const Index> idx) {
  double acc = 0.0;
  for (std::size_t d = 0; d < s.intercepts.size(); ++d) acc += s.intercepts[d](static_cast<Eigen::Index>(idx[d]));
  return acc;
}

ModelState init_chain(const ObservedTensor& obs, const ChainConfig& config, const PriorSpec& spec) {
  require_coverage(obs);
  config.validate();
  spec.validate();

  const auto rank = static_cast<Eigen::Index>(config.rank);
  ModelState s;
  std::size_t rows = 0;
  for (std::size_t mode = 0; mode < obs.order(); ++mode) {
    FactorMatrix f(static_cast<Eigen::Index>(obs.dims()[mode]), rank);
    for (Eigen::Index row = 0; row < f.rows(); ++row) {
      RngStream rng = detail::level_stream(config, StreamRole::Init, 0, mode, static_cast<std::uint64_t>(row));
      for (Eigen::Index k = 0; k < rank; ++k) f(row, k) = dist::normal(rng, 0.0, matrix::kInitFactorVariance);
    }
    rows += obs.dims()[mode];
    s.factors.push_back(std::move(f));
    if (config.use_intercepts) s.intercepts.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(obs.dims()[mode])));
  }
  s.mu = config.use_intercepts ? obs.mean() : 0.0;
  s.sigma2 = std::max(obs.variance(), matrix::kSigma2Floor);
  RngStream prior_rng = detail::global_stream(config, StreamRole::Prior, 0);
  s.prior = init_state(spec, config.rank, prior_rng, rows);
  return s;
}

SliceDesign build_slice_design(const ModelState& s, const ObservedTensor& obs, std::size_t dim, Index level) {
  const auto positions = obs.slices(dim).level(level);
  if (positions.empty()) {
    std::ostringstream msg;
    msg << "dimension " << dim << " level " << level << " has no observations";
    throw Error(ErrorKind::EmptySlice, msg.str());
  }
  const std::size_t order = s.factors.size();
  const std::size_t first_other = dim == 0 ? 1 : 0;
  const Eigen::Index rank = s.factors.front().cols();
  SliceDesign out{Eigen::MatrixXd(static_cast<Eigen::Index>(positions.size()), rank),
                  Eigen::VectorXd(static_cast<Eigen::Index>(positions.size()))};
  for (std::size_t row = 0; row < positions.size(); ++row) {
    const std::size_t pos = positions[row];
    const auto idx = obs.index(pos);
    const auto r = static_cast<Eigen::Index>(row);
    out.design.row(r) = s.factors[first_other].row(static_cast<Eigen::Index>(idx[first_other]));
    for (std::size_t d = first_other + 1; d < order; ++d) {
      if (d == dim) continue;
      out.design.row(r).array() *= s.factors[d].row(static_cast<Eigen::Index>(idx[d])).array();
    }
    double y = obs.value(pos);
    if (s.has_intercepts())
      for (std::size_t d = 0; d < order; ++d) y -= s.intercepts[d](static_cast<Eigen::Index>(idx[d]));
    y -= s.mu;
    out.response(r) = y;
  }
  return out;
}

void update_factor_rows(ModelState& s, const ObservedTensor& obs, const ChainConfig& config, std::uint64_t sweep) {
  for (std::size_t mode = 0; mode < s.factors.size(); ++mode) {
    const SliceIndex& slices = obs.slices(mode);
    detail::for_each_level(slices.levels(), resolve_threads(config), [&](std::size_t level) {
      const SliceDesign slice = build_slice_design(s, obs, mode, level);
      RngStream rng = detail::level_stream(config, StreamRole::Factor, sweep, mode, level);
      s.factors[mode].row(static_cast<Eigen::Index>(level)) =
          detail::draw_factor_row(slice.design, slice.response, s.prior.gamma_cols, s.sigma2, rng).transpose();
    });
  }
}

void update_intercepts(ModelState& s, const ObservedTensor& obs, const ChainConfig& config, std::uint64_t sweep) {
  if (!s.has_intercepts()) return;
  const std::size_t order = s.factors.size();
  for (std::size_t mode = 0; mode < order; ++mode) {
    const SliceIndex& slices = obs.slices(mode);
    detail::for_each_level(slices.levels(), resolve_threads(config), [&](std::size_t level) {
      const auto positions = slices.level(level);
      double sum = 0.0;
      for (std::size_t pos : positions) {
        const auto idx = obs.index(pos);
        double r = obs.value(pos);
        r -= cp_value(s, idx);
        for (std::size_t d = 0; d < order; ++d)
          if (d != mode) r -= s.intercepts[d](static_cast<Eigen::Index>(idx[d]));
        r -= s.mu;
        sum += r;
      }
      const auto n = static_cast<double>(positions.size());
      RngStream rng = detail::level_stream(config, StreamRole::Intercept, sweep, mode, level);
      s.intercepts[mode](static_cast<Eigen::Index>(level)) = dist::normal(rng, sum / n, s.sigma2 / n);
    });
    recenter(s.intercepts[mode]);
  }

  double sum = 0.0;
  for (std::size_t pos = 0; pos < obs.size(); ++pos) {
    const auto idx = obs.index(pos);
    double r = obs.value(pos);
    r -= cp_value(s, idx);
    for (std::size_t d = 0; d < order; ++d) r -= s.intercepts[d](static_cast<Eigen::Index>(idx[d]));
    sum += r;
  }
  const auto n = static_cast<double>(obs.size());
  RngStream rng = detail::global_stream(config, StreamRole::GlobalIntercept, sweep);
  s.mu = dist::normal(rng, sum / n, s.sigma2 / n);
}

void update_sigma2(ModelState& s, const ObservedTensor& obs, const ChainConfig& config, std::uint64_t sweep) {
  const double rss = residual_sum_of_squares(s, obs);
  const auto ss = detail::column_sums_of_squares(factor_pointers(s));
  RngStream rng = detail::global_stream(config, StreamRole::NoiseVariance, sweep);
  s.sigma2 = detail::draw_sigma2(rng, config, obs.size(), rss, ss, s.prior.gamma_cols, total_rows(s));
}

void refresh_prior(ModelState& s, const PriorSpec& spec, const ChainConfig& config, std::uint64_t sweep) {
  ColumnStats stats{detail::column_sums_of_squares(factor_pointers(s)), total_rows(s), s.sigma2};
  RngStream rng = detail::global_stream(config, StreamRole::Prior, sweep);
  refresh(s.prior, spec, stats, rng);
}

void sweep(ModelState& s, const ObservedTensor& obs, const ChainConfig& config, const PriorSpec& spec,
           std::uint64_t sweep_index) {
  update_factor_rows(s, obs, config, sweep_index);
  if (s.has_intercepts()) update_intercepts(s, obs, config, sweep_index);
  update_sigma2(s, obs, config, sweep_index);
  refresh_prior(s, spec, config, sweep_index);
}

DenseTensor theta(const ModelState& s) {
  std::vector<Index> dims;
  for (const auto& f : s.factors) dims.push_back(static_cast<Index>(f.rows()));
  DenseTensor out(dims);
  std::vector<Index> idx(dims.size());
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    out.unravel(flat, idx);
    out.data()[flat] = cp_value(s, idx);
  }
  return out;
}

PosteriorEstimate run(const ObservedTensor& obs, const ChainConfig& config, const PriorSpec& spec) {
  ModelState s = init_chain(obs, config, spec);
  PosteriorEstimate est;
  est.theta_hat = DenseTensor(obs.dims());
  est.y_hat = DenseTensor(obs.dims());
  est.gamma_mean.assign(config.rank, 0.0);
  std::vector<Index> idx(obs.order());

  const std::size_t total = config.burn_in + config.thin * config.n_samples;
  for (std::size_t t = 1; t <= total; ++t) {
    sweep(s, obs, config, spec, t);
    if (t <= config.burn_in || (t - config.burn_in) % config.thin != 0) continue;
    auto theta_acc = est.theta_hat.data();
    auto y_acc = est.y_hat.data();
    for (std::size_t flat = 0; flat < theta_acc.size(); ++flat) {
      est.theta_hat.unravel(flat, idx);
      const double th = cp_value(s, idx);
      theta_acc[flat] += th;
      double y = th;
      for (std::size_t d = 0; d < s.intercepts.size(); ++d) y += s.intercepts[d](static_cast<Eigen::Index>(idx[d]));
      y_acc[flat] += y + s.mu;
    }
    est.sigma2_mean += s.sigma2;
    for (std::size_t k = 0; k < config.rank; ++k) est.gamma_mean[k] += s.prior.gamma_cols[k];
    est.trace.push_back({t, s.sigma2, std::sqrt(residual_sum_of_squares(s, obs)), s.prior.gamma_cols});
    ++est.n_samples_used;
  }
  const auto count = static_cast<double>(est.n_samples_used);
  for (double& v : est.theta_hat.data()) v /= count;
  for (double& v : est.y_hat.data()) v /= count;
  est.sigma2_mean /= count;
  for (double& g : est.gamma_mean) g /= count;
  est.floor_events = s.prior.floor_events;
  return est;
}

}  // namespace rankshrink::tensor
