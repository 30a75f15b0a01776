#include "rankshrink/matrix_completer.hpp"

#include <algorithm>
#include <cmath>

#include "rankshrink/errors.hpp"
#include "sampler_common.hpp"

namespace rankshrink::matrix {

namespace {

double theta_entry(const ModelState& s, Index i, Index j) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < s.M.cols(); ++k) acc += s.M(static_cast<Eigen::Index>(i), k) * s.N(static_cast<Eigen::Index>(j), k);
  return acc;
}

void recenter(Eigen::VectorXd& v) {
  double sum = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) sum += v(k);
  v.array() -= sum / static_cast<double>(v.size());
}

double residual_sum_of_squares(const ModelState& s, const ObservedTensor& obs) {
  double rss = 0.0;
  for (std::size_t pos = 0; pos < obs.size(); ++pos) {
    const double r = residual(s, obs, pos, true);
    rss += r * r;
  }
  return rss;
}

// Draws every row of `target` given `other`; `mode` selects which index of an
// observation addresses the target row.
void update_rows(FactorMatrix& target, const FactorMatrix& other, const ModelState& s, const ObservedTensor& obs,
                 const ChainConfig& config, std::uint64_t sweep, std::size_t mode) {
  const SliceIndex& slices = obs.slices(mode);
  const std::size_t other_mode = 1 - mode;
  const Eigen::Index rank = target.cols();
  detail::for_each_level(slices.levels(), resolve_threads(config), [&](std::size_t level) {
    const auto positions = slices.level(level);
    Eigen::MatrixXd design(static_cast<Eigen::Index>(positions.size()), rank);
    Eigen::VectorXd response(static_cast<Eigen::Index>(positions.size()));
    for (std::size_t row = 0; row < positions.size(); ++row) {
      const std::size_t pos = positions[row];
      const auto r = static_cast<Eigen::Index>(row);
      design.row(r) = other.row(static_cast<Eigen::Index>(obs.index(pos)[other_mode]));
      response(r) = residual(s, obs, pos, false);
    }
    RngStream rng = detail::level_stream(config, StreamRole::Factor, sweep, mode, level);
    target.row(static_cast<Eigen::Index>(level)) =
        detail::draw_factor_row(design, response, s.prior.gamma_cols, s.sigma2, rng).transpose();
  });
}

}  // namespace

ModelState init_chain(const ObservedTensor& obs, const ChainConfig& config, const PriorSpec& spec) {
  if (obs.order() != 2) throw Error(ErrorKind::InvalidParameter, "matrix sampler needs an order-2 store");
  require_coverage(obs);
  config.validate();
  spec.validate();

  const auto rank = static_cast<Eigen::Index>(config.rank);
  ModelState s;
  s.M.resize(static_cast<Eigen::Index>(obs.dims()[0]), rank);
  s.N.resize(static_cast<Eigen::Index>(obs.dims()[1]), rank);
  FactorMatrix* factors[2] = {&s.M, &s.N};
  for (std::size_t mode = 0; mode < 2; ++mode) {
    FactorMatrix& f = *factors[mode];
    for (Eigen::Index row = 0; row < f.rows(); ++row) {
      RngStream rng = detail::level_stream(config, StreamRole::Init, 0, mode, static_cast<std::uint64_t>(row));
      for (Eigen::Index k = 0; k < rank; ++k) f(row, k) = dist::normal(rng, 0.0, kInitFactorVariance);
    }
  }
  s.rho = Eigen::VectorXd::Zero(s.M.rows());
  s.omega = Eigen::VectorXd::Zero(s.N.rows());
  s.mu = config.use_intercepts ? obs.mean() : 0.0;
  s.sigma2 = std::max(obs.variance(), kSigma2Floor);
  RngStream prior_rng = detail::global_stream(config, StreamRole::Prior, 0);
  s.prior = init_state(spec, config.rank, prior_rng, obs.dims()[0] + obs.dims()[1]);
  return s;
}

double residual(const ModelState& s, const ObservedTensor& obs, std::size_t pos, bool include_theta) {
  const auto idx = obs.index(pos);
  double r = obs.value(pos);
  if (include_theta) r -= theta_entry(s, idx[0], idx[1]);
  r -= s.rho(static_cast<Eigen::Index>(idx[0]));
  r -= s.omega(static_cast<Eigen::Index>(idx[1]));
  r -= s.mu;
  return r;
}

void update_factor_rows(ModelState& s, const ObservedTensor& obs, const ChainConfig& config, std::uint64_t sweep) {
  update_rows(s.M, s.N, s, obs, config, sweep, 0);
  update_rows(s.N, s.M, s, obs, config, sweep, 1);
}

void update_intercepts(ModelState& s, const ObservedTensor& obs, const ChainConfig& config, std::uint64_t sweep) {
  Eigen::VectorXd* vectors[2] = {&s.rho, &s.omega};
  for (std::size_t mode = 0; mode < 2; ++mode) {
    const SliceIndex& slices = obs.slices(mode);
    Eigen::VectorXd& target = *vectors[mode];
    const Eigen::VectorXd& other = *vectors[1 - mode];
    detail::for_each_level(slices.levels(), resolve_threads(config), [&](std::size_t level) {
      const auto positions = slices.level(level);
      double sum = 0.0;
      for (std::size_t pos : positions) {
        const auto idx = obs.index(pos);
        double r = obs.value(pos);
        r -= theta_entry(s, idx[0], idx[1]);
        r -= other(static_cast<Eigen::Index>(idx[1 - mode]));
        r -= s.mu;
        sum += r;
      }
      const auto n = static_cast<double>(positions.size());
      RngStream rng = detail::level_stream(config, StreamRole::Intercept, sweep, mode, level);
      target(static_cast<Eigen::Index>(level)) = dist::normal(rng, sum / n, s.sigma2 / n);
    });
    recenter(target);
  }

  double sum = 0.0;
  for (std::size_t pos = 0; pos < obs.size(); ++pos) {
    const auto idx = obs.index(pos);
    double r = obs.value(pos);
    r -= theta_entry(s, idx[0], idx[1]);
    r -= s.rho(static_cast<Eigen::Index>(idx[0]));
    r -= s.omega(static_cast<Eigen::Index>(idx[1]));
    sum += r;
  }
  const auto n = static_cast<double>(obs.size());
  RngStream rng = detail::global_stream(config, StreamRole::GlobalIntercept, sweep);
  s.mu = dist::normal(rng, sum / n, s.sigma2 / n);
}

void update_sigma2(ModelState& s, const ObservedTensor& obs, const ChainConfig& config, std::uint64_t sweep) {
  const double rss = residual_sum_of_squares(s, obs);
  const auto ss = detail::column_sums_of_squares({&s.M, &s.N});
  RngStream rng = detail::global_stream(config, StreamRole::NoiseVariance, sweep);
  s.sigma2 = detail::draw_sigma2(rng, config, obs.size(), rss, ss, s.prior.gamma_cols,
                                 static_cast<std::size_t>(s.M.rows() + s.N.rows()));
}

void refresh_prior(ModelState& s, const PriorSpec& spec, const ChainConfig& config, std::uint64_t sweep) {
  ColumnStats stats{detail::column_sums_of_squares({&s.M, &s.N}), static_cast<std::size_t>(s.M.rows() + s.N.rows()),
                    s.sigma2};
  RngStream rng = detail::global_stream(config, StreamRole::Prior, sweep);
  refresh(s.prior, spec, stats, rng);
}

void sweep(ModelState& s, const ObservedTensor& obs, const ChainConfig& config, const PriorSpec& spec,
           std::uint64_t sweep_index) {
  update_factor_rows(s, obs, config, sweep_index);
  if (config.use_intercepts) update_intercepts(s, obs, config, sweep_index);
  update_sigma2(s, obs, config, sweep_index);
  refresh_prior(s, spec, config, sweep_index);
}

Eigen::MatrixXd theta(const ModelState& s) { return s.M * s.N.transpose(); }

PosteriorEstimate run(const ObservedTensor& obs, const ChainConfig& config, const PriorSpec& spec) {
  ModelState s = init_chain(obs, config, spec);
  const Eigen::Index m = s.M.rows();
  const Eigen::Index n = s.N.rows();
  Eigen::MatrixXd theta_sum = Eigen::MatrixXd::Zero(m, n);
  Eigen::MatrixXd y_sum = Eigen::MatrixXd::Zero(m, n);
  PosteriorEstimate est;
  est.gamma_mean.assign(config.rank, 0.0);

  const std::size_t total = config.burn_in + config.thin * config.n_samples;
  for (std::size_t t = 1; t <= total; ++t) {
    sweep(s, obs, config, spec, t);
    if (t <= config.burn_in || (t - config.burn_in) % config.thin != 0) continue;
    const Eigen::MatrixXd th = theta(s);
    theta_sum += th;
    Eigen::MatrixXd y = th;
    y.colwise() += s.rho;
    y.rowwise() += s.omega.transpose();
    y.array() += s.mu;
    y_sum += y;
    est.sigma2_mean += s.sigma2;
    for (std::size_t k = 0; k < config.rank; ++k) est.gamma_mean[k] += s.prior.gamma_cols[k];
    est.trace.push_back({t, s.sigma2, std::sqrt(residual_sum_of_squares(s, obs)), s.prior.gamma_cols});
    ++est.n_samples_used;
  }
  const auto count = static_cast<double>(est.n_samples_used);
  est.theta_hat = DenseTensor::from_matrix(theta_sum / count);
  est.y_hat = DenseTensor::from_matrix(y_sum / count);
  est.sigma2_mean /= count;
  for (double& g : est.gamma_mean) g /= count;
  est.floor_events = s.prior.floor_events;
  return est;
}

}  // namespace rankshrink::matrix
