#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "gir.hpp"
#include "oracles.hpp"
#include "rankshrink/errors.hpp"
#include "rankshrink/experiments.hpp"
#include "rankshrink/matrix_completer.hpp"
#include "rankshrink/random.hpp"

using namespace rankshrink;

namespace {

ObservedTensor from_matrix(const Eigen::MatrixXd& y) {
  std::vector<Entry> e;
  for (Index i = 0; i < static_cast<Index>(y.rows()); ++i)
    for (Index j = 0; j < static_cast<Index>(y.cols()); ++j)
      e.push_back({{i, j}, y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
  return ObservedTensor::build(2, {static_cast<Index>(y.rows()), static_cast<Index>(y.cols())}, e);
}

ChainConfig small_config(std::size_t rank, bool intercepts = false) {
  ChainConfig c;
  c.rank = rank;
  c.burn_in = 0;
  c.thin = 1;
  c.n_samples = 1;
  c.seed = 9;
  c.use_intercepts = intercepts;
  c.threads = 1;
  return c;
}

Eigen::MatrixXd rank_one(Index m, Index n, std::uint64_t seed) {
  RngStream rng(seed, 1);
  Eigen::VectorXd u(static_cast<Eigen::Index>(m)), v(static_cast<Eigen::Index>(n));
  for (auto& x : u) x = dist::normal(rng, 0.0, 2.0);
  for (auto& x : v) x = dist::normal(rng, 0.0, 2.0);
  return u * v.transpose();
}

}  // namespace

TEST(MatrixInit, ConstantInputFloorsSigma2) {
  const auto obs = from_matrix(Eigen::MatrixXd::Constant(2, 2, 5.0));
  const auto s = matrix::init_chain(obs, small_config(2, true), PriorSpec::gaussian());
  EXPECT_EQ(s.mu, 5.0);
  EXPECT_EQ(s.sigma2, matrix::kSigma2Floor);
  EXPECT_TRUE(s.rho.isZero());
  EXPECT_TRUE(s.omega.isZero());
}

TEST(MatrixInit, UncoveredRowRejected) {
  const auto obs = ObservedTensor::build(2, {3, 2}, {{{0, 0}, 1.0}, {{1, 1}, 2.0}});
  try {
    matrix::init_chain(obs, small_config(2), PriorSpec::gaussian());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UncoveredLevels);
  }
}

TEST(MatrixInit, DeterministicAndScaled) {
  const auto obs = from_matrix(rank_one(40, 30, 2));
  const auto a = matrix::init_chain(obs, small_config(5), PriorSpec::horseshoe());
  const auto b = matrix::init_chain(obs, small_config(5), PriorSpec::horseshoe());
  EXPECT_EQ(a.M, b.M);
  EXPECT_EQ(a.N, b.N);
  EXPECT_EQ(a.prior.gamma_cols, b.prior.gamma_cols);
  const double var = (a.M.array().square().sum() + a.N.array().square().sum()) / (70.0 * 5.0);
  EXPECT_NEAR(var, matrix::kInitFactorVariance, 0.02);
}

TEST(MatrixFactorRows, FlatPriorOneRowMatchesConjugateNormal) {
  const Eigen::MatrixXd y = (Eigen::MatrixXd(1, 5) << 1.0, 2.5, -0.5, 3.0, 1.5).finished();
  const auto obs = from_matrix(y);
  auto config = small_config(1);
  auto s = matrix::init_chain(obs, config, PriorSpec::gaussian(1e12));
  s.sigma2 = 1.0;
  std::vector<double> draws;
  for (std::uint64_t t = 1; t <= 100000; ++t) {
    s.N.setOnes();
    matrix::update_factor_rows(s, obs, config, t);
    draws.push_back(s.M(0, 0));
  }
  const double n = 5.0;
  const double target = y.sum() / (n + 1e-12);
  EXPECT_NEAR(rankshrink::testing::mean(draws), target, 0.01 * target);
  EXPECT_NEAR(rankshrink::testing::variance(draws), 1.0 / n, 0.02 / n);
}

TEST(MatrixFactorRows, SingleObservationCovariance) {
  const auto obs = ObservedTensor::build(2, {1, 1}, {{{0, 0}, 0.7}});
  auto config = small_config(2);
  auto s = matrix::init_chain(obs, config, PriorSpec::gaussian());
  s.sigma2 = 0.5;
  s.prior.gamma_cols = {1.0, 0.5};
  Eigen::RowVector2d nrow(1.0, 2.0);
  std::vector<Eigen::VectorXd> draws;
  for (std::uint64_t t = 1; t <= 200000; ++t) {
    s.N.row(0) = nrow;
    matrix::update_factor_rows(s, obs, config, t);
    draws.push_back(s.M.row(0).transpose());
  }
  Eigen::Matrix2d prec = nrow.transpose() * nrow;
  prec(0, 0) += 1.0;
  prec(1, 1) += 2.0;
  const Eigen::Matrix2d cov = 0.5 * prec.inverse();
  const Eigen::Vector2d mu = prec.inverse() * nrow.transpose() * 0.7;
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  for (const auto& d : draws) m += d;
  m /= static_cast<double>(draws.size());
  Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
  for (const auto& d : draws) c += (d - m) * (d - m).transpose();
  c /= static_cast<double>(draws.size() - 1);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(m(i), mu(i), 0.01);
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(c(i, j), cov(i, j), 0.03 * cov.cwiseAbs().maxCoeff());
  }
}

TEST(MatrixFactorRows, FlooredColumnCollapses) {
  const auto obs = from_matrix(rank_one(6, 5, 3));
  auto config = small_config(2);
  auto s = matrix::init_chain(obs, config, PriorSpec::gaussian());
  s.prior.gamma_cols = {1.0, kVarianceFloor};
  s.sigma2 = 1.0;
  for (std::uint64_t t = 1; t <= 20; ++t) {
    matrix::update_factor_rows(s, obs, config, t);
    EXPECT_LT(s.M.col(1).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_LT(s.N.col(1).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(MatrixIntercepts, ZeroResidualsGiveZeroIntercepts) {
  const Eigen::MatrixXd theta = rank_one(6, 5, 4);
  const auto obs = from_matrix(theta);
  auto config = small_config(1, true);
  auto s = matrix::init_chain(obs, config, PriorSpec::gaussian());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(theta, Eigen::ComputeThinU | Eigen::ComputeThinV);
  s.M = svd.matrixU().col(0) * svd.singularValues()(0);
  s.N = svd.matrixV().col(0);
  s.mu = 0.0;
  s.sigma2 = 1e-8;
  matrix::update_intercepts(s, obs, config, 1);
  EXPECT_LT(s.rho.cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LT(s.omega.cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LT(std::abs(s.mu), 1e-3);

  const auto shifted = from_matrix((theta.array() + 2.0).matrix());
  matrix::update_intercepts(s, shifted, config, 2);
  EXPECT_NEAR(s.mu, 2.0, 1e-3);
  EXPECT_LT(s.rho.cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LT(s.omega.cwiseAbs().maxCoeff(), 1e-3);
}

TEST(MatrixIntercepts, RowOffsetRecentered) {
  const Index m = 6, n = 5;
  const double c = 3.0;
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(6, 5);
  y.row(2).array() += c;
  const auto obs = from_matrix(y);
  auto config = small_config(1, true);
  auto s = matrix::init_chain(obs, config, PriorSpec::gaussian());
  s.M.setZero();
  s.N.setZero();
  s.mu = 0.0;
  s.sigma2 = 1e-10;
  matrix::update_intercepts(s, obs, config, 1);
  EXPECT_NEAR(s.rho(2), c * (m - 1.0) / m, 1e-4);
  EXPECT_NEAR(s.rho.mean(), 0.0, 1e-10);
  EXPECT_NEAR(s.omega.mean(), 0.0, 1e-10);
  (void)n;
}

TEST(MatrixSigma2, CompatFormZeroResiduals) {
  const auto obs = from_matrix(Eigen::MatrixXd::Zero(2, 2));
  auto config = small_config(1);
  config.sigma2_paper_compat = true;
  auto s = matrix::init_chain(obs, config, PriorSpec::gaussian());
  s.M.setZero();
  s.N.setZero();
  std::vector<double> draws;
  for (std::uint64_t t = 1; t <= 200000; ++t) {
    matrix::update_sigma2(s, obs, config, t);
    draws.push_back(s.sigma2);
  }
  EXPECT_NEAR(rankshrink::testing::mean(draws), 0.5, 0.01);
}

TEST(MatrixSigma2, CompatFormTenUnitResiduals) {
  Eigen::MatrixXd y(2, 5);
  y << 1, -1, 1, -1, 1, -1, 1, -1, 1, -1;
  const auto obs = from_matrix(y);
  auto config = small_config(1);
  config.sigma2_paper_compat = true;
  config.a_sigma = 0.01;
  config.b_sigma = 0.01;
  auto s = matrix::init_chain(obs, config, PriorSpec::gaussian());
  s.M.setZero();
  s.N.setZero();
  std::vector<double> draws;
  for (std::uint64_t t = 1; t <= 20000; ++t) {
    matrix::update_sigma2(s, obs, config, t);
    draws.push_back(s.sigma2);
  }
  const double shape = 0.01 + 5.0;
  const double scale = 0.01 + 5.0;
  EXPECT_NEAR(rankshrink::testing::mean(draws), scale / (shape - 1.0), 0.02 * scale / (shape - 1.0));
}

TEST(MatrixSigma2, ExactFormIncludesFactorPrior) {
  const auto obs = from_matrix(Eigen::MatrixXd::Zero(2, 2));
  auto config = small_config(2);
  auto s = matrix::init_chain(obs, config, PriorSpec::gaussian(2.0));
  s.M.setOnes();
  s.N.setZero();
  // RSS = sum (M N^T)^2 = 0; ss = (2, 2); shape = 1 + 2 + 2*4/2 = 7; scale = 1 + 2/4 + 2/4 = 2.
  std::vector<double> draws;
  for (std::uint64_t t = 1; t <= 200000; ++t) {
    matrix::update_sigma2(s, obs, config, t);
    draws.push_back(s.sigma2);
  }
  EXPECT_NEAR(rankshrink::testing::mean(draws), 2.0 / 6.0, 0.01 * 2.0 / 6.0);
}

TEST(MatrixSweep, DeterministicAndCentered) {
  const auto obs = from_matrix((rank_one(12, 9, 5).array() + 3.0).matrix());
  auto config = small_config(3, true);
  auto a = matrix::init_chain(obs, config, PriorSpec::horseshoe_plus());
  auto b = matrix::init_chain(obs, config, PriorSpec::horseshoe_plus());
  for (std::uint64_t t = 1; t <= 30; ++t) {
    matrix::sweep(a, obs, config, PriorSpec::horseshoe_plus(), t);
    matrix::sweep(b, obs, config, PriorSpec::horseshoe_plus(), t);
    EXPECT_LE(std::abs(a.rho.mean()), 1e-10);
    EXPECT_LE(std::abs(a.omega.mean()), 1e-10);
    EXPECT_GT(a.sigma2, 0.0);
  }
  EXPECT_EQ(a.M, b.M);
  EXPECT_EQ(a.N, b.N);
  EXPECT_EQ(a.sigma2, b.sigma2);
  EXPECT_EQ(a.prior.gamma_cols, b.prior.gamma_cols);
}

TEST(MatrixRun, NoiselessRankOneRecovery) {
  const Eigen::MatrixXd theta = rank_one(15, 12, 6);
  const auto obs = from_matrix(theta);
  auto config = small_config(3);
  config.burn_in = 1000;
  config.n_samples = 50;
  const auto est = matrix::run(obs, config, PriorSpec::horseshoe());
  const Eigen::MatrixXd hat = est.theta_hat.to_matrix();
  EXPECT_LT((hat - theta).norm() / theta.norm(), 0.05);
}

TEST(MatrixRun, LargeV0FullyObservedTracksData) {
  RngStream rng(4, 4);
  Eigen::MatrixXd y = rank_one(10, 8, 7);
  for (auto& v : y.reshaped()) v += dist::normal(rng, 0.0, 0.01);
  const auto obs = from_matrix(y);
  auto config = small_config(7, false);
  config.burn_in = 300;
  config.n_samples = 50;
  const auto est = matrix::run(obs, config, PriorSpec::gaussian(1e4));
  EXPECT_LT((est.theta_hat.to_matrix() - y).cwiseAbs().maxCoeff(), 0.5);
}

TEST(MatrixRun, SingleSampleEqualsOneDraw) {
  const auto obs = from_matrix(rank_one(7, 6, 8));
  auto config = small_config(2, true);
  const auto est = matrix::run(obs, config, PriorSpec::igg());
  auto s = matrix::init_chain(obs, config, PriorSpec::igg());
  matrix::sweep(s, obs, config, PriorSpec::igg(), 1);
  EXPECT_EQ(est.n_samples_used, 1u);
  EXPECT_TRUE(est.theta_hat.to_matrix().isApprox(matrix::theta(s), 1e-14));
  EXPECT_EQ(est.sigma2_mean, s.sigma2);
}

TEST(MatrixRun, ScheduleAndDeterminism) {
  const auto obs = from_matrix(rank_one(8, 6, 9));
  auto config = small_config(3, true);
  config.burn_in = 7;
  config.thin = 3;
  config.n_samples = 4;
  const auto a = matrix::run(obs, config, PriorSpec::horseshoe());
  const auto b = matrix::run(obs, config, PriorSpec::horseshoe());
  ASSERT_EQ(a.trace.size(), 4u);
  EXPECT_EQ(a.trace[0].sweep, 10u);
  EXPECT_EQ(a.trace[3].sweep, 19u);
  EXPECT_EQ(a.n_samples_used, 4u);
  EXPECT_TRUE(std::equal(a.theta_hat.data().begin(), a.theta_hat.data().end(), b.theta_hat.data().begin()));
  EXPECT_TRUE(std::equal(a.y_hat.data().begin(), a.y_hat.data().end(), b.y_hat.data().begin()));
}

TEST(MatrixRun, ThreadCountDoesNotChangeResult) {
  experiments::SimConfig sim{{30, 25}, 2, {5.0, 5.0}, 0.5, 0.4, 11};
  const auto data = experiments::generate(sim);
  auto config = small_config(5, true);
  config.burn_in = 20;
  config.n_samples = 5;
  config.threads = 1;
  const auto a = matrix::run(data.obs, config, PriorSpec::horseshoe_plus());
  config.threads = 4;
  const auto b = matrix::run(data.obs, config, PriorSpec::horseshoe_plus());
  EXPECT_TRUE(std::equal(a.theta_hat.data().begin(), a.theta_hat.data().end(), b.theta_hat.data().begin()));
}

TEST(MatrixRun, RowPermutationEquivariance) {
  experiments::SimConfig sim{{12, 8}, 2, {5.0, 5.0}, 0.5, 0.6, 12};
  const auto data = experiments::generate(sim);
  const Index m = 12;
  std::vector<Index> perm(m);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[0], perm[5]);

  std::vector<Entry> permuted;
  for (const auto& e : data.obs.entries()) permuted.push_back({{perm[e.index[0]], e.index[1]}, e.value});
  const auto pobs = ObservedTensor::build(2, {12, 8}, permuted);

  auto config = small_config(4, true);
  config.burn_in = 40;
  config.n_samples = 10;
  const auto a = matrix::run(data.obs, config, PriorSpec::horseshoe());
  auto pconfig = config;
  pconfig.stream_labels.resize(2);
  pconfig.stream_labels[0].resize(m);
  for (Index i = 0; i < m; ++i) pconfig.stream_labels[0][perm[i]] = i;
  const auto b = matrix::run(pobs, pconfig, PriorSpec::horseshoe());

  const Eigen::MatrixXd ta = a.theta_hat.to_matrix();
  const Eigen::MatrixXd tb = b.theta_hat.to_matrix();
  for (Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < 8; ++j)
      EXPECT_NEAR(tb(static_cast<Eigen::Index>(perm[i]), j), ta(static_cast<Eigen::Index>(i), j), 1e-8);
}

TEST(MatrixGettingItRight, PriorMomentsAndMedians) {
  for (auto family : {PriorFamily::Gaussian, PriorFamily::Gamma, PriorFamily::Igg, PriorFamily::Horseshoe,
                      PriorFamily::HorseshoePlus}) {
    const auto r = rankshrink::testing::getting_it_right(rankshrink::testing::gir_spec(family), 100000, 31);
    EXPECT_TRUE(r.sigma2.within(3.0)) << to_string(family) << " " << r.sigma2.label << " " << r.sigma2.estimate
                                      << " vs " << r.sigma2.target << " se " << r.sigma2.mc_se;
    EXPECT_TRUE(r.gamma.within(3.0)) << to_string(family) << " " << r.gamma.label << " " << r.gamma.estimate
                                     << " vs " << r.gamma.target << " se " << r.gamma.mc_se;
  }
}
