#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rankshrink/errors.hpp"
#include "rankshrink/experiments.hpp"
#include "rankshrink/matrix_completer.hpp"
#include "rankshrink/random.hpp"
#include "rankshrink/tensor_completer.hpp"

using namespace rankshrink;

namespace {

ChainConfig small_config(std::size_t rank, bool intercepts) {
  ChainConfig c;
  c.rank = rank;
  c.burn_in = 0;
  c.thin = 1;
  c.n_samples = 1;
  c.seed = 21;
  c.use_intercepts = intercepts;
  c.threads = 1;
  return c;
}

ObservedTensor full_tensor(const DenseTensor& t) {
  std::vector<Entry> e;
  std::vector<Index> idx(t.order());
  for (std::size_t flat = 0; flat < t.size(); ++flat) {
    t.unravel(flat, idx);
    e.push_back({idx, t.data()[flat]});
  }
  return ObservedTensor::build(t.order(), t.dims(), e);
}

DenseTensor rank_one_tensor(std::vector<Index> dims, std::uint64_t seed) {
  RngStream rng(seed, 3);
  std::vector<std::vector<double>> f;
  for (Index m : dims) {
    std::vector<double> v(m);
    for (double& x : v) x = 1.0 + std::abs(dist::normal(rng, 0.0, 1.0));
    f.push_back(v);
  }
  DenseTensor t(dims);
  std::vector<Index> idx(dims.size());
  for (std::size_t flat = 0; flat < t.size(); ++flat) {
    t.unravel(flat, idx);
    double p = 1.0;
    for (std::size_t d = 0; d < dims.size(); ++d) p *= f[d][idx[d]];
    t.data()[flat] = p;
  }
  return t;
}

}  // namespace

TEST(TensorDesign, OrderTwoMatchesMatrixDesign) {
  experiments::SimConfig sim{{6, 5}, 2, {3.0, 3.0}, 0.5, 0.7, 2};
  const auto data = experiments::generate(sim);
  auto s = tensor::init_chain(data.obs, small_config(3, false), PriorSpec::gaussian());
  for (Index i = 0; i < 6; ++i) {
    const auto d = tensor::build_slice_design(s, data.obs, 0, i);
    const auto pos = data.obs.slices(0).level(i);
    for (std::size_t r = 0; r < pos.size(); ++r) {
      const Index j = data.obs.index(pos[r])[1];
      EXPECT_EQ(d.design.row(static_cast<Eigen::Index>(r)), Eigen::RowVectorXd(s.factors[1].row(static_cast<Eigen::Index>(j))));
      EXPECT_EQ(d.response(static_cast<Eigen::Index>(r)), data.obs.value(pos[r]));
    }
  }
}

TEST(TensorDesign, HadamardRowsByHand) {
  DenseTensor t({2, 2, 2}, 1.0);
  const auto obs = full_tensor(t);
  auto s = tensor::init_chain(obs, small_config(2, false), PriorSpec::gaussian());
  for (auto& f : s.factors) f.setOnes();
  const auto ones = tensor::build_slice_design(s, obs, 1, 0);
  EXPECT_TRUE(ones.design.isOnes());

  s.factors[0] << 1, 2, 3, 4;
  s.factors[1] << 5, 6, 7, 8;
  s.factors[2] << 9, 10, 11, 12;
  const auto d = tensor::build_slice_design(s, obs, 1, 1);
  const auto pos = obs.slices(1).level(1);
  ASSERT_EQ(pos.size(), 4u);
  for (std::size_t r = 0; r < 4; ++r) {
    const auto idx = obs.index(pos[r]);
    const Eigen::Index i = static_cast<Eigen::Index>(idx[0]);
    const Eigen::Index l = static_cast<Eigen::Index>(idx[2]);
    for (Eigen::Index k = 0; k < 2; ++k)
      EXPECT_EQ(d.design(static_cast<Eigen::Index>(r), k), s.factors[0](i, k) * s.factors[2](l, k));
  }
  // Row (i=1, l=0): (3*9, 4*10).
  bool found = false;
  for (std::size_t r = 0; r < 4; ++r) {
    const auto idx = obs.index(pos[r]);
    if (idx[0] == 1 && idx[2] == 0) {
      found = true;
      EXPECT_EQ(d.design(static_cast<Eigen::Index>(r), 0), 27.0);
      EXPECT_EQ(d.design(static_cast<Eigen::Index>(r), 1), 40.0);
    }
  }
  EXPECT_TRUE(found);
}

TEST(TensorDesign, EmptySliceRejected) {
  const auto obs = ObservedTensor::build(3, {2, 2, 3}, {{{0, 0, 0}, 1.0}, {{1, 1, 1}, 1.0}});
  tensor::ModelState s;
  for (Index m : {2, 2, 3}) s.factors.push_back(FactorMatrix::Ones(static_cast<Eigen::Index>(m), 1));
  try {
    tensor::build_slice_design(s, obs, 2, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptySlice);
  }
}

class OrderTwoIdentity : public ::testing::TestWithParam<bool> {};

TEST_P(OrderTwoIdentity, BitIdenticalToMatrixSampler) {
  const bool intercepts = GetParam();
  experiments::SimConfig sim{{6, 5}, 2, {3.0, 2.0}, 0.3, 0.8, 5};
  const auto data = experiments::generate(sim);
  const auto config = small_config(3, intercepts);
  for (const auto& spec : {PriorSpec::gaussian(), PriorSpec::gamma(4.0), PriorSpec::horseshoe(),
                           PriorSpec::horseshoe_plus(), PriorSpec::igg()}) {
    auto m = matrix::init_chain(data.obs, config, spec);
    auto t = tensor::init_chain(data.obs, config, spec);
    for (std::uint64_t sweep = 1; sweep <= 50; ++sweep) {
      matrix::sweep(m, data.obs, config, spec, sweep);
      tensor::sweep(t, data.obs, config, spec, sweep);
    }
    const auto name = to_string(spec.family());
    EXPECT_TRUE(m.M == t.factors[0]) << name;
    EXPECT_TRUE(m.N == t.factors[1]) << name;
    EXPECT_EQ(m.sigma2, t.sigma2) << name;
    EXPECT_EQ(m.prior.gamma_cols, t.prior.gamma_cols) << name;
    EXPECT_EQ(m.mu, t.mu) << name;
    if (intercepts) {
      EXPECT_TRUE(m.rho == t.intercepts[0]) << name;
      EXPECT_TRUE(m.omega == t.intercepts[1]) << name;
    }
    const auto em = matrix::run(data.obs, config, spec);
    const auto et = tensor::run(data.obs, config, spec);
    EXPECT_TRUE(std::equal(em.theta_hat.data().begin(), em.theta_hat.data().end(), et.theta_hat.data().begin())) << name;
    EXPECT_TRUE(std::equal(em.y_hat.data().begin(), em.y_hat.data().end(), et.y_hat.data().begin())) << name;
  }
}

INSTANTIATE_TEST_SUITE_P(Intercepts, OrderTwoIdentity, ::testing::Bool());

TEST(TensorRun, RankOneNoiselessRecovery) {
  const auto truth = rank_one_tensor({3, 3, 3}, 7);
  const auto obs = full_tensor(truth);
  auto config = small_config(2, false);
  config.burn_in = 1500;
  config.n_samples = 100;
  const auto est = tensor::run(obs, config, PriorSpec::horseshoe());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    num += std::pow(est.theta_hat.data()[i] - truth.data()[i], 2);
    den += truth.data()[i] * truth.data()[i];
  }
  EXPECT_LT(std::sqrt(num / den), 0.01);
}

TEST(TensorFactorRows, FlooredColumnCollapses) {
  const auto obs = full_tensor(rank_one_tensor({3, 4, 2}, 8));
  auto config = small_config(2, false);
  auto s = tensor::init_chain(obs, config, PriorSpec::gaussian());
  s.prior.gamma_cols = {1.0, kVarianceFloor};
  s.sigma2 = 1.0;
  tensor::update_factor_rows(s, obs, config, 1);
  for (const auto& f : s.factors) EXPECT_LT(f.col(1).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(TensorSigma2, CompatFormZeroResiduals) {
  const auto obs = full_tensor(DenseTensor({2, 2, 2}, 0.0));
  auto config = small_config(1, false);
  config.sigma2_paper_compat = true;
  auto s = tensor::init_chain(obs, config, PriorSpec::gaussian());
  for (auto& f : s.factors) f.setZero();
  std::vector<double> draws;
  for (std::uint64_t t = 1; t <= 200000; ++t) {
    tensor::update_sigma2(s, obs, config, t);
    draws.push_back(s.sigma2);
  }
  EXPECT_NEAR(rankshrink::testing::mean(draws), 0.25, 0.01 * 0.25);
}

TEST(TensorState, CpValueMatchesMaterialisedTheta) {
  experiments::SimConfig sim{{4, 5, 3}, 2, {1.0, 1.0}, 0.1, 0.9, 3};
  const auto data = experiments::generate(sim);
  auto config = small_config(3, true);
  auto s = tensor::init_chain(data.obs, config, PriorSpec::igg());
  for (std::uint64_t t = 1; t <= 10; ++t) tensor::sweep(s, data.obs, config, PriorSpec::igg(), t);
  const auto th = tensor::theta(s);
  std::vector<Index> idx(3);
  for (std::size_t flat = 0; flat < th.size(); ++flat) {
    th.unravel(flat, idx);
    double direct = 0.0;
    for (Eigen::Index k = 0; k < 3; ++k)
      direct += s.factors[0](static_cast<Eigen::Index>(idx[0]), k) * s.factors[1](static_cast<Eigen::Index>(idx[1]), k) *
                s.factors[2](static_cast<Eigen::Index>(idx[2]), k);
    EXPECT_NEAR(th.data()[flat], direct, 1e-12 * (1.0 + std::abs(direct)));
  }
  for (const auto& b : s.intercepts) EXPECT_LE(std::abs(b.mean()), 1e-10);
}

TEST(TensorRun, ModePermutationEquivariance) {
  experiments::SimConfig sim{{4, 5, 3}, 2, {2.0, 2.0}, 0.2, 0.8, 4};
  const auto data = experiments::generate(sim);
  // Reverse the levels of mode 1 and replay the same streams.
  std::vector<Entry> permuted;
  for (const auto& e : data.obs.entries()) permuted.push_back({{e.index[0], 4 - e.index[1], e.index[2]}, e.value});
  const auto pobs = ObservedTensor::build(3, {4, 5, 3}, permuted);

  auto config = small_config(3, false);
  config.burn_in = 30;
  config.n_samples = 10;
  const auto a = tensor::run(data.obs, config, PriorSpec::horseshoe_plus());
  auto pconfig = config;
  pconfig.stream_labels.resize(3);
  pconfig.stream_labels[1] = {4, 3, 2, 1, 0};
  const auto b = tensor::run(pobs, pconfig, PriorSpec::horseshoe_plus());
  std::vector<Index> idx(3);
  for (std::size_t flat = 0; flat < a.theta_hat.size(); ++flat) {
    a.theta_hat.unravel(flat, idx);
    const double va = a.theta_hat.data()[flat];
    idx[1] = 4 - idx[1];
    EXPECT_NEAR(b.theta_hat.at(idx), va, 1e-8 * (1.0 + std::abs(va)));
  }
}

TEST(TensorRun, ThreadCountDoesNotChangeResult) {
  experiments::SimConfig sim{{8, 7, 6}, 2, {2.0, 2.0}, 0.2, 0.5, 6};
  const auto data = experiments::generate(sim);
  auto config = small_config(4, true);
  config.burn_in = 10;
  config.n_samples = 5;
  const auto a = tensor::run(data.obs, config, PriorSpec::horseshoe());
  config.threads = 3;
  const auto b = tensor::run(data.obs, config, PriorSpec::horseshoe());
  EXPECT_TRUE(std::equal(a.y_hat.data().begin(), a.y_hat.data().end(), b.y_hat.data().begin()));
}
