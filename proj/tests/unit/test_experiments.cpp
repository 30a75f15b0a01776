#include <cmath>
#include <set>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <gtest/gtest.h>

#include "rankshrink/errors.hpp"
#include "rankshrink/experiments.hpp"

using namespace rankshrink;
using namespace rankshrink::experiments;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::IoError;
}

DenseTensor matrix(const Eigen::MatrixXd& m) { return DenseTensor::from_matrix(m); }

}  // namespace

TEST(Generate, FullyObservedKeepsEverything) {
  const auto d = generate({{7, 6}, 2, {1.0, 1.0}, 0.5, 1.0, 1});
  EXPECT_EQ(d.obs.size(), 42u);
}

TEST(Generate, NoiselessRankOneHasVanishingMinors) {
  const auto d = generate({{6, 5}, 1, {2.0}, 0.0, 1.0, 2});
  const Eigen::MatrixXd t = d.truth.to_matrix();
  for (Eigen::Index i = 0; i + 1 < t.rows(); ++i)
    for (Eigen::Index j = 0; j + 1 < t.cols(); ++j)
      EXPECT_NEAR(t(i, j) * t(i + 1, j + 1) - t(i, j + 1) * t(i + 1, j), 0.0, 1e-12 * (1.0 + t.cwiseAbs().maxCoeff()));
  for (std::size_t pos = 0; pos < d.obs.size(); ++pos) EXPECT_EQ(d.obs.value(pos), d.truth.at(d.obs.index(pos)));
}

TEST(Generate, MaskSizeAndCoverage) {
  const auto d = generate({{100, 100}, 2, {1.0, 1.0}, 0.5, 0.2, 3});
  EXPECT_NEAR(static_cast<double>(d.obs.size()), 2000.0, 1.0);
  EXPECT_TRUE(coverage_check(d.obs).empty());
  const auto sparse = generate({{50, 40}, 2, {1.0, 1.0}, 0.5, 0.05, 4});
  EXPECT_TRUE(coverage_check(sparse.obs).empty());
  EXPECT_NEAR(static_cast<double>(sparse.obs.size()), 100.0, 1.0);
  const auto tensor = generate({{20, 20, 25}, 2, {1.0, 1.0}, 0.5, 0.1, 5});
  EXPECT_TRUE(coverage_check(tensor.obs).empty());
  EXPECT_NEAR(static_cast<double>(tensor.obs.size()), 1000.0, 1.0);
}

TEST(Generate, InfeasibleMaskAndBadConfig) {
  EXPECT_EQ(kind_of([] { generate({{10, 10}, 1, {1.0}, 0.5, 0.1, 1}); }), ErrorKind::InfeasibleMask);
  EXPECT_EQ(kind_of([] { generate({{10, 10}, 10, std::vector<double>(10, 1.0), 0.5, 1.0, 1}); }),
            ErrorKind::InvalidParameter);
  EXPECT_EQ(kind_of([] { generate({{10, 10}, 2, {1.0}, 0.5, 1.0, 1}); }), ErrorKind::InvalidParameter);
  EXPECT_EQ(kind_of([] { generate({{10, 10}, 1, {1.0}, 0.5, 0.0, 1}); }), ErrorKind::InvalidParameter);
}

TEST(Generate, Deterministic) {
  const SimConfig sim{{30, 20}, 2, {1.0, 0.5}, 0.5, 0.3, 77};
  const auto a = generate(sim);
  const auto b = generate(sim);
  ASSERT_EQ(a.obs.size(), b.obs.size());
  for (std::size_t pos = 0; pos < a.obs.size(); ++pos) {
    EXPECT_EQ(a.obs.value(pos), b.obs.value(pos));
    EXPECT_TRUE(std::equal(a.obs.index(pos).begin(), a.obs.index(pos).end(), b.obs.index(pos).begin()));
  }
}

TEST(Generate, NumericalRankEqualsTrueRank) {
  for (std::size_t r : {1u, 3u, 5u}) {
    const auto d = generate({{30, 25}, r, std::vector<double>(r, 1.0), 0.0, 1.0, 8});
    const auto sv = scree(d.truth, 25);
    std::size_t rank = 0;
    for (double s : sv)
      if (s > 1e-9 * sv.front()) ++rank;
    EXPECT_EQ(rank, r);
  }
}

TEST(Metrics, StandardErrorExamples) {
  const auto a = matrix((Eigen::MatrixXd(2, 2) << 1, 2, 3, 4).finished());
  const auto b = matrix((Eigen::MatrixXd(2, 2) << 1, 2, 3, 6).finished());
  EXPECT_EQ(standard_error(a, a), 0.0);
  EXPECT_DOUBLE_EQ(standard_error(a, b), 2.0);
  EXPECT_DOUBLE_EQ(rms_error(a, b), 1.0);
  const auto c = matrix(Eigen::MatrixXd::Constant(3, 4, 0.5));
  const auto z = matrix(Eigen::MatrixXd::Zero(3, 4));
  EXPECT_DOUBLE_EQ(standard_error(c, z), std::sqrt(3.0));
  EXPECT_EQ(kind_of([&] { standard_error(a, c); }), ErrorKind::ShapeMismatch);
}

TEST(Metrics, StandardErrorAgainstQuadPrecision) {
  using Quad = boost::multiprecision::cpp_bin_float_quad;
  const auto d = generate({{40, 30}, 3, {1.0, 1.0, 1.0}, 1.0, 1.0, 9});
  DenseTensor noisy(d.truth.dims());
  for (std::size_t pos = 0; pos < d.obs.size(); ++pos) noisy.at(d.obs.index(pos)) = d.obs.value(pos);
  Quad ss = 0;
  for (std::size_t k = 0; k < noisy.size(); ++k) {
    const Quad e = Quad(noisy.data()[k]) - Quad(d.truth.data()[k]);
    ss += e * e;
  }
  const double oracle = static_cast<double>(boost::multiprecision::sqrt(ss));
  EXPECT_NEAR(standard_error(noisy, d.truth), oracle, 1e-12 * oracle);
}

TEST(Metrics, PercentExplained) {
  const auto test = ObservedTensor::build(2, {2, 2}, {{{0, 0}, 1.0}, {{0, 1}, 2.0}, {{1, 0}, 3.0}, {{1, 1}, 4.0}});
  const auto perfect = matrix((Eigen::MatrixXd(2, 2) << 1, 2, 3, 4).finished());
  EXPECT_DOUBLE_EQ(percent_explained(perfect, test), 1.0);
  const auto flat = matrix(Eigen::MatrixXd::Constant(2, 2, 2.5));
  EXPECT_DOUBLE_EQ(percent_explained(flat, test), 0.0);
  const auto worse = matrix(Eigen::MatrixXd::Constant(2, 2, 0.0));
  EXPECT_LT(percent_explained(worse, test), 0.0);
  const auto partial = ObservedTensor::build(2, {2, 2}, {{{0, 0}, 1.0}, {{1, 1}, 3.0}});
  EXPECT_DOUBLE_EQ(percent_explained(flat, partial), 1.0 - (2.25 + 0.25) / 2.0);
  EXPECT_DOUBLE_EQ(holdout_se(flat, partial), std::sqrt(2.5));
  EXPECT_DOUBLE_EQ(holdout_rmse(flat, partial), std::sqrt(1.25));

  const auto constant = ObservedTensor::build(2, {2, 2}, {{{0, 0}, 1.0}, {{1, 1}, 1.0}});
  EXPECT_EQ(kind_of([&] { percent_explained(flat, constant); }), ErrorKind::ZeroVariance);
  EXPECT_EQ(kind_of([&] { percent_explained(flat, ObservedTensor::empty({2, 2})); }), ErrorKind::EmptyObservations);
}

TEST(Metrics, ScreeExamples) {
  const auto diag = matrix((Eigen::MatrixXd(3, 3) << 1, 0, 0, 0, 5, 0, 0, 0, 3).finished());
  const auto sv = scree(diag, 3);
  ASSERT_EQ(sv.size(), 3u);
  EXPECT_NEAR(sv[0], 5.0, 1e-12);
  EXPECT_NEAR(sv[1], 3.0, 1e-12);
  EXPECT_NEAR(sv[2], 1.0, 1e-12);
  EXPECT_EQ(scree(diag, 10).size(), 3u);
  EXPECT_TRUE(scree(matrix(Eigen::MatrixXd::Zero(4, 3)), 3) == std::vector<double>(3, 0.0));

  const auto d = generate({{20, 15}, 4, {2.0, 1.0, 1.0, 0.5}, 0.5, 1.0, 10});
  DenseTensor y(d.truth.dims());
  for (std::size_t pos = 0; pos < d.obs.size(); ++pos) y.at(d.obs.index(pos)) = d.obs.value(pos);
  const auto all = scree(y, 15);
  double sum_sq = 0.0;
  for (double s : all) sum_sq += s * s;
  const double fro2 = y.to_matrix().squaredNorm();
  EXPECT_NEAR(sum_sq, fro2, 1e-10 * fro2);
  for (std::size_t k = 1; k < all.size(); ++k) EXPECT_GE(all[k - 1], all[k]);
}

TEST(Protocols, NamesRoundTrip) {
  for (Protocol p : {Protocol::MatrixRankSweep, Protocol::TensorRankSweep, Protocol::MissingnessSweep,
                     Protocol::ScreeRecovery})
    EXPECT_EQ(parse_protocol(to_string(p)), p);
  EXPECT_FALSE(parse_protocol("bogus").has_value());
}

TEST(Protocols, Definitions) {
  const auto m = protocol_definition(Protocol::MatrixRankSweep);
  ASSERT_EQ(m.points.size(), 4u);
  EXPECT_EQ(m.chain.rank, 20u);
  EXPECT_EQ(m.chain.burn_in, 500u);
  EXPECT_EQ(m.chain.thin, 5u);
  EXPECT_EQ(m.chain.n_samples, 100u);
  EXPECT_EQ(m.points[2].sim.true_rank, 8u);
  EXPECT_EQ(m.points[0].sim.dims, (std::vector<Index>{100, 100}));
  const auto t = protocol_definition(Protocol::TensorRankSweep);
  EXPECT_EQ(t.points[0].sim.dims, (std::vector<Index>{20, 20, 25}));
  const auto s = protocol_definition(Protocol::ScreeRecovery);
  EXPECT_EQ(s.scree_top_n, 15u);
  EXPECT_EQ(s.points.size(), 1u);
  EXPECT_EQ(s.points[0].sim.column_variances, (std::vector<double>{6, 6, 3, 3, 1}));
}

TEST(Protocols, RunTableShapeAndDeterminism) {
  TableOverrides o;
  o.n_trials = 2;
  o.rank = 4;
  o.burn_in = 3;
  o.thin = 1;
  o.n_samples = 2;
  o.record_timing = false;
  const std::vector<PriorFamily> priors{PriorFamily::Gaussian, PriorFamily::HorseshoePlus};
  const auto a = run_table(Protocol::MatrixRankSweep, priors, o);
  ASSERT_EQ(a.rows.size(), 8u);
  EXPECT_EQ(a.trials.size(), 16u);
  for (const auto& r : a.rows) {
    EXPECT_EQ(r.wall_time_s, 0.0);
    EXPECT_GT(r.mean_se, 0.0);
  }
  const auto b = run_table(Protocol::MatrixRankSweep, priors, o);
  for (std::size_t k = 0; k < a.rows.size(); ++k) EXPECT_EQ(a.rows[k].mean_se, b.rows[k].mean_se);

  o.sweep_values = std::vector<double>{4.0};
  o.se_scale = SeScale::Mean;
  const auto c = run_table(Protocol::MatrixRankSweep, {PriorFamily::Gaussian}, o);
  ASSERT_EQ(c.rows.size(), 1u);
  EXPECT_EQ(c.rows[0].sweep_value, 4.0);
  EXPECT_NEAR(c.rows[0].mean_se, (c.trials[0].rmse + c.trials[1].rmse) / 2.0, 1e-15);

  o.sweep_values.reset();
  const auto scree_table = run_table(Protocol::ScreeRecovery, {PriorFamily::Gaussian}, o);
  ASSERT_EQ(scree_table.scree.size(), 2u);
  EXPECT_EQ(scree_table.scree[1].method, "truth");
  EXPECT_EQ(scree_table.scree[0].mean_singular_values.size(), 15u);
}

TEST(Holdout, RatingsHaveInterceptsAndCoverage) {
  RatingSimConfig sim;
  sim.users = 60;
  sim.items = 20;
  sim.keep_fraction = 0.3;
  sim.seed = 3;
  const auto d = generate_ratings(sim);
  EXPECT_TRUE(coverage_check(d.obs).empty());
  EXPECT_NEAR(d.obs.mean(), sim.global_mean, 0.5);
}
