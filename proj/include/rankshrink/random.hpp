#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace rankshrink {

/// xoshiro256** seeded through SplitMix64 from a (seed, stream id) pair.
/// Cheap to construct, so samplers open one stream per factor row per
/// sweep; identical pairs give identical sequences on every platform.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }
  double standard_normal() { return normal_(*this); }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

 private:
  std::array<std::uint64_t, 4> s_{};
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::normal_distribution<double> normal_;
};

/// Stream roles used by the samplers. Matrix and tensor samplers share this
/// convention, so a D=2 tensor chain consumes exactly the matrix chain's
/// random numbers.
enum class StreamRole : std::uint64_t {
  Init = 1,
  Factor = 2,
  Intercept = 3,
  GlobalIntercept = 4,
  NoiseVariance = 5,
  Prior = 6,
  Data = 7,
};

std::uint64_t stream_id(StreamRole role, std::uint64_t sweep, std::uint64_t mode, std::uint64_t level);

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

namespace dist {

/// Normal parametrised by mean and variance.
double normal(RngStream& rng, double mean, double variance);

/// Gamma parametrised by shape and rate.
double gamma(RngStream& rng, double shape, double rate);

/// Inverse gamma parametrised by shape and scale: 1 / gamma(shape, rate = scale).
double inverse_gamma(RngStream& rng, double shape, double scale);

/// Inverse Gaussian parametrised by mean and shape.
double inverse_gaussian(RngStream& rng, double mean, double shape);

/// Generalized inverse Gaussian with density proportional to
/// x^(p-1) exp(-(a x + b / x) / 2). Admissible: (a>0, b>=0, p>0),
/// (a>0, b>0) or (a>=0, b>0, p<0).
double gig(RngStream& rng, double a, double b, double p);

/// Normalised GIG log density; the normalising constant uses the modified
/// Bessel function of the second kind (gamma / inverse-gamma limits when a
/// or b is zero).
double gig_log_density(double x, double a, double b, double p);

/// Draw from N(P^-1 h, P^-1) with P symmetric positive definite. One
/// Cholesky factorisation, then x = L^-T (L^-1 h + z).
Eigen::VectorXd mvn_precision(RngStream& rng, const Eigen::VectorXd& h, const Eigen::MatrixXd& precision);

}  // namespace dist
}  // namespace rankshrink
