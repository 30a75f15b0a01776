#include "rankshrink/random.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/bessel.hpp>

#include "rankshrink/errors.hpp"

namespace rankshrink {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

[[noreturn]] void invalid(const char* what, double a, double b) {
  std::ostringstream msg;
  msg << what << " (" << a << ", " << b << ")";
  throw Error(ErrorKind::InvalidParameter, msg.str());
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
  std::uint64_t mix = seed;
  const std::uint64_t a = splitmix64(mix);
  std::uint64_t state = a ^ (stream_id * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
  for (auto& word : s_) word = splitmix64(state);
}

RngStream::result_type RngStream::operator()() noexcept {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

std::uint64_t stream_id(StreamRole role, std::uint64_t sweep, std::uint64_t mode, std::uint64_t level) {
  std::uint64_t state = static_cast<std::uint64_t>(role);
  std::uint64_t h = splitmix64(state);
  state = h ^ sweep;
  h = splitmix64(state);
  state = h ^ mode;
  h = splitmix64(state);
  state = h ^ level;
  return splitmix64(state);
}

namespace dist {

double normal(RngStream& rng, double mean, double variance) {
  if (variance < 0.0 || std::isnan(variance)) throw Error(ErrorKind::NegativeVariance, "normal variance < 0");
  if (variance == 0.0) return mean;
  return mean + std::sqrt(variance) * rng.standard_normal();
}

double gamma(RngStream& rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate))
    invalid("gamma needs shape > 0 and rate > 0", shape, rate);
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  const double x = g(rng);
  return x > 0.0 ? x : std::numeric_limits<double>::denorm_min();
}

double inverse_gamma(RngStream& rng, double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) || !std::isfinite(scale))
    invalid("inverse gamma needs shape > 0 and scale > 0", shape, scale);
  const double x = 1.0 / gamma(rng, shape, scale);
  return std::isfinite(x) ? x : std::numeric_limits<double>::max();
}

double inverse_gaussian(RngStream& rng, double mean, double shape) {
  if (!(mean > 0.0) || !(shape > 0.0) || !std::isfinite(mean) || !std::isfinite(shape))
    invalid("inverse Gaussian needs mean > 0 and shape > 0", mean, shape);
  // Michael, Schucany & Haas: smaller root of the chi-square(1) transform,
  // written as mean / (1 + w + sqrt(w^2 + 2w)) to avoid cancellation.
  const double z = rng.standard_normal();
  const double w = mean * z * z / (2.0 * shape);
  const double x = mean / (1.0 + w + std::sqrt(w * w + 2.0 * w));
  return rng.uniform() * (mean + x) <= mean ? x : mean * mean / x;
}

namespace {

// Standardised GIG with density ~ x^(lambda-1) exp(-omega/2 (x + 1/x)),
// lambda >= 0. Hoermann & Leydold (2014), three regimes.
double gig_mode(double lambda, double omega) {
  if (lambda >= 1.0) return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
  return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

double gig_rou_noshift(RngStream& rng, double lambda, double omega) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
  const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
  for (;;) {
    const double u = um * rng.uniform();
    const double v = rng.uniform();
    const double x = u / v;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

double gig_rou_shift(RngStream& rng, double lambda, double omega) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

  // Extremes of (x - xm) sqrt(f(x)): roots of y^3 + a y^2 + b y + c = 0.
  const double a = -(2.0 * (lambda + 1.0) / omega + xm);
  const double b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
  const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;
  const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);

  for (;;) {
    const double u = uminus + rng.uniform() * (uplus - uminus);
    const double v = rng.uniform();
    const double x = u / v + xm;
    if (x > 0.0 && std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Constant hat on the log-concave part, for 0 <= lambda < 1, small omega.
double gig_small_omega(RngStream& rng, double lambda, double omega) {
  const double xm = gig_mode(lambda, omega);
  const double x0 = omega / (1.0 - lambda);
  const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
  double area[3];
  area[0] = k0 * x0;
  double k1 = 0.0;
  double k2 = 0.0;
  if (x0 >= 2.0 / omega) {
    area[1] = 0.0;
    k2 = std::pow(x0, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
  } else {
    k1 = std::exp(-omega);
    area[1] = lambda == 0.0 ? k1 * std::log(2.0 / (omega * omega))
                            : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
    k2 = std::pow(2.0 / omega, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-1.0) / omega;
  }
  const double total = area[0] + area[1] + area[2];

  for (;;) {
    double v = total * rng.uniform();
    double x = 0.0;
    double hx = 0.0;
    if (v <= area[0]) {
      x = x0 * v / area[0];
      hx = k0;
    } else if ((v -= area[0]) <= area[1]) {
      if (lambda == 0.0) {
        x = omega * std::exp(std::exp(omega) * v);
        hx = k1 / x;
      } else {
        x = std::pow(std::pow(x0, lambda) + lambda / k1 * v, 1.0 / lambda);
        hx = k1 * std::pow(x, lambda - 1.0);
      }
    } else {
      v -= area[1];
      const double lo = std::max(x0, 2.0 / omega);
      x = -2.0 / omega * std::log(std::exp(-omega / 2.0 * lo) - omega / (2.0 * k2) * v);
      hx = k2 * std::exp(-omega / 2.0 * x);
    }
    const double u = rng.uniform() * hx;
    if (std::log(u) <= (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) return x;
  }
}

}  // namespace

double gig(RngStream& rng, double a, double b, double p) {
  const bool ok = std::isfinite(a) && std::isfinite(b) && std::isfinite(p) && a >= 0.0 && b >= 0.0 &&
                  ((a > 0.0 && b == 0.0 && p > 0.0) || (a > 0.0 && b > 0.0) || (a == 0.0 && b > 0.0 && p < 0.0));
  if (!ok) {
    std::ostringstream msg;
    msg << "GIG parameters (a=" << a << ", b=" << b << ", p=" << p << ") are not admissible";
    throw Error(ErrorKind::InvalidParameter, msg.str());
  }
  if (b == 0.0) return gamma(rng, p, a / 2.0);
  if (a == 0.0) return inverse_gamma(rng, -p, b / 2.0);

  // When omega^2 / |p| is negligible the omitted exponential factor is 1 to
  // double precision over the bulk of the mass.
  const double omega2 = a * b;
  if (p != 0.0 && omega2 < 1e-14 * std::abs(p))
    return p > 0.0 ? gamma(rng, p, a / 2.0) : inverse_gamma(rng, -p, b / 2.0);

  const double omega = std::sqrt(omega2);
  const double alpha = std::sqrt(b / a);
  const double lambda = std::abs(p);
  double x = 0.0;
  if (lambda > 2.0 || omega > 3.0)
    x = gig_rou_shift(rng, lambda, omega);
  else if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2)
    x = gig_rou_noshift(rng, lambda, omega);
  else
    x = gig_small_omega(rng, lambda, omega);
  return p < 0.0 ? alpha / x : alpha * x;
}

double gig_log_density(double x, double a, double b, double p) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  if (b == 0.0) return p * std::log(a / 2.0) - std::lgamma(p) + (p - 1.0) * std::log(x) - a * x / 2.0;
  if (a == 0.0) return -p * std::log(b / 2.0) - std::lgamma(-p) + (p - 1.0) * std::log(x) - b / (2.0 * x);
  const double omega = std::sqrt(a * b);
  const double log_norm = 0.5 * p * std::log(a / b) - std::log(2.0 * boost::math::cyl_bessel_k(p, omega));
  return log_norm + (p - 1.0) * std::log(x) - (a * x + b / x) / 2.0;
}

Eigen::VectorXd mvn_precision(RngStream& rng, const Eigen::VectorXd& h, const Eigen::MatrixXd& precision) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::NotPositiveDefinite, "precision matrix factorisation failed");
  Eigen::VectorXd w = llt.matrixL().solve(h);
  for (Eigen::Index k = 0; k < w.size(); ++k) w(k) += rng.standard_normal();
  llt.matrixU().solveInPlace(w);
  return w;
}

}  // namespace dist
}  // namespace rankshrink
