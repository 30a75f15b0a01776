#include "rankshrink/priors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "rankshrink/errors.hpp"

namespace rankshrink {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Keeps v inside [kVarianceFloor, kVarianceCap]; NaN is an error.
double clamp_counted(double v, std::uint64_t& events) {
  if (std::isnan(v)) throw Error(ErrorKind::NumericalUnderflow, "column variance draw is not a number");
  if (v < kVarianceFloor) {
    ++events;
    return kVarianceFloor;
  }
  if (v > kVarianceCap) {
    ++events;
    return kVarianceCap;
  }
  return v;
}

// gamma = local * rest. If the product leaves the admissible range, clamp it
// and move the correction into the local factor so the identity stays exact.
void rebuild_gamma(double& gamma, double& local, double rest, std::uint64_t& events) {
  const double product = local * rest;
  const double clamped = clamp_counted(product, events);
  if (clamped != product) local = clamped / rest;
  gamma = local * rest;
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream msg;
    msg << name << " must be positive and finite, got " << v;
    throw Error(ErrorKind::InvalidParameter, msg.str());
  }
}

}  // namespace

std::string_view to_string(PriorFamily family) {
  switch (family) {
    case PriorFamily::Gaussian: return "gaussian";
    case PriorFamily::Gamma: return "gamma";
    case PriorFamily::Horseshoe: return "horseshoe";
    case PriorFamily::HorseshoePlus: return "horseshoe-plus";
    case PriorFamily::Igg: return "igg";
  }
  return "unknown";
}

std::optional<PriorFamily> parse_prior_family(std::string_view name) {
  if (name == "gaussian") return PriorFamily::Gaussian;
  if (name == "gamma") return PriorFamily::Gamma;
  if (name == "horseshoe") return PriorFamily::Horseshoe;
  if (name == "horseshoe-plus" || name == "horseshoe_plus") return PriorFamily::HorseshoePlus;
  if (name == "igg") return PriorFamily::Igg;
  return std::nullopt;
}

PriorFamily PriorSpec::family() const {
  return std::visit(Overloaded{[](const GaussianParams&) { return PriorFamily::Gaussian; },
                               [](const GammaParams&) { return PriorFamily::Gamma; },
                               [](const HorseshoeParams&) { return PriorFamily::Horseshoe; },
                               [](const HorseshoePlusParams&) { return PriorFamily::HorseshoePlus; },
                               [](const IggParams&) { return PriorFamily::Igg; }},
                    params);
}

void PriorSpec::validate() const {
  std::visit(Overloaded{[](const GaussianParams& p) { require_positive(p.v0, "V0"); },
                        [](const GammaParams& p) { require_positive(p.beta, "beta"); },
                        [](const HorseshoeParams&) {}, [](const HorseshoePlusParams&) {},
                        [](const IggParams& p) {
                          require_positive(p.a, "igg a");
                          require_positive(p.b, "igg b");
                          require_positive(p.c, "igg c");
                        }},
             params);
}

namespace kernels {

double gamma_conjugate(RngStream& rng, double beta, double ss, double sigma2, std::size_t total_rows) {
  const double rows = static_cast<double>(total_rows);
  const double shape = (rows + 1.0) / 2.0;
  return dist::gig(rng, 2.0 * beta, ss / sigma2, shape - rows / 2.0);
}

double gamma_paper_compat(RngStream& rng, double beta, double ss) {
  const double mean = ss > 0.0 ? std::min(beta / ss, kVarianceCap) : kVarianceCap;
  return dist::inverse_gaussian(rng, mean, beta * beta);
}

double local_scale(RngStream& rng, double mixing, double ss, double scale_other, double sigma2,
                   std::size_t total_rows) {
  const double shape = (1.0 + static_cast<double>(total_rows)) / 2.0;
  return dist::inverse_gamma(rng, shape, 1.0 / mixing + ss / (2.0 * scale_other * sigma2));
}

double mixing(RngStream& rng, double scale) { return dist::inverse_gamma(rng, 1.0, 1.0 + 1.0 / scale); }

double global_scale(RngStream& rng, double xi, double weighted_ss, double sigma2, std::size_t rank,
                    std::size_t total_rows) {
  const double shape = (1.0 + static_cast<double>(rank * total_rows)) / 2.0;
  return dist::inverse_gamma(rng, shape, 1.0 / xi + weighted_ss / (2.0 * sigma2));
}

double igg_tau(RngStream& rng, const IggParams& p, double lambda, double ss, double sigma2, std::size_t total_rows) {
  const double b = std::max(ss / (lambda * sigma2), std::numeric_limits<double>::min());
  return dist::gig(rng, 2.0 * p.c, b, p.b - static_cast<double>(total_rows) / 2.0);
}

double igg_lambda(RngStream& rng, const IggParams& p, double tau, double ss, double sigma2, std::size_t total_rows) {
  return dist::inverse_gamma(rng, p.a + static_cast<double>(total_rows) / 2.0, p.c + ss / (2.0 * tau * sigma2));
}

}  // namespace kernels

PriorState init_state(const PriorSpec& spec, std::size_t rank, RngStream& rng, std::size_t total_rows) {
  if (rank == 0) throw Error(ErrorKind::InvalidParameter, "rank K must be at least 1");
  spec.validate();
  PriorState s;
  s.family = spec.family();
  s.gamma_cols.assign(rank, 1.0);

  std::visit(
      Overloaded{
          [&](const GaussianParams& p) { s.gamma_cols.assign(rank, p.v0); },
          [&](const GammaParams& p) {
            if (total_rows == 0) return;
            const double shape = (static_cast<double>(total_rows) + 1.0) / 2.0;
            for (auto& g : s.gamma_cols) g = clamp_counted(dist::gamma(rng, shape, p.beta), s.floor_events);
          },
          [&](const HorseshoeParams&) {
            s.lambda2.resize(rank);
            s.nu.resize(rank);
            for (std::size_t k = 0; k < rank; ++k) {
              s.nu[k] = dist::inverse_gamma(rng, 0.5, 1.0);
              s.lambda2[k] = clamp_counted(dist::inverse_gamma(rng, 0.5, 1.0 / s.nu[k]), s.floor_events);
            }
            s.xi = dist::inverse_gamma(rng, 0.5, 1.0);
            s.tau2 = clamp_counted(dist::inverse_gamma(rng, 0.5, 1.0 / s.xi), s.floor_events);
            for (std::size_t k = 0; k < rank; ++k) rebuild_gamma(s.gamma_cols[k], s.lambda2[k], s.tau2, s.floor_events);
          },
          [&](const HorseshoePlusParams&) {
            s.lambda2.resize(rank);
            s.nu.resize(rank);
            s.eta2.resize(rank);
            s.phi.resize(rank);
            for (std::size_t k = 0; k < rank; ++k) {
              s.nu[k] = dist::inverse_gamma(rng, 0.5, 1.0);
              s.lambda2[k] = clamp_counted(dist::inverse_gamma(rng, 0.5, 1.0 / s.nu[k]), s.floor_events);
              s.phi[k] = dist::inverse_gamma(rng, 0.5, 1.0);
              s.eta2[k] = clamp_counted(dist::inverse_gamma(rng, 0.5, 1.0 / s.phi[k]), s.floor_events);
            }
            s.xi = dist::inverse_gamma(rng, 0.5, 1.0);
            s.tau2 = clamp_counted(dist::inverse_gamma(rng, 0.5, 1.0 / s.xi), s.floor_events);
            for (std::size_t k = 0; k < rank; ++k)
              rebuild_gamma(s.gamma_cols[k], s.lambda2[k], s.eta2[k] * s.tau2, s.floor_events);
          },
          [&](const IggParams& p) {
            s.lambda2.resize(rank);
            s.tau_local.resize(rank);
            for (std::size_t k = 0; k < rank; ++k) {
              s.lambda2[k] = clamp_counted(dist::inverse_gamma(rng, p.a, p.c), s.floor_events);
              s.tau_local[k] = clamp_counted(dist::gamma(rng, p.b, p.c), s.floor_events);
              rebuild_gamma(s.gamma_cols[k], s.lambda2[k], s.tau_local[k], s.floor_events);
            }
          }},
      spec.params);
  return s;
}

void refresh(PriorState& s, const PriorSpec& spec, const ColumnStats& stats, RngStream& rng) {
  const std::size_t rank = s.rank();
  if (stats.ss.size() != rank) throw Error(ErrorKind::ShapeMismatch, "column statistics length differs from K");
  if (spec.family() != s.family) throw Error(ErrorKind::InvalidParameter, "prior state family differs from spec");
  if (stats.total_rows == 0) throw Error(ErrorKind::InvalidParameter, "total_rows must be positive");
  const double sigma2 = stats.sigma2;
  const std::size_t rows = stats.total_rows;

  std::visit(
      Overloaded{
          [&](const GaussianParams&) {},
          [&](const GammaParams& p) {
            for (std::size_t k = 0; k < rank; ++k) {
              const double g = p.paper_compat ? kernels::gamma_paper_compat(rng, p.beta, stats.ss[k])
                                              : kernels::gamma_conjugate(rng, p.beta, stats.ss[k], sigma2, rows);
              s.gamma_cols[k] = clamp_counted(g, s.floor_events);
            }
          },
          [&](const HorseshoeParams&) {
            for (std::size_t k = 0; k < rank; ++k) {
              s.lambda2[k] = clamp_counted(kernels::local_scale(rng, s.nu[k], stats.ss[k], s.tau2, sigma2, rows),
                                           s.floor_events);
              s.nu[k] = kernels::mixing(rng, s.lambda2[k]);
            }
            double weighted = 0.0;
            for (std::size_t k = 0; k < rank; ++k) weighted += stats.ss[k] / s.lambda2[k];
            s.tau2 = clamp_counted(kernels::global_scale(rng, s.xi, weighted, sigma2, rank, rows), s.floor_events);
            s.xi = kernels::mixing(rng, s.tau2);
            for (std::size_t k = 0; k < rank; ++k) rebuild_gamma(s.gamma_cols[k], s.lambda2[k], s.tau2, s.floor_events);
          },
          [&](const HorseshoePlusParams&) {
            for (std::size_t k = 0; k < rank; ++k) {
              s.lambda2[k] = clamp_counted(
                  kernels::local_scale(rng, s.nu[k], stats.ss[k], s.eta2[k] * s.tau2, sigma2, rows), s.floor_events);
              s.nu[k] = kernels::mixing(rng, s.lambda2[k]);
              s.eta2[k] = clamp_counted(
                  kernels::local_scale(rng, s.phi[k], stats.ss[k], s.lambda2[k] * s.tau2, sigma2, rows),
                  s.floor_events);
              s.phi[k] = kernels::mixing(rng, s.eta2[k]);
            }
            double weighted = 0.0;
            for (std::size_t k = 0; k < rank; ++k) weighted += stats.ss[k] / (s.lambda2[k] * s.eta2[k]);
            s.tau2 = clamp_counted(kernels::global_scale(rng, s.xi, weighted, sigma2, rank, rows), s.floor_events);
            s.xi = kernels::mixing(rng, s.tau2);
            for (std::size_t k = 0; k < rank; ++k)
              rebuild_gamma(s.gamma_cols[k], s.lambda2[k], s.eta2[k] * s.tau2, s.floor_events);
          },
          [&](const IggParams& p) {
            for (std::size_t k = 0; k < rank; ++k) {
              s.tau_local[k] =
                  clamp_counted(kernels::igg_tau(rng, p, s.lambda2[k], stats.ss[k], sigma2, rows), s.floor_events);
              s.lambda2[k] =
                  clamp_counted(kernels::igg_lambda(rng, p, s.tau_local[k], stats.ss[k], sigma2, rows), s.floor_events);
              rebuild_gamma(s.gamma_cols[k], s.lambda2[k], s.tau_local[k], s.floor_events);
            }
          }},
      spec.params);
}

}  // namespace rankshrink
