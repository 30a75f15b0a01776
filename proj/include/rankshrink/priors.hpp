#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rankshrink/random.hpp"

namespace rankshrink {

enum class PriorFamily { Gaussian, Gamma, Horseshoe, HorseshoePlus, Igg };

std::string_view to_string(PriorFamily family);
/// Accepts gaussian, gamma, horseshoe, horseshoe-plus (or horseshoe_plus), igg.
std::optional<PriorFamily> parse_prior_family(std::string_view name);

struct GaussianParams {
  double v0 = 10.0;
};

struct GammaParams {
  double beta = 1.0;
  // Draw gamma_k from IG(beta / ss_k, beta^2) instead of the conjugate GIG.
  bool paper_compat = false;
};

struct HorseshoeParams {};
struct HorseshoePlusParams {};

struct IggParams {
  double a = 1.0;
  double b = 0.4;
  double c = 1.0;
};

/// Column-variance prior. Each family carries only its own hyperparameters;
/// the gamma shape is not a parameter and is always (total_rows + 1) / 2.
struct PriorSpec {
  std::variant<GaussianParams, GammaParams, HorseshoeParams, HorseshoePlusParams, IggParams> params;

  PriorFamily family() const;
  void validate() const;

  static PriorSpec gaussian(double v0 = 10.0) { return {GaussianParams{v0}}; }
  static PriorSpec gamma(double beta, bool paper_compat = false) { return {GammaParams{beta, paper_compat}}; }
  static PriorSpec horseshoe() { return {HorseshoeParams{}}; }
  static PriorSpec horseshoe_plus() { return {HorseshoePlusParams{}}; }
  static PriorSpec igg(double a = 1.0, double b = 0.4, double c = 1.0) { return {IggParams{a, b, c}}; }
};

/// gamma_cols is what the samplers read. The remaining vectors are the
/// augmentation variables of the selected family and stay empty otherwise.
/// lambda2 holds lambda_k^2 for the horseshoes and lambda_k for IGG.
struct PriorState {
  PriorFamily family = PriorFamily::Gaussian;
  std::vector<double> gamma_cols;
  std::vector<double> lambda2;
  std::vector<double> nu;
  std::vector<double> eta2;
  std::vector<double> phi;
  std::vector<double> tau_local;
  double tau2 = 1.0;
  double xi = 1.0;
  std::uint64_t floor_events = 0;

  std::size_t rank() const noexcept { return gamma_cols.size(); }
};

/// ss_k = sum over factor matrices of the squared norm of column k.
struct ColumnStats {
  std::vector<double> ss;
  std::size_t total_rows = 0;
  double sigma2 = 1.0;
};

inline constexpr double kVarianceFloor = 1e-12;
inline constexpr double kVarianceCap = 1e12;

/// Draws the latent variables from their priors (half-Cauchy factors via
/// their inverse-gamma mixtures). The gamma family needs total_rows to fix
/// its shape; with total_rows = 0 it starts at gamma_k = 1.
PriorState init_state(const PriorSpec& spec, std::size_t rank, RngStream& rng, std::size_t total_rows = 0);

/// One sweep of the family's conditional updates: local variables first,
/// then global ones, then gamma_cols is rebuilt from the product identity.
void refresh(PriorState& state, const PriorSpec& spec, const ColumnStats& stats, RngStream& rng);

/// Individual full conditionals. Exposed so each kernel can be checked
/// against its unnormalised density on its own.
namespace kernels {

double gamma_conjugate(RngStream& rng, double beta, double ss, double sigma2, std::size_t total_rows);
double gamma_paper_compat(RngStream& rng, double beta, double ss);

// scale_other is the product of the other multiplicative variance factors
// (tau^2 for horseshoe, eta_k^2 tau^2 for horseshoe+).
double local_scale(RngStream& rng, double mixing, double ss, double scale_other, double sigma2,
                   std::size_t total_rows);
double mixing(RngStream& rng, double scale);
double global_scale(RngStream& rng, double xi, double weighted_ss, double sigma2, std::size_t rank,
                    std::size_t total_rows);

double igg_tau(RngStream& rng, const IggParams& p, double lambda, double ss, double sigma2, std::size_t total_rows);
double igg_lambda(RngStream& rng, const IggParams& p, double tau, double ss, double sigma2, std::size_t total_rows);

}  // namespace kernels
}  // namespace rankshrink
