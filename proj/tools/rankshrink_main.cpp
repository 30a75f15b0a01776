#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rankshrink/chain.hpp"
#include "rankshrink/errors.hpp"
#include "rankshrink/experiments.hpp"
#include "rankshrink/image_completion.hpp"
#include "rankshrink/io.hpp"
#include "rankshrink/matrix_completer.hpp"
#include "rankshrink/priors.hpp"
#include "rankshrink/sparse_store.hpp"
#include "rankshrink/tensor_completer.hpp"

#ifndef RANKSHRINK_VERSION
#define RANKSHRINK_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace rankshrink;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr const char* kPriorNames = "gaussian, gamma, horseshoe, horseshoe-plus, igg";

struct SamplerArgs {
  std::string prior = "horseshoe-plus";
  std::size_t k = 20;
  std::size_t burnin = 500;
  std::size_t thin = 5;
  std::size_t samples = 100;
  std::uint64_t seed = 0;
  double a_sigma = 1.0;
  double b_sigma = 1.0;
  double v0 = 10.0;
  std::optional<double> beta;
  double igg_a = 1.0;
  double igg_b = 0.4;
  double igg_c = 1.0;
  bool gamma_compat = false;
  bool sigma2_compat = false;
  bool no_timing = false;
};

void add_sampler_options(CLI::App* cmd, SamplerArgs& a) {
  cmd->add_option("--prior", a.prior, std::string("Column-variance prior: ") + kPriorNames)->capture_default_str();
  cmd->add_option("--k", a.k, "Factorization rank K")->capture_default_str();
  cmd->add_option("--burnin", a.burnin, "Burn-in sweeps")->capture_default_str();
  cmd->add_option("--thin", a.thin, "Thinning interval")->capture_default_str();
  cmd->add_option("--samples", a.samples, "Retained samples")->capture_default_str();
  cmd->add_option("--seed", a.seed, "Random seed")->capture_default_str();
  cmd->add_option("--a-sigma", a.a_sigma, "Noise variance prior shape")->capture_default_str();
  cmd->add_option("--b-sigma", a.b_sigma, "Noise variance prior scale")->capture_default_str();
  cmd->add_option("--v0", a.v0, "Gaussian prior column variance")->capture_default_str();
  cmd->add_option("--beta", a.beta, "Gamma prior rate (required with --prior gamma)");
  cmd->add_option("--igg-a", a.igg_a, "IGG a")->capture_default_str();
  cmd->add_option("--igg-b", a.igg_b, "IGG b")->capture_default_str();
  cmd->add_option("--igg-c", a.igg_c, "IGG c")->capture_default_str();
  cmd->add_flag("--gamma-paper-compat", a.gamma_compat, "Inverse-gamma approximation for the gamma prior");
  cmd->add_flag("--sigma2-paper-compat", a.sigma2_compat, "Noise variance update without the factor prior term");
  cmd->add_flag("--no-timing", a.no_timing, "Record zero wall times so outputs are byte-reproducible");
}

PriorFamily family_or_usage(const std::string& name) {
  const auto family = parse_prior_family(name);
  if (!family) throw UsageError("unknown prior '" + name + "'; valid names: " + kPriorNames);
  return *family;
}

PriorSpec prior_from(const SamplerArgs& a) {
  switch (family_or_usage(a.prior)) {
    case PriorFamily::Gaussian: return PriorSpec::gaussian(a.v0);
    case PriorFamily::Gamma:
      if (!a.beta) throw UsageError("--beta is required when --prior gamma");
      return PriorSpec::gamma(*a.beta, a.gamma_compat);
    case PriorFamily::Horseshoe: return PriorSpec::horseshoe();
    case PriorFamily::HorseshoePlus: return PriorSpec::horseshoe_plus();
    case PriorFamily::Igg: return PriorSpec::igg(a.igg_a, a.igg_b, a.igg_c);
  }
  throw UsageError("unknown prior");
}

ChainConfig chain_from(const SamplerArgs& a) {
  ChainConfig c;
  c.rank = a.k;
  c.burn_in = a.burnin;
  c.thin = a.thin;
  c.n_samples = a.samples;
  c.seed = a.seed;
  c.a_sigma = a.a_sigma;
  c.b_sigma = a.b_sigma;
  c.sigma2_paper_compat = a.sigma2_compat;
  return c;
}

json prior_json(const PriorSpec& spec) {
  json j;
  j["family"] = std::string(to_string(spec.family()));
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GaussianParams>) {
          j["v0"] = p.v0;
        } else if constexpr (std::is_same_v<T, GammaParams>) {
          j["beta"] = p.beta;
          j["paper_compat"] = p.paper_compat;
        } else if constexpr (std::is_same_v<T, IggParams>) {
          j["a"] = p.a;
          j["b"] = p.b;
          j["c"] = p.c;
        }
      },
      spec.params);
  return j;
}

json chain_json(const ChainConfig& c) {
  return json{{"rank", c.rank},
              {"burn_in", c.burn_in},
              {"thin", c.thin},
              {"n_samples", c.n_samples},
              {"seed", c.seed},
              {"a_sigma", c.a_sigma},
              {"b_sigma", c.b_sigma},
              {"use_intercepts", c.use_intercepts},
              {"sigma2_paper_compat", c.sigma2_paper_compat}};
}

void write_json(const json& j, const std::string& path) { io::write_text(path, j.dump(2) + "\n"); }

void write_diagnostics(const PosteriorEstimate& est, std::size_t rank, const std::string& path) {
  std::ostringstream out;
  out << "sweep,sigma2,train_se";
  for (std::size_t k = 0; k < rank; ++k) out << ",gamma_" << (k + 1);
  out << '\n';
  for (const SampleDiagnostics& d : est.trace) {
    out << d.sweep << ',' << io::format_double(d.sigma2) << ',' << io::format_double(d.train_se);
    for (double g : d.gamma) out << ',' << io::format_double(g);
    out << '\n';
  }
  io::write_text(path, out.str());
}

double seconds_since(std::chrono::steady_clock::time_point start, bool no_timing) {
  if (no_timing) return 0.0;
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct CompleteArgs {
  SamplerArgs sampler;
  std::string input;
  std::size_t order = 2;
  std::vector<Index> dims;
  bool one_based = false;
  std::string intercepts = "on";
  double holdout_fraction = 0.0;
  std::string output_dir = ".";
};

void cmd_complete(const CompleteArgs& a) {
  if (a.dims.size() != a.order)
    throw UsageError("--dims lists " + std::to_string(a.dims.size()) + " sizes but --order is " +
                     std::to_string(a.order));
  const PriorSpec spec = prior_from(a.sampler);
  ChainConfig chain = chain_from(a.sampler);
  chain.use_intercepts = a.intercepts == "on";

  const auto start = std::chrono::steady_clock::now();
  const ObservedTensor obs = io::read_observations(a.input, a.order, a.dims, a.one_based);
  const HoldoutSplit split = a.holdout_fraction > 0.0
                                 ? holdout_split(obs, a.holdout_fraction, a.sampler.seed)
                                 : HoldoutSplit{obs, ObservedTensor::empty(obs.dims())};
  const PosteriorEstimate est =
      a.order == 2 ? matrix::run(split.train, chain, spec) : tensor::run(split.train, chain, spec);

  fs::create_directories(a.output_dir);
  const fs::path dir(a.output_dir);
  if (a.order == 2) {
    io::write_dense_csv(est.theta_hat, (dir / "theta_hat.csv").string());
    io::write_dense_csv(est.y_hat, (dir / "y_hat.csv").string());
  } else {
    io::write_coordinate_csv(est.theta_hat, (dir / "theta_hat.csv").string(), a.one_based);
    io::write_coordinate_csv(est.y_hat, (dir / "y_hat.csv").string(), a.one_based);
  }
  write_diagnostics(est, chain.rank, (dir / "diagnostics.csv").string());

  json holdout = nullptr;
  if (!split.test.is_empty()) {
    holdout = json{{"n_test", split.test.size()},
                   {"test_se", experiments::holdout_se(est.y_hat, split.test)},
                   {"test_rmse", experiments::holdout_rmse(est.y_hat, split.test)},
                   {"percent_explained", experiments::percent_explained(est.y_hat, split.test)}};
    write_json(holdout, (dir / "holdout.json").string());
  }

  json manifest;
  manifest["command"] = "complete";
  manifest["version"] = RANKSHRINK_VERSION;
  manifest["input"] = a.input;
  manifest["order"] = a.order;
  manifest["dims"] = a.dims;
  manifest["one_based"] = a.one_based;
  manifest["holdout_fraction"] = a.holdout_fraction;
  manifest["chain"] = chain_json(chain);
  manifest["prior"] = prior_json(spec);
  manifest["n_observations"] = obs.size();
  manifest["n_train"] = split.train.size();
  manifest["n_samples_used"] = est.n_samples_used;
  manifest["sigma2_mean"] = est.sigma2_mean;
  manifest["gamma_mean"] = est.gamma_mean;
  manifest["floor_events"] = est.floor_events;
  manifest["holdout"] = holdout;
  manifest["wall_time_s"] = seconds_since(start, a.sampler.no_timing);
  write_json(manifest, (dir / "manifest.json").string());
}

struct SimulateArgs {
  SamplerArgs sampler;
  std::string protocol;
  std::size_t trials = 20;
  std::vector<std::string> priors{"horseshoe-plus", "horseshoe", "igg", "gamma", "gaussian"};
  std::uint64_t seed = 1;
  std::string se_scale = "sum";
  std::vector<double> sweep_values;
  std::string output;
  bool k_set = false, burnin_set = false, thin_set = false, samples_set = false, v0_set = false, igg_set = false;
};

void cmd_simulate(const SimulateArgs& a) {
  const auto protocol = experiments::parse_protocol(a.protocol);
  if (!protocol)
    throw UsageError("unknown protocol '" + a.protocol +
                     "'; valid names: matrix_rank_sweep, tensor_rank_sweep, missingness_sweep, scree_recovery");
  std::vector<PriorFamily> priors;
  for (const auto& name : a.priors) priors.push_back(family_or_usage(name));
  if (priors.empty()) throw UsageError("--priors must name at least one prior");

  experiments::TableOverrides o;
  o.n_trials = a.trials;
  o.base_seed = a.seed;
  if (a.k_set) o.rank = a.sampler.k;
  if (a.burnin_set) o.burn_in = a.sampler.burnin;
  if (a.thin_set) o.thin = a.sampler.thin;
  if (a.samples_set) o.n_samples = a.sampler.samples;
  if (!a.sweep_values.empty()) o.sweep_values = a.sweep_values;
  if (a.v0_set) o.v0 = a.sampler.v0;
  if (a.sampler.beta) o.beta = *a.sampler.beta;
  if (a.igg_set) o.igg = IggParams{a.sampler.igg_a, a.sampler.igg_b, a.sampler.igg_c};
  o.gamma_paper_compat = a.sampler.gamma_compat;
  o.sigma2_paper_compat = a.sampler.sigma2_compat;
  o.se_scale = a.se_scale == "mean" ? experiments::SeScale::Mean : experiments::SeScale::Sum;
  o.record_timing = !a.sampler.no_timing;

  const experiments::ResultTable table = experiments::run_table(*protocol, priors, o);

  const std::string output = a.output.empty() ? a.protocol + ".csv" : a.output;
  fs::path base(output);
  if (base.has_parent_path()) fs::create_directories(base.parent_path());
  const std::string stem = (base.parent_path() / base.stem()).string();
  experiments::write_result_csv(table, output);
  experiments::write_long_csv(table, stem + "_long.csv");
  if (*protocol == experiments::Protocol::ScreeRecovery) experiments::write_scree_csv(table, stem + "_scree.csv");

  const experiments::ProtocolDefinition def = experiments::protocol_definition(*protocol);
  ChainConfig chain = def.chain;
  if (o.rank) chain.rank = *o.rank;
  if (o.burn_in) chain.burn_in = *o.burn_in;
  if (o.thin) chain.thin = *o.thin;
  if (o.n_samples) chain.n_samples = *o.n_samples;
  chain.sigma2_paper_compat = o.sigma2_paper_compat;
  chain.seed = o.base_seed;
  json points = json::array();
  for (const auto& p : def.points) {
    if (o.sweep_values &&
        std::none_of(o.sweep_values->begin(), o.sweep_values->end(), [&](double v) { return std::abs(v - p.sweep_value) < 1e-12; }))
      continue;
    json pj{{"sweep_value", p.sweep_value},
            {"dims", p.sim.dims},
            {"true_rank", p.sim.true_rank},
            {"column_variances", p.sim.column_variances},
            {"noise_sigma2", p.sim.noise_sigma2},
            {"keep_fraction", p.sim.keep_fraction}};
    json pr = json::array();
    for (PriorFamily f : priors) pr.push_back(prior_json(experiments::prior_for_point(f, p, o)));
    pj["priors"] = pr;
    points.push_back(pj);
  }
  json config{{"command", "simulate"},
              {"version", RANKSHRINK_VERSION},
              {"protocol", a.protocol},
              {"sweep_param", def.sweep_param},
              {"n_trials", o.n_trials},
              {"base_seed", o.base_seed},
              {"se_scale", a.se_scale},
              {"chain", chain_json(chain)},
              {"points", points}};
  write_json(config, stem + "_config.json");
}

struct ImageArgs {
  SamplerArgs sampler;
  std::string input;
  double missing = 0.8;
  bool per_channel_mask = false;
  std::string output_dir = ".";
};

void cmd_image(const ImageArgs& a) {
  io::ImageOptions options;
  options.missing = a.missing;
  options.per_channel_mask = a.per_channel_mask;
  options.seed = a.sampler.seed;
  options.chain = chain_from(a.sampler);
  options.chain.use_intercepts = true;
  options.spec = prior_from(a.sampler);

  const auto start = std::chrono::steady_clock::now();
  const io::Image image = io::read_ppm(a.input);
  const io::ImageCompletion result = io::complete_image(image, options);

  fs::create_directories(a.output_dir);
  const fs::path dir(a.output_dir);
  io::write_ppm(result.masked, (dir / "masked.ppm").string());
  io::write_ppm(result.completed, (dir / "completed.ppm").string());

  json channels = json::array();
  const char* names[] = {"red", "green", "blue"};
  for (std::size_t c = 0; c < result.channels.size(); ++c) {
    const auto& r = result.channels[c];
    channels.push_back(json{{"channel", names[c]},
                            {"n_missing", r.n_missing},
                            {"se_missing", r.se_missing},
                            {"rmse_missing", r.rmse_missing},
                            {"rmse_all", r.rmse_all},
                            {"mae_all", r.mae_all},
                            {"baseline_rmse_missing", r.baseline_rmse_missing},
                            {"baseline_rmse_all", r.baseline_rmse_all}});
  }
  json report{{"command", "image"},
              {"version", RANKSHRINK_VERSION},
              {"input", a.input},
              {"height", image.height},
              {"width", image.width},
              {"missing", a.missing},
              {"per_channel_mask", a.per_channel_mask},
              {"chain", chain_json(options.chain)},
              {"prior", prior_json(options.spec)},
              {"floor_events", result.floor_events},
              {"units", "8-bit intensity"},
              {"channels", channels},
              {"wall_time_s", seconds_since(start, a.sampler.no_timing)}};
  write_json(report, (dir / "report.json").string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian low-rank matrix and tensor completion with shrinkage priors"};
  app.require_subcommand(1);
  app.set_version_flag("--version", RANKSHRINK_VERSION);

  CompleteArgs complete;
  auto* c = app.add_subcommand("complete", "Complete a partially observed matrix or tensor");
  c->add_option("--input", complete.input, "Observation CSV (i1,...,iD,value)")->required()->check(CLI::ExistingFile);
  c->add_option("--order", complete.order, "Tensor order D")->required()->check(CLI::Range(2, 64));
  c->add_option("--dims", complete.dims, "Comma-separated dimension sizes")->required()->delimiter(',');
  c->add_flag("--one-based", complete.one_based, "Indices in the CSV start at 1");
  c->add_option("--intercepts", complete.intercepts, "Row/column (per-dimension) intercepts")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  c->add_option("--holdout-fraction", complete.holdout_fraction, "Fraction of rows contributing one held-out entry")
      ->check(CLI::Range(0.0, 1.0));
  c->add_option("--output-dir", complete.output_dir, "Directory for outputs")->capture_default_str();
  add_sampler_options(c, complete.sampler);

  SimulateArgs simulate;
  auto* s = app.add_subcommand("simulate", "Run a simulation protocol and tabulate standard errors");
  s->add_option("--protocol", simulate.protocol,
                "matrix_rank_sweep | tensor_rank_sweep | missingness_sweep | scree_recovery")
      ->required();
  s->add_option("--trials", simulate.trials, "Trials per prior and sweep value")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--priors", simulate.priors, "Comma-separated prior names")->delimiter(',');
  s->add_option("--seed", simulate.seed, "Base seed; trial t uses seed + t")->capture_default_str();
  s->add_option("--se-scale", simulate.se_scale, "sum: root of summed squared error; mean: root mean squared error")
      ->check(CLI::IsMember({"sum", "mean"}))
      ->capture_default_str();
  s->add_option("--sweep-values", simulate.sweep_values, "Restrict to these sweep values")->delimiter(',');
  s->add_option("--output", simulate.output, "Result CSV path (default <protocol>.csv)");
  auto* sk = s->add_option("--k", simulate.sampler.k, "Factorization rank K");
  auto* sb = s->add_option("--burnin", simulate.sampler.burnin, "Burn-in sweeps");
  auto* st = s->add_option("--thin", simulate.sampler.thin, "Thinning interval");
  auto* ss = s->add_option("--samples", simulate.sampler.samples, "Retained samples");
  auto* sv = s->add_option("--v0", simulate.sampler.v0, "Gaussian prior column variance");
  s->add_option("--beta", simulate.sampler.beta, "Gamma prior rate for every sweep point");
  auto* sa = s->add_option("--igg-a", simulate.sampler.igg_a, "IGG a");
  auto* sbb = s->add_option("--igg-b", simulate.sampler.igg_b, "IGG b");
  auto* sc = s->add_option("--igg-c", simulate.sampler.igg_c, "IGG c");
  s->add_flag("--gamma-paper-compat", simulate.sampler.gamma_compat, "Inverse-gamma approximation for the gamma prior");
  s->add_flag("--sigma2-paper-compat", simulate.sampler.sigma2_compat, "Noise variance update without the factor prior term");
  s->add_flag("--no-timing", simulate.sampler.no_timing, "Record zero wall times");

  ImageArgs image;
  auto* im = app.add_subcommand("image", "Inpaint a PPM image with tensor completion");
  im->add_option("--input", image.input, "Binary P6 PPM")->required()->check(CLI::ExistingFile);
  im->add_option("--missing", image.missing, "Fraction of pixels removed")->required()->check(CLI::Range(0.0, 1.0));
  im->add_flag("--per-channel-mask", image.per_channel_mask, "Mask each channel independently");
  im->add_option("--output-dir", image.output_dir, "Directory for outputs")->capture_default_str();
  add_sampler_options(im, image.sampler);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*c) cmd_complete(complete);
    if (*s) {
      simulate.k_set = sk->count() > 0;
      simulate.burnin_set = sb->count() > 0;
      simulate.thin_set = st->count() > 0;
      simulate.samples_set = ss->count() > 0;
      simulate.v0_set = sv->count() > 0;
      simulate.igg_set = sa->count() + sbb->count() + sc->count() > 0;
      cmd_simulate(simulate);
    }
    if (*im) cmd_image(image);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
