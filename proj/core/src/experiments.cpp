#include "natlearn/experiments.hpp"

#include "natlearn/random.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <ostream>
#include <sstream>

#ifndef NATLEARN_VERSION
#define NATLEARN_VERSION "0.0.0"
#endif

namespace natlearn {

std::string library_version() { return NATLEARN_VERSION; }

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Fig1: return "fig1";
    case Variant::Fig2a: return "fig2a";
    case Variant::Fig2b: return "fig2b";
    case Variant::Fig2c: return "fig2c";
    case Variant::Fig2d: return "fig2d";
    case Variant::Fig2e: return "fig2e";
    case Variant::Fig2f: return "fig2f";
  }
  return "unknown";
}

Variant parse_variant(const std::string& text) {
  std::string t = text;
  if (t.size() == 1) t = "fig2" + t;
  for (Variant v : {Variant::Fig1, Variant::Fig2a, Variant::Fig2b, Variant::Fig2c, Variant::Fig2d, Variant::Fig2e,
                    Variant::Fig2f}) {
    if (variant_name(v) == t) return v;
  }
  throw Error("unknown variant '" + text + "' (expected fig1, fig2a..fig2f or a..f)");
}

std::string estimation_name(EstimationChoice m) {
  switch (m) {
    case EstimationChoice::Pinv: return "pinv";
    case EstimationChoice::WStar: return "wstar";
    case EstimationChoice::TwoTimescale: return "two-timescale";
  }
  return "unknown";
}

EstimationChoice parse_estimation(const std::string& text) {
  for (EstimationChoice m : {EstimationChoice::Pinv, EstimationChoice::WStar, EstimationChoice::TwoTimescale}) {
    if (estimation_name(m) == text) return m;
  }
  throw Error("unknown estimation mode '" + text + "' (expected pinv, wstar or two-timescale)");
}

ExperimentConfig ExperimentConfig::defaults(Variant v) {
  ExperimentConfig c;
  c.variant = v;
  if (v == Variant::Fig1) return c;
  c.iterations = 5000;
  switch (v) {
    case Variant::Fig2a: c.alpha = 0.05; c.fisher_samples = 1000; break;
    case Variant::Fig2b: c.alpha = 0.002; c.fisher_samples = 1000; break;
    case Variant::Fig2c: c.alpha = 0.0008; c.fisher_samples = 100; break;
    case Variant::Fig2d: c.alpha = 0.0002; c.fisher_samples = 5; break;
    case Variant::Fig2e:
      c.alpha = 0.002;
      c.fisher_samples = 1000;
      c.fisher_source = SampleSource::Uniform;
      break;
    case Variant::Fig2f:
      c.alpha = 0.05;
      c.estimation = EstimationChoice::WStar;
      break;
    default: break;
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (n_data < 1) throw Error("n_data must be >= 1");
  if (iterations < 1) throw Error("iterations must be >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error("alpha must be positive");
  if (!(true_var > 0.0) || !(start_var > 0.0)) throw Error("variances must be positive");
  if (k_list.empty()) throw Error("k list is empty");
  for (int k : k_list) {
    if (k < 1) throw Error("every k must be a positive integer");
  }
  if (fisher_samples < 0) throw Error("fisher_samples must be >= 0");
  if (record_every < 1) throw Error("record_every must be >= 1");
  if (variant != Variant::Fig1) {
    if (fisher_samples == 0 && figure2_mode(variant) != GaussianMode::LogDensity) {
      throw Error("closed-form Fisher (fisher_samples = 0) needs a log-density variant");
    }
    if (estimation == EstimationChoice::TwoTimescale && (!(secondary_alpha > 0.0) || inner_updates < 1)) {
      throw Error("two-timescale estimation needs secondary_alpha > 0 and inner_updates >= 1");
    }
  }
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::describe() const {
  std::vector<std::pair<std::string, std::string>> kv;
  std::string ks;
  for (std::size_t j = 0; j < k_list.size(); ++j) ks += (j ? "," : "") + std::to_string(k_list[j]);
  kv.emplace_back("variant", variant_name(variant));
  kv.emplace_back("data_seed", std::to_string(data_seed));
  kv.emplace_back("run_seed", std::to_string(run_seed));
  kv.emplace_back("n_data", std::to_string(n_data));
  kv.emplace_back("true_mu", format_real(true_mu));
  kv.emplace_back("true_var", format_real(true_var));
  kv.emplace_back("start_mu", format_real(start_mu));
  kv.emplace_back("start_var", format_real(start_var));
  kv.emplace_back("k_list", ks);
  kv.emplace_back("iterations", std::to_string(iterations));
  kv.emplace_back("alpha", format_real(alpha));
  kv.emplace_back("alpha_per_sample", format_real(alpha / n_data));
  kv.emplace_back("record_every", std::to_string(record_every));
  if (variant != Variant::Fig1) {
    kv.emplace_back("f", figure2_mode(variant) == GaussianMode::LogDensity ? "log-density" : "density");
    kv.emplace_back("metric", figure2_metric(*this).describe());
    kv.emplace_back("fisher_samples", std::to_string(fisher_samples));
    kv.emplace_back("fisher_source", fisher_source == SampleSource::Model ? "model" : "uniform");
    kv.emplace_back("uniform_half_width", format_real(uniform_half_width));
    kv.emplace_back("estimation", estimation_name(estimation));
    if (estimation == EstimationChoice::TwoTimescale) {
      kv.emplace_back("secondary_alpha", format_real(secondary_alpha));
      kv.emplace_back("inner_updates", std::to_string(inner_updates));
    }
  }
  return kv;
}

std::vector<double> generate_dataset(std::uint64_t data_seed, int n, double mu, double var) {
  if (n < 1) throw Error("generate_dataset: n must be >= 1");
  if (!(var > 0.0)) throw Error("generate_dataset: variance must be positive");
  const RandomStreams streams(data_seed);
  auto engine = streams.engine("data", 0);
  const double sd = std::sqrt(var);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (double& x : out) x = mu + sd * standard_normal(engine);
  return out;
}

// ---------------------------------------------------------------------------

GaussianMode figure2_mode(Variant v) {
  switch (v) {
    case Variant::Fig2b:
    case Variant::Fig2c:
    case Variant::Fig2d:
    case Variant::Fig2e: return GaussianMode::Density;
    default: return GaussianMode::LogDensity;
  }
}

MetricSpec figure2_metric(const ExperimentConfig& cfg) {
  if (cfg.variant == Variant::Fig2f || cfg.estimation != EstimationChoice::Pinv) {
    return MetricSpec{MetricSpec::MeasureGram{}};
  }
  if (cfg.fisher_samples == 0) return MetricSpec{MetricSpec::ClosedFormFisher{}};
  return MetricSpec{MetricSpec::FisherSampled{cfg.fisher_samples, cfg.fisher_source, cfg.uniform_half_width}};
}

EstimationMode figure2_estimation(const ExperimentConfig& cfg) {
  switch (cfg.estimation) {
    case EstimationChoice::WStar: return EstimationMode{EstimationMode::DirectWStar{}};
    case EstimationChoice::TwoTimescale:
      return EstimationMode{EstimationMode::TwoTimescale{cfg.secondary_alpha, cfg.inner_updates}};
    default: return EstimationMode{EstimationMode::ExplicitPinv{}};
  }
}

std::shared_ptr<NaturalizedRule> figure2_rule(const ExperimentConfig& cfg, const std::vector<double>& data) {
  const BatchObjective objective = figure2_mode(cfg.variant) == GaussianMode::LogDensity
                                       ? BatchObjective::SumOfValues
                                       : BatchObjective::SumOfLogValues;
  auto base = std::make_shared<BatchGradientRule>(data, StepSchedule::constant(cfg.alpha / data.size()), objective);
  return std::make_shared<NaturalizedRule>(base, figure2_metric(cfg), figure2_estimation(cfg));
}

namespace {

TrajectoryRecord make_record(const DataSummary& data, int iteration, int k, double mu, double sigma_k, bool diverged) {
  TrajectoryRecord r;
  r.iteration = iteration;
  r.k = k;
  r.mu = mu;
  r.sigma_sq = std::pow(sigma_k, 2.0 / k);
  r.diverged = diverged;
  r.loglik_per_sample = diverged ? std::nan("") : data.mean_loglik(mu, r.sigma_sq);
  return r;
}

bool keep(int iteration, int last, int every) { return iteration == 0 || iteration == last || iteration % every == 0; }

ExperimentResult start_result(const ExperimentConfig& cfg, const std::vector<double>& data) {
  ExperimentResult res;
  res.config = cfg;
  res.data = DataSummary::of(data);
  res.mle_loglik = res.data.mean_loglik(res.data.mean, res.data.mle_variance());
  return res;
}

}  // namespace

ExperimentResult figure1(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.variant != Variant::Fig1) throw Error("figure1: variant must be fig1");
  const std::vector<double> data = generate_dataset(cfg.data_seed, cfg.n_data, cfg.true_mu, cfg.true_var);
  ExperimentResult res = start_result(cfg, data);
  const double alpha = cfg.alpha / cfg.n_data;

  for (int k : cfg.k_list) {
    KRun run;
    run.k = k;
    GaussianParams theta{cfg.start_mu, std::pow(cfg.start_var, 0.5 * k)};
    run.records.push_back(make_record(res.data, 0, k, theta.mu, theta.sigma_k, false));
    for (int i = 1; i <= cfg.iterations; ++i) {
      const GaussianStepResult s = gaussian_loglik_gd_step(theta, res.data, alpha, k);
      theta = s.theta;
      if (s.diverged) {
        run.diverged = true;
        run.diverged_at = i;
        run.records.push_back(make_record(res.data, i, k, theta.mu, theta.sigma_k, true));
        break;
      }
      if (keep(i, cfg.iterations, cfg.record_every)) {
        run.records.push_back(make_record(res.data, i, k, theta.mu, theta.sigma_k, false));
      }
    }
    run.final_state = run.records.back();
    res.runs.push_back(std::move(run));
  }
  return res;
}

ExperimentResult figure2(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.variant == Variant::Fig1) throw Error("figure2: variant must be one of fig2a..fig2f");
  const std::vector<double> data = generate_dataset(cfg.data_seed, cfg.n_data, cfg.true_mu, cfg.true_var);
  ExperimentResult res = start_result(cfg, data);
  const auto rule = figure2_rule(cfg, data);
  const GaussianMode mode = figure2_mode(cfg.variant);

  const auto run_k = [&](int k) {
    const GaussianModel f(k, mode);
    KRun run;
    run.k = k;
    const ParamVector theta0 = f.from_moments(cfg.start_mu, cfg.start_var);
    run.records.push_back(make_record(res.data, 0, k, theta0(0), theta0(1), false));
    const Trajectory traj = run_rule(*rule, f, {theta0}, cfg.iterations, cfg.run_seed);
    const int last = static_cast<int>(traj.steps.size());
    for (int i = 1; i <= last; ++i) {
      const RuleStep& s = traj.steps[static_cast<std::size_t>(i - 1)];
      if (s.diagnostics.metric_rank >= 0 && !s.diagnostics.metric_full_rank) ++run.rank_deficient_steps;
      if (std::isfinite(s.diagnostics.metric_condition)) {
        run.max_condition = std::max(run.max_condition, s.diagnostics.metric_condition);
      }
      const bool bad = s.diagnostics.diverged;
      if (bad || keep(i, cfg.iterations, cfg.record_every)) {
        run.records.push_back(make_record(res.data, i, k, s.theta_next(0), s.theta_next(1), bad));
      }
    }
    run.diverged = traj.diverged;
    run.diverged_at = traj.diverged_at;
    run.final_state = run.records.back();
    return run;
  };

  // Runs share no mutable state; results are collected in k_list order.
  std::vector<std::future<KRun>> pending;
  for (int k : cfg.k_list) pending.push_back(std::async(std::launch::async, run_k, k));
  for (auto& p : pending) res.runs.push_back(p.get());
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  return cfg.variant == Variant::Fig1 ? figure1(cfg) : figure2(cfg);
}

CongruentPair gaussian_pair(int k_from, int k_to, GaussianMode mode) {
  CongruentPair p;
  p.f = std::make_shared<GaussianModel>(k_from, mode);
  p.g = std::make_shared<GaussianModel>(k_to, mode);
  p.psi = gaussian_power_submersion(k_from, k_to);
  p.label = "gaussian-k" + std::to_string(k_from) + "-k" + std::to_string(k_to);
  return p;
}

Figure2Covariance figure2_covariance(const ExperimentConfig& cfg, int steps, int probes, double tolerance, int order) {
  cfg.validate();
  if (cfg.variant == Variant::Fig1) throw Error("figure2_covariance: variant must be one of fig2a..fig2f");
  const std::vector<double> data = generate_dataset(cfg.data_seed, cfg.n_data, cfg.true_mu, cfg.true_var);
  const auto rule = figure2_rule(cfg, data);
  const GaussianMode mode = figure2_mode(cfg.variant);
  const int k0 = cfg.k_list.front();
  const GaussianModel f0(k0, mode);
  const ParamVector theta0 = f0.from_moments(cfg.start_mu, cfg.start_var);
  const double mu = cfg.true_mu;
  const double sd = std::sqrt(cfg.true_var);
  const ProbeSampler probe = [mu, sd](std::mt19937_64& e) { return scalar_input(mu + sd * standard_normal(e)); };

  CovarianceOptions opt;
  opt.order = order;
  opt.steps = steps;
  opt.probes = probes;
  opt.rng_seed = cfg.run_seed;
  opt.tolerance = tolerance;

  Figure2Covariance out;
  for (int k : cfg.k_list) {
    if (k == k0) continue;
    CovarianceReport r = check_covariance(*rule, gaussian_pair(k0, k, mode), theta0, probe, opt);
    out.max_residual = std::max(out.max_residual, r.max_residual);
    out.k.push_back(k);
    out.reports.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

void write_csv(std::ostream& out, const ExperimentResult& result, const KRun& run) {
  const std::string name = variant_name(result.config.variant);
  out << kCsvHeader << '\n';
  for (const auto& r : run.records) {
    out << name << ',' << r.k << ',' << r.iteration << ',' << format_real(r.mu) << ',' << format_real(r.sigma_sq)
        << ',' << format_real(r.loglik_per_sample) << ',' << (r.diverged ? 1 : 0) << '\n';
  }
}

void write_metadata(std::ostream& out, const ExperimentResult& result) {
  for (const auto& [k, v] : result.config.describe()) out << k << '=' << v << '\n';
  out << "library_version=" << library_version() << '\n';
  out << "data_mean=" << format_real(result.data.mean) << '\n';
  out << "data_mle_var=" << format_real(result.data.mle_variance()) << '\n';
  out << "data_mle_loglik_per_sample=" << format_real(result.mle_loglik) << '\n';
  for (const auto& run : result.runs) {
    const std::string p = "k" + std::to_string(run.k) + ".";
    out << p << "final_mu=" << format_real(run.final_state.mu) << '\n';
    out << p << "final_sigma_sq=" << format_real(run.final_state.sigma_sq) << '\n';
    out << p << "final_loglik_gap=" << format_real(result.mle_loglik - run.final_state.loglik_per_sample) << '\n';
    out << p << "diverged=" << (run.diverged ? 1 : 0) << '\n';
    if (run.diverged) out << p << "diverged_at=" << run.diverged_at << '\n';
    if (result.config.variant != Variant::Fig1) {
      out << p << "rank_deficient_steps=" << run.rank_deficient_steps << '\n';
    }
  }
}

std::vector<std::filesystem::path> write_outputs(const std::filesystem::path& dir, const ExperimentResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw OutputError("cannot create output directory " + dir.string());
  }
  std::vector<std::filesystem::path> written;
  const std::string name = variant_name(result.config.variant);
  auto open = [&](const std::filesystem::path& p) {
    std::ofstream s(p, std::ios::binary | std::ios::trunc);
    if (!s) throw OutputError("cannot write " + p.string());
    return s;
  };
  for (const auto& run : result.runs) {
    const auto path = dir / (name + "_k" + std::to_string(run.k) + ".csv");
    auto s = open(path);
    write_csv(s, result, run);
    if (!s.flush()) throw OutputError("write failed for " + path.string());
    written.push_back(path);
  }
  const auto meta = dir / (name + ".meta");
  auto s = open(meta);
  write_metadata(s, result);
  if (!s.flush()) throw OutputError("write failed for " + meta.string());
  written.push_back(meta);
  return written;
}

}  // namespace natlearn
