#include "cli.hpp"

#include "natlearn/covariance.hpp"
#include "natlearn/experiments.hpp"
#include "natlearn/properties.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <regex>
#include <sstream>

namespace natlearn::cli {

namespace {

struct ExperimentFlags {
  std::string out = "results";
  std::optional<std::uint64_t> data_seed;
  std::optional<std::uint64_t> run_seed;
  std::optional<double> alpha;
  std::optional<int> iterations;
  std::optional<int> n_data;
  std::optional<std::string> k_list;
  std::optional<std::string> variant;
  std::optional<int> fisher_samples;
  std::optional<std::string> fisher_source;
  std::optional<std::string> mode;
  std::optional<double> secondary_alpha;
  bool full_resolution = false;
};

struct CovarianceFlags {
  std::string rule = "naturalized-gd";
  std::string pair = "gaussian-k1-k2";
  int order = 1;
  double tolerance = 1e-7;
  int probes = 32;
  bool exact = false;
};

void add_seed_flags(CLI::App* sub, ExperimentFlags& f) {
  sub->add_option("--data-seed", f.data_seed, "Seed of the generated dataset");
  sub->add_option("--run-seed", f.run_seed, "Seed of the run (rule and metric sampling)");
  sub->add_option("--alpha", f.alpha, "Step size of the mean-normalized objective (per-sample step alpha/n)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--iterations", f.iterations, "Iterations (steps for covariance)")->check(CLI::PositiveNumber);
  sub->add_option("--n-data", f.n_data, "Number of data points")->check(CLI::PositiveNumber);
}

void add_fig2_flags(CLI::App* sub, ExperimentFlags& f) {
  sub->add_option("--variant", f.variant, "Figure 2 variant a..f");
  sub->add_option("--fisher-samples", f.fisher_samples, "Samples for the sampled Fisher metric (0: closed form)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--fisher-source", f.fisher_source, "Fisher sample source")
      ->check(CLI::IsMember({"model", "uniform"}));
  sub->add_option("--mode", f.mode, "Naturalized direction estimate")
      ->check(CLI::IsMember({"pinv", "wstar", "two-timescale"}));
  sub->add_option("--secondary-alpha", f.secondary_alpha, "Two-timescale step size")->check(CLI::PositiveNumber);
}

ExperimentConfig resolve(Variant base, const ExperimentFlags& f) {
  Variant v = base;
  if (base != Variant::Fig1 && f.variant) v = parse_variant(*f.variant);
  ExperimentConfig c = ExperimentConfig::defaults(v);
  if (f.data_seed) c.data_seed = *f.data_seed;
  if (f.run_seed) c.run_seed = *f.run_seed;
  if (f.alpha) c.alpha = *f.alpha;
  if (f.iterations) c.iterations = *f.iterations;
  if (f.n_data) c.n_data = *f.n_data;
  if (f.k_list) c.k_list = parse_int_list(*f.k_list);
  if (f.fisher_samples) c.fisher_samples = *f.fisher_samples;
  if (f.fisher_source) c.fisher_source = *f.fisher_source == "uniform" ? SampleSource::Uniform : SampleSource::Model;
  if (f.mode) c.estimation = parse_estimation(*f.mode);
  if (f.secondary_alpha) c.secondary_alpha = *f.secondary_alpha;
  if (f.full_resolution) c.record_every = 1;
  c.validate();
  return c;
}

void print_config(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& kv) {
  out << "# resolved configuration\n";
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
  out << "#\n";
}

int run_figure(const ExperimentConfig& cfg, const std::string& dir, std::ostream& out) {
  auto kv = cfg.describe();
  kv.emplace_back("out", dir);
  print_config(out, kv);
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult res = run_experiment(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto files = write_outputs(dir, res);
  out << "dataset mean=" << format_real(res.data.mean) << " mle_var=" << format_real(res.data.mle_variance())
      << " mle_loglik=" << format_real(res.mle_loglik) << '\n';
  for (const auto& run : res.runs) {
    out << "k=" << run.k << " final mu=" << format_real(run.final_state.mu)
        << " sigma_sq=" << format_real(run.final_state.sigma_sq)
        << " loglik_gap=" << format_real(res.mle_loglik - run.final_state.loglik_per_sample);
    if (run.diverged) out << " DIVERGED at " << run.diverged_at;
    if (run.rank_deficient_steps > 0) out << " rank_deficient_steps=" << run.rank_deficient_steps;
    out << '\n';
  }
  for (const auto& p : files) out << "wrote " << p.string() << '\n';
  out << "elapsed " << std::fixed << std::setprecision(2) << secs << "s\n";
  out.unsetf(std::ios::floatfield);
  return kOk;
}

std::pair<int, int> parse_pair(const std::string& text) {
  static const std::regex re("gaussian-k([0-9]+)-k([0-9]+)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) throw Error("unknown pair '" + text + "' (expected gaussian-kA-kB)");
  return {std::stoi(m[1]), std::stoi(m[2])};
}

int run_covariance(const ExperimentFlags& ef, const CovarianceFlags& cf, std::ostream& out) {
  ExperimentFlags f = ef;
  if (!f.fisher_samples) f.fisher_samples = 0;
  if (!f.alpha) f.alpha = 0.05;
  if (!f.iterations) f.iterations = 100;
  const ExperimentConfig cfg = resolve(Variant::Fig2a, f);
  const auto [ka, kb] = parse_pair(cf.pair);
  if (ka < 1 || kb < 1) throw Error("pair powers must be positive");
  if (cf.order != 1 && cf.order != 2) throw Error("--order must be 1 or 2");
  if (cf.rule != "naturalized-gd" && cf.rule != "gd") throw Error("--rule must be naturalized-gd or gd");

  auto kv = cfg.describe();
  kv.emplace_back("rule", cf.rule);
  kv.emplace_back("pair", cf.pair);
  kv.emplace_back("order", cf.exact ? std::string("exact") : std::to_string(cf.order));
  kv.emplace_back("tolerance", format_real(cf.tolerance));
  kv.emplace_back("probes", std::to_string(cf.probes));
  print_config(out, kv);

  const std::vector<double> data = generate_dataset(cfg.data_seed, cfg.n_data, cfg.true_mu, cfg.true_var);
  const GaussianMode mode = figure2_mode(cfg.variant);
  std::shared_ptr<const SteppingRule> rule;
  if (cf.rule == "gd") {
    rule = std::make_shared<BatchGradientRule>(
        data, StepSchedule::constant(cfg.alpha / data.size()),
        mode == GaussianMode::LogDensity ? BatchObjective::SumOfValues : BatchObjective::SumOfLogValues);
  } else {
    rule = figure2_rule(cfg, data);
  }
  const CongruentPair pair = gaussian_pair(ka, kb, mode);
  const GaussianModel f0(ka, mode);
  const double mu = cfg.true_mu;
  const double sd = std::sqrt(cfg.true_var);
  const ProbeSampler probe = [mu, sd](std::mt19937_64& e) { return scalar_input(mu + sd * standard_normal(e)); };

  CovarianceOptions opt;
  opt.order = cf.order;
  opt.kind = cf.exact ? CovarianceKind::Exact : CovarianceKind::Taylor;
  opt.steps = cfg.iterations;
  opt.probes = cf.probes;
  opt.rng_seed = cfg.run_seed;
  opt.tolerance = cf.tolerance;
  const CovarianceReport r = check_covariance(*rule, pair, f0.from_moments(cfg.start_mu, cfg.start_var), probe, opt);

  out << "rule " << rule->name() << '\n';
  out << "max residual " << format_real(r.max_residual) << " over " << r.residuals.size() << " steps ("
      << r.excluded_steps << " excluded)\n";
  out << r.message << '\n';
  out << (r.pass ? "PASS" : "FAIL") << " covariance " << cf.pair << " order "
      << (cf.exact ? std::string("exact") : std::to_string(cf.order)) << " tolerance " << format_real(cf.tolerance)
      << '\n';
  return r.pass ? kOk : kCheckFailed;
}

std::string roots_text(const std::vector<double>& v) {
  std::ostringstream o;
  o << '{';
  for (std::size_t j = 0; j < v.size(); ++j) o << (j ? "," : "") << (v[j] == 0.0 ? 0.0 : v[j]);
  o << '}';
  return o.str();
}

int run_theorem3(double beta, std::ostream& out) {
  print_config(out, {{"beta", format_real(beta)}});
  const Theorem3Report r = theorem3_verify(beta);
  out << "b-branch roots " << roots_text(r.b_branch_roots) << " (scan " << roots_text(r.scan_b_roots) << ")\n";
  out << "c-branch roots " << roots_text(r.c_branch_roots) << " (scan " << roots_text(r.scan_c_roots) << ")\n";
  out << "intersection " << roots_text(r.intersection) << " (scan " << roots_text(r.scan_joint_roots) << ")\n";
  out << "max residual at roots " << format_real(r.max_root_residual) << '\n';
  out << (r.pass ? "PASS" : "FAIL") << " only the trivial update a=b=c=0 solves all four equations\n";
  return r.pass ? kOk : kCheckFailed;
}

int run_selfcheck(std::uint64_t seed, std::ostream& out) {
  print_config(out, {{"seed", std::to_string(seed)}});
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  auto suite = [&](const char* title, const SuiteReport& r) {
    out << "== " << title << '\n';
    print_suite(out, r);
    ok = ok && r.pass();
  };
  suite("finite-difference gradients", gradient_suite(50, seed));
  suite("penrose conditions", penrose_suite(200, seed));
  suite("jacobian property and metric transform", congruence_suite(20, seed));

  out << "== theorem 3 branch verification\n";
  for (double beta : {-1.0, 0.0, 0.3, 2.0}) {
    const Theorem3Report r = theorem3_verify(beta);
    out << (r.pass ? "ok   " : "FAIL ") << "beta=" << beta << " b " << roots_text(r.b_branch_roots) << " c "
        << roots_text(r.c_branch_roots) << " joint " << roots_text(r.intersection) << '\n';
    ok = ok && r.pass;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out << "elapsed " << std::fixed << std::setprecision(2) << secs << "s\n";
  out.unsetf(std::ios::floatfield);
  out << (ok ? "PASS" : "FAIL") << " selfcheck\n";
  return ok ? kOk : kCheckFailed;
}

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::optional<std::string> path;
  for (std::size_t j = 0; j < args.size(); ++j) {
    const std::string& a = args[j];
    if (a == "--config") {
      if (j + 1 >= args.size()) throw CLI::ArgumentMismatch("--config needs a path");
      path = args[++j];
    } else if (a.rfind("--config=", 0) == 0) {
      path = a.substr(9);
    } else {
      out.push_back(a);
    }
  }
  if (!path || out.empty()) return out;
  const auto tokens = config_file_tokens(*path, {"full-resolution", "exact"});
  out.insert(out.begin() + 1, tokens.begin(), tokens.end());
  return out;
}

}  // namespace

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw Error("malformed integer list '" + text + "'");
    }
    if (used != item.size()) throw Error("malformed integer list '" + text + "'");
    out.push_back(v);
  }
  if (out.empty()) throw Error("empty integer list");
  return out;
}

std::vector<std::string> config_file_tokens(const std::string& path, const std::vector<std::string>& switches) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config file " + path);
  std::vector<std::string> tokens;
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line without '=': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (std::find(switches.begin(), switches.end(), key) != switches.end()) {
      if (value == "true" || value == "1") tokens.push_back("--" + key);
      continue;
    }
    tokens.push_back("--" + key);
    tokens.push_back(value);
  }
  return tokens;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Naturalized learning rules: experiments and property checks", "natlearn"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  ExperimentFlags fig1_flags, fig2_flags, cov_flags;
  CovarianceFlags cov;
  double beta = 0.3;
  std::uint64_t selfcheck_seed = 12345;

  auto* fig1 = app.add_subcommand("figure1", "Gaussian gradient ascent in (mu, sigma^k) for each k");
  fig1->add_option("--out", fig1_flags.out, "Output directory");
  add_seed_flags(fig1, fig1_flags);
  fig1->add_option("--k", fig1_flags.k_list, "Comma-separated powers k");
  fig1->add_flag("--full-resolution", fig1_flags.full_resolution, "Record every iteration");

  auto* fig2 = app.add_subcommand("figure2", "Naturalized gradient ascent variants a..f");
  fig2->add_option("--out", fig2_flags.out, "Output directory");
  add_seed_flags(fig2, fig2_flags);
  fig2->add_option("--k", fig2_flags.k_list, "Comma-separated powers k");
  add_fig2_flags(fig2, fig2_flags);
  fig2->add_flag("--full-resolution", fig2_flags.full_resolution, "Record every iteration");

  auto* covc = app.add_subcommand("covariance", "Per-step covariance residual between two parameterizations");
  covc->add_option("--rule", cov.rule, "naturalized-gd or gd")->check(CLI::IsMember({"naturalized-gd", "gd"}));
  covc->add_option("--pair", cov.pair, "gaussian-kA-kB");
  covc->add_option("--order", cov.order, "Taylor order 1 or 2")->check(CLI::IsMember({1, 2}));
  covc->add_flag("--exact", cov.exact, "Compare function values instead of Taylor approximations");
  covc->add_option("--tolerance", cov.tolerance, "Pass threshold")->check(CLI::PositiveNumber);
  covc->add_option("--probes", cov.probes, "Probe inputs per step")->check(CLI::PositiveNumber);
  add_seed_flags(covc, cov_flags);
  add_fig2_flags(covc, cov_flags);

  auto* th3 = app.add_subcommand("theorem3", "Branch roots of the second-order covariance equations");
  th3->add_option("--beta", beta, "Base point beta");

  auto* self = app.add_subcommand("selfcheck", "Gradient, pseudoinverse, congruence and theorem 3 checks");
  self->add_option("--seed", selfcheck_seed, "Seed");

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kBadFlags;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kBadFlags;
  }

  ExperimentConfig cfg;
  try {
    if (*fig1) cfg = resolve(Variant::Fig1, fig1_flags);
    if (*fig2) cfg = resolve(Variant::Fig2a, fig2_flags);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kBadFlags;
  }

  try {
    if (*fig1) return run_figure(cfg, fig1_flags.out, out);
    if (*fig2) return run_figure(cfg, fig2_flags.out, out);
    if (*covc) return run_covariance(cov_flags, cov, out);
    if (*th3) return run_theorem3(beta, out);
    if (*self) return run_selfcheck(selfcheck_seed, out);
  } catch (const OutputError& e) {
    err << "error: " << e.what() << '\n';
    return kUnwritableOutput;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kBadFlags;
  }
  return kBadFlags;
}

}  // namespace natlearn::cli
