#ifndef NATLEARN_EXPERIMENTS_HPP
#define NATLEARN_EXPERIMENTS_HPP

#include "natlearn/covariance.hpp"
#include "natlearn/gaussian_model.hpp"
#include "natlearn/metric.hpp"
#include "natlearn/naturalize.hpp"
#include "natlearn/rules.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace natlearn {

enum class Variant { Fig1, Fig2a, Fig2b, Fig2c, Fig2d, Fig2e, Fig2f };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& text);  // "fig1", "fig2a".."fig2f", or "a".."f"

enum class EstimationChoice { Pinv, WStar, TwoTimescale };

std::string estimation_name(EstimationChoice m);
EstimationChoice parse_estimation(const std::string& text);

struct ExperimentConfig {
  Variant variant = Variant::Fig1;
  std::uint64_t data_seed = 20180213;
  std::uint64_t run_seed = 7;
  int n_data = 100000;
  double true_mu = 3.0;
  double true_var = 9.0;
  double start_mu = 2.0;
  double start_var = 4.0;
  std::vector<int> k_list{1, 2, 3, 4};
  int iterations = 200000;
  /// Step size of the mean-normalized objective: each data atom carries
  /// alpha / n_data, so alpha = 0.001 reproduces the per-sum step .001/n.
  double alpha = 0.001;
  /// Samples for the sampled Fisher metric; 0 selects the closed-form Fisher
  /// (log-density variants only).
  int fisher_samples = 1000;
  SampleSource fisher_source = SampleSource::Model;
  double uniform_half_width = 5.0;
  EstimationChoice estimation = EstimationChoice::Pinv;
  double secondary_alpha = 0.01;
  int inner_updates = 1;
  int record_every = 100;

  /// Documented defaults for a variant.
  static ExperimentConfig defaults(Variant v);
  void validate() const;
  /// key=value pairs in a fixed order.
  std::vector<std::pair<std::string, std::string>> describe() const;
};

/// n draws from N(mu, var) by inverse CDF on the "data" substream of data_seed.
std::vector<double> generate_dataset(std::uint64_t data_seed, int n, double mu, double var);

struct TrajectoryRecord {
  int iteration = 0;
  int k = 1;
  double mu = 0.0;
  double sigma_sq = 0.0;
  double loglik_per_sample = 0.0;
  bool diverged = false;
};

struct KRun {
  int k = 1;
  std::vector<TrajectoryRecord> records;  // subsampled; always includes 0 and the last iteration
  TrajectoryRecord final_state;
  bool diverged = false;
  int diverged_at = 0;
  int rank_deficient_steps = 0;
  double max_condition = 1.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  DataSummary data;
  double mle_loglik = 0.0;
  std::vector<KRun> runs;
};

GaussianMode figure2_mode(Variant v);
MetricSpec figure2_metric(const ExperimentConfig& cfg);
EstimationMode figure2_estimation(const ExperimentConfig& cfg);
/// Naturalized batch rule of a Figure 2 variant on the given data.
std::shared_ptr<NaturalizedRule> figure2_rule(const ExperimentConfig& cfg, const std::vector<double>& data);

ExperimentResult figure1(const ExperimentConfig& cfg);
ExperimentResult figure2(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// (mu, sigma^{k_from}) -> (mu, sigma^{k_to}) between two Gaussian models.
CongruentPair gaussian_pair(int k_from, int k_to, GaussianMode mode);

/// Per-step first-order covariance of a Figure 2 variant: every k in k_list
/// against the first entry, probes drawn from the data distribution.
struct Figure2Covariance {
  std::vector<int> k;
  std::vector<CovarianceReport> reports;
  double max_residual = 0.0;
};
Figure2Covariance figure2_covariance(const ExperimentConfig& cfg, int steps, int probes, double tolerance,
                                     int order = 1);

// ---------------------------------------------------------------------------
// Output

inline constexpr const char* kCsvHeader = "variant,k,iteration,mu,sigma_sq,loglik_per_sample,diverged";

/// Shortest round-trip decimal form ("%.17g").
std::string format_real(double v);

void write_csv(std::ostream& out, const ExperimentResult& result, const KRun& run);
void write_metadata(std::ostream& out, const ExperimentResult& result);

class OutputError : public Error {
 public:
  using Error::Error;
};

/// Writes <variant>_k<k>.csv per run plus <variant>.meta into dir.
/// Returns the written paths; throws OutputError when dir is unwritable.
std::vector<std::filesystem::path> write_outputs(const std::filesystem::path& dir, const ExperimentResult& result);

std::string library_version();

}  // namespace natlearn

#endif  // NATLEARN_EXPERIMENTS_HPP
