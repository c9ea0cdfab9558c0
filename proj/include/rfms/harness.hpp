#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rfms/datamodel.hpp"
#include "rfms/rfms.hpp"

namespace rfms {

enum class DataSource { synthetic, sites, split };
enum class Transport { in_process, tcp };

/// Everything one suite needs. Parsed from a flat `key = value` file:
///
///   data          = synthetic | sites | split
///   sites_dir     = <dir with site_1.csv .. site_5.csv>     (data = sites)
///   data_csv      = <one csv>                               (data = split)
///   split_method  = srs | drc                               (data = split)
///   variance      = 0.1                                     (drc PCA variance fraction)
///   synth_n / synth_p / synth_shift                         (data = synthetic)
///   learners      = elastic_net, random_forest, kernel_svm
///   methods       = lso, fso5, fmo, rand_mo, fmo_th
///   replications  = 10
///   n_initial     = 20
///   n_bo          = 40
///   seed          = 1
///   output        = results/
///   transport     = in_process | tcp
///   scenarios     = 0          (first N scenarios only; 0 keeps all 20)
///   threads       = 1
///   folds         = 10
///   outbag        = 0.2
///   th_threshold / th_sigma / th_gamma                      (thresholdout curators)
struct ExperimentConfig {
  DataSource data = DataSource::synthetic;
  std::filesystem::path sites_dir;
  std::filesystem::path data_csv;
  std::string split_method = "srs";
  double variance = 0.1;
  std::size_t synth_n = 100;
  std::size_t synth_p = 20;
  double synth_shift = 2.0;

  std::vector<LearnerKind> learners{LearnerKind::elastic_net};
  std::vector<MethodSpec> methods;
  std::size_t replications = 10;
  Budget budget;
  std::uint64_t seed = 1;
  std::filesystem::path output = "results";
  Transport transport = Transport::in_process;
  std::size_t scenario_limit = 0;
  std::size_t threads = 1;
  std::size_t folds = 10;
  double outbag_fraction = 0.2;
  ThresholdoutParams thresholdout;

  void validate() const;
  static ExperimentConfig parse(std::istream& in);
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// All ordered (openbox, lockbox) pairs; the other three sites are curators.
std::vector<SiteAssignment> enumerate_scenarios(std::size_t n_sites = 5);

/// Accuracies of one selected model on the three evaluation sets.
struct AccuracyTriple {
  double openbox = 0.0;   // openbox outbag
  double curators = 0.0;  // unweighted mean over curator outbags
  double lockbox = 0.0;
};

struct OutbagScore {
  std::vector<AccuracyTriple> triples;  // one per selected model
  double front_hv = 0.0;                // hypervolume of all triples w.r.t. the origin
  double best_box_hv = 0.0;             // largest single-model box volume
  std::size_t best_box = 0;             // index of that model
};

/// Per-site data of one experiment.
struct ExperimentData {
  SiteAssignment assignment;
  Dataset openbox_inbag;
  Dataset openbox_outbag;
  std::array<Dataset, 3> curator_inbag;
  std::array<Dataset, 3> curator_outbag;
  Dataset lockbox;
};

ExperimentData prepare_experiment(const std::vector<Dataset>& sites, const SiteAssignment& assignment,
                                  double outbag_fraction, std::uint64_t seed);

OutbagScore evaluate_outbag(const std::vector<TrainedModel>& models, const ExperimentData& data);

/// Square matrix over methods: wins[a][b] counts experiments where a beat b,
/// ties counting one half each.
struct WinLossMatrix {
  std::vector<std::string> methods;
  std::vector<std::vector<double>> wins;
  std::size_t experiment_count = 0;
};

inline constexpr double kTieTolerance = 1e-12;

/// Experiments missing any method are skipped.
WinLossMatrix aggregate_winloss(const std::vector<std::string>& methods,
                                const std::vector<std::map<std::string, double>>& experiments);

struct MethodOutcome {
  std::string method;
  bool ok = false;
  std::string error;
  RunResult run;
  OutbagScore score;
};

struct ExperimentResult {
  std::size_t scenario = 0;
  std::size_t replication = 0;
  LearnerKind learner = LearnerKind::elastic_net;
  SiteAssignment assignment;
  std::uint64_t seed = 0;
  std::vector<MethodOutcome> outcomes;  // in config method order

  bool complete() const;
};

/// Loads or generates the five sites described by `config`.
std::vector<Dataset> load_sites(const ExperimentConfig& config);

/// Seed of one (scenario, replication, learner) experiment.
std::uint64_t experiment_seed(std::uint64_t master, std::size_t scenario, std::size_t replication,
                              LearnerKind learner);

/// Runs every method of the config on one scenario and replication. Method
/// failures are caught and recorded in the outcome.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::vector<Dataset>& sites,
                                std::size_t scenario, std::size_t replication, LearnerKind learner);

struct SuiteReport {
  std::vector<ExperimentResult> experiments;
  std::map<std::string, WinLossMatrix> winloss;  // per learner plus "all"
};

/// Runs the whole suite and writes history.csv, results.csv, winloss.csv,
/// manifest.json and hypervolume.svg into config.output.
SuiteReport run_suite(const ExperimentConfig& config);

void write_history_csv(const SuiteReport& report, std::ostream& out);
void write_results_csv(const SuiteReport& report, std::ostream& out);
void write_winloss_csv(const SuiteReport& report, std::ostream& out);
void write_hypervolume_svg(const SuiteReport& report, const ExperimentConfig& config, std::ostream& out);

}  // namespace rfms
