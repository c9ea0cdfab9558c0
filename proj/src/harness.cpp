#include "rfms/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "rfms/curator.hpp"
#include "rfms/error.hpp"
#include "rfms/moo.hpp"
#include "rfms/seeds.hpp"
#include "rfms/sitesim.hpp"

namespace rfms {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(',', start);
    if (end == std::string_view::npos) end = s.size();
    auto item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = end + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw InvalidInput("config: '" + key + "' expects a number, got '" + text + "'");
  return value;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string curator_list(const SiteAssignment& a) {
  return std::to_string(a.curators[0] + 1) + " " + std::to_string(a.curators[1] + 1) + " " +
         std::to_string(a.curators[2] + 1);
}

}  // namespace

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (learners.empty()) throw InvalidInput("config: at least one learner required");
  if (methods.size() < 2) throw InvalidInput("config: at least two methods required for win/loss");
  if (replications < 1) throw InvalidInput("config: replications must be >= 1");
  if (budget.n_initial < 1) throw InvalidInput("config: n_initial must be >= 1");
  if (threads < 1) throw InvalidInput("config: threads must be >= 1");
  if (!(outbag_fraction > 0.0 && outbag_fraction < 1.0)) throw InvalidInput("config: outbag must lie in (0,1)");
  if (data == DataSource::sites && sites_dir.empty()) throw InvalidInput("config: data = sites needs sites_dir");
  if (data == DataSource::split && data_csv.empty()) throw InvalidInput("config: data = split needs data_csv");
  if (split_method != "srs" && split_method != "drc") throw InvalidInput("config: split_method must be srs or drc");
  for (std::size_t i = 0; i < methods.size(); ++i)
    for (std::size_t j = i + 1; j < methods.size(); ++j)
      if (methods[i].name == methods[j].name) throw InvalidInput("config: duplicate method " + methods[i].name);
}

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
  ExperimentConfig c;
  c.methods.clear();
  bool methods_given = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidInput("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(std::string_view(line).substr(0, eq));
    const auto value = trim(std::string_view(line).substr(eq + 1));

    if (key == "data") {
      if (value == "synthetic") c.data = DataSource::synthetic;
      else if (value == "sites") c.data = DataSource::sites;
      else if (value == "split") c.data = DataSource::split;
      else throw InvalidInput("config: unknown data source '" + value + "'");
    } else if (key == "sites_dir") {
      c.sites_dir = value;
    } else if (key == "data_csv") {
      c.data_csv = value;
    } else if (key == "split_method") {
      c.split_method = value;
    } else if (key == "variance") {
      c.variance = parse_number<double>(key, value);
    } else if (key == "synth_n") {
      c.synth_n = parse_number<std::size_t>(key, value);
    } else if (key == "synth_p") {
      c.synth_p = parse_number<std::size_t>(key, value);
    } else if (key == "synth_shift") {
      c.synth_shift = parse_number<double>(key, value);
    } else if (key == "learners") {
      c.learners.clear();
      for (const auto& name : split_list(value)) c.learners.push_back(learner_from_string(name));
    } else if (key == "methods") {
      methods_given = true;
      for (const auto& name : split_list(value)) c.methods.push_back(MethodSpec::parse(name));
    } else if (key == "replications") {
      c.replications = parse_number<std::size_t>(key, value);
    } else if (key == "n_initial") {
      c.budget.n_initial = parse_number<std::size_t>(key, value);
    } else if (key == "n_bo") {
      c.budget.n_bo = parse_number<std::size_t>(key, value);
    } else if (key == "seed") {
      c.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "output") {
      c.output = value;
    } else if (key == "transport") {
      if (value == "in_process") c.transport = Transport::in_process;
      else if (value == "tcp") c.transport = Transport::tcp;
      else throw InvalidInput("config: unknown transport '" + value + "'");
    } else if (key == "scenarios") {
      c.scenario_limit = parse_number<std::size_t>(key, value);
    } else if (key == "threads") {
      c.threads = parse_number<std::size_t>(key, value);
    } else if (key == "folds") {
      c.folds = parse_number<std::size_t>(key, value);
    } else if (key == "outbag") {
      c.outbag_fraction = parse_number<double>(key, value);
    } else if (key == "th_threshold") {
      c.thresholdout.threshold = parse_number<double>(key, value);
    } else if (key == "th_sigma") {
      c.thresholdout.sigma = parse_number<double>(key, value);
    } else if (key == "th_gamma") {
      c.thresholdout.gamma = parse_number<double>(key, value);
    } else {
      throw InvalidInput("config: unknown key '" + key + "'");
    }
  }
  if (!methods_given) c.methods = {MethodSpec::lso(), MethodSpec::fso(0.5), MethodSpec::fmo(), MethodSpec::rand_mo()};
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config " + path.string());
  return parse(in);
}

// ---------------------------------------------------------------------------

std::vector<SiteAssignment> enumerate_scenarios(std::size_t n_sites) {
  if (n_sites != 5) throw InvalidInput("enumerate_scenarios: only five sites are supported");
  std::vector<SiteAssignment> out;
  for (std::size_t ob = 0; ob < n_sites; ++ob) {
    for (std::size_t lb = 0; lb < n_sites; ++lb) {
      if (lb == ob) continue;
      SiteAssignment a;
      a.openbox = ob;
      a.lockbox = lb;
      std::size_t k = 0;
      for (std::size_t s = 0; s < n_sites; ++s)
        if (s != ob && s != lb) a.curators[k++] = s;
      out.push_back(a);
    }
  }
  return out;
}

ExperimentData prepare_experiment(const std::vector<Dataset>& sites, const SiteAssignment& assignment,
                                  double outbag_fraction, std::uint64_t seed) {
  assignment.validate(sites.size());
  ExperimentData d;
  d.assignment = assignment;
  auto cut = [&](std::size_t site, Dataset& inbag, Dataset& outbag) {
    const auto split = stratified_split(sites[site], outbag_fraction, derive_seed(seed, {site}));
    inbag = sites[site].subset(split.inbag);
    outbag = sites[site].subset(split.outbag);
  };
  cut(assignment.openbox, d.openbox_inbag, d.openbox_outbag);
  for (std::size_t c = 0; c < 3; ++c) cut(assignment.curators[c], d.curator_inbag[c], d.curator_outbag[c]);
  d.lockbox = sites[assignment.lockbox];
  return d;
}

OutbagScore evaluate_outbag(const std::vector<TrainedModel>& models, const ExperimentData& data) {
  if (models.empty()) throw InvalidInput("evaluate_outbag: no selected models");
  OutbagScore score;
  std::vector<ObjectiveVector> points;
  for (const auto& model : models) {
    AccuracyTriple t;
    t.openbox = 1.0 - evaluate(model, data.openbox_outbag);
    for (const auto& outbag : data.curator_outbag) t.curators += 1.0 - evaluate(model, outbag);
    t.curators /= 3.0;
    t.lockbox = 1.0 - evaluate(model, data.lockbox);
    score.triples.push_back(t);
    points.push_back({t.openbox, t.curators, t.lockbox});
  }
  if (points.empty()) return score;
  const std::vector<double> origin{0.0, 0.0, 0.0};
  score.front_hv = hypervolume(points, origin);
  score.best_box_hv = -1.0;
  for (std::size_t i = 0; i < score.triples.size(); ++i) {
    const auto& t = score.triples[i];
    const double box = t.openbox * t.curators * t.lockbox;
    if (box > score.best_box_hv) {
      score.best_box_hv = box;
      score.best_box = i;
    }
  }
  return score;
}

WinLossMatrix aggregate_winloss(const std::vector<std::string>& methods,
                                const std::vector<std::map<std::string, double>>& experiments) {
  WinLossMatrix m;
  m.methods = methods;
  m.wins.assign(methods.size(), std::vector<double>(methods.size(), 0.0));
  for (const auto& exp : experiments) {
    const bool complete = std::all_of(methods.begin(), methods.end(), [&](const auto& name) { return exp.contains(name); });
    if (!complete) continue;
    ++m.experiment_count;
    for (std::size_t a = 0; a < methods.size(); ++a) {
      for (std::size_t b = 0; b < methods.size(); ++b) {
        if (a == b) continue;
        const double diff = exp.at(methods[a]) - exp.at(methods[b]);
        if (std::abs(diff) < kTieTolerance) m.wins[a][b] += 0.5;
        else if (diff > 0.0) m.wins[a][b] += 1.0;
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------

bool ExperimentResult::complete() const {
  return std::all_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.ok; });
}

std::vector<Dataset> load_sites(const ExperimentConfig& config) {
  switch (config.data) {
    case DataSource::synthetic:
      return synth_shifted_sites(config.synth_n, config.synth_p, config.synth_shift,
                                 derive_seed(config.seed, SeedStream::sites));
    case DataSource::sites:
      return read_sites(config.sites_dir, 5);
    case DataSource::split: {
      const auto data = read_csv(config.data_csv);
      const auto seed = derive_seed(config.seed, SeedStream::sites);
      if (config.split_method == "drc") {
        DrcOptions options;
        options.variance_fraction = config.variance;
        return drc_split(data, options, seed).sites;
      }
      return srs_split(data, 5, seed).sites;
    }
  }
  throw InvalidInput("load_sites: unknown data source");
}

std::uint64_t experiment_seed(std::uint64_t master, std::size_t scenario, std::size_t replication,
                              LearnerKind learner) {
  return derive_seed(master, {scenario, replication, static_cast<std::uint64_t>(learner)});
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::vector<Dataset>& sites,
                                std::size_t scenario, std::size_t replication, LearnerKind learner) {
  const auto scenarios = enumerate_scenarios(sites.size());
  if (scenario >= scenarios.size()) throw InvalidInput("run_experiment: scenario out of range");
  ExperimentResult result;
  result.scenario = scenario;
  result.replication = replication;
  result.learner = learner;
  result.assignment = scenarios[scenario];
  result.seed = experiment_seed(config.seed, scenario, replication, learner);
  const auto seed = result.seed;

  // Shared by every method: splits, initial design and all stream seeds.
  const ExperimentData data =
      prepare_experiment(sites, result.assignment, config.outbag_fraction, derive_seed(seed, SeedStream::split));
  const auto& space = HyperParamSpace::for_learner(learner);
  const auto design = initial_design(space, config.budget.n_initial, derive_seed(seed, SeedStream::design));

  for (const auto& method : config.methods) {
    MethodOutcome outcome;
    outcome.method = method.name;
    try {
      std::vector<std::unique_ptr<CuratorServer>> servers;
      std::vector<std::shared_ptr<Curator>> curators;
      for (std::size_t c = 0; c < 3; ++c) {
        CuratorStrategy strategy;
        if (method.curator_mode == CuratorStrategy::Kind::thresholdout)
          strategy = CuratorStrategy::thresholdout(config.thresholdout, derive_seed(seed, SeedStream::noise, {c}));
        auto engine = std::make_shared<CuratorEngine>(data.curator_inbag[c], strategy);
        if (config.transport == Transport::tcp) {
          servers.push_back(std::make_unique<CuratorServer>(engine, Endpoint{"127.0.0.1", 0}));
          servers.back()->start();
          curators.push_back(std::make_shared<RemoteCurator>(servers.back()->endpoint()));
        } else {
          curators.push_back(std::make_shared<LocalCurator>(engine));
        }
      }
      FederatedObjective objective(data.openbox_inbag, std::move(curators), derive_seed(seed, SeedStream::cv),
                                   derive_seed(seed, SeedStream::learner), config.folds);
      outcome.run = run_rfms(method, objective, space, config.budget, design, seed);
      outcome.score = evaluate_outbag(outcome.run.models, data);
      outcome.ok = true;
    } catch (const std::exception& e) {
      outcome.error = e.what();
      spdlog::error("scenario {} replication {} {} {}: {}", scenario + 1, replication + 1, to_string(learner),
                    method.name, e.what());
    }
    result.outcomes.push_back(std::move(outcome));
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {

std::map<std::string, WinLossMatrix> build_winloss(const ExperimentConfig& config,
                                                   const std::vector<ExperimentResult>& experiments) {
  std::vector<std::string> names;
  for (const auto& m : config.methods) names.push_back(m.name);
  std::map<std::string, WinLossMatrix> out;
  auto collect = [&](std::optional<LearnerKind> learner) {
    std::vector<std::map<std::string, double>> values;
    for (const auto& exp : experiments) {
      if (learner && exp.learner != *learner) continue;
      if (!exp.complete()) continue;
      std::map<std::string, double> v;
      for (const auto& o : exp.outcomes) v[o.method] = o.score.front_hv;
      values.push_back(std::move(v));
    }
    return aggregate_winloss(names, values);
  };
  for (auto learner : config.learners) out[std::string(to_string(learner))] = collect(learner);
  out["all"] = collect(std::nullopt);
  return out;
}

void write_manifest(const SuiteReport& report, const ExperimentConfig& config, std::ostream& out) {
  nlohmann::ordered_json m;
  m["master_seed"] = config.seed;
  m["data"] = config.data == DataSource::synthetic ? "synthetic" : config.data == DataSource::sites ? "sites" : "split";
  if (config.data == DataSource::synthetic)
    m["synthetic"] = {{"n_per_site", config.synth_n}, {"p", config.synth_p}, {"shift", config.synth_shift}};
  if (config.data == DataSource::sites) m["sites_dir"] = config.sites_dir.string();
  if (config.data == DataSource::split)
    m["split"] = {{"data_csv", config.data_csv.string()}, {"method", config.split_method}, {"variance", config.variance}};
  m["site_seed"] = derive_seed(config.seed, SeedStream::sites);
  auto& learners = m["learners"] = nlohmann::json::array();
  for (auto l : config.learners) learners.push_back(std::string(to_string(l)));
  auto& methods = m["methods"] = nlohmann::json::array();
  for (const auto& s : config.methods) methods.push_back(s.name);
  m["replications"] = config.replications;
  m["budget"] = {{"n_initial", config.budget.n_initial}, {"n_bo", config.budget.n_bo}};
  m["transport"] = config.transport == Transport::tcp ? "tcp" : "in_process";
  m["folds"] = config.folds;
  m["outbag_fraction"] = config.outbag_fraction;
  m["thresholdout"] = {{"threshold", config.thresholdout.threshold},
                       {"sigma", config.thresholdout.sigma},
                       {"gamma", config.thresholdout.gamma}};
  auto& exps = m["experiments"] = nlohmann::json::array();
  auto& excluded = m["excluded"] = nlohmann::json::array();
  for (const auto& e : report.experiments) {
    nlohmann::ordered_json row{{"scenario", e.scenario + 1},
                               {"replication", e.replication + 1},
                               {"learner", std::string(to_string(e.learner))},
                               {"openbox", e.assignment.openbox + 1},
                               {"lockbox", e.assignment.lockbox + 1},
                               {"seed", e.seed}};
    nlohmann::json fallbacks = nlohmann::json::array();
    for (const auto& o : e.outcomes)
      for (const auto& ev : o.run.events) fallbacks.push_back(o.method + ": " + ev);
    if (!fallbacks.empty()) row["events"] = fallbacks;
    exps.push_back(row);
    for (const auto& o : e.outcomes)
      if (!o.ok) {
        auto failed = row;
        failed["method"] = o.method;
        failed["error"] = o.error;
        excluded.push_back(failed);
      }
  }
  out << m.dump(2) << '\n';
}

}  // namespace

void write_history_csv(const SuiteReport& report, std::ostream& out) {
  out << "scenario,replication,learner,method,openbox,lockbox,iteration,phase,config,j_local,j_remote,"
         "j_remote_1,j_remote_2,j_remote_3\n";
  for (const auto& e : report.experiments) {
    for (const auto& o : e.outcomes) {
      if (!o.ok) continue;
      for (const auto& rec : o.run.history) {
        out << e.scenario + 1 << ',' << e.replication + 1 << ',' << to_string(e.learner) << ',' << csv_field(o.method)
            << ',' << e.assignment.openbox + 1 << ',' << e.assignment.lockbox + 1 << ',' << rec.iteration << ','
            << to_string(rec.phase) << ',' << csv_field(rec.config.to_string()) << ',' << format_double(rec.j_local)
            << ',' << format_double(rec.j_remote);
        for (std::size_t c = 0; c < 3; ++c)
          out << ',' << (c < rec.j_remote_per_curator.size() ? format_double(rec.j_remote_per_curator[c]) : "");
        out << '\n';
      }
    }
  }
}

void write_results_csv(const SuiteReport& report, std::ostream& out) {
  out << "scenario,replication,learner,method,openbox,curators,lockbox,n_selected,hv_front,hv_best_box,"
         "acc_openbox,acc_curators,acc_lockbox,best_config\n";
  for (const auto& e : report.experiments) {
    for (const auto& o : e.outcomes) {
      if (!o.ok) continue;
      const auto& best = o.score.triples.at(o.score.best_box);
      out << e.scenario + 1 << ',' << e.replication + 1 << ',' << to_string(e.learner) << ',' << csv_field(o.method)
          << ',' << e.assignment.openbox + 1 << ',' << curator_list(e.assignment) << ',' << e.assignment.lockbox + 1
          << ',' << o.score.triples.size() << ',' << format_double(o.score.front_hv) << ','
          << format_double(o.score.best_box_hv) << ',' << format_double(best.openbox) << ','
          << format_double(best.curators) << ',' << format_double(best.lockbox) << ','
          << csv_field(o.run.selected.at(o.score.best_box).to_string()) << '\n';
    }
  }
}

void write_winloss_csv(const SuiteReport& report, std::ostream& out) {
  for (const auto& [group, m] : report.winloss) {
    out << "learner,method";
    for (const auto& name : m.methods) out << ',' << csv_field(name);
    out << ",experiments\n";
    for (std::size_t a = 0; a < m.methods.size(); ++a) {
      out << group << ',' << csv_field(m.methods[a]);
      for (std::size_t b = 0; b < m.methods.size(); ++b) out << ',' << format_double(m.wins[a][b]);
      out << ',' << m.experiment_count << '\n';
    }
    out << '\n';
  }
}

void write_hypervolume_svg(const SuiteReport& report, const ExperimentConfig& config, std::ostream& out) {
  // Mean front hypervolume per (learner, method) over completed experiments.
  const auto n_learners = config.learners.size();
  const auto n_methods = config.methods.size();
  std::vector<std::vector<double>> mean(n_learners, std::vector<double>(n_methods, 0.0));
  std::vector<std::size_t> count(n_learners, 0);
  for (const auto& e : report.experiments) {
    if (!e.complete()) continue;
    const auto l = static_cast<std::size_t>(
        std::find(config.learners.begin(), config.learners.end(), e.learner) - config.learners.begin());
    ++count[l];
    for (std::size_t m = 0; m < n_methods; ++m) mean[l][m] += e.outcomes[m].score.front_hv;
  }
  double top = 0.0;
  for (std::size_t l = 0; l < n_learners; ++l)
    for (auto& v : mean[l]) {
      if (count[l]) v /= static_cast<double>(count[l]);
      top = std::max(top, v);
    }
  if (top <= 0.0) top = 1.0;

  static constexpr const char* palette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2",
                                            "#59a14f", "#edc948", "#b07aa1", "#ff9da7"};
  const double bar = 28.0, gap = 40.0, plot_h = 240.0, left = 60.0, top_pad = 30.0;
  const double group_w = static_cast<double>(n_methods) * bar;
  const double width = left + static_cast<double>(n_learners) * (group_w + gap) + 160.0;
  const double height = top_pad + plot_h + 60.0;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\">Mean outbag hypervolume</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top_pad + plot_h << "\" x2=\"" << width - 160.0 << "\" y2=\""
      << top_pad + plot_h << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = top * tick / 4.0;
    const double y = top_pad + plot_h - plot_h * tick / 4.0;
    out << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << format_double(std::round(v * 1000) / 1000)
        << "</text>\n";
  }
  for (std::size_t l = 0; l < n_learners; ++l) {
    const double x0 = left + static_cast<double>(l) * (group_w + gap) + gap / 2;
    for (std::size_t m = 0; m < n_methods; ++m) {
      const double h = plot_h * mean[l][m] / top;
      out << "<rect x=\"" << x0 + static_cast<double>(m) * bar << "\" y=\"" << top_pad + plot_h - h << "\" width=\""
          << bar - 4 << "\" height=\"" << h << "\" fill=\"" << palette[m % 8] << "\"><title>"
          << config.methods[m].name << ": " << format_double(mean[l][m]) << "</title></rect>\n";
    }
    out << "<text x=\"" << x0 + group_w / 2 << "\" y=\"" << top_pad + plot_h + 16 << "\" text-anchor=\"middle\">"
        << to_string(config.learners[l]) << " (n=" << count[l] << ")</text>\n";
  }
  const double lx = width - 150.0;
  for (std::size_t m = 0; m < n_methods; ++m) {
    const double y = top_pad + 16.0 * static_cast<double>(m);
    out << "<rect x=\"" << lx << "\" y=\"" << y << "\" width=\"10\" height=\"10\" fill=\"" << palette[m % 8]
        << "\"/><text x=\"" << lx + 16 << "\" y=\"" << y + 9 << "\">" << config.methods[m].name << "</text>\n";
  }
  out << "</svg>\n";
}

SuiteReport run_suite(const ExperimentConfig& config) {
  config.validate();
  const auto sites = load_sites(config);
  auto scenarios = enumerate_scenarios(sites.size()).size();
  if (config.scenario_limit > 0) scenarios = std::min(scenarios, config.scenario_limit);

  struct Job {
    std::size_t scenario, replication;
    LearnerKind learner;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < scenarios; ++s)
    for (std::size_t r = 0; r < config.replications; ++r)
      for (auto learner : config.learners) jobs.push_back({s, r, learner});

  SuiteReport report;
  report.experiments.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
      const auto& job = jobs[i];
      report.experiments[i] = run_experiment(config, sites, job.scenario, job.replication, job.learner);
      spdlog::info("experiment {}/{} done (scenario {}, replication {}, {})", i + 1, jobs.size(), job.scenario + 1,
                   job.replication + 1, to_string(job.learner));
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < std::min(config.threads, jobs.size()); ++t) pool.emplace_back(worker);
    worker();
  }
  report.winloss = build_winloss(config, report.experiments);

  std::filesystem::create_directories(config.output);
  auto open = [&](const char* name) {
    std::ofstream f(config.output / name, std::ios::binary);
    if (!f) throw InvalidInput("cannot write " + (config.output / name).string());
    return f;
  };
  { auto f = open("history.csv"); write_history_csv(report, f); }
  { auto f = open("results.csv"); write_results_csv(report, f); }
  { auto f = open("winloss.csv"); write_winloss_csv(report, f); }
  { auto f = open("manifest.json"); write_manifest(report, config, f); }
  { auto f = open("hypervolume.svg"); write_hypervolume_svg(report, config, f); }
  return report;
}

}  // namespace rfms
