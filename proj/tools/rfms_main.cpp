// rfms command line: suites, site simulation and standalone curators.
#include <csignal>
#include <pthread.h>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "rfms/curator.hpp"
#include "rfms/harness.hpp"
#include "rfms/seeds.hpp"
#include "rfms/sitesim.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Restrictive federated model selection"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log", log_level, "trace|debug|info|warn|error|off");

  auto* run = app.add_subcommand("run", "run an experiment suite");
  std::string config_path;
  run->add_option("--config", config_path, "key = value config file")->required()->check(CLI::ExistingFile);

  auto* split = app.add_subcommand("split", "cut one csv into five sites");
  std::string split_method = "srs", data_path, out_dir;
  double variance = 0.1;
  std::uint64_t split_seed = 1;
  split->add_option("--method", split_method)->check(CLI::IsMember({"srs", "drc"}));
  split->add_option("--variance", variance, "PCA variance fraction for drc");
  split->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  split->add_option("--out", out_dir)->required();
  split->add_option("--seed", split_seed);

  auto* synth = app.add_subcommand("synth", "generate five shifted synthetic sites");
  std::size_t n_sites = 5, n = 100, p = 50;
  double shift = 2.0;
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  synth->add_option("--sites", n_sites)->check(CLI::IsMember({5}));
  synth->add_option("--n", n, "rows per site");
  synth->add_option("--p", p, "features");
  synth->add_option("--shift", shift, "norm of each site's mean offset");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out", synth_out)->required();

  auto* curator = app.add_subcommand("curator", "serve one site as a curator over TCP");
  std::string curator_data, bind = "127.0.0.1:0", strategy = "honest";
  std::uint64_t curator_seed = 1;
  rfms::ThresholdoutParams th;
  curator->add_option("--data", curator_data, "inbag csv")->required()->check(CLI::ExistingFile);
  curator->add_option("--bind", bind, "host:port");
  curator->add_option("--strategy", strategy)->check(CLI::IsMember({"honest", "thresholdout"}));
  curator->add_option("--seed", curator_seed);
  curator->add_option("--threshold", th.threshold);
  curator->add_option("--sigma", th.sigma);
  curator->add_option("--gamma", th.gamma);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*run) {
      const auto config = rfms::ExperimentConfig::load(config_path);
      const auto report = rfms::run_suite(config);
      std::size_t failed = 0;
      for (const auto& e : report.experiments) failed += e.complete() ? 0 : 1;
      std::cout << report.experiments.size() << " experiments, " << failed << " with failures; output in "
                << config.output.string() << '\n';
    } else if (*split) {
      const auto data = rfms::read_csv(data_path);
      const auto seed = rfms::derive_seed(split_seed, rfms::SeedStream::sites);
      rfms::SiteSplit sites;
      if (split_method == "drc") {
        rfms::DrcOptions options;
        options.variance_fraction = variance;
        sites = rfms::drc_split(data, options, seed);
      } else {
        sites = rfms::srs_split(data, 5, seed);
      }
      rfms::write_sites(sites.sites, out_dir,
                        {{"method", split_method}, {"source", data_path}, {"seed", std::to_string(split_seed)},
                         {"variance", rfms::format_double(variance)}});
    } else if (*synth) {
      const auto sites = rfms::synth_shifted_sites(n, p, shift, rfms::derive_seed(synth_seed, rfms::SeedStream::sites));
      rfms::write_sites(sites, synth_out,
                        {{"method", "synthetic"}, {"n", std::to_string(n)}, {"p", std::to_string(p)},
                         {"shift", rfms::format_double(shift)}, {"seed", std::to_string(synth_seed)}});
    } else if (*curator) {
      auto data = rfms::read_csv(curator_data);
      rfms::CuratorStrategy s;
      if (strategy == "thresholdout") s = rfms::CuratorStrategy::thresholdout(th, curator_seed);
      auto engine = std::make_shared<rfms::CuratorEngine>(std::move(data), s);
      // Block the stop signals before any thread starts so only sigwait sees them.
      sigset_t stop_signals;
      sigemptyset(&stop_signals);
      sigaddset(&stop_signals, SIGINT);
      sigaddset(&stop_signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
      rfms::CuratorServer server(engine, rfms::Endpoint::parse(bind));
      server.start();
      std::cout << "listening on " << server.endpoint().to_string() << std::endl;
      int received = 0;
      sigwait(&stop_signals, &received);
      server.stop();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return EXIT_FAILURE;
  }
  return EXIT_SUCCESS;
}
