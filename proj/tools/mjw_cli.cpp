// Command line driver for the change point distance pipeline.
//
// Subcommands mirror the pipeline stages: `detect` samples change points,
// `distances` adds the MJ-Wasserstein distance matrix, `audit` adds matrix
// norms, the triangle inequality test and clustering, `market` runs the
// correlation/PCA/trajectory analytics, and `all` runs everything.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mjw/pipeline.hpp"

namespace {

int exit_code_for(mjw::errc code) {
  switch (code) {
    case mjw::errc::config_error:
      return 2;
    case mjw::errc::numerical_failure:
      return 4;
    default:
      return 3;  // data errors
  }
}

mjw::NamedWindow parse_window_spec(const std::string& text) {
  const auto eq = text.find('=');
  const auto dots = text.find("..");
  mjw::require(eq != std::string::npos && dots != std::string::npos && dots > eq,
               mjw::errc::config_error,
               "window must look like NAME=YYYY-MM-DD..YYYY-MM-DD, got '" + text + "'");
  mjw::NamedWindow w;
  w.name = text.substr(0, eq);
  w.start = text.substr(eq + 1, dots - eq - 1);
  w.end = text.substr(dots + 2);
  return w;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structural-break similarity toolkit: Bayesian change point "
               "detection, MJ-Wasserstein distance matrices, and market dynamics "
               "analytics"};
  app.set_config("--config", "", "Configuration file (INI/TOML); command line flags win");
  app.require_subcommand(1);

  mjw::PipelineConfig cfg;
  std::vector<std::string> window_args;
  std::string linkage = "average";
  std::string empty_policy = "exclude";

  app.add_option("--input", cfg.input_csv, "Wide-format price CSV (date column + tickers)");
  app.add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
  app.add_option("--seed", cfg.sampler.seed, "Root seed for all randomness")
      ->capture_default_str();
  app.add_option("--p", cfg.p, "MJ order p")->capture_default_str();
  app.add_option("--q", cfg.q, "Wasserstein order q")->capture_default_str();
  app.add_option("--window", window_args,
                 "Named analysis window NAME=START..END (ISO dates); repeatable");
  app.add_option("--linkage", linkage, "Clustering linkage: average|single|complete")
      ->capture_default_str();
  app.add_option("--empty-set-policy", empty_policy,
                 "Series without change points: exclude|error")
      ->capture_default_str();
  app.add_option("--iterations", cfg.sampler.n_iterations, "Sampler iterations")
      ->capture_default_str();
  app.add_option("--burnin", cfg.sampler.n_burnin, "Burn-in iterations")->capture_default_str();
  app.add_option("--tmin", cfg.sampler.t_min, "Minimum segment length")->capture_default_str();
  app.add_option("--max-segments", cfg.sampler.max_segments, "Maximum segment count")
      ->capture_default_str();
  app.add_option("--basis", cfg.sampler.n_basis, "Spline basis functions per segment")
      ->capture_default_str();
  app.add_option("--bins", cfg.histogram_bins, "Correlation histogram bins")
      ->capture_default_str();
  app.add_option("--pca-window", cfg.pca_window, "Rolling PCA window")->capture_default_str();
  app.add_option("--trajectory-window", cfg.trajectory_window, "Rolling trajectory window")
      ->capture_default_str();
  app.add_option("--threads", cfg.threads, "Worker threads (0 = hardware)")
      ->capture_default_str();
  app.add_flag("--write-correlations", cfg.write_window_correlations,
               "Also write the full correlation matrix per window");

  for (const char* name : {"detect", "distances", "audit", "market", "all"})
    app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (linkage == "average") {
      cfg.linkage = mjw::Linkage::average;
    } else if (linkage == "single") {
      cfg.linkage = mjw::Linkage::single;
    } else if (linkage == "complete") {
      cfg.linkage = mjw::Linkage::complete;
    } else {
      mjw::raise(mjw::errc::config_error, "unknown linkage: " + linkage);
    }
    if (empty_policy == "exclude") {
      cfg.empty_set_policy = mjw::EmptySetPolicy::exclude;
    } else if (empty_policy == "error") {
      cfg.empty_set_policy = mjw::EmptySetPolicy::error;
    } else {
      mjw::raise(mjw::errc::config_error, "unknown empty-set policy: " + empty_policy);
    }
    for (const auto& w : window_args) cfg.windows.push_back(parse_window_spec(w));

    const mjw::RunReport report =
        mjw::run_pipeline(cfg, mjw::stages_for_command(command), command);
    std::printf("wrote %zu artifacts to %s\n", report.outputs.size(), cfg.out_dir.c_str());
    for (const auto& w : report.warnings) std::printf("warning: %s\n", w.c_str());
    return 0;
  } catch (const mjw::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
}
