#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mjw/changepoint.hpp"
#include "mjw/errors.hpp"
#include "mjw/io.hpp"
#include "mjw/market_analytics.hpp"
#include "mjw/matrix_analysis.hpp"

namespace mjw {

struct NamedWindow {
  std::string name;
  std::string start;  // ISO dates, snapped to the panel
  std::string end;
};

enum class EmptySetPolicy { exclude, error };

struct PipelineConfig {
  std::string input_csv;
  std::string out_dir = "out";
  SamplerConfig sampler;
  double p = 1.0;
  double q = 1.0;
  std::vector<NamedWindow> windows;
  Linkage linkage = Linkage::average;
  EmptySetPolicy empty_set_policy = EmptySetPolicy::exclude;
  int histogram_bins = 50;
  int pca_window = 45;
  int pca_top_k = 10;
  int trajectory_window = 45;
  bool write_window_correlations = false;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const {
    require(!input_csv.empty(), errc::config_error, "input path is required");
    require(std::filesystem::exists(input_csv), errc::config_error,
            "input file does not exist: " + input_csv);
    require(!out_dir.empty(), errc::config_error, "output directory is required");
    require(p > 0.0, errc::config_error, "p must be positive");
    require(q >= 1.0, errc::config_error, "q must be at least 1");
    require(histogram_bins >= 1, errc::config_error, "histogram bins must be positive");
    require(pca_window >= 3 && trajectory_window >= 1, errc::config_error,
            "window sizes out of range");
    for (const auto& w : windows) {
      require(!w.name.empty(), errc::config_error, "window name must be nonempty");
      parse_iso_date(w.start);
      parse_iso_date(w.end);
    }
  }
};

namespace stage {
constexpr unsigned detect = 1u;
constexpr unsigned distances = 2u;
constexpr unsigned audit = 4u;
constexpr unsigned market = 8u;
constexpr unsigned all = detect | distances | audit | market;
}  // namespace stage

struct RunReport {
  std::string command;
  std::vector<std::pair<std::string, std::string>> outputs;  // path, fnv1a64 checksum
  std::vector<std::string> warnings;
  std::vector<std::string> excluded_series;

  json to_json(const PipelineConfig& cfg) const {
    json outs = json::array();
    for (const auto& [path, sum] : outputs) outs.push_back({{"path", path}, {"fnv1a64", sum}});
    json wins = json::array();
    for (const auto& w : cfg.windows)
      wins.push_back({{"name", w.name}, {"start", w.start}, {"end", w.end}});
    return json{{"command", command},
                {"outputs", outs},
                {"warnings", warnings},
                {"excluded_series", excluded_series},
                {"config",
                 {{"input", cfg.input_csv},
                  {"out", cfg.out_dir},
                  {"p", cfg.p},
                  {"q", cfg.q},
                  {"linkage", linkage_name(cfg.linkage)},
                  {"empty_set_policy",
                   cfg.empty_set_policy == EmptySetPolicy::exclude ? "exclude" : "error"},
                  {"histogram_bins", cfg.histogram_bins},
                  {"pca_window", cfg.pca_window},
                  {"pca_top_k", cfg.pca_top_k},
                  {"trajectory_window", cfg.trajectory_window},
                  {"windows", wins},
                  {"sampler", sampler_config_to_json(cfg.sampler)}}}};
  }
};

namespace detail {

// Parallel fan-out over per-series chains. Each chain draws from a stream
// derived from (seed, series index), so the result is independent of the
// thread schedule.
inline std::vector<Posterior> run_all_chains(const ReturnPanel& returns,
                                             const SamplerConfig& cfg, int threads) {
  const std::size_t n = returns.n_series();
  std::vector<Posterior> posteriors(n);
  std::vector<std::exception_ptr> failures(n);
  unsigned hw = threads > 0 ? static_cast<unsigned>(threads)
                            : std::max(1u, std::thread::hardware_concurrency());
  hw = std::min<unsigned>(hw, static_cast<unsigned>(n));

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        posteriors[i] = run_chain(returns.returns[i], cfg, i);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < hw; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < n; ++i) {
    if (failures[i]) {
      try {
        std::rethrow_exception(failures[i]);
      } catch (const Error& e) {
        raise(e.code(), "series " + returns.tickers[i] + ": " + e.what());
      }
    }
  }
  return posteriors;
}

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path root) : root_(std::move(root)) {}

  std::filesystem::path resolve(const std::string& rel) const { return root_ / rel; }

  void note(const std::string& rel) { written_.push_back(rel); }

  void finalize(RunReport& report) const {
    for (const auto& rel : written_)
      report.outputs.emplace_back(rel, fnv1a64_file_hex(root_ / rel));
  }

  void remove_partials() const {
    std::error_code ec;
    for (const auto& rel : written_) std::filesystem::remove(root_ / rel, ec);
  }

 private:
  std::filesystem::path root_;
  std::vector<std::string> written_;
};

}  // namespace detail

// End-to-end driver: ingest prices, sample change points per series, build
// the distance matrix, audit it, and run the market analytics. Artifacts are
// written under cfg.out_dir; partial outputs are removed if a stage fails.
inline RunReport run_pipeline(const PipelineConfig& cfg, unsigned stages = stage::all,
                              const std::string& command = "all") {
  cfg.validate();
  RunReport report;
  report.command = command;
  WarningLog warnings;

  const std::filesystem::path root(cfg.out_dir);
  std::filesystem::create_directories(root);
  detail::ArtifactWriter writer(root);

  try {
    std::vector<std::string> dropped;
    const PricePanel panel = load_price_csv(cfg.input_csv, &warnings, &dropped);
    const ReturnPanel returns = log_returns(panel);
    const int series_length = static_cast<int>(returns.n_dates());

    if (stages & (stage::detect | stage::distances | stage::audit)) {
      cfg.sampler.validate(returns.n_dates());
      const auto posteriors = detail::run_all_chains(returns, cfg.sampler, cfg.threads);

      std::filesystem::create_directories(root / "posteriors");
      std::vector<std::optional<SetWithUncertainty>> sets(posteriors.size());
      for (std::size_t i = 0; i < posteriors.size(); ++i) {
        const auto doc = make_posterior_document(returns.tickers[i], posteriors[i],
                                                 series_length, cfg.sampler);
        const std::string rel = "posteriors/" + returns.tickers[i] + ".json";
        save_posterior_document(writer.resolve(rel), doc);
        writer.note(rel);
        sets[i] = modal_changepoint_set(posteriors[i], series_length);
      }

      if (stages & (stage::distances | stage::audit)) {
        std::vector<SetWithUncertainty> kept;
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < sets.size(); ++i) {
          if (sets[i]) {
            kept.push_back(*sets[i]);
            labels.push_back(returns.tickers[i]);
          } else if (cfg.empty_set_policy == EmptySetPolicy::error) {
            raise(errc::empty_member_set,
                  "series has no interior change points at the modal count: " +
                      returns.tickers[i]);
          } else {
            report.excluded_series.push_back(returns.tickers[i]);
            warnings.add("excluded series with no interior change points: " +
                         returns.tickers[i]);
          }
        }
        require(kept.size() >= 2, errc::empty_collection,
                "fewer than two series with change points; no distance matrix");
        const DistanceMatrix dmat = distance_matrix(kept, labels, series_length, cfg.p, cfg.q);
        save_distance_matrix_csv(writer.resolve("distance_matrix.csv"), dmat);
        writer.note("distance_matrix.csv");

        if (stages & stage::audit) {
          json norms{{"l1", matrix_norm(dmat, NormKind::l1)},
                     {"l2", matrix_norm(dmat, NormKind::l2)},
                     {"operator", matrix_norm(dmat, NormKind::op)},
                     {"percent_fails", nullptr},
                     {"average_fail", nullptr}};
          if (dmat.n() >= 3) {
            const TriangleTestSummary tri = triangle_test(dmat);
            save_triangle_summary_json(writer.resolve("triangle_test.json"), tri);
            writer.note("triangle_test.json");
            save_triangle_triples_csv(writer.resolve("triangle_triples.csv"), dmat, tri);
            writer.note("triangle_triples.csv");
            norms["percent_fails"] = 100.0 * tri.fail_fraction;
            norms["average_fail"] =
                tri.mean_fail_ratio ? json(*tri.mean_fail_ratio) : json(nullptr);
          } else {
            warnings.add("triangle test skipped: fewer than three series");
          }
          write_file(writer.resolve("matrix_norms.json"), norms.dump(2) + "\n");
          writer.note("matrix_norms.json");

          const Dendrogram dendro = hierarchical_cluster(dmat, cfg.linkage);
          save_dendrogram_csv(writer.resolve("dendrogram.csv"), dendro);
          writer.note("dendrogram.csv");
        }
      }
    }

    if (stages & stage::market) {
      for (const auto& w : cfg.windows) {
        const WindowSpec ws = resolve_window(returns.dates, w.start, w.end);
        const Matrix rho = correlation_matrix(returns, ws, &warnings);
        const Histogram hist = correlation_histogram(rho, cfg.histogram_bins);
        const std::string rel = "correlation_histogram_" + w.name + ".csv";
        save_histogram_csv(writer.resolve(rel), hist);
        writer.note(rel);
        if (cfg.write_window_correlations) {
          const std::string mrel = "correlation_matrix_" + w.name + ".csv";
          save_labeled_matrix_csv(writer.resolve(mrel), returns.tickers, rho);
          writer.note(mrel);
        }
      }
      const auto spectrum = rolling_pca(returns, cfg.pca_window, cfg.pca_top_k, &warnings);
      save_pca_spectrum_csv(writer.resolve("pca_spectrum.csv"), returns.dates, spectrum);
      writer.note("pca_spectrum.csv");

      const auto norms = rolling_trajectory_norm(panel, cfg.trajectory_window);
      save_norm_series_csv(writer.resolve("trajectory_norms.csv"), panel.dates, norms);
      writer.note("trajectory_norms.csv");
    }

    report.warnings = warnings.entries;
    writer.finalize(report);
    write_file(root / "run_report.json", report.to_json(cfg).dump(2) + "\n");
    return report;
  } catch (...) {
    writer.remove_partials();
    throw;
  }
}

inline unsigned stages_for_command(const std::string& command) {
  if (command == "detect") return stage::detect;
  if (command == "distances") return stage::detect | stage::distances;
  if (command == "audit") return stage::detect | stage::distances | stage::audit;
  if (command == "market") return stage::market;
  if (command == "all") return stage::all;
  raise(errc::config_error, "unknown command: " + command);
}

}  // namespace mjw
