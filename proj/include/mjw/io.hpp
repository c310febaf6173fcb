#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mjw/changepoint.hpp"
#include "mjw/density.hpp"
#include "mjw/errors.hpp"
#include "mjw/market_analytics.hpp"
#include "mjw/matrix_analysis.hpp"

namespace mjw {

using nlohmann::json;

// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(), errc::parse_error,
          "bad numeric field '" + std::string(s) + "' at " + where);
  return v;
}

// FNV-1a 64-bit, used for the run report's output checksums.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), errc::parse_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), errc::config_error, "cannot write " + path.string());
  out << contents;
  out.close();
  require(out.good(), errc::config_error, "failed writing " + path.string());
}

inline std::string fnv1a64_file_hex(const std::filesystem::path& path) {
  std::uint64_t h = fnv1a64(read_file(path));
  char buf[17];
  static const char* hexd = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = hexd[h & 0xf];
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline bool is_missing_field(std::string_view s) {
  if (s.empty()) return true;
  std::string low(s);
  for (char& c : low) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return low == "na" || low == "nan" || low == "null";
}

}  // namespace detail

// --- density / posterior JSON ------------------------------------------------

inline json density_to_json(const DiscreteDensity& d) {
  return json{{"points", d.points()}, {"masses", d.masses()}};
}

inline DiscreteDensity density_from_json(const json& j) {
  return DiscreteDensity(j.at("points").get<std::vector<double>>(),
                         j.at("masses").get<std::vector<double>>());
}

inline json sampler_config_to_json(const SamplerConfig& cfg) {
  return json{{"t_min", cfg.t_min},
              {"max_segments", cfg.max_segments},
              {"n_iterations", cfg.n_iterations},
              {"n_burnin", cfg.n_burnin},
              {"n_basis", cfg.n_basis},
              {"prior_scale", cfg.prior_scale},
              {"ig_shape", cfg.ig_shape},
              {"intercept_prior_var", cfg.intercept_prior_var},
              {"mixture_weight", cfg.mixture_weight},
              {"seed", cfg.seed}};
}

inline SamplerConfig sampler_config_from_json(const json& j) {
  SamplerConfig cfg;
  cfg.t_min = j.at("t_min").get<int>();
  cfg.max_segments = j.at("max_segments").get<int>();
  cfg.n_iterations = j.at("n_iterations").get<int>();
  cfg.n_burnin = j.at("n_burnin").get<int>();
  cfg.n_basis = j.at("n_basis").get<int>();
  cfg.prior_scale = j.at("prior_scale").get<double>();
  cfg.ig_shape = j.at("ig_shape").get<double>();
  cfg.intercept_prior_var = j.at("intercept_prior_var").get<double>();
  cfg.mixture_weight = j.at("mixture_weight").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

// Persisted summary of one series' change point posterior.
struct PosteriorDocument {
  std::string series_id;
  std::vector<std::uint64_t> m_histogram;  // indexed by m, entry 0 unused
  int modal_m = 0;
  std::vector<DiscreteDensity> changepoints;  // empty when modal_m == 1
  double acceptance_birth = 0.0, acceptance_death = 0.0;
  double acceptance_within = 0.0, acceptance_gibbs = 0.0;
  SamplerConfig config_echo;

  bool operator==(const PosteriorDocument& o) const {
    return series_id == o.series_id && m_histogram == o.m_histogram && modal_m == o.modal_m &&
           changepoints == o.changepoints && acceptance_birth == o.acceptance_birth &&
           acceptance_death == o.acceptance_death && acceptance_within == o.acceptance_within &&
           acceptance_gibbs == o.acceptance_gibbs &&
           sampler_config_to_json(config_echo) == sampler_config_to_json(o.config_echo);
  }
};

inline PosteriorDocument make_posterior_document(const std::string& series_id,
                                                 const Posterior& post, int series_length,
                                                 const SamplerConfig& cfg) {
  PosteriorDocument doc;
  doc.series_id = series_id;
  doc.m_histogram = post.m_histogram;
  doc.modal_m = post.modal_m();
  if (auto set = modal_changepoint_set(post, series_length)) doc.changepoints = set->members();
  doc.acceptance_birth = post.birth.rate();
  doc.acceptance_death = post.death.rate();
  doc.acceptance_within = post.within.rate();
  doc.acceptance_gibbs = post.gibbs.rate();
  doc.config_echo = cfg;
  return doc;
}

inline json posterior_document_to_json(const PosteriorDocument& doc) {
  json cps = json::array();
  for (const auto& d : doc.changepoints) cps.push_back(density_to_json(d));
  return json{{"series_id", doc.series_id},
              {"m_histogram", doc.m_histogram},
              {"modal_m", doc.modal_m},
              {"changepoints", cps},
              {"acceptance_rates",
               {{"birth", doc.acceptance_birth},
                {"death", doc.acceptance_death},
                {"within", doc.acceptance_within},
                {"gibbs", doc.acceptance_gibbs}}},
              {"config_echo", sampler_config_to_json(doc.config_echo)}};
}

inline PosteriorDocument posterior_document_from_json(const json& j) {
  PosteriorDocument doc;
  doc.series_id = j.at("series_id").get<std::string>();
  doc.m_histogram = j.at("m_histogram").get<std::vector<std::uint64_t>>();
  doc.modal_m = j.at("modal_m").get<int>();
  for (const auto& cj : j.at("changepoints")) doc.changepoints.push_back(density_from_json(cj));
  const auto& acc = j.at("acceptance_rates");
  doc.acceptance_birth = acc.at("birth").get<double>();
  doc.acceptance_death = acc.at("death").get<double>();
  doc.acceptance_within = acc.at("within").get<double>();
  doc.acceptance_gibbs = acc.at("gibbs").get<double>();
  doc.config_echo = sampler_config_from_json(j.at("config_echo"));
  return doc;
}

inline void save_posterior_document(const std::filesystem::path& path,
                                    const PosteriorDocument& doc) {
  write_file(path, posterior_document_to_json(doc).dump(2) + "\n");
}

inline PosteriorDocument load_posterior_document(const std::filesystem::path& path) {
  return posterior_document_from_json(json::parse(read_file(path)));
}

// --- distance matrix CSV ------------------------------------------------------

inline void save_distance_matrix_csv(const std::filesystem::path& path, const DistanceMatrix& d) {
  std::ostringstream out;
  out << "label";
  for (const auto& l : d.labels()) out << ',' << l;
  out << '\n';
  for (std::size_t i = 0; i < d.n(); ++i) {
    out << d.labels()[i];
    for (std::size_t j = 0; j < d.n(); ++j) out << ',' << format_double(d(i, j));
    out << '\n';
  }
  write_file(path, out.str());
}

inline DistanceMatrix load_distance_matrix_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), errc::parse_error,
          "empty distance matrix file " + path.string());
  auto header = detail::split_csv_line(line);
  require(header.size() >= 2, errc::parse_error, "distance matrix header too short");
  std::vector<std::string> labels(header.begin() + 1, header.end());
  const std::size_t n = labels.size();
  std::vector<double> values;
  values.reserve(n * n);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line);
    require(fields.size() == n + 1, errc::parse_error,
            "row " + std::to_string(row + 2) + ": expected " + std::to_string(n + 1) + " fields");
    require(fields[0] == labels[row], errc::parse_error,
            "row label mismatch at row " + std::to_string(row + 2));
    for (std::size_t j = 1; j < fields.size(); ++j)
      values.push_back(parse_double(fields[j], "row " + std::to_string(row + 2)));
    ++row;
  }
  require(row == n, errc::parse_error, "distance matrix row count mismatch");
  return DistanceMatrix(std::move(labels), std::move(values));
}

// --- general labeled matrix CSV (correlation matrices) -------------------------

inline void save_labeled_matrix_csv(const std::filesystem::path& path,
                                    const std::vector<std::string>& labels, const Matrix& m) {
  std::ostringstream out;
  out << "label";
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out << labels[i];
    for (std::size_t j = 0; j < m.cols(); ++j) out << ',' << format_double(m(i, j));
    out << '\n';
  }
  write_file(path, out.str());
}

// --- dendrogram / histogram / series CSV ---------------------------------------

inline void save_dendrogram_csv(const std::filesystem::path& path, const Dendrogram& d) {
  std::ostringstream out;
  out << "step,left,right,height\n";
  for (std::size_t s = 0; s < d.merges.size(); ++s)
    out << s << ',' << d.merges[s].left << ',' << d.merges[s].right << ','
        << format_double(d.merges[s].height) << '\n';
  write_file(path, out.str());
}

inline void save_histogram_csv(const std::filesystem::path& path, const Histogram& h) {
  std::ostringstream out;
  out << "bin_left,bin_right,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b)
    out << format_double(h.edges[b]) << ',' << format_double(h.edges[b + 1]) << ',' << h.counts[b]
        << '\n';
  write_file(path, out.str());
}

inline void save_pca_spectrum_csv(const std::filesystem::path& path,
                                  const std::vector<std::string>& dates,
                                  const std::vector<PcaSpectrumPoint>& points) {
  std::ostringstream out;
  const std::size_t k = points.empty() ? 0 : points.front().mu.size();
  out << "date";
  for (std::size_t i = 1; i <= k; ++i) out << ",mu_" << i;
  out << '\n';
  for (const auto& p : points) {
    out << dates[p.t];
    for (double mu : p.mu) out << ',' << format_double(mu);
    out << '\n';
  }
  write_file(path, out.str());
}

inline void save_norm_series_csv(const std::filesystem::path& path,
                                 const std::vector<std::string>& dates,
                                 const std::vector<NormSeriesPoint>& points) {
  std::ostringstream out;
  out << "date,value\n";
  for (const auto& p : points) out << dates[p.t] << ',' << format_double(p.value) << '\n';
  write_file(path, out.str());
}

inline void save_triangle_summary_json(const std::filesystem::path& path,
                                       const TriangleTestSummary& t) {
  json j{{"fail_fraction", t.fail_fraction},
         {"mean_fail_ratio", t.mean_fail_ratio ? json(*t.mean_fail_ratio) : json(nullptr)},
         {"counts",
          {{"blue", t.blue}, {"yellow", t.yellow}, {"red", t.red}, {"skipped", t.skipped}}}};
  write_file(path, j.dump(2) + "\n");
}

// Full ordered-triple dump, one row per classified triple.
inline void save_triangle_triples_csv(const std::filesystem::path& path, const DistanceMatrix& d,
                                      const TriangleTestSummary& t) {
  static const char* names[] = {"blue", "yellow", "red", "skipped"};
  std::ostringstream out;
  out << "i,j,k,ratio,class\n";
  for (std::size_t i = 0; i < t.n; ++i)
    for (std::size_t j = 0; j < t.n; ++j)
      for (std::size_t k = 0; k < t.n; ++k) {
        if (i == j || j == k || i == k) continue;
        const auto cls = t.at(i, j, k);
        const double denom = d(i, j) + d(j, k);
        out << i << ',' << j << ',' << k << ','
            << (denom > 0.0 ? format_double(d(i, k) / denom) : std::string("")) << ','
            << names[static_cast<int>(cls)] << '\n';
      }
  write_file(path, out.str());
}

// --- price panel CSV ------------------------------------------------------------

// Wide-format CSV: first column ISO dates, one column per ticker. Missing
// cells are forward-filled; tickers missing their first value are dropped and
// reported. Parse failures name the offending row and column.
inline PricePanel load_price_csv(const std::filesystem::path& path, WarningLog* warnings = nullptr,
                                 std::vector<std::string>* dropped = nullptr) {
  std::istringstream in(read_file(path));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), errc::parse_error,
          "empty price file " + path.string());
  auto header = detail::split_csv_line(line);
  require(header.size() >= 2, errc::parse_error, "price file needs a date and a ticker column");
  std::vector<std::string> tickers(header.begin() + 1, header.end());
  const std::size_t n = tickers.size();

  std::vector<std::string> dates;
  std::vector<std::vector<double>> cols(n);  // per ticker
  std::vector<std::vector<bool>> have(n);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = detail::split_csv_line(line);
    require(fields.size() == n + 1, errc::parse_error,
            "row " + std::to_string(lineno) + ": expected " + std::to_string(n + 1) +
                " fields, got " + std::to_string(fields.size()));
    require(!fields[0].empty(), errc::parse_error,
            "row " + std::to_string(lineno) + ": missing date");
    if (!dates.empty())
      require(fields[0] > dates.back(), errc::unsorted_dates,
              "row " + std::to_string(lineno) + ": dates not strictly increasing");
    dates.push_back(fields[0]);
    for (std::size_t c = 0; c < n; ++c) {
      if (detail::is_missing_field(fields[c + 1])) {
        cols[c].push_back(0.0);
        have[c].push_back(false);
      } else {
        const double v = parse_double(
            fields[c + 1], "row " + std::to_string(lineno) + ", column " + tickers[c]);
        require(v > 0.0, errc::non_positive_price,
                "row " + std::to_string(lineno) + ", column " + tickers[c] +
                    ": price must be positive");
        cols[c].push_back(v);
        have[c].push_back(true);
      }
    }
  }
  require(dates.size() >= 2, errc::series_too_short, "price file needs at least two dates");

  PricePanel panel;
  panel.dates = std::move(dates);
  for (std::size_t c = 0; c < n; ++c) {
    if (!have[c].empty() && !have[c][0]) {
      if (dropped) dropped->push_back(tickers[c]);
      if (warnings) warnings->add("dropped ticker with missing first value: " + tickers[c]);
      continue;
    }
    bool filled = false;
    for (std::size_t t = 1; t < cols[c].size(); ++t) {
      if (!have[c][t]) {
        cols[c][t] = cols[c][t - 1];
        filled = true;
      }
    }
    if (filled && warnings) warnings->add("forward-filled gaps in ticker: " + tickers[c]);
    panel.tickers.push_back(tickers[c]);
    panel.prices.push_back(std::move(cols[c]));
  }
  require(!panel.tickers.empty(), errc::empty_collection,
          "no ticker survived the missing-data policy");
  panel.validate();
  return panel;
}

// --- calendar dates ---------------------------------------------------------------

// Days since the civil epoch for an ISO date; used only to snap configured
// window endpoints to the nearest date present in a panel.
inline std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline std::int64_t parse_iso_date(const std::string& s) {
  require(s.size() == 10 && s[4] == '-' && s[7] == '-', errc::parse_error,
          "dates must be ISO YYYY-MM-DD, got '" + s + "'");
  const int y = std::stoi(s.substr(0, 4));
  const int m = std::stoi(s.substr(5, 2));
  const int d = std::stoi(s.substr(8, 2));
  require(m >= 1 && m <= 12 && d >= 1 && d <= 31, errc::parse_error, "invalid date '" + s + "'");
  return days_from_civil(y, m, d);
}

// Index of the panel date nearest to the target; ties resolve to the earlier
// date.
inline std::size_t snap_to_nearest_date(const std::vector<std::string>& dates,
                                        const std::string& target) {
  require(!dates.empty(), errc::empty_collection, "no dates to snap to");
  const std::int64_t want = parse_iso_date(target);
  std::size_t best = 0;
  std::int64_t best_dist = std::numeric_limits<std::int64_t>::max();
  for (std::size_t i = 0; i < dates.size(); ++i) {
    const std::int64_t dist = std::llabs(parse_iso_date(dates[i]) - want);
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  return best;
}

inline WindowSpec resolve_window(const std::vector<std::string>& dates, const std::string& start,
                                 const std::string& end) {
  WindowSpec w;
  w.a = snap_to_nearest_date(dates, start);
  w.b = snap_to_nearest_date(dates, end);
  require(w.a <= w.b, errc::config_error,
          "window resolves to an empty range: " + start + ".." + end);
  return w;
}

}  // namespace mjw
