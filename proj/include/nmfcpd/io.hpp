#pragma once

#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "nmfcpd/common.hpp"
#include "nmfcpd/pipeline.hpp"
#include "nmfcpd/preprocess.hpp"
#include "nmfcpd/simulate.hpp"
#include "nmfcpd/version.hpp"

namespace nmfcpd::io {

using json = nlohmann::ordered_json;

struct InputDocument {
  Matrix values;
  std::vector<std::string> names;  // empty when the file had no header
  std::string path;
  char delimiter = ',';
};

struct IngestOptions {
  char delimiter = '\0';  // '\0' = autodetect comma/tab
  enum class Header { Auto, Yes, No } header = Header::Auto;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == delim) {
      cells.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return cells;
}

inline std::optional<double> parse_double(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

/// Shortest decimal string that round-trips the double exactly.
inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace detail

/// Parses a delimited text matrix: rows = time points, columns = variables.
/// Comma/tab autodetected from the first line; an optional header row is
/// recognized when its cells do not parse as numbers.
inline InputDocument ingest(const std::string& path, const IngestOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw ingest_error("cannot open input file: " + path);

  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!detail::trim(line).empty()) lines.push_back(line);
  }
  if (lines.empty()) throw ingest_error("empty input file: " + path);

  InputDocument doc;
  doc.path = path;
  doc.delimiter = options.delimiter != '\0'
                      ? options.delimiter
                      : (lines.front().find('\t') != std::string::npos ? '\t' : ',');

  auto first_cells = detail::split(lines.front(), doc.delimiter);
  const std::size_t n_cols = first_cells.size();

  bool has_header = false;
  if (options.header == IngestOptions::Header::Yes) {
    has_header = true;
  } else if (options.header == IngestOptions::Header::Auto) {
    for (const auto& cell : first_cells) {
      if (!detail::parse_double(cell)) {
        has_header = true;
        break;
      }
    }
  }
  if (has_header) {
    for (const auto& cell : first_cells) doc.names.push_back(detail::trim(cell));
  }

  const std::size_t first_data = has_header ? 1 : 0;
  const std::size_t n_rows = lines.size() - first_data;
  if (n_rows == 0) throw ingest_error("no data rows in input file: " + path);

  doc.values.resize(static_cast<Index>(n_rows), static_cast<Index>(n_cols));
  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto cells = detail::split(lines[first_data + r], doc.delimiter);
    if (cells.size() != n_cols) {
      throw ingest_error("line " + std::to_string(first_data + r + 1) + ": expected " +
                         std::to_string(n_cols) + " columns, got " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < n_cols; ++c) {
      const auto value = detail::parse_double(cells[c]);
      if (!value) {
        throw ingest_error("row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                           ": cannot parse '" + detail::trim(cells[c]) + "' as a number");
      }
      doc.values(static_cast<Index>(r), static_cast<Index>(c)) = *value;
    }
  }
  return doc;
}

template <typename Derived>
void write_delimited(const Eigen::MatrixBase<Derived>& M, const std::string& path,
                     char delimiter = ',') {
  std::ofstream out(path);
  if (!out) throw error("cannot write file: " + path);
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (j) out << delimiter;
      out << detail::format_double(static_cast<double>(M(i, j)));
    }
    out << '\n';
  }
  if (!out) throw error("write failed: " + path);
}

// ---- result documents -----------------------------------------------------

struct ResultDocument {
  json payload;
};

inline json to_json(const DetectorConfig& c) {
  json j;
  j["delta"] = c.delta;
  j["n_run"] = c.n_run;
  j["n_reps"] = c.n_reps;
  j["alpha"] = c.alpha;
  j["loss"] = to_string(c.loss);
  if (c.rank) j["rank"] = *c.rank; else j["rank"] = nullptr;
  j["seed"] = c.seed;
  j["rank_min"] = c.rank_min;
  j["rank_max"] = c.rank_max;
  j["max_iter"] = c.max_iter;
  j["rel_tol"] = c.rel_tol;
  j["refit_fits_per_rep"] = c.refit_fits_per_rep;
  j["fresh_null_permutation"] = c.fresh_null_permutation;
  j["null_calibrated_guard"] = c.null_calibrated_guard;
  j["network_runs"] = c.network_runs;
  return j;
}

inline DetectorConfig config_from_json(const json& j) {
  DetectorConfig c;
  c.delta = j.at("delta").get<long>();
  c.n_run = j.at("n_run").get<int>();
  c.n_reps = j.at("n_reps").get<int>();
  c.alpha = j.at("alpha").get<double>();
  c.loss = j.at("loss").get<std::string>() == "euclidean" ? LossKind::Euclidean : LossKind::KL;
  if (!j.at("rank").is_null()) c.rank = j.at("rank").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.rank_min = j.at("rank_min").get<int>();
  c.rank_max = j.at("rank_max").get<int>();
  c.max_iter = j.at("max_iter").get<int>();
  c.rel_tol = j.at("rel_tol").get<double>();
  c.refit_fits_per_rep = j.at("refit_fits_per_rep").get<int>();
  c.fresh_null_permutation = j.at("fresh_null_permutation").get<bool>();
  c.null_calibrated_guard = j.at("null_calibrated_guard").get<bool>();
  c.network_runs = j.at("network_runs").get<int>();
  return c;
}

inline json to_json(const infer::WelchResult& w) {
  json j;
  j["t_stat"] = w.t_stat;
  j["p_value"] = w.p_value;
  j["df"] = w.df;
  j["mean_observed"] = w.mean_observed;
  j["mean_null"] = w.mean_null;
  j["var_observed"] = w.var_observed;
  j["var_null"] = w.var_null;
  j["n_observed"] = w.n_observed;
  j["n_null"] = w.n_null;
  j["alpha"] = w.alpha;
  j["reject_null"] = w.reject_null;
  return j;
}

inline json to_json(const search::CandidateTrace& t) {
  json steps = json::array();
  for (const auto& s : t.steps) {
    steps.push_back(json{{"x", {s.x_lo, s.x_hi}},
                         {"left", {s.left_lo, s.left_hi}},
                         {"right", {s.right_lo, s.right_hi}},
                         {"left_loss", s.left_loss},
                         {"right_loss", s.right_loss}});
  }
  return json{{"point", t.point}, {"window", {t.window_lo, t.window_hi}}, {"steps", steps}};
}

inline json document_skeleton(const std::string& command,
                              const std::optional<std::string>& timestamp) {
  json j;
  j["schema_version"] = kResultSchemaVersion;
  j["tool"] = json{{"name", kToolName}, {"version", kToolVersion}};
  j["command"] = command;
  if (timestamp) j["timestamp"] = *timestamp;
  return j;
}

inline ResultDocument build_detect_document(const pipeline::DetectionResult& result,
                                            const std::string& input_path,
                                            const std::optional<std::string>& timestamp = std::nullopt) {
  json j = document_skeleton("detect", timestamp);
  j["seed"] = result.config.seed;
  j["config"] = to_json(result.config);
  j["input"] = json{{"path", input_path}, {"rows", result.rows}, {"cols", result.cols},
                    {"shift", result.shift}};

  json rank;
  rank["value"] = result.rank_used;
  rank["selected"] = result.rank_was_selected;
  if (result.rank_search) {
    rank["exhausted"] = result.rank_search->exhausted;
    rank["ranks_tested"] = result.rank_search->ranks_tested;
    json lo = json::object(), lp = json::object();
    for (const auto& [r, loss] : result.rank_search->losses_original) lo[std::to_string(r)] = loss;
    for (const auto& [r, loss] : result.rank_search->losses_permuted) lp[std::to_string(r)] = loss;
    rank["losses_original"] = lo;
    rank["losses_permuted"] = lp;
  }
  j["rank"] = rank;

  json candidates = json::array();
  for (const auto& t : result.candidates.traces) candidates.push_back(to_json(t));
  j["candidates"] = candidates;

  json inference = json::array();
  for (const auto& d : result.confirmation.decisions) {
    json e;
    e["point"] = d.sample.candidate;
    e["left_bound"] = d.sample.left_bound;
    e["right_bound"] = d.sample.right_bound;
    e["degenerate"] = d.sample.degenerate;
    e["kept"] = d.kept;
    if (!d.sample.degenerate) {
      e["welch"] = to_json(d.test);
      if (result.config.null_calibrated_guard) {
        e["null_calibration"] = json{{"z", d.guard.z},
                                     {"df", d.guard.df},
                                     {"p_value", d.guard.p_value},
                                     {"reject", d.guard.reject}};
      }
    }
    inference.push_back(e);
  }
  j["inference"] = inference;

  j["confirmed"] = result.confirmed;  // explicit empty list when nothing confirmed
  return ResultDocument{std::move(j)};
}

inline json to_json(const pipeline::SegmentNetwork& sn, const std::string& sidecar_prefix) {
  json j;
  j["rows"] = {sn.lo, sn.hi};
  j["skipped"] = sn.skipped;
  if (sn.skipped) return j;
  j["consensus_runs_used"] = sn.consensus.n_runs_used;
  j["consensus_file"] = sidecar_prefix + ".consensus.csv";
  if (sn.cut) {
    j["cluster_labels"] = sn.cut->labels;
    j["cluster_adjacency_file"] = sidecar_prefix + ".adjacency_clusters.csv";
    j["cluster_density"] = *sn.cut_density;
  }
  if (sn.thresholded) {
    j["threshold_adjacency_file"] = sidecar_prefix + ".adjacency_lambda.csv";
    j["threshold_density"] = *sn.threshold_density;
  }
  return j;
}

/// Writes the per-segment matrices next to the main document and returns the
/// JSON description referencing them.
inline json emit_networks(const std::vector<pipeline::SegmentNetwork>& nets,
                          const std::string& out_prefix) {
  json arr = json::array();
  for (std::size_t s = 0; s < nets.size(); ++s) {
    const std::string prefix = out_prefix + ".seg" + std::to_string(s + 1);
    const auto& sn = nets[s];
    if (!sn.skipped) {
      write_delimited(sn.consensus.C, prefix + ".consensus.csv");
      if (sn.cut) write_delimited(sn.cut->adjacency, prefix + ".adjacency_clusters.csv");
      if (sn.thresholded) write_delimited(*sn.thresholded, prefix + ".adjacency_lambda.csv");
    }
    arr.push_back(to_json(sn, prefix));
  }
  return arr;
}

inline void emit(const ResultDocument& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw error("cannot write result document: " + path);
  out << doc.payload.dump(2) << '\n';
  if (!out) throw error("write failed: " + path);
}

inline ResultDocument read_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ingest_error("cannot open result document: " + path);
  ResultDocument doc;
  try {
    doc.payload = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ingest_error("malformed result document " + path + ": " + e.what());
  }
  return doc;
}

inline ResultDocument build_simulation_document(const sim::SimulatedData& data,
                                                const std::string& data_path,
                                                const std::optional<std::string>& timestamp = std::nullopt) {
  json j = document_skeleton("simulate", timestamp);
  j["scenario"] = data.scenario.id;
  j["T"] = data.scenario.T;
  j["p"] = data.scenario.p;
  j["change_points"] = data.change_points;
  j["data_file"] = data_path;
  if (!data.scenario.notes.empty()) j["notes"] = data.scenario.notes;
  if (data.max_ridge > 0.0) j["covariance_ridge"] = data.max_ridge;
  json segments = json::array();
  for (const auto& seg : data.scenario.segments) {
    segments.push_back(json{{"length", seg.length},
                            {"labels", seg.covariance.labels},
                            {"structure", seg.covariance.structure == sim::CovStructure::Uniform
                                              ? "uniform"
                                              : "decay"}});
  }
  j["segments"] = segments;
  return ResultDocument{std::move(j)};
}

/// Change points from any supported source: a simulate truth document
/// ("change_points"), a detect result ("confirmed"), or an inline
/// comma-separated list such as "100,200".
inline std::vector<long> parse_change_points(const std::string& spec) {
  const bool inline_list = spec.find_first_not_of("0123456789, \t") == std::string::npos &&
                           spec.find_first_of("0123456789") != std::string::npos;
  std::vector<long> points;
  if (inline_list) {
    std::stringstream ss(spec);
    std::string token;
    while (std::getline(ss, token, ',')) {
      const std::string t = detail::trim(token);
      if (t.empty()) continue;
      points.push_back(std::stol(t));
    }
    return points;
  }
  const ResultDocument doc = read_document(spec);
  const char* key = doc.payload.contains("change_points") ? "change_points" : "confirmed";
  if (!doc.payload.contains(key)) {
    throw ingest_error("document " + spec + " has neither 'change_points' nor 'confirmed'");
  }
  for (const auto& v : doc.payload.at(key)) points.push_back(v.get<long>());
  return points;
}

}  // namespace nmfcpd::io
