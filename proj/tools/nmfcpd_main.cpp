// Command-line front end: detect / rank / estimate-net / simulate / evaluate.
//
// Exit codes: 0 success, 2 configuration error, 3 ingestion error,
// 4 numerical failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <iostream>
#include <optional>
#include <string>

#include "nmfcpd/nmfcpd.hpp"

namespace {

using namespace nmfcpd;

std::string sidecar_prefix(const std::string& out) {
  if (out.size() > 5 && out.substr(out.size() - 5) == ".json") {
    return out.substr(0, out.size() - 5);
  }
  return out;
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct CommonOpts {
  std::string preset = "paper";
  long delta = -1;
  int n_run = -1;
  int n_reps = -1;
  double alpha = -1.0;
  int rank = 0;
  std::string loss = "kl";
  std::uint64_t seed = 1;
  int rank_min = 0;
  int rank_max = 0;
  int net_runs = 0;
  bool stamp = false;
};

DetectorConfig resolve_config(const CommonOpts& o) {
  DetectorConfig c = o.preset == "desk" ? DetectorConfig::desk_preset()
                                        : DetectorConfig::paper_preset();
  if (o.delta > 0) c.delta = o.delta;
  if (o.n_run > 0) c.n_run = o.n_run;
  if (o.n_reps > 0) c.n_reps = o.n_reps;
  if (o.alpha > 0.0) c.alpha = o.alpha;
  if (o.rank > 0) c.rank = o.rank;
  if (o.rank_min > 0) c.rank_min = o.rank_min;
  if (o.rank_max > 0) c.rank_max = o.rank_max;
  if (o.net_runs > 0) c.network_runs = o.net_runs;
  c.loss = o.loss == "euclidean" ? LossKind::Euclidean : LossKind::KL;
  c.seed = o.seed;
  return c;
}

void add_common_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--preset", o.preset, "parameter preset")
      ->check(CLI::IsMember({"paper", "desk"}))
      ->capture_default_str();
  cmd->add_option("--delta", o.delta, "minimum distance between change points");
  cmd->add_option("--nrun", o.n_run, "NMF restarts per block fit");
  cmd->add_option("--nreps", o.n_reps, "refit repetitions per candidate");
  cmd->add_option("--alpha", o.alpha, "significance level of the Welch test");
  cmd->add_option("--rank", o.rank, "fixed factorization rank (otherwise selected)");
  cmd->add_option("--loss", o.loss, "reconstruction loss")
      ->check(CLI::IsMember({"euclidean", "kl"}))
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "master seed")->capture_default_str();
  cmd->add_option("--rank-min", o.rank_min, "lowest rank tested by rank selection");
  cmd->add_option("--rank-max", o.rank_max, "highest rank tested by rank selection");
  cmd->add_option("--net-runs", o.net_runs, "adjacency runs per consensus matrix");
  cmd->add_flag("--stamp", o.stamp, "include a wall-clock timestamp in the output document");
}

void write_or_print(const io::ResultDocument& doc, const std::string& out) {
  if (out.empty()) {
    std::cout << doc.payload.dump(2) << '\n';
  } else {
    io::emit(doc, out);
  }
}

int run_detect(const std::string& input, const CommonOpts& opts, const std::string& out,
               int clusters, double lambda) {
  const DetectorConfig config = resolve_config(opts);
  const io::InputDocument doc = io::ingest(input);
  std::cerr << "ingested " << doc.values.rows() << " x " << doc.values.cols() << " matrix from "
            << input << "\n";

  const auto result = pipeline::detect(doc.values, config);
  io::ResultDocument rd = io::build_detect_document(
      result, input, opts.stamp ? std::optional<std::string>(iso_timestamp()) : std::nullopt);

  const bool want_networks = clusters > 0 || lambda >= 0.0;
  if (want_networks) {
    if (out.empty()) throw config_error("network estimation needs --out for sidecar files");
    pipeline::NetworkRequest request;
    if (clusters > 0) request.clusters = clusters;
    if (lambda >= 0.0) request.lambda = lambda;
    DetectorConfig net_config = config;
    net_config.rank = result.rank_used;
    const io::ShiftedSeries shifted = io::shift_nonneg(doc.values);
    const TimeSeriesMatrix Y(shifted.values);
    const auto nets = pipeline::segment_networks(Y, result.confirmed, request, net_config);
    rd.payload["networks"] = io::emit_networks(nets, sidecar_prefix(out));
  }

  write_or_print(rd, out);
  for (long q : result.confirmed) std::cerr << "confirmed change point at t = " << q << "\n";
  if (result.confirmed.empty()) std::cerr << "no confirmed change points\n";
  return 0;
}

int run_rank(const std::string& input, const CommonOpts& opts, const std::string& out) {
  const DetectorConfig config = resolve_config(opts);
  const io::InputDocument doc = io::ingest(input);
  const io::ShiftedSeries shifted = io::shift_nonneg(doc.values);
  const TimeSeriesMatrix Y(shifted.values);

  const int r_max = static_cast<int>(
      std::min<long>(config.rank_max, std::min(Y.rows(), Y.cols()) - 1));
  const auto search = ranksel::find_optimal_rank(Y, config.loss, config.fit_settings(),
                                                 config.rank_min, r_max);

  io::ResultDocument rd{io::document_skeleton(
      "rank", opts.stamp ? std::optional<std::string>(iso_timestamp()) : std::nullopt)};
  rd.payload["seed"] = config.seed;
  rd.payload["input"] = io::json{{"path", input}, {"rows", Y.rows()}, {"cols", Y.cols()},
                                 {"shift", shifted.shift}};
  rd.payload["r_opt"] = search.r_opt;
  rd.payload["exhausted"] = search.exhausted;
  rd.payload["ranks_tested"] = search.ranks_tested;
  io::json lo = io::json::object(), lp = io::json::object();
  for (const auto& [r, loss] : search.losses_original) lo[std::to_string(r)] = loss;
  for (const auto& [r, loss] : search.losses_permuted) lp[std::to_string(r)] = loss;
  rd.payload["losses_original"] = lo;
  rd.payload["losses_permuted"] = lp;
  write_or_print(rd, out);
  std::cerr << "optimal rank: " << search.r_opt << (search.exhausted ? " (range exhausted)" : "")
            << "\n";
  return 0;
}

int run_estimate_net(const std::string& input, const CommonOpts& opts, const std::string& out,
                     const std::string& points_spec, int clusters, double lambda) {
  if (out.empty()) throw config_error("estimate-net needs --out for sidecar files");
  DetectorConfig config = resolve_config(opts);
  const io::InputDocument doc = io::ingest(input);
  const io::ShiftedSeries shifted = io::shift_nonneg(doc.values);
  const TimeSeriesMatrix Y(shifted.values);

  std::vector<long> points;
  if (!points_spec.empty()) points = io::parse_change_points(points_spec);

  if (!config.rank) {
    const int r_max = static_cast<int>(
        std::min<long>(config.rank_max, std::min(Y.rows(), Y.cols()) - 1));
    config.rank = ranksel::find_optimal_rank(Y, config.loss, config.fit_settings(),
                                             config.rank_min, r_max)
                      .r_opt;
    std::cerr << "selected rank " << *config.rank << "\n";
  }

  pipeline::NetworkRequest request;
  if (clusters > 0) request.clusters = clusters;
  if (lambda >= 0.0) request.lambda = lambda;
  const auto nets = pipeline::segment_networks(Y, points, request, config);

  io::ResultDocument rd{io::document_skeleton(
      "estimate-net", opts.stamp ? std::optional<std::string>(iso_timestamp()) : std::nullopt)};
  rd.payload["seed"] = config.seed;
  rd.payload["input"] = io::json{{"path", input}, {"rows", Y.rows()}, {"cols", Y.cols()},
                                 {"shift", shifted.shift}};
  rd.payload["rank"] = *config.rank;
  rd.payload["change_points"] = points;
  rd.payload["networks"] = io::emit_networks(nets, sidecar_prefix(out));
  write_or_print(rd, sidecar_prefix(out) + ".json");
  return 0;
}

int run_simulate(int scenario, int p_override, long t_override, std::uint64_t seed,
                 const std::string& out, bool stamp) {
  if (out.empty()) throw config_error("simulate needs --out as the output file prefix");
  std::optional<int> p;
  std::optional<long> T;
  if (p_override > 0) p = p_override;
  if (t_override > 0) T = t_override;
  const auto data = sim::generate(scenario, seed, p, T);

  const std::string data_path = out + ".csv";
  io::write_delimited(data.values, data_path);
  io::ResultDocument rd = io::build_simulation_document(
      data, data_path, stamp ? std::optional<std::string>(iso_timestamp()) : std::nullopt);
  rd.payload["seed"] = seed;
  io::emit(rd, out + ".truth.json");
  std::cerr << "wrote " << data_path << " (" << data.values.rows() << " x " << data.values.cols()
            << ") and " << out << ".truth.json\n";
  return 0;
}

int run_evaluate(const std::string& truth_spec, const std::string& detected_spec, long T,
                 const std::string& out) {
  const std::vector<long> truth = io::parse_change_points(truth_spec);
  const std::vector<long> detected = io::parse_change_points(detected_spec);

  if (T <= 0) {
    // Pull the series length from a truth document when available.
    const bool inline_list =
        truth_spec.find_first_not_of("0123456789, \t") == std::string::npos;
    if (!inline_list) {
      const auto doc = io::read_document(truth_spec);
      if (doc.payload.contains("T")) T = doc.payload.at("T").get<long>();
    }
  }
  if (T <= 0) throw config_error("evaluate needs --length for the series length T");

  io::ResultDocument rd{io::document_skeleton("evaluate", std::nullopt)};
  rd.payload["truth"] = truth;
  rd.payload["detected"] = detected;
  rd.payload["T"] = T;
  for (long w : {10L, 1L}) {
    const auto counts = sim::tp_fp(truth, detected, w);
    rd.payload["tp_within_" + std::to_string(w)] = counts.tp;
    rd.payload["fp_within_" + std::to_string(w)] = counts.fp;
  }
  const auto dh = sim::hausdorff(truth, detected, T);
  if (dh) {
    rd.payload["scaled_hausdorff"] = *dh;
  } else {
    rd.payload["scaled_hausdorff"] = nullptr;  // undefined: a point set is empty
  }
  write_or_print(rd, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Change point detection in the network structure of multivariate time series "
               "via repeated NMF inside a modified binary search"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string input, out, points_spec, truth_spec, detected_spec;
  int clusters = 0;
  double lambda = -1.0;
  int scenario = 1, p_override = 0;
  long t_override = 0, eval_T = 0;

  auto* detect = app.add_subcommand("detect", "detect change points in a delimited time series");
  detect->add_option("input", input, "delimited input file (rows = time points)")->required();
  add_common_flags(detect, opts);
  detect->add_option("--out", out, "result document path (stdout when omitted)");
  detect->add_option("--clusters", clusters, "also estimate per-segment networks cut at K0");
  detect->add_option("--lambda", lambda, "also estimate per-segment thresholded networks");

  auto* rank = app.add_subcommand("rank", "select the optimal factorization rank");
  rank->add_option("input", input, "delimited input file")->required();
  add_common_flags(rank, opts);
  rank->add_option("--out", out, "result document path (stdout when omitted)");

  auto* estnet = app.add_subcommand("estimate-net", "estimate per-segment consensus networks");
  estnet->add_option("input", input, "delimited input file")->required();
  add_common_flags(estnet, opts);
  estnet->add_option("--out", out, "output prefix for the document and matrix sidecars");
  estnet->add_option("--points", points_spec,
                     "change points: inline list '100,200' or a result/truth document");
  estnet->add_option("--clusters", clusters, "cut the consensus tree at K0 clusters");
  estnet->add_option("--lambda", lambda, "threshold the consensus matrix at lambda");

  auto* simulate = app.add_subcommand("simulate", "generate a simulation scenario");
  simulate->add_option("--scenario", scenario, "scenario id 1..5")->required()
      ->check(CLI::Range(1, 5));
  simulate->add_option("--p", p_override, "override the number of variables");
  simulate->add_option("--length", t_override, "override the number of time points");
  simulate->add_option("--seed", opts.seed, "master seed")->capture_default_str();
  simulate->add_option("--out", out, "output prefix")->required();
  simulate->add_flag("--stamp", opts.stamp, "include a wall-clock timestamp");

  auto* evaluate = app.add_subcommand("evaluate", "score detected change points against truth");
  evaluate->add_option("--truth", truth_spec, "true points: inline list or truth document")
      ->required();
  evaluate->add_option("--detected", detected_spec, "detected points: inline list or result document")
      ->required();
  evaluate->add_option("--length", eval_T, "series length T (needed with inline truth)");
  evaluate->add_option("--out", out, "result document path (stdout when omitted)");

  try {
    app.parse(argc, argv);
    if (detect->parsed()) return run_detect(input, opts, out, clusters, lambda);
    if (rank->parsed()) return run_rank(input, opts, out);
    if (estnet->parsed()) return run_estimate_net(input, opts, out, points_spec, clusters, lambda);
    if (simulate->parsed()) return run_simulate(scenario, p_override, t_override, opts.seed, out, opts.stamp);
    if (evaluate->parsed()) return run_evaluate(truth_spec, detected_spec, eval_T, out);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const config_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const ingest_error& e) {
    std::cerr << "ingestion error: " << e.what() << "\n";
    return 3;
  } catch (const numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
