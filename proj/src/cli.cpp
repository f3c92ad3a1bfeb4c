#include "sarscan/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sarscan/error.hpp"
#include "sarscan/io.hpp"
#include "sarscan/parallel.hpp"
#include "sarscan/sar.hpp"
#include "sarscan/scan.hpp"
#include "sarscan/simulation.hpp"
#include "sarscan/spatial.hpp"
#include "sarscan/weights.hpp"

#ifndef SARSCAN_VERSION
#define SARSCAN_VERSION "0.0.0"
#endif
#ifndef SARSCAN_DATA_DIR
#define SARSCAN_DATA_DIR ""
#endif

namespace sarscan::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string version() { return SARSCAN_VERSION; }

namespace {

struct WeightsFlags {
  std::string weights_file;
  std::string contiguity_file;
  std::size_t knn = 0;
  std::string knn_select;
  double inverse_distance = 0.0;
  double cutoff = 0.0;
  bool standardize = true;
};

void add_weights_flags(CLI::App* app, WeightsFlags& f, bool allow_select, bool allow_inverse) {
  auto* w = app->add_option("--weights", f.weights_file, "weights edge list (i,j[,w] or id_i,id_j[,w])");
  auto* c = app->add_option("--contiguity", f.contiguity_file, "undirected contiguity pairs");
  auto* k = app->add_option("--knn", f.knn, "k nearest neighbours");
  std::vector<CLI::Option*> group{w, c, k};
  if (allow_select) {
    group.push_back(app->add_option("--knn-select", f.knn_select, "k range a..b, chosen by Moran's I"));
  }
  if (allow_inverse) {
    group.push_back(app->add_option("--inverse-distance", f.inverse_distance, "inverse-distance power"));
    app->add_option("--cutoff", f.cutoff, "inverse-distance cutoff distance");
  }
  for (auto* a : group) {
    for (auto* b : group) {
      if (a != b) a->excludes(b);
    }
  }
}

bool any_weights(const WeightsFlags& f) {
  return !f.weights_file.empty() || !f.contiguity_file.empty() || f.knn > 0 || !f.knn_select.empty() ||
         f.inverse_distance > 0.0;
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& s) {
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) throw std::invalid_argument(s);
    std::size_t used_a = 0, used_b = 0;
    const std::string a = s.substr(0, dots), b = s.substr(dots + 2);
    const auto lo = std::stoull(a, &used_a);
    const auto hi = std::stoull(b, &used_b);
    if (used_a != a.size() || used_b != b.size()) throw std::invalid_argument(s);
    if (lo < 1 || hi < lo) throw std::invalid_argument(s);
    return {lo, hi};
  } catch (const std::invalid_argument&) {
    throw InputError("--knn-select expects a range like 2..10, got '" + s + "'");
  } catch (const std::out_of_range&) {
    throw InputError("--knn-select expects a range like 2..10, got '" + s + "'");
  }
}

struct ResolvedWeights {
  WeightsMatrix matrix;
  json spec;
};

// Builds the weights matrix named by the flags. For --knn-select the family
// is scored on `outcome`.
std::optional<ResolvedWeights> resolve_weights(const WeightsFlags& f, const SpatialDataset& ds,
                                               std::span<const double> outcome, std::vector<std::string>& warnings) {
  if (!any_weights(f)) return std::nullopt;
  ResolvedWeights r;
  auto finish = [&](WeightsMatrix w) { return f.standardize ? row_standardize(w) : w; };
  if (!f.weights_file.empty()) {
    r.matrix = finish(io::read_weights_csv(f.weights_file, ds));
    r.spec = {{"type", "file"}, {"path", f.weights_file}};
  } else if (!f.contiguity_file.empty()) {
    r.matrix = finish(io::read_contiguity_csv(f.contiguity_file, ds));
    r.spec = {{"type", "contiguity"}, {"path", f.contiguity_file}};
  } else if (f.knn > 0) {
    if (f.knn >= ds.size()) throw InputError("--knn must be below the number of sites");
    r.matrix = finish(build_knn(pairwise_distances(ds), f.knn));
    r.spec = {{"type", "knn"}, {"k", f.knn}};
  } else if (f.inverse_distance > 0.0) {
    const auto cutoff = f.cutoff > 0.0 ? std::optional<double>(f.cutoff) : std::nullopt;
    r.matrix = finish(build_inverse_distance(pairwise_distances(ds), f.inverse_distance, cutoff));
    r.spec = {{"type", "inverse_distance"}, {"power", f.inverse_distance}};
    if (cutoff) r.spec["cutoff"] = *cutoff;
  } else {
    const auto [lo, hi] = parse_range(f.knn_select);
    if (hi >= ds.size()) throw InputError("--knn-select upper bound must be below the number of sites");
    const DistanceMatrix dist = pairwise_distances(ds);
    std::vector<WeightsMatrix> family;
    for (std::size_t k = lo; k <= hi; ++k) family.push_back(finish(build_knn(dist, k)));
    const WeightsSelection sel = select_weights(family, outcome);
    warnings.insert(warnings.end(), sel.warnings.begin(), sel.warnings.end());
    json scores = json::object();
    for (std::size_t i = 0; i < family.size(); ++i) {
      scores[std::to_string(lo + i)] = sel.values[i] ? json(*sel.values[i]) : json(nullptr);
    }
    r.matrix = family[sel.index];
    r.spec = {{"type", "knn-select"},
              {"range", {lo, hi}},
              {"selected_k", lo + sel.index},
              {"morans_i", sel.morans_i},
              {"morans_i_by_k", scores}};
  }
  r.spec["standardized"] = r.matrix.row_standardized();
  r.spec["isolated_sites"] = r.matrix.isolated_count();
  if (r.matrix.has_isolated()) {
    warnings.push_back(std::to_string(r.matrix.isolated_count()) + " site(s) have no neighbours");
  }
  return r;
}

json json_or_null(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& args)
      : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["arguments"] = args;
    doc_["version"] = version();
  }
  json& operator[](const char* key) { return doc_[key]; }
  void output(const fs::path& p) { doc_["outputs"].push_back(p.filename().string()); }
  void write(const fs::path& dir) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    doc_["duration_seconds"] = secs;
    io::write_text(dir / "manifest.json", doc_.dump(2) + "\n");
  }

 private:
  std::chrono::steady_clock::time_point start_;
  json doc_ = json::object();
};

json cluster_json(const ClusterReport& r, const SpatialDataset& ds) {
  json members = json::array();
  for (std::size_t m : r.cluster.members) members.push_back(ds.site(m).id);
  return {{"rank", r.rank},
          {"center", ds.site(r.cluster.center).id},
          {"radius", r.cluster.radius},
          {"n_sites", r.cluster.size()},
          {"members", members},
          {"statistic", r.statistic},
          {"p_value", r.p_value},
          {"mean_inside", r.mean_inside},
          {"sd_inside", r.sd_inside},
          {"mean_outside", r.mean_outside},
          {"sd_outside", r.sd_outside}};
}

json fit_json(const SarFit& f) {
  json j = {{"alpha", f.alpha}, {"sigma2", f.sigma2}, {"rho", f.rho},
            {"loglik", f.loglik}, {"bic", f.bic}, {"boundary", f.boundary}};
  j["delta"] = json_or_null(f.delta);
  return j;
}

struct ScanArgs {
  std::string data;
  std::string value_property = "value";
  std::string method = "gaussian";
  WeightsFlags weights;
  std::size_t mc = 999;
  double alpha = 0.05;
  std::size_t max_clusters = 10;
  std::uint64_t seed = 1;
  std::string out = "sarscan_out";
  unsigned threads = 0;
  bool log = false;
  double max_fraction = 0.5;
};

int cmd_scan(const ScanArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Manifest manifest("scan", args);
  const ScanMethod method = parse_scan_method(a.method);
  const SpatialDataset ds = io::read_dataset(a.data, a.value_property);

  DetectOptions opt;
  opt.method = method;
  opt.replicates = a.mc;
  opt.alpha_level = a.alpha;
  opt.max_clusters = a.max_clusters;
  opt.seed = a.seed;
  opt.threads = resolve_threads(a.threads);
  opt.max_fraction = a.max_fraction;
  opt.log_transform = a.log;

  std::vector<std::string> warnings;
  std::optional<ResolvedWeights> w;
  if (needs_weights(method)) {
    if (!any_weights(a.weights)) {
      throw InputError("method " + to_string(method) +
                       " needs spatial weights (--weights, --contiguity, --knn or --knn-select)");
    }
    std::vector<double> analysis(ds.values().begin(), ds.values().end());
    if (a.log) {
      for (double& v : analysis) v = v > 0.0 ? std::log(v) : v;
    }
    w = resolve_weights(a.weights, ds, analysis, warnings);
  } else if (any_weights(a.weights)) {
    warnings.push_back("weights are ignored by method " + to_string(method));
  }

  const DetectionResult res = detect(ds, w ? &w->matrix : nullptr, opt);
  warnings.insert(warnings.end(), res.warnings.begin(), res.warnings.end());

  const fs::path dir(a.out);
  json report = json::object();
  report["method"] = to_string(method);
  report["n_sites"] = ds.size();
  report["mc_replicates"] = a.mc;
  report["alpha_level"] = a.alpha;
  report["seed"] = a.seed;
  report["log_transform"] = a.log;
  report["most_likely_p_value"] = res.most_likely_p;
  report["most_likely_statistic"] = res.most_likely.statistic;
  json clusters = json::array();
  for (const auto& r : res.clusters) clusters.push_back(cluster_json(r, ds));
  report["clusters"] = clusters;
  if (w) report["weights"] = w->spec;
  if (res.rho) {
    report["rho_hat"] = res.rho->rho_hat;
    report["delta_bic"] = res.rho->delta_bic;
    report["rho_from_cluster_fit"] = res.rho->from_cluster_fit;
    report["fit_h0"] = fit_json(res.rho->fit_h0);
    report["fit_best"] = fit_json(res.rho->fit_best);
    if (res.rho->best_cluster) report["best_cluster_center"] = ds.site(res.rho->best_cluster->center).id;
    report["skipped_candidates"] = res.rho->skipped;
  }
  report["warnings"] = warnings;

  io::write_text(dir / "report.json", report.dump(2) + "\n");
  io::write_text(dir / "clusters.csv", io::clusters_csv(res.clusters, ds));
  manifest.output(dir / "report.json");
  manifest.output(dir / "clusters.csv");
  manifest["inputs"] = {{"data", a.data}, {"value_property", a.value_property}};
  manifest["method"] = to_string(method);
  manifest["weights"] = w ? w->spec : json(nullptr);
  manifest["mc_replicates"] = a.mc;
  manifest["alpha_level"] = a.alpha;
  manifest["max_clusters"] = a.max_clusters;
  manifest["max_fraction"] = a.max_fraction;
  manifest["log_transform"] = a.log;
  manifest["seed"] = a.seed;
  manifest["threads"] = opt.threads;
  manifest["rho_hat"] = res.rho ? json(res.rho->rho_hat) : json(nullptr);
  manifest["delta_bic"] = res.rho ? json(res.rho->delta_bic) : json(nullptr);
  if (w && w->spec.contains("selected_k")) {
    manifest["selected_k"] = w->spec["selected_k"];
    manifest["morans_i"] = w->spec["morans_i"];
  }
  manifest.write(dir);

  for (const auto& msg : warnings) err << "warning: " << msg << '\n';
  out << to_string(method) << ": " << res.clusters.size() << " significant cluster(s); most likely p = "
      << io::format_double(res.most_likely_p);
  if (res.rho) out << "; rho_hat = " << io::format_double(res.rho->rho_hat);
  out << "\nwrote " << (dir / "report.json").string() << ", " << (dir / "clusters.csv").string() << '\n';
  return kExitOk;
}

struct SimulateArgs {
  std::string config;
  std::string out = "sarscan_sim";
  unsigned threads = 0;
  bool full_scale = false;
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  Manifest manifest("simulate", args);
  SimConfig cfg = a.config.empty() ? default_sim_config(fs::path(SARSCAN_DATA_DIR)) : load_sim_config(a.config);
  if (a.full_scale) {
    cfg.replicates = 1000;
    cfg.mc_replicates = 999;
  }
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  const unsigned threads = resolve_threads(a.threads);
  const SimResult result = run_grid(cfg, threads);

  const fs::path dir(a.out);
  io::write_text(dir / "results.csv", results_csv(result));
  io::write_text(dir / "results.json", results_json(cfg, result));
  manifest.output(dir / "results.csv");
  manifest.output(dir / "results.json");
  manifest["inputs"] = {{"config", a.config.empty() ? json("<default>") : json(a.config)}};
  json methods = json::array();
  for (ScanMethod m : cfg.methods) methods.push_back(to_string(m));
  manifest["methods"] = methods;
  manifest["weights"] = cfg.w_true.describe();
  manifest["weights_arm"] = to_string(cfg.arm);
  manifest["S"] = cfg.replicates;
  manifest["mc_replicates"] = cfg.mc_replicates;
  manifest["alpha_level"] = cfg.alpha_level;
  manifest["seed"] = cfg.seed;
  manifest["threads"] = threads;
  std::size_t failures = 0;
  for (const auto& cell : result.cells) failures += cell.n_fail;
  manifest["failed_replicates"] = failures;
  manifest.write(dir);
  out << "simulated " << result.cells.size() << " cells (" << cfg.replicates << " replicates each, "
      << failures << " failure(s)); wrote " << (dir / "results.csv").string() << '\n';
  return kExitOk;
}

struct WeightsArgs {
  std::string data;
  WeightsFlags weights;
  std::string out = "sarscan_weights";
};

int cmd_weights(const WeightsArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  Manifest manifest("weights", args);
  const SpatialDataset ds = io::read_dataset_csv(a.data, true);
  if (!any_weights(a.weights)) throw InputError("no weights specification given");
  std::vector<std::string> warnings;
  const auto w = resolve_weights(a.weights, ds, ds.values(), warnings);
  const fs::path dir(a.out);
  io::write_text(dir / "weights.csv", io::weights_csv(w->matrix, ds));
  manifest.output(dir / "weights.csv");
  manifest["inputs"] = {{"data", a.data}};
  manifest["weights"] = w->spec;
  manifest["nnz"] = w->matrix.nnz();
  manifest["warnings"] = warnings;
  manifest.write(dir);
  out << w->matrix.describe() << ": " << w->matrix.nnz() << " nonzero weights; wrote "
      << (dir / "weights.csv").string() << '\n';
  return kExitOk;
}

struct MoranArgs {
  std::string data;
  std::string value_property = "value";
  WeightsFlags weights;
  bool log = false;
  std::string out;
};

int cmd_moran(const MoranArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  Manifest manifest("moran", args);
  const SpatialDataset ds = io::read_dataset(a.data, a.value_property);
  std::vector<double> y(ds.values().begin(), ds.values().end());
  if (a.log) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!(y[i] > 0.0)) throw InputError("log transform needs positive values (site '" + ds.site(i).id + "')");
      y[i] = std::log(y[i]);
    }
  }
  if (!any_weights(a.weights)) throw InputError("no weights specification given");
  std::vector<std::string> warnings;
  const auto w = resolve_weights(a.weights, ds, y, warnings);
  const double value = morans_i(w->matrix, y);
  out << "morans_i = " << io::format_double(value) << " (" << w->matrix.describe() << ")\n";
  if (!a.out.empty()) {
    const fs::path dir(a.out);
    json doc = {{"morans_i", value}, {"weights", w->spec}, {"log_transform", a.log}, {"warnings", warnings}};
    io::write_text(dir / "moran.json", doc.dump(2) + "\n");
    manifest.output(dir / "moran.json");
    manifest["inputs"] = {{"data", a.data}, {"value_property", a.value_property}};
    manifest["weights"] = w->spec;
    manifest["morans_i"] = value;
    manifest.write(dir);
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatial scan statistics with SAR adjustment", "sarscan"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  ScanArgs scan_args;
  auto* scan_cmd = app.add_subcommand("scan", "detect clusters in a dataset");
  scan_cmd->add_option("--data", scan_args.data, "dataset CSV (id,x,y,value) or GeoJSON points")->required();
  scan_cmd->add_option("--value-property", scan_args.value_property, "GeoJSON outcome property");
  scan_cmd->add_option("--method", scan_args.method, "gaussian | df | p-sar | np-sar");
  add_weights_flags(scan_cmd, scan_args.weights, true, true);
  scan_cmd->add_flag("--standardize,!--no-standardize", scan_args.weights.standardize,
                     "row-standardize the weights (default on)");
  scan_cmd->add_option("--mc", scan_args.mc, "Monte Carlo permutations");
  scan_cmd->add_option("--alpha", scan_args.alpha, "significance level");
  scan_cmd->add_option("--max-clusters", scan_args.max_clusters, "maximum number of reported clusters");
  scan_cmd->add_option("--seed", scan_args.seed, "random seed");
  scan_cmd->add_option("--out", scan_args.out, "output directory");
  scan_cmd->add_option("--threads", scan_args.threads, "worker threads (0 = all cores)");
  scan_cmd->add_flag("--log", scan_args.log, "analyze the natural log of the outcome");
  scan_cmd->add_option("--max-fraction", scan_args.max_fraction, "largest window as a fraction of the sites");

  SimulateArgs sim_args;
  std::uint64_t sim_seed = 0;
  auto* sim_cmd = app.add_subcommand("simulate", "run the simulation grid");
  sim_cmd->add_option("--config", sim_args.config, "key = value configuration file");
  sim_cmd->add_option("--out", sim_args.out, "output directory");
  sim_cmd->add_option("--threads", sim_args.threads, "worker threads (0 = all cores)");
  sim_cmd->add_flag("--full-scale", sim_args.full_scale, "S = 1000 replicates, M = 999 permutations");
  auto* sim_seed_opt = sim_cmd->add_option("--seed", sim_seed, "override the configured seed");

  WeightsArgs w_args;
  w_args.weights.standardize = false;
  auto* w_cmd = app.add_subcommand("weights", "build and export a weights matrix");
  w_cmd->add_option("--data", w_args.data, "layout CSV (id,x,y[,value])")->required();
  add_weights_flags(w_cmd, w_args.weights, false, true);
  w_cmd->add_flag("--standardize", w_args.weights.standardize, "row-standardize");
  w_cmd->add_option("--out", w_args.out, "output directory");

  MoranArgs m_args;
  auto* m_cmd = app.add_subcommand("moran", "global Moran's I of a dataset");
  m_cmd->add_option("--data", m_args.data, "dataset CSV or GeoJSON")->required();
  m_cmd->add_option("--value-property", m_args.value_property, "GeoJSON outcome property");
  add_weights_flags(m_cmd, m_args.weights, true, true);
  m_cmd->add_flag("--standardize,!--no-standardize", m_args.weights.standardize,
                  "row-standardize the weights (default on)");
  m_cmd->add_flag("--log", m_args.log, "use the natural log of the outcome");
  m_cmd->add_option("--out", m_args.out, "output directory for moran.json and manifest");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInput;
  }

  std::vector<std::string> full{"sarscan"};
  full.insert(full.end(), args.begin(), args.end());
  try {
    if (*scan_cmd) return cmd_scan(scan_args, full, out, err);
    if (*sim_cmd) {
      if (*sim_seed_opt) sim_args.seed = sim_seed;
      return cmd_simulate(sim_args, full, out);
    }
    if (*w_cmd) return cmd_weights(w_args, full, out);
    if (*m_cmd) return cmd_moran(m_args, full, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitInput;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace sarscan::cli
