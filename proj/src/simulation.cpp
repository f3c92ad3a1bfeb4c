#include "sarscan/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "json.hpp"
#include "sarscan/error.hpp"
#include "sarscan/io.hpp"
#include "sarscan/parallel.hpp"
#include "sarscan/sar.hpp"

namespace sarscan {

std::string to_string(WeightsArm arm) {
  return arm == WeightsArm::true_weights ? "true" : "knn-select";
}

void SimConfig::validate() const {
  if (rho_grid.empty() || c_grid.empty()) throw InputError("simulation grids must be nonempty");
  if (methods.empty()) throw InputError("simulation needs at least one scan method");
  if (replicates < 1) throw InputError("simulation needs S >= 1 replicates");
  if (mc_replicates < 19) throw InputError("simulation needs M >= 19 permutations");
  if (w_true.size() != layout.size()) throw InputError("generating weights matrix does not match the layout");
  if (true_cluster.empty()) throw InputError("true cluster is empty");
  for (std::size_t s : true_cluster) {
    if (s >= layout.size()) throw InputError("true cluster site outside the layout");
  }
  if (!std::is_sorted(true_cluster.begin(), true_cluster.end()) ||
      std::adjacent_find(true_cluster.begin(), true_cluster.end()) != true_cluster.end()) {
    throw InputError("true cluster must be sorted and duplicate-free");
  }
  if (!(sigma > 0.0)) throw InputError("simulation sigma must be positive");
  if (arm == WeightsArm::knn_selected && (knn_min < 1 || knn_max < knn_min || knn_max >= layout.size())) {
    throw InputError("invalid k-NN family range");
  }
}

namespace {

std::vector<double> innovations(const SimConfig& cfg, double c, Rng& rng) {
  const std::size_t n = cfg.layout.size();
  const double delta = c * std::sqrt(2.0);
  std::vector<double> v(n, cfg.alpha0);
  for (std::size_t s : cfg.true_cluster) v[s] += delta;
  if (cfg.sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.sigma);
    for (double& x : v) x += noise(rng);
  }
  return v;
}

}  // namespace

std::vector<double> generate_dataset(const SimConfig& cfg, double rho, double c, Rng& rng) {
  if (cfg.sigma < 0.0) throw InputError("sigma must be nonnegative");
  return solve_sar(cfg.w_true, rho, innovations(cfg, c, rng));
}

Rates tp_fp_rates(std::span<const std::vector<std::size_t>> detected, std::span<const std::size_t> truth,
                  std::size_t n) {
  if (truth.empty() || truth.size() >= n) throw InputError("truth must be a nonempty proper subset of the sites");
  std::vector<char> in_truth(n, 0), flagged(n, 0);
  for (std::size_t s : truth) in_truth.at(s) = 1;
  for (const auto& set : detected) {
    for (std::size_t s : set) flagged.at(s) = 1;
  }
  std::size_t hit = 0, false_alarm = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!flagged[i]) continue;
    (in_truth[i] ? hit : false_alarm) += 1;
  }
  return {static_cast<double>(hit) / static_cast<double>(truth.size()),
          static_cast<double>(false_alarm) / static_cast<double>(n - truth.size())};
}

const CellResult& SimResult::cell(ScanMethod method, double rho, double c) const {
  for (const auto& cell : cells) {
    if (cell.method == method && std::abs(cell.rho - rho) < 1e-12 && std::abs(cell.c - c) < 1e-12) return cell;
  }
  throw InputError("no simulation cell for " + to_string(method) + " at rho=" + std::to_string(rho) +
                   ", c=" + std::to_string(c));
}

SimResult run_grid(const SimConfig& cfg, unsigned threads) {
  cfg.validate();
  const std::size_t n = cfg.layout.size();
  const CandidateSet candidates = enumerate_candidates(cfg.layout, cfg.max_fraction);

  const LogDetEngine true_engine = make_logdet_engine(cfg.w_true);
  for (double rho : cfg.rho_grid) {
    if (!true_engine.admissible(rho)) {
      throw InputError("rho = " + std::to_string(rho) + " is outside the admissible interval of the generating matrix");
    }
  }

  std::vector<WeightsMatrix> knn_family;
  std::vector<LogDetEngine> knn_engines;
  if (cfg.arm == WeightsArm::knn_selected) {
    const DistanceMatrix dist = pairwise_distances(cfg.layout);
    for (std::size_t k = cfg.knn_min; k <= cfg.knn_max; ++k) {
      knn_family.push_back(row_standardize(build_knn(dist, k)));
      knn_engines.push_back(make_logdet_engine(knn_family.back()));
    }
  }
  const bool any_sar = std::any_of(cfg.methods.begin(), cfg.methods.end(), needs_weights);

  const std::size_t n_rho = cfg.rho_grid.size();
  const std::size_t n_c = cfg.c_grid.size();
  const std::size_t n_methods = cfg.methods.size();
  const std::size_t n_units = n_rho * n_c * cfg.replicates;
  // records[unit * n_methods + method]
  std::vector<ReplicateRecord> records(n_units * n_methods);

  parallel_for(n_units, threads, [&](std::size_t unit, unsigned) {
    const std::size_t s = unit % cfg.replicates;
    const std::size_t ci = (unit / cfg.replicates) % n_c;
    const std::size_t ri = unit / (cfg.replicates * n_c);
    ReplicateRecord* out = &records[unit * n_methods];

    std::vector<double> y;
    try {
      Rng rng = make_rng(cfg.seed, {ri, ci, s, 0});
      y = generate_dataset(cfg, cfg.rho_grid[ri], cfg.c_grid[ci], rng);
    } catch (const std::exception&) {
      for (std::size_t m = 0; m < n_methods; ++m) out[m].failed = true;
      return;
    }

    const WeightsMatrix* w = &cfg.w_true;
    const LogDetEngine* engine = &true_engine;
    std::optional<std::size_t> selected_k;
    std::optional<RhoSelection> rho_sel;
    bool sar_failed = false;
    if (any_sar) {
      try {
        if (cfg.arm == WeightsArm::knn_selected) {
          const WeightsSelection sel = select_weights(knn_family, y);
          w = &knn_family[sel.index];
          engine = &knn_engines[sel.index];
          selected_k = cfg.knn_min + sel.index;
        }
        rho_sel = estimate_rho(y, *w, candidates, *engine, 1);
      } catch (const std::exception&) {
        sar_failed = true;
      }
    }

    const std::uint64_t mc_seed = derive_seed(cfg.seed, {ri, ci, s, 1});
    for (std::size_t m = 0; m < n_methods; ++m) {
      const ScanMethod method = cfg.methods[m];
      ReplicateRecord& rec = out[m];
      if (needs_weights(method)) {
        rec.selected_k = selected_k;
        if (sar_failed) {
          rec.failed = true;
          continue;
        }
        rec.rho_hat = rho_sel->rho_hat;
      }
      DetectOptions opt;
      opt.method = method;
      opt.replicates = cfg.mc_replicates;
      opt.alpha_level = cfg.alpha_level;
      opt.max_clusters = cfg.max_clusters;
      opt.seed = mc_seed;
      opt.threads = 1;
      opt.max_fraction = cfg.max_fraction;
      try {
        const auto sar = needs_weights(method) ? std::optional<SarContext>(SarContext{w, engine}) : std::nullopt;
        const DetectionResult r = detect_prepared(y, y, candidates, sar, rho_sel, opt);
        rec.p_value = r.most_likely_p;
        for (const auto& c : r.clusters) rec.detected.insert(rec.detected.end(), c.cluster.members.begin(), c.cluster.members.end());
        std::sort(rec.detected.begin(), rec.detected.end());
      } catch (const std::exception&) {
        rec.failed = true;
      }
    }
  });

  SimResult result;
  result.arm = cfg.arm;
  for (std::size_t ri = 0; ri < n_rho; ++ri) {
    for (std::size_t ci = 0; ci < n_c; ++ci) {
      for (std::size_t m = 0; m < n_methods; ++m) {
        CellResult cell;
        cell.method = cfg.methods[m];
        cell.rho = cfg.rho_grid[ri];
        cell.c = cfg.c_grid[ci];
        double detections = 0.0, tp = 0.0, fp = 0.0;
        for (std::size_t s = 0; s < cfg.replicates; ++s) {
          const std::size_t unit = (ri * n_c + ci) * cfg.replicates + s;
          const ReplicateRecord& rec = records[unit * n_methods + m];
          cell.replicates.push_back(rec);
          if (rec.failed) {
            ++cell.n_fail;
            continue;
          }
          ++cell.n_ok;
          if (!rec.detected.empty()) detections += 1.0;
          const std::vector<std::vector<std::size_t>> detected{rec.detected};
          const Rates rates = tp_fp_rates(detected, cfg.true_cluster, n);
          tp += rates.tp;
          fp += rates.fp;
        }
        if (cell.n_ok > 0) {
          const double ok = static_cast<double>(cell.n_ok);
          cell.power = detections / ok;
          cell.tp = tp / ok;
          cell.fp = fp / ok;
        }
        result.cells.push_back(std::move(cell));
      }
    }
  }
  return result;
}

std::string results_csv(const SimResult& result) {
  std::ostringstream os;
  os << "method,rho,c,power,tp,fp,n_fail\n";
  for (const auto& cell : result.cells) {
    os << to_string(cell.method) << ',' << io::format_double(cell.rho) << ',' << io::format_double(cell.c) << ','
       << io::format_double(cell.power) << ',' << io::format_double(cell.tp) << ',' << io::format_double(cell.fp)
       << ',' << cell.n_fail << '\n';
  }
  return os.str();
}

std::string results_json(const SimConfig& cfg, const SimResult& result) {
  using nlohmann::json;
  json truth = json::array();
  for (std::size_t s : cfg.true_cluster) truth.push_back(cfg.layout.site(s).id);
  json methods = json::array();
  for (ScanMethod m : cfg.methods) methods.push_back(to_string(m));
  json doc = {{"config",
               {{"n_sites", cfg.layout.size()},
                {"weights", cfg.w_true.describe()},
                {"weights_arm", to_string(cfg.arm)},
                {"true_cluster", truth},
                {"rho_grid", cfg.rho_grid},
                {"c_grid", cfg.c_grid},
                {"methods", methods},
                {"S", cfg.replicates},
                {"M", cfg.mc_replicates},
                {"alpha_level", cfg.alpha_level},
                {"alpha0", cfg.alpha0},
                {"sigma", cfg.sigma},
                {"max_fraction", cfg.max_fraction},
                {"max_clusters", cfg.max_clusters},
                {"seed", cfg.seed}}}};
  json cells = json::array();
  for (const auto& cell : result.cells) {
    json reps = json::array();
    for (const auto& rec : cell.replicates) {
      json detected = json::array();
      for (std::size_t s : rec.detected) detected.push_back(cfg.layout.site(s).id);
      json r = {{"failed", rec.failed}, {"p_value", rec.p_value}, {"detected", detected}};
      r["rho_hat"] = rec.rho_hat ? json(*rec.rho_hat) : json(nullptr);
      r["selected_k"] = rec.selected_k ? json(*rec.selected_k) : json(nullptr);
      reps.push_back(std::move(r));
    }
    cells.push_back({{"method", to_string(cell.method)},
                     {"rho", cell.rho},
                     {"c", cell.c},
                     {"power", cell.power},
                     {"tp", cell.tp},
                     {"fp", cell.fp},
                     {"n_ok", cell.n_ok},
                     {"n_fail", cell.n_fail},
                     {"replicates", std::move(reps)}});
  }
  doc["cells"] = std::move(cells);
  return doc.dump(1) + "\n";
}

SpatialDataset lattice_layout(std::size_t rows, std::size_t cols) {
  std::vector<Site> sites;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      sites.push_back({"r" + std::to_string(r) + "c" + std::to_string(c), static_cast<double>(c), static_cast<double>(r)});
    }
  }
  return SpatialDataset(std::move(sites), std::vector<double>(rows * cols, 0.0));
}

namespace {

std::vector<std::size_t> window_around(const SpatialDataset& layout, const std::string& center_id, std::size_t size) {
  const std::size_t center = layout.index_of(center_id);
  const CandidateSet all = enumerate_candidates(layout, 0.5);
  for (const auto& c : all.clusters()) {
    if (c.center == center && c.size() == size) return c.members;
  }
  // The exact size may be skipped by distance ties or taken by another
  // center; fall back to the nearest sites.
  const DistanceMatrix d = pairwise_distances(layout);
  std::vector<std::size_t> idx(layout.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d(center, a) < d(center, b); });
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  return idx;
}

SimConfig lattice_default() {
  SimConfig cfg{lattice_layout(10, 10), row_standardize(lattice_rook(10, 10)), {}};
  for (std::size_t r = 4; r <= 5; ++r) {
    for (std::size_t c = 3; c <= 6; ++c) cfg.true_cluster.push_back(r * 10 + c);
  }
  return cfg;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> parse_reals(const std::string& key, const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError("config key '" + key + "': invalid number '" + item + "'");
    }
  }
  return out;
}

std::uint64_t parse_count(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("config key '" + key + "': invalid integer '" + s + "'");
  }
}

double parse_real(const std::string& key, const std::string& s) {
  const auto v = parse_reals(key, s);
  if (v.size() != 1) throw InputError("config key '" + key + "' expects one number");
  return v.front();
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw InputError("config key '" + key + "' expects true or false");
}

}  // namespace

SimConfig default_sim_config(const std::optional<std::filesystem::path>& data_dir) {
  if (data_dir) {
    const auto sites = *data_dir / "france94_sites.csv";
    const auto edges = *data_dir / "france94_contiguity.csv";
    if (std::filesystem::exists(sites) && std::filesystem::exists(edges)) {
      SpatialDataset layout = io::read_dataset_csv(sites, true);
      WeightsMatrix w = row_standardize(io::read_contiguity_csv(edges, layout));
      auto cluster = window_around(layout, "63", 8);
      return SimConfig{std::move(layout), std::move(w), std::move(cluster)};
    }
  }
  return lattice_default();
}

SimConfig load_sim_config(const std::filesystem::path& path) {
  const std::string text = io::read_text(path);
  const auto base = path.parent_path();
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    auto strip = [](std::string s) {
      const auto first = s.find_first_not_of(" \t\r");
      if (first == std::string::npos) return std::string();
      return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
    };
    kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
  }
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto resolve = [&](const std::string& p) {
    std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
  };

  SimConfig cfg = [&] {
    const auto layout_key = take("layout");
    const auto contiguity = take("contiguity");
    const auto weights = take("weights");
    const auto standardize_key = take("standardize");
    const bool standardize = standardize_key ? parse_bool("standardize", *standardize_key) : true;
    if (!layout_key) {
      if (contiguity || weights) throw InputError("config gives weights without a layout");
      return lattice_default();
    }
    SpatialDataset layout = io::read_dataset_csv(resolve(*layout_key), true);
    WeightsMatrix w;
    if (contiguity) w = io::read_contiguity_csv(resolve(*contiguity), layout);
    else if (weights) w = io::read_weights_csv(resolve(*weights), layout);
    else throw InputError("config gives a layout without 'contiguity' or 'weights'");
    if (standardize) w = row_standardize(w);
    SimConfig c{std::move(layout), std::move(w), {}};
    return c;
  }();

  const auto center = take("true_cluster_center");
  const auto size = take("true_cluster_size");
  if (const auto ids = take("true_cluster")) {
    cfg.true_cluster.clear();
    for (const auto& id : split_list(*ids)) cfg.true_cluster.push_back(cfg.layout.index_of(id));
    std::sort(cfg.true_cluster.begin(), cfg.true_cluster.end());
  } else if (center) {
    cfg.true_cluster = window_around(cfg.layout, *center, size ? parse_count("true_cluster_size", *size) : 8);
  } else if (cfg.true_cluster.empty()) {
    throw InputError("config needs 'true_cluster' or 'true_cluster_center'");
  }

  if (auto v = take("rho_grid")) cfg.rho_grid = parse_reals("rho_grid", *v);
  if (auto v = take("c_grid")) cfg.c_grid = parse_reals("c_grid", *v);
  if (auto v = take("methods")) {
    cfg.methods.clear();
    for (const auto& m : split_list(*v)) cfg.methods.push_back(parse_scan_method(m));
  }
  if (auto v = take("weights_arm")) {
    if (*v == "true") cfg.arm = WeightsArm::true_weights;
    else if (*v == "knn-select") cfg.arm = WeightsArm::knn_selected;
    else throw InputError("config key 'weights_arm' expects 'true' or 'knn-select'");
  }
  if (auto v = take("knn_min")) cfg.knn_min = parse_count("knn_min", *v);
  if (auto v = take("knn_max")) cfg.knn_max = parse_count("knn_max", *v);
  if (auto v = take("S")) cfg.replicates = parse_count("S", *v);
  if (auto v = take("M")) cfg.mc_replicates = parse_count("M", *v);
  if (auto v = take("alpha_level")) cfg.alpha_level = parse_real("alpha_level", *v);
  if (auto v = take("alpha0")) cfg.alpha0 = parse_real("alpha0", *v);
  if (auto v = take("sigma")) cfg.sigma = parse_real("sigma", *v);
  if (auto v = take("max_fraction")) cfg.max_fraction = parse_real("max_fraction", *v);
  if (auto v = take("max_clusters")) cfg.max_clusters = parse_count("max_clusters", *v);
  if (auto v = take("seed")) cfg.seed = parse_count("seed", *v);
  if (!kv.empty()) throw InputError(path.string() + ": unknown config key '" + kv.begin()->first + "'");
  cfg.validate();
  return cfg;
}

}  // namespace sarscan
