#include "sarscan/scan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sarscan/error.hpp"
#include "sarscan/parallel.hpp"
#include "sarscan/random.hpp"

namespace sarscan {

ScanCore core_of(ScanMethod method) {
  switch (method) {
    case ScanMethod::gaussian:
    case ScanMethod::p_sar: return ScanCore::gaussian;
    case ScanMethod::distribution_free:
    case ScanMethod::np_sar: return ScanCore::distribution_free;
  }
  return ScanCore::gaussian;
}

bool needs_weights(ScanMethod method) { return method == ScanMethod::p_sar || method == ScanMethod::np_sar; }

std::string to_string(ScanMethod method) {
  switch (method) {
    case ScanMethod::gaussian: return "gaussian";
    case ScanMethod::distribution_free: return "df";
    case ScanMethod::p_sar: return "p-sar";
    case ScanMethod::np_sar: return "np-sar";
  }
  return "gaussian";
}

ScanMethod parse_scan_method(const std::string& name) {
  std::string s = name;
  std::replace(s.begin(), s.end(), '_', '-');
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (s == "gaussian") return ScanMethod::gaussian;
  if (s == "df" || s == "distribution-free") return ScanMethod::distribution_free;
  if (s == "p-sar" || s == "psar") return ScanMethod::p_sar;
  if (s == "np-sar" || s == "npsar") return ScanMethod::np_sar;
  throw InputError("unknown scan method '" + name + "' (expected gaussian, df, p-sar or np-sar)");
}

namespace {

constexpr double kTieTolerance = 1e-12;
// A window whose residual sum of squares is below this fraction of the total
// sum of squares is treated as degenerate (zero within-group variance).
constexpr double kDegenerateFraction = 1e-12;

void center(std::span<const double> y, std::vector<double>& out, double& total_ss) {
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  out.resize(y.size());
  total_ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    out[i] = y[i] - mean;
    total_ss += out[i] * out[i];
  }
}

// Visits every window with its explained sum of squares
//   n * S_in^2 / (n_k (n - n_k)),   S_in = sum of centered values inside,
// which equals n * (squared distribution-free index) and n * sigma2_H0 minus
// n * sigma2_H1.
template <class Visit>
void for_each_window(const CandidateSet& candidates, std::span<const double> centered, Visit&& visit) {
  const double n = static_cast<double>(centered.size());
  for (std::size_t c = 0; c < candidates.n_centers(); ++c) {
    const auto order = candidates.order(c);
    double sum = 0.0;
    std::size_t len = 0;
    for (const auto& win : candidates.windows(c)) {
      for (; len < win.prefix; ++len) sum += centered[order[len]];
      const double nk = static_cast<double>(win.prefix);
      visit(win.cluster, n * sum * sum / (nk * (n - nk)));
    }
  }
}

double statistic_from_explained(double explained, double total_ss, std::size_t n, ScanCore core) {
  if (core == ScanCore::distribution_free) return std::sqrt(explained);
  return -0.5 * static_cast<double>(n) * std::log1p(-explained / total_ss);
}

bool degenerate(double explained, double total_ss) {
  return !(total_ss - explained > kDegenerateFraction * total_ss);
}

bool ties(double a, double b) { return std::abs(a - b) <= kTieTolerance * std::max(std::abs(a), std::abs(b)); }

}  // namespace

ScanResult scan(std::span<const double> y, const CandidateSet& candidates, ScanCore core) {
  if (candidates.empty()) throw InputError("no candidate windows to scan");
  if (y.size() != candidates.n_sites()) throw InputError("outcome length does not match the candidate layout");
  std::vector<double> centered;
  double total_ss = 0.0;
  center(y, centered, total_ss);

  std::optional<std::size_t> best;
  double best_value = 0.0;
  const auto& clusters = candidates.clusters();
  for_each_window(candidates, centered, [&](std::size_t k, double explained) {
    if (core == ScanCore::gaussian && degenerate(explained, total_ss)) return;
    if (!best) {
      best = k;
      best_value = explained;
      return;
    }
    if (ties(explained, best_value)) {
      const auto& a = clusters[k];
      const auto& b = clusters[*best];
      if (a.size() < b.size() || (a.size() == b.size() && a.center < b.center) ||
          (a.size() == b.size() && a.center == b.center && k < *best)) {
        best = k;
        best_value = explained;
      }
    } else if (explained > best_value) {
      best = k;
      best_value = explained;
    }
  });
  if (!best) throw NumericalError("every candidate window is degenerate (zero residual variance)");

  ScanResult r;
  r.cluster = *best;
  r.statistic = core == ScanCore::gaussian ? gaussian_llr(y, clusters[*best]) : df_index(y, clusters[*best]);
  return r;
}

std::optional<double> ScanKernel::max_statistic(std::span<const double> y, ScanCore core) {
  double total_ss = 0.0;
  center(y, centered_, total_ss);
  bool any = false;
  double best = 0.0;
  for_each_window(*candidates_, centered_, [&](std::size_t, double explained) {
    if (core == ScanCore::gaussian && degenerate(explained, total_ss)) return;
    if (!any || explained > best) best = explained;
    any = true;
  });
  if (!any) return std::nullopt;
  return statistic_from_explained(best, total_ss, y.size(), core);
}

double pvalue_from_null(double observed, std::span<const double> null) {
  const double threshold = observed - 1e-10 * std::abs(observed);
  const auto exceed = std::count_if(null.begin(), null.end(), [&](double v) { return v >= threshold; });
  return (1.0 + static_cast<double>(exceed)) / (static_cast<double>(null.size()) + 1.0);
}

std::vector<double> permutation_null(std::span<const double> y, const CandidateSet& candidates, ScanCore core,
                                     std::size_t replicates, std::uint64_t seed, unsigned threads) {
  if (y.size() != candidates.n_sites()) throw InputError("outcome length does not match the candidate layout");
  const unsigned workers = resolve_threads(threads);
  std::vector<ScanKernel> kernels(workers, ScanKernel(candidates));
  std::vector<std::vector<double>> buffers(workers);
  std::vector<double> null(replicates);
  parallel_for(replicates, workers, [&](std::size_t m, unsigned worker) {
    auto& buf = buffers[worker];
    buf.assign(y.begin(), y.end());
    Rng rng = make_rng(seed, {m});
    std::shuffle(buf.begin(), buf.end(), rng);
    null[m] = kernels[worker].max_statistic(buf, core).value_or(-std::numeric_limits<double>::infinity());
  });
  return null;
}

double mc_pvalue(double lambda_obs, std::span<const double> y, const CandidateSet& candidates, ScanCore core,
                 std::size_t replicates, std::uint64_t seed, unsigned threads) {
  if (replicates < 19) throw InputError("Monte Carlo p-values need at least 19 replicates");
  const auto null = permutation_null(y, candidates, core, replicates, seed, threads);
  return pvalue_from_null(lambda_obs, null);
}

namespace {

void summarize(std::span<const double> values, const CandidateCluster& c, ClusterReport& r) {
  std::vector<char> inside(values.size(), 0);
  for (std::size_t m : c.members) inside[m] = 1;
  auto moments = [&](bool want) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (static_cast<bool>(inside[i]) == want) {
        sum += values[i];
        ++count;
      }
    }
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (static_cast<bool>(inside[i]) == want) ss += (values[i] - mean) * (values[i] - mean);
    }
    const double sd = count > 1 ? std::sqrt(ss / static_cast<double>(count - 1)) : 0.0;
    return std::pair{mean, sd};
  };
  std::tie(r.mean_inside, r.sd_inside) = moments(true);
  std::tie(r.mean_outside, r.sd_outside) = moments(false);
}

}  // namespace

DetectionResult detect_prepared(std::span<const double> analysis, std::span<const double> reporting,
                                const CandidateSet& candidates, const std::optional<SarContext>& sar,
                                const std::optional<RhoSelection>& precomputed_rho, const DetectOptions& options) {
  if (options.replicates < 19) throw InputError("Monte Carlo p-values need at least 19 replicates");
  if (options.max_clusters < 1) throw InputError("max_clusters must be at least 1");
  if (!(options.alpha_level > 0.0 && options.alpha_level < 1.0)) throw InputError("alpha level must lie in (0, 1)");
  if (analysis.size() != candidates.n_sites() || reporting.size() != candidates.n_sites()) {
    throw InputError("outcome length does not match the candidate layout");
  }

  DetectionResult out;
  if (needs_weights(options.method)) {
    if (!sar || !sar->weights || !sar->engine) {
      throw InputError("method " + to_string(options.method) + " requires a spatial weights matrix");
    }
    out.rho = precomputed_rho ? *precomputed_rho
                              : estimate_rho(analysis, *sar->weights, candidates, *sar->engine, options.threads);
    out.analysed = spatial_filter(analysis, *sar->weights, out.rho->rho_hat);
    out.warnings.insert(out.warnings.end(), out.rho->warnings.begin(), out.rho->warnings.end());
  } else {
    out.analysed.assign(analysis.begin(), analysis.end());
  }

  const ScanCore core = core_of(options.method);
  const auto null = permutation_null(out.analysed, candidates, core, options.replicates, options.seed, options.threads);

  CandidateSet remaining = candidates;
  for (std::size_t round = 0; round < options.max_clusters && !remaining.empty(); ++round) {
    ScanResult r;
    try {
      r = scan(out.analysed, remaining, core);
    } catch (const NumericalError&) {
      if (round == 0) throw;
      break;
    }
    const double p = pvalue_from_null(r.statistic, null);
    if (round == 0) {
      out.most_likely = r;
      out.most_likely_p = p;
    }
    if (p > options.alpha_level) break;
    ClusterReport report;
    report.cluster = remaining[r.cluster];
    report.statistic = r.statistic;
    report.p_value = p;
    report.rank = round + 1;
    summarize(reporting, report.cluster, report);
    out.clusters.push_back(report);
    remaining = remaining.excluding(report.cluster.members);
  }
  return out;
}

DetectionResult detect(const SpatialDataset& ds, const WeightsMatrix* weights, const DetectOptions& options) {
  std::vector<double> analysis(ds.values().begin(), ds.values().end());
  if (options.log_transform) {
    for (std::size_t i = 0; i < analysis.size(); ++i) {
      if (!(analysis[i] > 0.0)) throw InputError("log transform needs positive values (site '" + ds.site(i).id + "')");
      analysis[i] = std::log(analysis[i]);
    }
  }
  const CandidateSet candidates = enumerate_candidates(ds, options.max_fraction);
  std::optional<LogDetEngine> engine;
  std::optional<SarContext> sar;
  if (needs_weights(options.method)) {
    if (!weights) throw InputError("method " + to_string(options.method) + " requires a spatial weights matrix");
    if (weights->size() != ds.size()) throw InputError("weights matrix size does not match the dataset");
    engine = make_logdet_engine(*weights);
    sar = SarContext{weights, &*engine};
  }
  DetectionResult out = detect_prepared(analysis, ds.values(), candidates, sar, std::nullopt, options);
  if (const auto dup = pairwise_distances(ds).duplicate_pairs(); dup > 0) {
    out.warnings.push_back(std::to_string(dup) + " pair(s) of sites share coordinates");
  }
  return out;
}

}  // namespace sarscan
