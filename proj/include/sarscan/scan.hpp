#pragma once

// Gaussian and distribution-free scan statistics, their SAR-filtered
// variants, Monte Carlo significance and sequential multi-cluster detection.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sarscan/estimators.hpp"
#include "sarscan/sar.hpp"
#include "sarscan/spatial.hpp"
#include "sarscan/weights.hpp"

namespace sarscan {

enum class ScanCore { gaussian, distribution_free };

enum class ScanMethod { gaussian, distribution_free, p_sar, np_sar };

ScanCore core_of(ScanMethod method);
bool needs_weights(ScanMethod method);
std::string to_string(ScanMethod method);
// Accepts gaussian, df, distribution-free, p-sar, np-sar (and _ variants).
ScanMethod parse_scan_method(const std::string& name);

struct ScanResult {
  std::size_t cluster = 0;  // index into the candidate set
  double statistic = 0.0;
};

// Exhaustive maximization of the window statistic. Windows with zero residual
// variance are skipped for the Gaussian core. Ties (relative 1e-12) go to the
// smaller window, then to the lower center index. The reported statistic is
// gaussian_llr / df_index of the winning window.
ScanResult scan(std::span<const double> y, const CandidateSet& candidates, ScanCore core);

// Maximum statistic only, in one prefix-sum pass per center. Reusable scratch
// avoids allocations inside permutation loops.
class ScanKernel {
 public:
  explicit ScanKernel(const CandidateSet& candidates) : candidates_(&candidates) {}

  // Returns the maximum statistic over candidates, or nullopt when every
  // window is degenerate.
  std::optional<double> max_statistic(std::span<const double> y, ScanCore core);

 private:
  const CandidateSet* candidates_;
  std::vector<double> centered_;
};

// p-value from a precomputed permutation null: (1 + #{null >= observed}) /
// (M + 1). Replicates within a relative 1e-10 of the observed value count as
// ties.
double pvalue_from_null(double observed, std::span<const double> null);

// Maximum statistics of M random permutations of y. Replicate m draws its
// permutation from a stream derived from (seed, m), so the result does not
// depend on `threads`.
std::vector<double> permutation_null(std::span<const double> y, const CandidateSet& candidates, ScanCore core,
                                     std::size_t replicates, std::uint64_t seed, unsigned threads = 1);

// Requires replicates >= 19.
double mc_pvalue(double lambda_obs, std::span<const double> y, const CandidateSet& candidates, ScanCore core,
                 std::size_t replicates, std::uint64_t seed, unsigned threads = 1);

struct ClusterReport {
  CandidateCluster cluster;
  double statistic = 0.0;
  double p_value = 1.0;
  double mean_inside = 0.0;
  double sd_inside = 0.0;
  double mean_outside = 0.0;
  double sd_outside = 0.0;
  std::size_t rank = 0;  // 1 = most likely cluster
};

struct DetectOptions {
  ScanMethod method = ScanMethod::gaussian;
  std::size_t replicates = 999;
  double alpha_level = 0.05;
  std::size_t max_clusters = 1;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double max_fraction = 0.5;
  bool log_transform = false;  // analyze log(y), report on the original scale
};

struct DetectionResult {
  std::vector<ClusterReport> clusters;  // significant clusters, detection order
  ScanResult most_likely;               // first-round MLC, significant or not
  double most_likely_p = 1.0;
  std::optional<RhoSelection> rho;      // SAR methods only
  std::vector<double> analysed;         // outcome actually scanned
  std::vector<std::string> warnings;
};

// Precomputed pieces shared across detections on the same layout.
struct SarContext {
  const WeightsMatrix* weights = nullptr;
  const LogDetEngine* engine = nullptr;
};

// Full pipeline on already-prepared inputs. `analysis` is the outcome on the
// analysis scale, `reporting` the one summary statistics are computed on. For
// SAR methods, `precomputed_rho` (when given) replaces estimate_rho so several
// methods can share one estimate.
DetectionResult detect_prepared(std::span<const double> analysis, std::span<const double> reporting,
                                const CandidateSet& candidates, const std::optional<SarContext>& sar,
                                const std::optional<RhoSelection>& precomputed_rho, const DetectOptions& options);

// Enumerates windows, estimates rho and filters for SAR methods, then detects
// significant clusters one at a time: after each detection every window that
// overlaps it is removed and the next most likely window is tested against the
// same permutation null, until nothing is left, p > alpha_level, or
// max_clusters is reached. rho is not re-estimated between rounds.
DetectionResult detect(const SpatialDataset& ds, const WeightsMatrix* weights, const DetectOptions& options);

}  // namespace sarscan
