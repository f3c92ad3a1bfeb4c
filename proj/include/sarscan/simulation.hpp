#pragma once

// Monte Carlo comparison of scan methods on SAR-correlated synthetic data:
//   Y = (I - rho W)^-1 (alpha0 1 + delta xi + eps),  delta = c sqrt(2),
//   eps ~ N(0, sigma^2) iid.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sarscan/random.hpp"
#include "sarscan/scan.hpp"
#include "sarscan/spatial.hpp"
#include "sarscan/weights.hpp"

namespace sarscan {

// Which weights matrix the SAR methods use.
enum class WeightsArm {
  true_weights,  // the generating matrix
  knn_selected,  // Moran's-I-selected k-NN matrix per replicate
};

std::string to_string(WeightsArm arm);

struct SimConfig {
  SpatialDataset layout;              // coordinates; values ignored
  WeightsMatrix w_true;               // generating matrix
  std::vector<std::size_t> true_cluster;  // sorted site indices
  std::vector<double> rho_grid{0.0, 0.2, 0.4, 0.6, 0.8};
  std::vector<double> c_grid{0.0, 0.5, 1.0, 1.5};
  std::vector<ScanMethod> methods{ScanMethod::gaussian, ScanMethod::p_sar, ScanMethod::np_sar};
  WeightsArm arm = WeightsArm::true_weights;
  std::size_t knn_min = 2;
  std::size_t knn_max = 10;
  std::size_t replicates = 200;     // S
  std::size_t mc_replicates = 199;  // M
  double alpha_level = 0.05;
  double alpha0 = 0.0;
  double sigma = 1.0;
  double max_fraction = 0.5;
  std::size_t max_clusters = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

// Generates one dataset. sigma = 0 is accepted here for algebraic checks.
std::vector<double> generate_dataset(const SimConfig& cfg, double rho, double c, Rng& rng);

struct Rates {
  double tp = 0.0;
  double fp = 0.0;
};

// Site-level rates of the union A of detected member sets against the truth:
// tp = |A & truth| / |truth|, fp = |A \ truth| / (n - |truth|).
Rates tp_fp_rates(std::span<const std::vector<std::size_t>> detected, std::span<const std::size_t> truth,
                  std::size_t n);

struct ReplicateRecord {
  std::vector<std::size_t> detected;  // union of significant member sets
  double p_value = 1.0;               // of the most likely cluster
  std::optional<double> rho_hat;
  std::optional<std::size_t> selected_k;
  bool failed = false;
};

struct CellResult {
  ScanMethod method = ScanMethod::gaussian;
  double rho = 0.0;
  double c = 0.0;
  double power = 0.0;  // Type I error when c = 0
  double tp = 0.0;
  double fp = 0.0;
  std::size_t n_ok = 0;
  std::size_t n_fail = 0;
  std::vector<ReplicateRecord> replicates;
};

struct SimResult {
  WeightsArm arm = WeightsArm::true_weights;
  std::vector<CellResult> cells;  // ordered by rho, then c, then method

  const CellResult& cell(ScanMethod method, double rho, double c) const;
};

// Runs every (rho, c, replicate) and each method on it. Replicates run
// concurrently; each one draws from streams derived from (seed, rho index,
// c index, replicate), so results do not depend on `threads`.
SimResult run_grid(const SimConfig& cfg, unsigned threads = 0);

// method,rho,c,power,tp,fp,n_fail
std::string results_csv(const SimResult& result);
std::string results_json(const SimConfig& cfg, const SimResult& result);

// Regular rows x cols lattice with unit spacing, ids "r<row>c<col>".
SpatialDataset lattice_layout(std::size_t rows, std::size_t cols);

// Default experiment: the bundled 94-site layout with its contiguity graph
// (row-standardized) and planted 8-site cluster when `data_dir` holds them,
// else a 10 x 10 rook lattice with a 2 x 4 block cluster.
SimConfig default_sim_config(const std::optional<std::filesystem::path>& data_dir);

// Parses `key = value` lines ('#' starts a comment). Relative paths resolve
// against the config file's directory. See README for the keys.
SimConfig load_sim_config(const std::filesystem::path& path);

}  // namespace sarscan
