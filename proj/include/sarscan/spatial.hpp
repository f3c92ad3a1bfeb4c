#pragma once

// Site geometry, the dataset container and the family of circular scanning
// windows.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sarscan {

struct Site {
  std::string id;
  double x = 0.0;
  double y = 0.0;
};

// Sites in a planar coordinate system with one continuous outcome per site.
// Validated on construction: n >= 3, unique ids, finite coordinates and
// exactly one value per site.
class SpatialDataset {
 public:
  SpatialDataset(std::vector<Site> sites, std::vector<double> values);

  std::size_t size() const { return sites_.size(); }
  const std::vector<Site>& sites() const { return sites_; }
  const Site& site(std::size_t i) const { return sites_[i]; }
  std::span<const double> values() const { return values_; }

  // Same geometry, different outcome.
  SpatialDataset with_values(std::vector<double> values) const;

  // Index of the site with this id; throws InputError when absent.
  std::size_t index_of(const std::string& id) const;

 private:
  std::vector<Site> sites_;
  std::vector<double> values_;
};

// Dense symmetric matrix of Euclidean distances.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  DistanceMatrix(std::size_t n, std::vector<double> entries);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {d_.data() + i * n_, n_}; }

  // Number of unordered site pairs sharing coordinates (distance 0 off the
  // diagonal). Allowed, but callers should surface it as a warning.
  std::size_t duplicate_pairs() const { return duplicate_pairs_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
  std::size_t duplicate_pairs_ = 0;
};

DistanceMatrix pairwise_distances(const SpatialDataset& ds);

// Circular window: every site within `radius` of `center` (inclusive).
struct CandidateCluster {
  std::size_t center = 0;
  double radius = 0.0;
  std::vector<std::size_t> members;  // sorted ascending

  std::size_t size() const { return members.size(); }
  bool contains(std::size_t site) const;
  bool intersects(std::span<const std::size_t> sorted_sites) const;
};

// The deduplicated family of candidate windows together with a scan plan:
// for every center, the sites in increasing distance order and the prefix
// lengths of that order that correspond to emitted candidates. Scanning a new
// outcome vector then costs one prefix-sum pass per center.
class CandidateSet {
 public:
  struct Window {
    std::uint32_t prefix;   // members = first `prefix` sites of order(center)
    std::uint32_t cluster;  // index into clusters()
  };

  CandidateSet() = default;

  std::size_t n_sites() const { return n_sites_; }
  std::size_t size() const { return clusters_.size(); }
  bool empty() const { return clusters_.empty(); }
  const std::vector<CandidateCluster>& clusters() const { return clusters_; }
  const CandidateCluster& operator[](std::size_t k) const { return clusters_[k]; }

  std::size_t n_centers() const { return order_.size(); }
  std::span<const std::uint32_t> order(std::size_t center) const { return order_[center]; }
  std::span<const Window> windows(std::size_t center) const { return windows_[center]; }

  // Largest prefix used by any window of this center (0 when none).
  std::uint32_t max_prefix(std::size_t center) const;

  // Drops every candidate that shares a site with `sorted_sites`.
  CandidateSet excluding(std::span<const std::size_t> sorted_sites) const;

  // Subset of candidates, keeping their relative order.
  CandidateSet select(std::span<const std::size_t> cluster_indices) const;

  // Candidates from an explicit list of clusters (no geometry needed); each
  // cluster becomes its own "center" in the scan plan. Used for fixtures.
  static CandidateSet from_clusters(std::size_t n_sites, std::vector<CandidateCluster> clusters);

 private:
  friend CandidateSet enumerate_candidates(const DistanceMatrix&, double);

  std::size_t n_sites_ = 0;
  std::vector<CandidateCluster> clusters_;
  std::vector<std::vector<std::uint32_t>> order_;
  std::vector<std::vector<Window>> windows_;
};

// All distinct circular windows with at most floor(n * max_fraction) sites.
// Sites equidistant from a center enter the window together. Output is ordered
// by center index, then by size; a member set reachable from several centers
// is kept at its first occurrence. Requires 0 < max_fraction <= 0.5.
CandidateSet enumerate_candidates(const DistanceMatrix& dist, double max_fraction = 0.5);
CandidateSet enumerate_candidates(const SpatialDataset& ds, double max_fraction = 0.5);

}  // namespace sarscan
