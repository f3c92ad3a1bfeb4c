#include "sarscan/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "sarscan/error.hpp"

namespace sarscan {

SpatialDataset::SpatialDataset(std::vector<Site> sites, std::vector<double> values)
    : sites_(std::move(sites)), values_(std::move(values)) {
  if (sites_.size() < 3) throw InputError("dataset needs at least 3 sites, got " + std::to_string(sites_.size()));
  if (values_.size() != sites_.size()) {
    throw InputError("dataset has " + std::to_string(sites_.size()) + " sites but " +
                     std::to_string(values_.size()) + " values");
  }
  std::set<std::string> seen;
  for (const Site& s : sites_) {
    if (!std::isfinite(s.x) || !std::isfinite(s.y)) throw InputError("non-finite coordinates for site '" + s.id + "'");
    if (!seen.insert(s.id).second) throw InputError("duplicate site id '" + s.id + "'");
  }
}

SpatialDataset SpatialDataset::with_values(std::vector<double> values) const {
  return SpatialDataset(sites_, std::move(values));
}

std::size_t SpatialDataset::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    if (sites_[i].id == id) return i;
  }
  throw InputError("unknown site id '" + id + "'");
}

DistanceMatrix::DistanceMatrix(std::size_t n, std::vector<double> entries) : n_(n), d_(std::move(entries)) {
  if (d_.size() != n_ * n_) throw InputError("distance matrix size mismatch");
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      if ((*this)(i, j) == 0.0) ++duplicate_pairs_;
    }
  }
}

DistanceMatrix pairwise_distances(const SpatialDataset& ds) {
  const std::size_t n = ds.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = std::hypot(ds.site(i).x - ds.site(j).x, ds.site(i).y - ds.site(j).y);
      d[i * n + j] = v;
      d[j * n + i] = v;
    }
  }
  return DistanceMatrix(n, std::move(d));
}

bool CandidateCluster::contains(std::size_t site) const {
  return std::binary_search(members.begin(), members.end(), site);
}

bool CandidateCluster::intersects(std::span<const std::size_t> sorted_sites) const {
  auto a = members.begin();
  auto b = sorted_sites.begin();
  while (a != members.end() && b != sorted_sites.end()) {
    if (*a == *b) return true;
    if (*a < *b) ++a; else ++b;
  }
  return false;
}

std::uint32_t CandidateSet::max_prefix(std::size_t center) const {
  const auto& w = windows_[center];
  return w.empty() ? 0 : w.back().prefix;
}

CandidateSet CandidateSet::select(std::span<const std::size_t> cluster_indices) const {
  std::vector<std::uint32_t> remap(clusters_.size(), UINT32_MAX);
  CandidateSet out;
  out.n_sites_ = n_sites_;
  out.clusters_.reserve(cluster_indices.size());
  for (std::size_t k : cluster_indices) {
    if (k >= clusters_.size()) throw InputError("candidate index out of range");
    remap[k] = static_cast<std::uint32_t>(out.clusters_.size());
    out.clusters_.push_back(clusters_[k]);
  }
  out.order_.resize(order_.size());
  out.windows_.resize(windows_.size());
  for (std::size_t c = 0; c < windows_.size(); ++c) {
    for (const Window& w : windows_[c]) {
      if (remap[w.cluster] != UINT32_MAX) out.windows_[c].push_back({w.prefix, remap[w.cluster]});
    }
    // Only the prefix actually scanned needs to be kept.
    if (!out.windows_[c].empty()) {
      const auto& src = order_[c];
      out.order_[c].assign(src.begin(), src.begin() + out.windows_[c].back().prefix);
    }
  }
  return out;
}

CandidateSet CandidateSet::excluding(std::span<const std::size_t> sorted_sites) const {
  std::vector<std::size_t> keep;
  keep.reserve(clusters_.size());
  for (std::size_t k = 0; k < clusters_.size(); ++k) {
    if (!clusters_[k].intersects(sorted_sites)) keep.push_back(k);
  }
  return select(keep);
}

CandidateSet CandidateSet::from_clusters(std::size_t n_sites, std::vector<CandidateCluster> clusters) {
  CandidateSet out;
  out.n_sites_ = n_sites;
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    auto& c = clusters[k];
    std::sort(c.members.begin(), c.members.end());
    if (c.members.empty() || c.members.back() >= n_sites) throw InputError("cluster members out of range");
    out.order_.emplace_back(c.members.begin(), c.members.end());
    out.windows_.push_back({Window{static_cast<std::uint32_t>(c.members.size()), static_cast<std::uint32_t>(k)}});
  }
  out.clusters_ = std::move(clusters);
  return out;
}

namespace {

struct MemberSetHash {
  std::size_t operator()(const std::vector<std::size_t>& v) const noexcept {
    std::size_t h = v.size();
    for (std::size_t x : v) h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

}  // namespace

CandidateSet enumerate_candidates(const DistanceMatrix& dist, double max_fraction) {
  if (!(max_fraction > 0.0 && max_fraction <= 0.5)) {
    throw InputError("max_fraction must lie in (0, 0.5], got " + std::to_string(max_fraction));
  }
  const std::size_t n = dist.size();
  const auto cap = static_cast<std::size_t>(std::floor(static_cast<double>(n) * max_fraction));

  CandidateSet out;
  out.n_sites_ = n;
  out.order_.resize(n);
  out.windows_.resize(n);
  std::unordered_map<std::vector<std::size_t>, std::uint32_t, MemberSetHash> seen;

  for (std::size_t c = 0; c < n; ++c) {
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    const auto row = dist.row(c);
    // Center first, then by distance; index order inside ties keeps the plan
    // deterministic (ties enter the window together anyway).
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (a == c || b == c) return a == c && b != c;
      if (row[a] != row[b]) return row[a] < row[b];
      return a < b;
    });

    std::size_t len = 0;
    while (len < n) {
      std::size_t next = len + 1;
      const double radius = row[order[len]];
      while (next < n && row[order[next]] == radius) ++next;
      // The center shares distance 0 with co-located sites.
      if (len == 0) {
        while (next < n && row[order[next]] == 0.0) ++next;
      }
      if (next > cap) break;
      len = next;
      std::vector<std::size_t> members(order.begin(), order.begin() + len);
      std::sort(members.begin(), members.end());
      auto [it, inserted] = seen.try_emplace(members, static_cast<std::uint32_t>(out.clusters_.size()));
      if (!inserted) continue;
      out.windows_[c].push_back({static_cast<std::uint32_t>(len), it->second});
      out.clusters_.push_back(CandidateCluster{c, radius, std::move(members)});
    }
    const std::uint32_t used = out.windows_[c].empty() ? 0 : out.windows_[c].back().prefix;
    out.order_[c].assign(order.begin(), order.begin() + used);
  }
  return out;
}

CandidateSet enumerate_candidates(const SpatialDataset& ds, double max_fraction) {
  return enumerate_candidates(pairwise_distances(ds), max_fraction);
}

}  // namespace sarscan
