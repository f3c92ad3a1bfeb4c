#include "sarscan/weights.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sarscan/error.hpp"

namespace sarscan {

std::string to_string(WeightScheme scheme) {
  switch (scheme) {
    case WeightScheme::contiguity: return "contiguity";
    case WeightScheme::knn: return "knn";
    case WeightScheme::inverse_distance: return "inverse_distance";
    case WeightScheme::custom: return "custom";
  }
  return "custom";
}

WeightsMatrix WeightsMatrix::from_entries(std::size_t n, std::vector<WeightEntry> entries, WeightScheme scheme) {
  for (const WeightEntry& e : entries) {
    if (e.row >= n || e.col >= n) {
      throw InputError("weight (" + std::to_string(e.row) + ", " + std::to_string(e.col) + ") outside a " +
                       std::to_string(n) + "-site matrix");
    }
    if (e.row == e.col) throw InputError("self-loop weight on site " + std::to_string(e.row));
    if (!std::isfinite(e.value) || e.value <= 0.0) {
      throw InputError("weight (" + std::to_string(e.row) + ", " + std::to_string(e.col) + ") must be positive");
    }
  }
  std::sort(entries.begin(), entries.end(), [](const WeightEntry& a, const WeightEntry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  for (std::size_t k = 1; k < entries.size(); ++k) {
    if (entries[k].row == entries[k - 1].row && entries[k].col == entries[k - 1].col) {
      throw InputError("repeated weight (" + std::to_string(entries[k].row) + ", " + std::to_string(entries[k].col) + ")");
    }
  }
  WeightsMatrix w;
  w.n_ = n;
  w.scheme_ = scheme;
  w.row_ptr_.assign(n + 1, 0);
  w.cols_.reserve(entries.size());
  w.vals_.reserve(entries.size());
  for (const WeightEntry& e : entries) {
    ++w.row_ptr_[e.row + 1];
    w.cols_.push_back(e.col);
    w.vals_.push_back(e.value);
  }
  std::partial_sum(w.row_ptr_.begin(), w.row_ptr_.end(), w.row_ptr_.begin());
  return w;
}

std::string WeightsMatrix::describe() const {
  std::ostringstream os;
  os << to_string(scheme_);
  if (scheme_ == WeightScheme::knn) os << "(k=" << static_cast<long>(scheme_parameter_) << ")";
  if (scheme_ == WeightScheme::inverse_distance) os << "(power=" << scheme_parameter_ << ")";
  if (row_standardized_) os << ", row-standardized";
  return os.str();
}

double WeightsMatrix::row_sum(std::size_t i) const {
  const auto v = row_values(i);
  return std::accumulate(v.begin(), v.end(), 0.0);
}

double WeightsMatrix::total() const { return std::accumulate(vals_.begin(), vals_.end(), 0.0); }

double WeightsMatrix::at(std::size_t i, std::size_t j) const {
  const auto c = row_cols(i);
  const auto it = std::lower_bound(c.begin(), c.end(), j);
  if (it == c.end() || *it != j) return 0.0;
  return row_values(i)[static_cast<std::size_t>(it - c.begin())];
}

std::size_t WeightsMatrix::isolated_count() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n_; ++i) count += row_ptr_[i] == row_ptr_[i + 1];
  return count;
}

std::vector<WeightEntry> WeightsMatrix::entries() const {
  std::vector<WeightEntry> out;
  out.reserve(nnz());
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) out.push_back({i, cols_[k], vals_[k]});
  }
  return out;
}

std::vector<double> WeightsMatrix::multiply(std::span<const double> x) const {
  if (x.size() != n_) throw InputError("vector length does not match weights matrix");
  std::vector<double> out(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    double s = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += vals_[k] * x[cols_[k]];
    out[i] = s;
  }
  return out;
}

std::vector<double> WeightsMatrix::to_dense() const {
  std::vector<double> out(n_ * n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) out[i * n_ + cols_[k]] = vals_[k];
  }
  return out;
}

WeightsMatrix build_contiguity(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges) {
  std::vector<std::pair<std::size_t, std::size_t>> directed;
  directed.reserve(2 * edges.size());
  for (auto [i, j] : edges) {
    if (i == j) throw InputError("contiguity edge is a self-loop on site " + std::to_string(i));
    if (i >= n || j >= n) throw InputError("contiguity edge references a site outside [0, " + std::to_string(n) + ")");
    directed.emplace_back(i, j);
    directed.emplace_back(j, i);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());
  std::vector<WeightEntry> entries;
  entries.reserve(directed.size());
  for (auto [i, j] : directed) entries.push_back({i, j, 1.0});
  return WeightsMatrix::from_entries(n, std::move(entries), WeightScheme::contiguity);
}

WeightsMatrix build_knn(const DistanceMatrix& dist, std::size_t k) {
  const std::size_t n = dist.size();
  if (k < 1 || k + 1 > n) throw InputError("knn requires 1 <= k <= n-1, got k=" + std::to_string(k));
  std::vector<WeightEntry> entries;
  entries.reserve(n * k);
  std::vector<std::size_t> others(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others[m++] = j;
    }
    const auto row = dist.row(i);
    std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k), others.end(),
                      [&](std::size_t a, std::size_t b) { return row[a] != row[b] ? row[a] < row[b] : a < b; });
    for (std::size_t q = 0; q < k; ++q) entries.push_back({i, others[q], 1.0});
  }
  auto w = WeightsMatrix::from_entries(n, std::move(entries), WeightScheme::knn);
  w.scheme_parameter_ = static_cast<double>(k);
  return w;
}

WeightsMatrix build_inverse_distance(const DistanceMatrix& dist, double power, std::optional<double> cutoff) {
  if (!(power > 0.0)) throw InputError("inverse-distance power must be positive");
  const std::size_t n = dist.size();
  std::vector<WeightEntry> entries;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = dist(i, j);
      if (d == 0.0) {
        throw InputError("sites " + std::to_string(i) + " and " + std::to_string(j) +
                         " share coordinates; inverse-distance weight undefined");
      }
      if (cutoff && d > *cutoff) continue;
      entries.push_back({i, j, std::pow(d, -power)});
    }
  }
  auto w = WeightsMatrix::from_entries(n, std::move(entries), WeightScheme::inverse_distance);
  w.scheme_parameter_ = power;
  return w;
}

WeightsMatrix row_standardize(const WeightsMatrix& w) {
  if (w.row_standardized_) return w;
  WeightsMatrix out = w;
  for (std::size_t i = 0; i < out.n_; ++i) {
    const double s = w.row_sum(i);
    if (s == 0.0) continue;
    for (std::size_t k = out.row_ptr_[i]; k < out.row_ptr_[i + 1]; ++k) out.vals_[k] /= s;
  }
  out.row_standardized_ = true;
  return out;
}

double morans_i(const WeightsMatrix& w, std::span<const double> y) {
  const std::size_t n = w.size();
  if (y.size() != n) throw InputError("outcome length does not match weights matrix");
  const double s0 = w.total();
  if (!(s0 > 0.0)) throw InputError("Moran's I undefined: weights matrix has no nonzero entry");
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  std::vector<double> z(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = y[i] - mean;
    ss += z[i] * z[i];
  }
  if (!(ss > 0.0)) throw InputError("Moran's I undefined: outcome is constant");
  double cross = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = w.row_cols(i);
    const auto v = w.row_values(i);
    double s = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) s += v[k] * z[c[k]];
    cross += z[i] * s;
  }
  return static_cast<double>(n) / s0 * cross / ss;
}

WeightsSelection select_weights(std::span<const WeightsMatrix> candidates, std::span<const double> y) {
  if (candidates.empty()) throw InputError("no candidate weights matrices to select from");
  WeightsSelection sel;
  sel.values.resize(candidates.size());
  bool found = false;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    try {
      const double value = morans_i(candidates[c], y);
      sel.values[c] = value;
      if (!found || value > sel.morans_i) {
        sel.index = c;
        sel.morans_i = value;
        found = true;
      }
    } catch (const InputError& e) {
      sel.warnings.push_back("skipping candidate " + std::to_string(c) + " (" + candidates[c].describe() + "): " + e.what());
    }
  }
  if (!found) throw InputError("Moran's I is undefined for every candidate weights matrix");
  return sel;
}

WeightsMatrix lattice_rook(std::size_t rows, std::size_t cols) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      if (c + 1 < cols) edges.emplace_back(i, i + 1);
      if (r + 1 < rows) edges.emplace_back(i, i + cols);
    }
  }
  return build_contiguity(rows * cols, edges);
}

}  // namespace sarscan
