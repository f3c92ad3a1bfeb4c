#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sarscan/spatial.hpp"

namespace sarscan {

enum class WeightScheme { contiguity, knn, inverse_distance, custom };

std::string to_string(WeightScheme scheme);

struct WeightEntry {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

// Sparse nonnegative n x n spatial weights, zero diagonal, stored row-wise
// with columns ascending inside each row. Only strictly positive weights are
// stored. Rows without entries are isolated sites.
class WeightsMatrix {
 public:
  WeightsMatrix() = default;

  // Validates indices, rejects self-loops, non-positive or non-finite weights
  // and repeated (row, col) pairs.
  static WeightsMatrix from_entries(std::size_t n, std::vector<WeightEntry> entries,
                                    WeightScheme scheme = WeightScheme::custom);

  std::size_t size() const { return n_; }
  std::size_t nnz() const { return cols_.size(); }
  WeightScheme scheme() const { return scheme_; }
  bool row_standardized() const { return row_standardized_; }

  // k for knn, the power for inverse_distance, 0 otherwise.
  double scheme_parameter() const { return scheme_parameter_; }
  std::string describe() const;

  std::span<const std::size_t> row_cols(std::size_t i) const {
    return {cols_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }
  std::span<const double> row_values(std::size_t i) const {
    return {vals_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }
  double row_sum(std::size_t i) const;
  double total() const;  // S0
  double at(std::size_t i, std::size_t j) const;

  std::size_t isolated_count() const;
  bool has_isolated() const { return isolated_count() > 0; }

  std::vector<WeightEntry> entries() const;

  // W x
  std::vector<double> multiply(std::span<const double> x) const;

  // Row-major dense copy, for factorizations and tests.
  std::vector<double> to_dense() const;

 private:
  friend WeightsMatrix row_standardize(const WeightsMatrix&);

  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> cols_;
  std::vector<double> vals_;
  WeightScheme scheme_ = WeightScheme::custom;
  double scheme_parameter_ = 0.0;
  bool row_standardized_ = false;

  friend WeightsMatrix build_knn(const DistanceMatrix&, std::size_t);
  friend WeightsMatrix build_inverse_distance(const DistanceMatrix&, double, std::optional<double>);
};

// Symmetric binary matrix from undirected edges. Repeated edges collapse.
WeightsMatrix build_contiguity(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges);

// w_ij = 1 iff j is one of the k nearest sites to i; distance ties go to the
// lower site index.
WeightsMatrix build_knn(const DistanceMatrix& dist, std::size_t k);

// w_ij = d_ij^-power, dropped beyond `cutoff` when given. Co-located sites are
// rejected since their weight is undefined.
WeightsMatrix build_inverse_distance(const DistanceMatrix& dist, double power,
                                     std::optional<double> cutoff = std::nullopt);

// Divides each nonempty row by its sum. Isolated rows stay empty. A matrix
// already flagged as standardized is returned unchanged.
WeightsMatrix row_standardize(const WeightsMatrix& w);

// Global Moran's I: (n / S0) * sum_ij w_ij z_i z_j / sum_i z_i^2 with z the
// centered outcome.
double morans_i(const WeightsMatrix& w, std::span<const double> y);

struct WeightsSelection {
  std::size_t index = 0;          // position of the winner in the candidate list
  double morans_i = 0.0;
  std::vector<std::optional<double>> values;  // per candidate, empty when skipped
  std::vector<std::string> warnings;
};

// Picks the candidate maximizing Moran's I (first wins ties). Candidates whose
// index is undefined are skipped with a warning; throws when all are skipped.
WeightsSelection select_weights(std::span<const WeightsMatrix> candidates, std::span<const double> y);

// Rook contiguity on a rows x cols lattice, sites numbered row-major.
WeightsMatrix lattice_rook(std::size_t rows, std::size_t cols);

}  // namespace sarscan
