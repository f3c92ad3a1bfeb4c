#include "sarscan/estimators.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "sarscan/error.hpp"

namespace sarscan {

namespace {

std::vector<char> indicator(std::size_t n, std::span<const std::size_t> members) {
  if (members.empty() || members.size() >= n) {
    throw InputError("cluster size must satisfy 1 <= n_k < n (n_k=" + std::to_string(members.size()) +
                     ", n=" + std::to_string(n) + ")");
  }
  std::vector<char> xi(n, 0);
  for (std::size_t m : members) {
    if (m >= n) throw InputError("cluster member out of range");
    if (xi[m]) throw InputError("cluster lists a member twice");
    xi[m] = 1;
  }
  return xi;
}

}  // namespace

NullEstimates mle_h0(std::span<const double> y) {
  const double n = static_cast<double>(y.size());
  NullEstimates e;
  e.alpha = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : y) ss += (v - e.alpha) * (v - e.alpha);
  e.sigma2 = ss / n;
  return e;
}

ClusterEstimates mle_h1(std::span<const double> y, std::span<const std::size_t> members) {
  const std::size_t n = y.size();
  const auto xi = indicator(n, members);
  const double nk = static_cast<double>(members.size());
  const double nd = static_cast<double>(n);
  ClusterEstimates e;
  for (std::size_t i = 0; i < n; ++i) {
    e.alpha += (1.0 - xi[i]) * y[i];
    e.delta += (nd / nk * xi[i] - 1.0) * y[i];
  }
  e.alpha /= nd - nk;
  e.delta /= nd - nk;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - e.alpha - e.delta * xi[i];
    rss += r * r;
  }
  e.sigma2 = rss / nd;
  return e;
}

double within_group_variance(std::span<const double> y, std::span<const std::size_t> members) {
  const std::size_t n = y.size();
  const auto xi = indicator(n, members);
  double sum_in = 0.0, sum_out = 0.0;
  for (std::size_t i = 0; i < n; ++i) (xi[i] ? sum_in : sum_out) += y[i];
  const double mean_in = sum_in / static_cast<double>(members.size());
  const double mean_out = sum_out / static_cast<double>(n - members.size());
  double ss_in = 0.0, ss_out = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (xi[i]) ss_in += (y[i] - mean_in) * (y[i] - mean_in);
    else ss_out += (y[i] - mean_out) * (y[i] - mean_out);
  }
  return (ss_out + ss_in) / static_cast<double>(n);
}

double gaussian_loglik(std::span<const double> y, std::span<const std::size_t> members, double alpha, double delta,
                       double sigma2) {
  const std::size_t n = y.size();
  std::vector<char> xi(n, 0);
  for (std::size_t m : members) xi.at(m) = 1;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - alpha - delta * xi[i];
    rss += r * r;
  }
  return -0.5 * static_cast<double>(n) * std::log(sigma2) - rss / (2.0 * sigma2);
}

double gaussian_llr(std::span<const double> y, const CandidateCluster& c) {
  const NullEstimates h0 = mle_h0(y);
  const ClusterEstimates h1 = mle_h1(y, c.members);
  if (!(h1.sigma2 > 0.0)) {
    throw NumericalError("degenerate window (center " + std::to_string(c.center) +
                         ", " + std::to_string(c.size()) + " sites): zero residual variance");
  }
  return 0.5 * static_cast<double>(y.size()) * (std::log(h0.sigma2) - std::log(h1.sigma2));
}

double df_index(std::span<const double> y, const CandidateCluster& c) {
  const std::size_t n = y.size();
  const auto xi = indicator(n, c.members);
  double sum_in = 0.0, sum_out = 0.0;
  for (std::size_t i = 0; i < n; ++i) (xi[i] ? sum_in : sum_out) += y[i];
  const double nk = static_cast<double>(c.size());
  const double nd = static_cast<double>(n);
  return std::sqrt(nk * (nd - nk) / nd) * std::fabs(sum_in / nk - sum_out / (nd - nk));
}

}  // namespace sarscan
