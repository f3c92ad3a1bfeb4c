#pragma once

// Closed-form estimators of the two-level Gaussian mean model
//   Y_i = alpha + delta * 1{i in C} + eps_i,   eps_i ~ N(0, sigma^2) iid
// and the per-window concentration measures built on them.

#include <cstddef>
#include <span>

#include "sarscan/spatial.hpp"

namespace sarscan {

struct NullEstimates {
  double alpha = 0.0;
  double sigma2 = 0.0;  // divisor n
};

struct ClusterEstimates {
  double alpha = 0.0;   // mean outside the window
  double delta = 0.0;   // mean inside minus mean outside
  double sigma2 = 0.0;  // residual sum of squares / n
};

NullEstimates mle_h0(std::span<const double> y);

// Requires 1 <= |cluster| < n. sigma2 comes from the residuals of the fitted
// two-level mean.
ClusterEstimates mle_h1(std::span<const double> y, std::span<const std::size_t> members);
inline ClusterEstimates mle_h1(std::span<const double> y, const CandidateCluster& c) { return mle_h1(y, c.members); }

// Pooled within-group variance: the sum of squared deviations from the inside
// mean plus those from the outside mean, over n. Mathematically equal to
// mle_h1(y, c).sigma2.
double within_group_variance(std::span<const double> y, std::span<const std::size_t> members);

// Gaussian log-likelihood without the -(n/2) log(2 pi) constant:
//   -(n/2) log(sigma2) - RSS / (2 sigma2).
double gaussian_loglik(std::span<const double> y, std::span<const std::size_t> members, double alpha, double delta,
                       double sigma2);

// (n/2) (log sigma2_H0 - log sigma2_H1). Throws NumericalError when the
// window leaves zero residual variance.
double gaussian_llr(std::span<const double> y, const CandidateCluster& c);

// sqrt(n_k (n - n_k) / n) * |mean inside - mean outside|.
double df_index(std::span<const double> y, const CandidateCluster& c);

}  // namespace sarscan
