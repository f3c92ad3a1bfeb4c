#pragma once

// Spatial autoregressive (SAR) lag model
//   (I - rho W) Y = alpha 1 + delta xi + eps
// fitted by concentrated quasi-maximum likelihood, and the BIC rule that picks
// a single rho for the spatial filter.

#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sarscan/spatial.hpp"
#include "sarscan/weights.hpp"

namespace sarscan {

// (I - rho W) y, evaluated as y_i - rho * sum_j w_ij y_j.
std::vector<double> spatial_filter(std::span<const double> y, const WeightsMatrix& w, double rho);

// Solves (I - rho W) y = rhs with a sparse LU factorization. Throws
// NumericalError when the system is singular.
std::vector<double> solve_sar(const WeightsMatrix& w, double rho, std::span<const double> rhs);

// log det(I - rho W) by a dense LU factorization. Reference path.
double dense_logdet(const WeightsMatrix& w, double rho);

enum class LogDetMode { eigenvalue, dense };

struct LogDetOptions {
  bool force_dense = false;
  std::size_t max_sites = 5000;  // cap on n for O(n^3) preprocessing
};

// Evaluates log det(I - rho W) on the admissible interval (lower, upper) where
// I - rho W stays nonsingular.
//
// In eigenvalue mode the spectrum of W is computed once and each evaluation
// is O(n). When W is diagonally similar to a symmetric matrix (in particular
// W = D^-1 A with A symmetric, i.e. a row-standardized symmetric matrix) the
// symmetric similar form is diagonalized and the spectrum is real; otherwise
// the general complex spectrum is used. The interval is (1/lambda_min,
// 1/lambda_max) over the real eigenvalues, with the lower end capped at
// -1/spectral_radius when no real eigenvalue is negative.
//
// Dense mode factorizes I - rho W on every call and uses the conservative
// interval (-1/||W||_inf, 1/||W||_inf).
class LogDetEngine {
 public:
  LogDetMode mode() const { return mode_; }
  bool symmetric_similar() const { return symmetric_similar_; }
  std::size_t size() const { return n_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  bool admissible(double rho) const { return rho > lower_ && rho < upper_; }

  // Real eigenvalues, ascending; eigenvalue mode only.
  std::span<const double> real_spectrum() const { return real_; }
  // One representative (positive imaginary part) per complex-conjugate pair.
  std::span<const std::complex<double>> complex_pairs() const { return pairs_; }

  double logdet(double rho) const;

 private:
  friend LogDetEngine make_logdet_engine(const WeightsMatrix&, const LogDetOptions&);

  LogDetMode mode_ = LogDetMode::eigenvalue;
  bool symmetric_similar_ = false;
  std::size_t n_ = 0;
  double lower_ = -1.0;
  double upper_ = 1.0;
  std::vector<double> real_;
  std::vector<std::complex<double>> pairs_;
  std::optional<WeightsMatrix> dense_source_;
};

LogDetEngine make_logdet_engine(const WeightsMatrix& w, const LogDetOptions& options = {});

// Profiled log-likelihood at a fixed rho with alpha, delta and sigma2 at their
// closed-form maximizers for the filtered outcome. The -(n/2) log(2 pi)
// constant is omitted everywhere.
struct ProfilePoint {
  double loglik = 0.0;
  double alpha = 0.0;
  std::optional<double> delta;
  double sigma2 = 0.0;
};

ProfilePoint concentrated_loglik(std::span<const double> y, const WeightsMatrix& w, double rho,
                                 const LogDetEngine& engine);
ProfilePoint concentrated_loglik(std::span<const double> y, const WeightsMatrix& w, const CandidateCluster& cluster,
                                 double rho, const LogDetEngine& engine);

// Same profile in O(1) per (window, rho) plus one log-determinant: the
// filtered residual sum of squares is a quadratic in rho whose coefficients
// come from y and W y, and a window only contributes its centered sums of y
// and W y.
class ConcentratedProfile {
 public:
  ConcentratedProfile(std::span<const double> y, const WeightsMatrix& w, const LogDetEngine& engine);

  std::size_t size() const { return n_; }
  const LogDetEngine& engine() const { return *engine_; }

  // Centered sums over the window members, for use with the overloads below.
  struct WindowSums {
    double y = 0.0;
    double lag = 0.0;
    std::size_t count = 0;
  };
  WindowSums window_sums(std::span<const std::size_t> members) const;
  std::span<const double> centered_y() const { return yc_; }
  std::span<const double> centered_lag() const { return lc_; }

  double rss(double rho) const;
  double rss(double rho, const WindowSums& s) const;
  double loglik(double rho) const;
  double loglik(double rho, const WindowSums& s) const;

 private:
  const LogDetEngine* engine_;
  std::size_t n_;
  std::vector<double> yc_, lc_;
  double syy_ = 0.0, syl_ = 0.0, sll_ = 0.0;
};

struct SarFit {
  double alpha = 0.0;
  std::optional<double> delta;  // empty under H0
  double sigma2 = 0.0;
  double rho = 0.0;
  double loglik = 0.0;
  double bic = 0.0;
  int p = 3;
  std::optional<CandidateCluster> cluster;
  bool boundary = false;  // rho estimate sits on the edge of the search interval
};

// Search interval and stopping rule of the scalar rho optimization.
struct RhoSearch {
  double lower = 0.0;
  double upper = 0.0;
  static constexpr double margin_fraction = 1e-6;
  static constexpr double bracket_width = 1e-7;
  static RhoSearch from(const LogDetEngine& engine);
};

struct RhoOptimum {
  double rho = 0.0;
  double loglik = 0.0;
  bool boundary = false;
};

// Maximizes a concentrated profile over the search interval with Brent's
// method (golden-section steps with parabolic interpolation).
template <class Objective>
RhoOptimum maximize_rho(const RhoSearch& search, Objective&& f);

SarFit fit_sar(std::span<const double> y, const WeightsMatrix& w, const LogDetEngine& engine);
SarFit fit_sar(std::span<const double> y, const WeightsMatrix& w, const CandidateCluster& cluster,
               const LogDetEngine& engine);

struct RhoSelection {
  double rho_hat = 0.0;
  double delta_bic = 0.0;  // BIC_0 - BIC_best
  std::optional<CandidateCluster> best_cluster;
  std::size_t best_index = 0;  // into the candidate set
  SarFit fit_h0;
  SarFit fit_best;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
  bool from_cluster_fit = false;  // rho_hat taken from fit_best
};

inline constexpr double kBicSupportThreshold = 10.0;

// Decision rule: rho from the best window model when BIC_0 - BIC_best > 10
// and that fit is not a boundary estimate, rho from the null model otherwise.
RhoSelection select_rho(SarFit fit_h0, SarFit fit_best);

// Fits the null SAR model and one SAR model per candidate window, then applies
// select_rho to the null fit and the minimum-BIC window fit (lowest candidate
// index on ties).
RhoSelection estimate_rho(std::span<const double> y, const WeightsMatrix& w, const CandidateSet& candidates,
                          const LogDetEngine& engine, unsigned threads = 1);

// ---------------------------------------------------------------------------

template <class Objective>
RhoOptimum maximize_rho(const RhoSearch& search, Objective&& f) {
  constexpr double golden = 0.3819660112501051;
  constexpr double tol = RhoSearch::bracket_width / 4.0;
  double a = search.lower;
  double b = search.upper;
  double x = a + golden * (b - a);
  double w = x, v = x;
  double fx = -f(x);
  double fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double m = 0.5 * (a + b);
    if (b - a < RhoSearch::bracket_width) break;
    bool golden_step = true;
    if (std::abs(e) > tol) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < 2.0 * tol || b - u < 2.0 * tol) d = x < m ? tol : -tol;
        golden_step = false;
      }
    }
    if (golden_step) {
      e = (x < m ? b : a) - x;
      d = golden * e;
    }
    const double u = std::abs(d) >= tol ? x + d : x + (d > 0.0 ? tol : -tol);
    const double fu = -f(u);
    if (fu <= fx) {
      (u < x ? b : a) = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      (u < x ? a : b) = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  RhoOptimum out;
  out.rho = x;
  out.loglik = -fx;
  const double edge = 2.0 * RhoSearch::bracket_width;
  out.boundary = (x - search.lower) < edge || (search.upper - x) < edge;
  return out;
}

}  // namespace sarscan
