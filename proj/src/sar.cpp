#include "sarscan/sar.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "sarscan/error.hpp"
#include "sarscan/estimators.hpp"
#include "sarscan/parallel.hpp"

namespace sarscan {

std::vector<double> spatial_filter(std::span<const double> y, const WeightsMatrix& w, double rho) {
  const std::vector<double> lag = w.multiply(y);
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] - rho * lag[i];
  return out;
}

namespace {

Eigen::SparseMatrix<double> sar_operator(const WeightsMatrix& w, double rho) {
  const auto n = static_cast<Eigen::Index>(w.size());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(w.nnz() + w.size());
  for (Eigen::Index i = 0; i < n; ++i) t.emplace_back(i, i, 1.0);
  for (const WeightEntry& e : w.entries()) {
    t.emplace_back(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col), -rho * e.value);
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

Eigen::MatrixXd dense_of(const WeightsMatrix& w) {
  const auto n = static_cast<Eigen::Index>(w.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (const WeightEntry& e : w.entries()) m(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) = e.value;
  return m;
}

// Positive d with d_i w_ij = d_j w_ji for every stored pair, if one exists.
std::optional<std::vector<double>> symmetrizing_scale(const WeightsMatrix& w) {
  const std::size_t n = w.size();
  std::vector<double> d(n, 0.0);
  for (std::size_t root = 0; root < n; ++root) {
    if (d[root] != 0.0) continue;
    d[root] = 1.0;
    std::queue<std::size_t> todo;
    todo.push(root);
    while (!todo.empty()) {
      const std::size_t i = todo.front();
      todo.pop();
      const auto cols = w.row_cols(i);
      const auto vals = w.row_values(i);
      for (std::size_t k = 0; k < cols.size(); ++k) {
        const std::size_t j = cols[k];
        const double back = w.at(j, i);
        if (back == 0.0) return std::nullopt;
        const double dj = d[i] * vals[k] / back;
        if (d[j] == 0.0) {
          d[j] = dj;
          todo.push(j);
        } else if (std::abs(d[j] - dj) > 1e-10 * std::max(d[j], dj)) {
          return std::nullopt;
        }
      }
    }
  }
  return d;
}

double max_row_sum(const WeightsMatrix& w) {
  double m = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) m = std::max(m, w.row_sum(i));
  return m;
}

}  // namespace

std::vector<double> solve_sar(const WeightsMatrix& w, double rho, std::span<const double> rhs) {
  if (rhs.size() != w.size()) throw InputError("right-hand side length does not match weights matrix");
  if (rho == 0.0) return {rhs.begin(), rhs.end()};
  Eigen::SparseMatrix<double> a = sar_operator(w, rho);
  a.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw NumericalError("I - rho W is singular at rho = " + std::to_string(rho));
  const Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
  const Eigen::VectorXd x = lu.solve(b);
  if (lu.info() != Eigen::Success || !x.allFinite()) {
    throw NumericalError("SAR system solve failed at rho = " + std::to_string(rho));
  }
  return {x.data(), x.data() + x.size()};
}

double dense_logdet(const WeightsMatrix& w, double rho) {
  const auto n = static_cast<Eigen::Index>(w.size());
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - rho * dense_of(w);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const Eigen::MatrixXd& f = lu.matrixLU();
  double logdet = 0.0;
  int sign = static_cast<int>(lu.permutationP().determinant());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = f(i, i);
    if (u == 0.0) throw NumericalError("I - rho W is singular at rho = " + std::to_string(rho));
    if (u < 0.0) sign = -sign;
    logdet += std::log(std::abs(u));
  }
  if (sign < 0) throw NumericalError("det(I - rho W) is negative at rho = " + std::to_string(rho));
  return logdet;
}

LogDetEngine make_logdet_engine(const WeightsMatrix& w, const LogDetOptions& options) {
  const std::size_t n = w.size();
  if (n > options.max_sites) {
    throw InputError("log-determinant preprocessing is O(n^3); n = " + std::to_string(n) + " exceeds the cap of " +
                     std::to_string(options.max_sites) + " sites");
  }
  LogDetEngine engine;
  engine.n_ = n;
  if (options.force_dense) {
    engine.mode_ = LogDetMode::dense;
    engine.dense_source_ = w;
    const double norm = max_row_sum(w);
    engine.upper_ = norm > 0.0 ? 1.0 / norm : 1.0;
    engine.lower_ = -engine.upper_;
    return engine;
  }

  engine.mode_ = LogDetMode::eigenvalue;
  double spectral_radius = 0.0;
  if (const auto d = symmetrizing_scale(w)) {
    engine.symmetric_similar_ = true;
    const auto ni = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(ni, ni);
    for (const WeightEntry& e : w.entries()) {
      s(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) =
          std::sqrt((*d)[e.row] / (*d)[e.col]) * e.value;
    }
    const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("eigenvalue decomposition of W failed");
    const Eigen::VectorXd ev = solver.eigenvalues();
    engine.real_.assign(ev.data(), ev.data() + ev.size());
  } else {
    const Eigen::EigenSolver<Eigen::MatrixXd> solver(dense_of(w), false);
    if (solver.info() != Eigen::Success) throw NumericalError("eigenvalue decomposition of W failed");
    const Eigen::VectorXcd ev = solver.eigenvalues();
    double scale = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) scale = std::max(scale, std::abs(ev(i)));
    const double imag_tol = 1e-10 * std::max(scale, 1.0);
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      const std::complex<double> z = ev(i);
      if (std::abs(z.imag()) <= imag_tol) engine.real_.push_back(z.real());
      else if (z.imag() > 0.0) engine.pairs_.push_back(z);
    }
    std::sort(engine.real_.begin(), engine.real_.end());
  }
  for (double v : engine.real_) spectral_radius = std::max(spectral_radius, std::abs(v));
  for (const auto& z : engine.pairs_) spectral_radius = std::max(spectral_radius, std::abs(z));

  if (spectral_radius == 0.0) {
    engine.lower_ = -1.0;
    engine.upper_ = 1.0;
    return engine;
  }
  const double lambda_max = engine.real_.empty() ? 0.0 : engine.real_.back();
  const double lambda_min = engine.real_.empty() ? 0.0 : engine.real_.front();
  engine.upper_ = lambda_max > 0.0 ? 1.0 / lambda_max : 1.0 / spectral_radius;
  engine.lower_ = lambda_min < 0.0 ? 1.0 / lambda_min : -1.0 / spectral_radius;
  return engine;
}

double LogDetEngine::logdet(double rho) const {
  if (!admissible(rho)) {
    throw InputError("rho = " + std::to_string(rho) + " outside the admissible interval (" + std::to_string(lower_) +
                     ", " + std::to_string(upper_) + ")");
  }
  if (mode_ == LogDetMode::dense) return dense_logdet(*dense_source_, rho);

  // Products of factors are accumulated and logged in batches; every factor is
  // positive on the admissible interval.
  double total = 0.0;
  double product = 1.0;
  int pending = 0;
  auto push = [&](double factor) {
    product *= factor;
    if (++pending == 16 || product < 1e-200 || product > 1e200) {
      total += std::log(product);
      product = 1.0;
      pending = 0;
    }
  };
  for (double lambda : real_) push(1.0 - rho * lambda);
  for (const auto& z : pairs_) {
    const double re = 1.0 - rho * z.real();
    const double im = rho * z.imag();
    push(re * re + im * im);
  }
  return total + std::log(product);
}

namespace {

ProfilePoint profile_from_estimates(const LogDetEngine& engine, double rho, std::size_t n, double alpha,
                                    std::optional<double> delta, double sigma2) {
  if (!(sigma2 > 0.0)) {
    throw NumericalError("filtered outcome has zero residual variance at rho = " + std::to_string(rho));
  }
  const double nd = static_cast<double>(n);
  ProfilePoint p;
  p.alpha = alpha;
  p.delta = delta;
  p.sigma2 = sigma2;
  p.loglik = engine.logdet(rho) - 0.5 * nd * std::log(sigma2) - 0.5 * nd;
  return p;
}

}  // namespace

ProfilePoint concentrated_loglik(std::span<const double> y, const WeightsMatrix& w, double rho,
                                 const LogDetEngine& engine) {
  const std::vector<double> yf = spatial_filter(y, w, rho);
  const NullEstimates e = mle_h0(yf);
  return profile_from_estimates(engine, rho, y.size(), e.alpha, std::nullopt, e.sigma2);
}

ProfilePoint concentrated_loglik(std::span<const double> y, const WeightsMatrix& w, const CandidateCluster& cluster,
                                 double rho, const LogDetEngine& engine) {
  const std::vector<double> yf = spatial_filter(y, w, rho);
  const ClusterEstimates e = mle_h1(yf, cluster.members);
  return profile_from_estimates(engine, rho, y.size(), e.alpha, e.delta, e.sigma2);
}

ConcentratedProfile::ConcentratedProfile(std::span<const double> y, const WeightsMatrix& w, const LogDetEngine& engine)
    : engine_(&engine), n_(y.size()) {
  if (engine.size() != n_ || w.size() != n_) throw InputError("outcome, weights and engine sizes disagree");
  const std::vector<double> lag = w.multiply(y);
  const double nd = static_cast<double>(n_);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / nd;
  const double ml = std::accumulate(lag.begin(), lag.end(), 0.0) / nd;
  yc_.resize(n_);
  lc_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    yc_[i] = y[i] - my;
    lc_[i] = lag[i] - ml;
    syy_ += yc_[i] * yc_[i];
    syl_ += yc_[i] * lc_[i];
    sll_ += lc_[i] * lc_[i];
  }
}

ConcentratedProfile::WindowSums ConcentratedProfile::window_sums(std::span<const std::size_t> members) const {
  WindowSums s;
  for (std::size_t m : members) {
    s.y += yc_[m];
    s.lag += lc_[m];
  }
  s.count = members.size();
  return s;
}

double ConcentratedProfile::rss(double rho) const { return syy_ - 2.0 * rho * syl_ + rho * rho * sll_; }

double ConcentratedProfile::rss(double rho, const WindowSums& s) const {
  const double nk = static_cast<double>(s.count);
  const double nd = static_cast<double>(n_);
  const double inside = s.y - rho * s.lag;
  return rss(rho) - nd * inside * inside / (nk * (nd - nk));
}

double ConcentratedProfile::loglik(double rho) const {
  const double nd = static_cast<double>(n_);
  return engine_->logdet(rho) - 0.5 * nd * std::log(rss(rho) / nd) - 0.5 * nd;
}

double ConcentratedProfile::loglik(double rho, const WindowSums& s) const {
  const double nd = static_cast<double>(n_);
  return engine_->logdet(rho) - 0.5 * nd * std::log(rss(rho, s) / nd) - 0.5 * nd;
}

RhoSearch RhoSearch::from(const LogDetEngine& engine) {
  const double margin = margin_fraction * (engine.upper() - engine.lower());
  return {engine.lower() + margin, engine.upper() - margin};
}

namespace {

SarFit finish_fit(std::span<const double> y, const WeightsMatrix& w, const LogDetEngine& engine,
                  const RhoOptimum& opt, const CandidateCluster* cluster) {
  const ProfilePoint p = cluster ? concentrated_loglik(y, w, *cluster, opt.rho, engine)
                                 : concentrated_loglik(y, w, opt.rho, engine);
  SarFit fit;
  fit.alpha = p.alpha;
  fit.delta = p.delta;
  fit.sigma2 = p.sigma2;
  fit.rho = opt.rho;
  fit.loglik = p.loglik;
  fit.p = cluster ? 4 : 3;
  fit.bic = fit.p * std::log(static_cast<double>(y.size())) - 2.0 * fit.loglik;
  if (cluster) fit.cluster = *cluster;
  fit.boundary = opt.boundary;
  return fit;
}

// Profile objective that maps a degenerate residual variance to -inf so the
// optimizer moves away from it.
struct WindowObjective {
  const ConcentratedProfile* profile;
  const ConcentratedProfile::WindowSums* sums;
  double operator()(double rho) const {
    const double r = sums ? profile->rss(rho, *sums) : profile->rss(rho);
    if (!(r > 0.0)) return -std::numeric_limits<double>::infinity();
    return sums ? profile->loglik(rho, *sums) : profile->loglik(rho);
  }
};

}  // namespace

SarFit fit_sar(std::span<const double> y, const WeightsMatrix& w, const LogDetEngine& engine) {
  const ConcentratedProfile profile(y, w, engine);
  const RhoOptimum opt = maximize_rho(RhoSearch::from(engine), WindowObjective{&profile, nullptr});
  return finish_fit(y, w, engine, opt, nullptr);
}

SarFit fit_sar(std::span<const double> y, const WeightsMatrix& w, const CandidateCluster& cluster,
               const LogDetEngine& engine) {
  if (cluster.members.empty() || cluster.size() >= y.size()) throw InputError("cluster size must satisfy 1 <= n_k < n");
  const ConcentratedProfile profile(y, w, engine);
  const auto sums = profile.window_sums(cluster.members);
  const RhoOptimum opt = maximize_rho(RhoSearch::from(engine), WindowObjective{&profile, &sums});
  return finish_fit(y, w, engine, opt, &cluster);
}

RhoSelection select_rho(SarFit fit_h0, SarFit fit_best) {
  RhoSelection sel;
  sel.delta_bic = fit_h0.bic - fit_best.bic;
  sel.from_cluster_fit = sel.delta_bic > kBicSupportThreshold && !fit_best.boundary;
  sel.rho_hat = sel.from_cluster_fit ? fit_best.rho : fit_h0.rho;
  sel.best_cluster = fit_best.cluster;
  sel.fit_h0 = std::move(fit_h0);
  sel.fit_best = std::move(fit_best);
  return sel;
}

RhoSelection estimate_rho(std::span<const double> y, const WeightsMatrix& w, const CandidateSet& candidates,
                          const LogDetEngine& engine, unsigned threads) {
  if (candidates.empty()) throw InputError("no candidate windows for rho estimation");
  const ConcentratedProfile profile(y, w, engine);
  const RhoSearch search = RhoSearch::from(engine);
  const std::size_t n = y.size();

  // Window sums for every candidate via prefix sums along each center's order.
  std::vector<ConcentratedProfile::WindowSums> sums(candidates.size());
  const auto yc = profile.centered_y();
  const auto lc = profile.centered_lag();
  for (std::size_t c = 0; c < candidates.n_centers(); ++c) {
    const auto order = candidates.order(c);
    double sy = 0.0, sl = 0.0;
    std::size_t len = 0;
    for (const auto& win : candidates.windows(c)) {
      for (; len < win.prefix; ++len) {
        sy += yc[order[len]];
        sl += lc[order[len]];
      }
      sums[win.cluster] = {sy, sl, win.prefix};
    }
  }

  std::vector<RhoOptimum> fits(candidates.size());
  std::vector<char> ok(candidates.size(), 0);
  parallel_for(candidates.size(), threads, [&](std::size_t k, unsigned) {
    if (sums[k].count == 0 || sums[k].count >= n) return;
    const RhoOptimum opt = maximize_rho(search, WindowObjective{&profile, &sums[k]});
    if (std::isfinite(opt.loglik)) {
      fits[k] = opt;
      ok[k] = 1;
    }
  });

  std::optional<std::size_t> best;
  std::size_t skipped = 0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (!ok[k]) {
      ++skipped;
      continue;
    }
    if (!best || fits[k].loglik > fits[*best].loglik) best = k;
  }
  if (!best) throw NumericalError("SAR fit failed for every candidate window");

  SarFit h0 = fit_sar(y, w, engine);
  SarFit h1 = finish_fit(y, w, engine, fits[*best], &candidates[*best]);
  RhoSelection sel = select_rho(std::move(h0), std::move(h1));
  sel.best_index = *best;
  sel.skipped = skipped;
  if (skipped > 0) sel.warnings.push_back(std::to_string(skipped) + " candidate window fit(s) skipped (degenerate)");
  return sel;
}

}  // namespace sarscan
