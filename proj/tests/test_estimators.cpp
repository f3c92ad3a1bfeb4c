#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "sarscan/error.hpp"
#include "sarscan/estimators.hpp"
#include "test_support.hpp"

using namespace sarscan;

TEST_CASE("null estimates") {
  const std::vector<double> y{1, 2, 3};
  const auto h0 = mle_h0(y);
  CHECK(h0.alpha == doctest::Approx(2.0));
  CHECK(h0.sigma2 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("two-level estimates on the hand example") {
  const std::vector<double> y{0, 1, 3, 4};
  const auto c = testing::window({2, 3});
  const auto h1 = mle_h1(y, c);
  CHECK(h1.alpha == doctest::Approx(0.5));
  CHECK(h1.delta == doctest::Approx(3.0));
  CHECK(h1.sigma2 == doctest::Approx(0.25));
  CHECK(within_group_variance(y, c.members) == doctest::Approx(0.25));
  CHECK(gaussian_llr(y, c) == doctest::Approx(2.0 * std::log(10.0)).epsilon(1e-12));
  CHECK(df_index(y, c) == doctest::Approx(3.0));
}

TEST_CASE("null windows") {
  const std::vector<double> y{1, 2, 1, 2};
  const auto c = testing::window({0, 1});
  CHECK(std::abs(gaussian_llr(y, c)) < 1e-14);
  CHECK(df_index(y, c) == 0.0);
}

TEST_CASE("degenerate window") {
  const std::vector<double> y{5, 5, 1, 1};
  CHECK_THROWS_AS(gaussian_llr(y, testing::window({0, 1})), NumericalError);
}

TEST_CASE("two-level estimates match least squares") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 5 + rep % 30;
    const auto y = testing::normal_vector(n, rng);
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) members.push_back(i);
    }
    if (members.empty() || members.size() == n) continue;
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 2);
    Eigen::VectorXd Y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      X(static_cast<Eigen::Index>(i), 0) = 1.0;
      Y(static_cast<Eigen::Index>(i)) = y[i];
    }
    for (std::size_t m : members) X(static_cast<Eigen::Index>(m), 1) = 1.0;
    const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(Y);
    const double rss = (Y - X * beta).squaredNorm();
    const auto h1 = mle_h1(y, members);
    CHECK(h1.alpha == doctest::Approx(beta(0)).epsilon(1e-10));
    CHECK(h1.delta == doctest::Approx(beta(1)).epsilon(1e-10));
    CHECK(h1.sigma2 == doctest::Approx(rss / static_cast<double>(n)).epsilon(1e-10));

    // closed form for delta: (1/(n - n_k)) sum (n/n_k xi_i - 1) y_i
    const double nk = static_cast<double>(members.size());
    double d = 0.0;
    std::vector<char> in(n, 0);
    for (std::size_t m : members) in[m] = 1;
    for (std::size_t i = 0; i < n; ++i) d += (static_cast<double>(n) / nk * in[i] - 1.0) * y[i];
    d /= static_cast<double>(n) - nk;
    CHECK(h1.delta == doctest::Approx(d).epsilon(1e-10));
  }
}

TEST_CASE("LLR is affine invariant") {
  std::mt19937_64 rng(2);
  const auto y = testing::normal_vector(20, rng);
  const auto c = testing::window({1, 4, 7, 9});
  std::vector<double> z(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) z[i] = -2.5 * y[i] + 40.0;
  CHECK(std::abs(gaussian_llr(z, c) - gaussian_llr(y, c)) < 1e-10);
}

TEST_CASE("distribution-free index has stable variance across window sizes") {
  const std::size_t n = 40;
  std::mt19937_64 rng(3);
  auto y = testing::normal_vector(n, rng);
  std::vector<double> var;
  for (std::size_t nk : {2u, 5u, 10u}) {
    std::vector<std::size_t> members(nk);
    for (std::size_t i = 0; i < nk; ++i) members[i] = i;
    // signed index: its variance is the one that does not depend on n_k
    double s = 0.0, s2 = 0.0;
    const int reps = 10000;
    for (int r = 0; r < reps; ++r) {
      std::shuffle(y.begin(), y.end(), rng);
      const auto est = mle_h1(y, members);
      const double v = std::sqrt(static_cast<double>(nk * (n - nk)) / n) * est.delta;
      s += v;
      s2 += v * v;
    }
    var.push_back(s2 / reps - (s / reps) * (s / reps));
  }
  const double lo = *std::min_element(var.begin(), var.end());
  const double hi = *std::max_element(var.begin(), var.end());
  CHECK((hi - lo) / lo <= 0.10);
}
