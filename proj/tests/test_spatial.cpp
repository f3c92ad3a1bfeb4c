#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "sarscan/error.hpp"
#include "sarscan/io.hpp"
#include "sarscan/spatial.hpp"
#include "test_support.hpp"

using namespace sarscan;

namespace {

// Reference enumeration: every radius equal to a center-to-site distance,
// members collected by a full pass, deduplicated through a std::set.
std::set<std::vector<std::size_t>> oracle_windows(const SpatialDataset& ds, double max_fraction) {
  const std::size_t n = ds.size();
  const auto cap = static_cast<std::size_t>(std::floor(static_cast<double>(n) * max_fraction));
  std::set<std::vector<std::size_t>> out;
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t r = 0; r < n; ++r) {
      const double radius = std::hypot(ds.site(c).x - ds.site(r).x, ds.site(c).y - ds.site(r).y);
      std::vector<std::size_t> members;
      for (std::size_t j = 0; j < n; ++j) {
        if (std::hypot(ds.site(c).x - ds.site(j).x, ds.site(c).y - ds.site(j).y) <= radius) members.push_back(j);
      }
      if (members.size() <= cap) out.insert(members);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("dataset validation") {
  CHECK_THROWS_AS(SpatialDataset({{"a", 0, 0}, {"b", 1, 0}}, {1, 2}), InputError);
  CHECK_THROWS_AS(SpatialDataset({{"a", 0, 0}, {"a", 1, 0}, {"c", 2, 0}}, {1, 2, 3}), InputError);
  CHECK_THROWS_AS(SpatialDataset({{"a", 0, 0}, {"b", 1, 0}, {"c", NAN, 0}}, {1, 2, 3}), InputError);
  CHECK_THROWS_AS(SpatialDataset({{"a", 0, 0}, {"b", 1, 0}, {"c", 2, 0}}, {1, 2}), InputError);
  const SpatialDataset ds({{"a", 0, 0}, {"b", 1, 0}, {"c", 2, 0}}, {1, 2, 3});
  CHECK(ds.index_of("c") == 2);
  CHECK_THROWS_AS(ds.index_of("zz"), InputError);
  CHECK(ds.with_values({4, 5, 6}).values()[1] == 5.0);
}

TEST_CASE("pairwise distances") {
  const SpatialDataset tri({{"a", 0, 0}, {"b", 3, 4}, {"c", 10, 0}}, {0, 0, 0});
  const auto d = pairwise_distances(tri);
  CHECK(d(0, 1) == 5.0);
  CHECK(d(1, 0) == 5.0);
  CHECK(d(0, 0) == 0.0);
  CHECK(d.duplicate_pairs() == 0);

  const SpatialDataset dup({{"a", 1, 1}, {"b", 1, 1}, {"c", 2, 0}}, {0, 0, 0});
  const auto dd = pairwise_distances(dup);
  CHECK(dd(0, 1) == 0.0);
  CHECK(dd.duplicate_pairs() == 1);

  std::mt19937_64 rng(5);
  const auto ds = testing::random_layout(10, rng);
  const auto rd = pairwise_distances(ds);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 10; ++j) {
      const double dx = ds.site(i).x - ds.site(j).x;
      const double dy = ds.site(i).y - ds.site(j).y;
      CHECK(rd(i, j) == std::hypot(dx, dy));
      CHECK(rd(i, j) == doctest::Approx(std::sqrt(dx * dx + dy * dy)).epsilon(1e-15));
      CHECK(rd(i, j) == rd(j, i));
    }
  }
}

TEST_CASE("enumeration on tiny layouts") {
  const DistanceMatrix two(2, {0.0, 1.0, 1.0, 0.0});
  const auto c2 = enumerate_candidates(two);
  REQUIRE(c2.size() == 2);
  CHECK(c2[0].members == std::vector<std::size_t>{0});
  CHECK(c2[1].members == std::vector<std::size_t>{1});

  const SpatialDataset square({{"a", 0, 0}, {"b", 1, 0}, {"c", 0, 1}, {"d", 1, 1}}, {0, 0, 0, 0});
  const auto cs = enumerate_candidates(square, 0.5);
  for (const auto& c : cs.clusters()) CHECK((c.size() == 1 || c.size() == 2));
  // Diagonal neighbours are tied at distance 1, so no two-site window exists
  // around any corner: only the four singletons remain.
  CHECK(cs.size() == 4);

  CHECK_THROWS_AS(enumerate_candidates(square, 0.0), InputError);
  CHECK_THROWS_AS(enumerate_candidates(square, 0.6), InputError);
}

TEST_CASE("ties enter the window together") {
  // Center at the origin with two sites at distance 1 and one at distance 2.
  const SpatialDataset ds({{"o", 0, 0}, {"e", 1, 0}, {"w", -1, 0}, {"f", 2, 0}, {"g", 5, 0}, {"h", 9, 0}, {"i", 14, 0}},
                          std::vector<double>(7, 0.0));
  const auto cs = enumerate_candidates(ds);
  bool seen_pair = false;
  for (const auto& c : cs.clusters()) {
    if (c.center == 0 && c.size() == 2) seen_pair = true;
  }
  CHECK_FALSE(seen_pair);
  bool seen_triple = false;
  for (const auto& c : cs.clusters()) {
    if (c.members == std::vector<std::size_t>{0, 1, 2}) seen_triple = true;
  }
  CHECK(seen_triple);
}

TEST_CASE("enumeration matches the brute-force oracle") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t n = 5 + rep * 3;
    const auto ds = testing::random_layout(n, rng);
    for (double frac : {0.5, 0.3}) {
      const auto cs = enumerate_candidates(ds, frac);
      const auto oracle = oracle_windows(ds, frac);
      std::set<std::vector<std::size_t>> got;
      for (const auto& c : cs.clusters()) {
        CHECK(got.insert(c.members).second);
        CHECK(std::is_sorted(c.members.begin(), c.members.end()));
        CHECK(c.contains(c.center));
        // member set is exactly the closed disc around the center
        const auto d = pairwise_distances(ds);
        for (std::size_t j = 0; j < n; ++j) CHECK(c.contains(j) == (d(c.center, j) <= c.radius));
      }
      CHECK(got == oracle);
    }
  }
}

TEST_CASE("enumeration order and determinism") {
  std::mt19937_64 rng(3);
  const auto ds = testing::random_layout(25, rng);
  const auto a = enumerate_candidates(ds);
  const auto b = enumerate_candidates(ds);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].members == b[k].members);
    if (k > 0) {
      CHECK((a[k - 1].center < a[k].center || (a[k - 1].center == a[k].center && a[k - 1].size() < a[k].size())));
    }
    CHECK(a[k].size() <= 12);
  }
}

TEST_CASE("bundled layout candidate count") {
  const auto layout = io::read_dataset_csv(testing::data_dir() / "france94_sites.csv", true);
  REQUIRE(layout.size() == 94);
  const auto cs = enumerate_candidates(layout);
  const auto oracle = oracle_windows(layout, 0.5);
  CHECK(cs.size() == oracle.size());
  CHECK(cs.size() <= 94 * 47);
  // Frozen value for the bundled coordinates.
  CHECK(cs.size() == 3954);
}

TEST_CASE("scan plan reproduces the member sets") {
  std::mt19937_64 rng(8);
  const auto ds = testing::random_layout(30, rng);
  const auto cs = enumerate_candidates(ds);
  std::size_t windows = 0;
  for (std::size_t c = 0; c < cs.n_centers(); ++c) {
    const auto order = cs.order(c);
    for (const auto& w : cs.windows(c)) {
      std::vector<std::size_t> m(order.begin(), order.begin() + w.prefix);
      std::sort(m.begin(), m.end());
      CHECK(m == cs[w.cluster].members);
      ++windows;
    }
  }
  CHECK(windows == cs.size());
}

TEST_CASE("excluding and select") {
  std::mt19937_64 rng(9);
  const auto ds = testing::random_layout(20, rng);
  const auto cs = enumerate_candidates(ds);
  const std::vector<std::size_t> drop{2, 7};
  const auto rest = cs.excluding(drop);
  std::size_t expected = 0;
  for (const auto& c : cs.clusters()) expected += c.intersects(drop) ? 0 : 1;
  CHECK(rest.size() == expected);
  for (const auto& c : rest.clusters()) CHECK_FALSE(c.intersects(drop));

  const std::vector<std::size_t> pick{0, 5, 9};
  const auto sub = cs.select(pick);
  REQUIRE(sub.size() == 3);
  CHECK(sub[1].members == cs[5].members);
}
