#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sarscan/error.hpp"
#include "sarscan/io.hpp"
#include "sarscan/sar.hpp"
#include "sarscan/simulation.hpp"
#include "test_support.hpp"

using namespace sarscan;

namespace {

SimConfig small_lattice() {
  SimConfig cfg{lattice_layout(6, 6), row_standardize(lattice_rook(6, 6)), {14, 15, 20, 21}};
  cfg.rho_grid = {0.0, 0.5};
  cfg.c_grid = {0.0, 1.5};
  cfg.replicates = 6;
  cfg.mc_replicates = 19;
  return cfg;
}

}  // namespace

TEST_CASE("noise-free generation") {
  SimConfig cfg = small_lattice();
  cfg.alpha0 = 2.0;
  cfg.sigma = 0.0;
  Rng rng = make_rng(1, {0});
  const auto y = generate_dataset(cfg, 0.0, 1.0, rng);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool in = std::binary_search(cfg.true_cluster.begin(), cfg.true_cluster.end(), i);
    CHECK(y[i] == doctest::Approx(in ? 2.0 + std::sqrt(2.0) : 2.0));
  }
  CHECK(y[14] - y[0] == doctest::Approx(1.4142135623730951));
}

TEST_CASE("generation inverts the filter") {
  SimConfig cfg = small_lattice();
  Rng a = make_rng(9, {1});
  Rng b = make_rng(9, {1});
  const auto y = generate_dataset(cfg, 0.5, 1.0, a);
  const auto back = spatial_filter(y, cfg.w_true, 0.5);
  // same stream, rho = 0: the innovations themselves
  const auto innov = generate_dataset(cfg, 0.0, 1.0, b);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(back[i] - innov[i]) <= 1e-10);
}

TEST_CASE("iid generation has Moran's I near its null mean") {
  SimConfig cfg = small_lattice();
  double sum = 0.0;
  for (std::size_t r = 0; r < 200; ++r) {
    Rng rng = make_rng(3, {r});
    sum += morans_i(cfg.w_true, generate_dataset(cfg, 0.0, 0.0, rng));
  }
  CHECK(std::abs(sum / 200.0 + 1.0 / 35.0) <= 0.05);
}

TEST_CASE("site-level rates") {
  std::vector<std::size_t> truth(8);
  for (std::size_t i = 0; i < 8; ++i) truth[i] = i;
  const std::vector<std::vector<std::size_t>> exact{truth};
  const auto r1 = tp_fp_rates(exact, truth, 94);
  CHECK(r1.tp == 1.0);
  CHECK(r1.fp == 0.0);
  const std::vector<std::vector<std::size_t>> disjoint{{50, 51, 52, 53, 54, 55, 56, 57}};
  const auto r2 = tp_fp_rates(disjoint, truth, 94);
  CHECK(r2.tp == 0.0);
  CHECK(r2.fp == doctest::Approx(8.0 / 86.0));
  const auto r3 = tp_fp_rates({}, truth, 94);
  CHECK(r3.tp == 0.0);
  CHECK(r3.fp == 0.0);
  const std::vector<std::vector<std::size_t>> overlapping{{0, 1, 90}, {1, 2, 90, 91}};
  const auto r4 = tp_fp_rates(overlapping, truth, 94);
  CHECK(r4.tp == doctest::Approx(3.0 / 8.0));
  CHECK(r4.fp == doctest::Approx(2.0 / 86.0));
}

TEST_CASE("config validation") {
  SimConfig cfg = small_lattice();
  cfg.rho_grid.clear();
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = small_lattice();
  cfg.replicates = 0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = small_lattice();
  cfg.true_cluster = {3, 99};
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = small_lattice();
  cfg.rho_grid = {1.0};
  CHECK_THROWS_AS(run_grid(cfg, 1), InputError);
}

TEST_CASE("grid output shape and determinism") {
  const SimConfig cfg = small_lattice();
  const auto a = run_grid(cfg, 1);
  const auto b = run_grid(cfg, 3);
  CHECK(a.cells.size() == cfg.methods.size() * cfg.rho_grid.size() * cfg.c_grid.size());
  const auto csv = results_csv(a);
  CHECK(csv == results_csv(b));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(a.cells.size() + 1));
  for (const auto& cell : a.cells) {
    CHECK(cell.power >= 0.0);
    CHECK(cell.power <= 1.0);
    CHECK(cell.tp <= 1.0);
    CHECK(cell.fp <= 1.0);
    CHECK(cell.n_ok + cell.n_fail == cfg.replicates);
    CHECK(cell.replicates.size() == cfg.replicates);
  }
  const auto& cell = a.cell(ScanMethod::p_sar, 0.5, 1.5);
  CHECK(cell.replicates.front().rho_hat.has_value());
  CHECK_THROWS_AS(a.cell(ScanMethod::distribution_free, 0.5, 1.5), InputError);
  CHECK(results_json(cfg, a) == results_json(cfg, b));
}

TEST_CASE("k-NN arm records the selected k") {
  SimConfig cfg = small_lattice();
  cfg.arm = WeightsArm::knn_selected;
  cfg.knn_max = 6;
  cfg.rho_grid = {0.5};
  cfg.c_grid = {1.0};
  const auto r = run_grid(cfg, 1);
  for (const auto& rec : r.cell(ScanMethod::np_sar, 0.5, 1.0).replicates) {
    REQUIRE(rec.selected_k.has_value());
    CHECK(*rec.selected_k >= 2);
    CHECK(*rec.selected_k <= 6);
  }
  CHECK_FALSE(r.cell(ScanMethod::gaussian, 0.5, 1.0).replicates.front().rho_hat.has_value());
}

TEST_CASE("default configuration uses the bundled layout") {
  const SimConfig cfg = default_sim_config(testing::data_dir());
  CHECK(cfg.layout.size() == 94);
  CHECK(cfg.true_cluster.size() == 8);
  CHECK(cfg.w_true.row_standardized());
  std::vector<std::string> ids;
  for (std::size_t s : cfg.true_cluster) ids.push_back(cfg.layout.site(s).id);
  CHECK(ids == std::vector<std::string>{"03", "15", "19", "23", "42", "43", "63", "69"});
  const SimConfig fallback = default_sim_config(std::filesystem::path("/nonexistent"));
  CHECK(fallback.layout.size() == 100);
  CHECK(fallback.true_cluster.size() == 8);
}

TEST_CASE("config file parsing") {
  const auto dir = std::filesystem::temp_directory_path() / "sarscan_cfg_test";
  std::filesystem::create_directories(dir);
  std::filesystem::copy_file(testing::data_dir() / "france94_sites.csv", dir / "sites.csv",
                             std::filesystem::copy_options::overwrite_existing);
  std::filesystem::copy_file(testing::data_dir() / "france94_contiguity.csv", dir / "edges.csv",
                             std::filesystem::copy_options::overwrite_existing);
  {
    std::ofstream f(dir / "a.cfg");
    f << "# test\nlayout = sites.csv\ncontiguity = edges.csv\ntrue_cluster = 75, 92,93\n"
         "rho_grid = 0, 0.3\nc_grid = 1\nmethods = gaussian, np-sar\nS = 3\nM = 19\nseed = 42\n"
         "weights_arm = knn-select\nknn_min = 3\nknn_max = 5\n";
  }
  const auto cfg = load_sim_config(dir / "a.cfg");
  CHECK(cfg.layout.size() == 94);
  CHECK(cfg.true_cluster.size() == 3);
  CHECK(cfg.rho_grid == std::vector<double>{0.0, 0.3});
  CHECK(cfg.methods.size() == 2);
  CHECK(cfg.replicates == 3);
  CHECK(cfg.seed == 42);
  CHECK(cfg.arm == WeightsArm::knn_selected);
  CHECK(cfg.knn_min == 3);
  {
    std::ofstream f(dir / "bad.cfg");
    f << "layout = sites.csv\ncontiguity = edges.csv\ntrue_cluster_center = 63\nbogus = 1\n";
  }
  CHECK_THROWS_AS(load_sim_config(dir / "bad.cfg"), InputError);
  {
    std::ofstream f(dir / "bad2.cfg");
    f << "S = three\n";
  }
  CHECK_THROWS_AS(load_sim_config(dir / "bad2.cfg"), InputError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("bundled config files load") {
  const auto desk = load_sim_config(testing::data_dir() / "desk.cfg");
  CHECK(desk.layout.size() == 94);
  CHECK(desk.true_cluster.size() == 8);
  CHECK(desk.rho_grid.size() == 5);
  CHECK(desk.c_grid.size() == 4);
  CHECK(desk.replicates == 200);
  const auto mis = load_sim_config(testing::data_dir() / "misspecified.cfg");
  CHECK(mis.arm == WeightsArm::knn_selected);
  CHECK(mis.true_cluster == desk.true_cluster);
}
