#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "sarscan/cli.hpp"
#include "sarscan/error.hpp"
#include "sarscan/io.hpp"
#include "test_support.hpp"

using namespace sarscan;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("sarscan_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) { return io::read_text(p); }

const std::string kExample = (testing::data_dir() / "example_c15.csv").string();
const std::string kEdges = (testing::data_dir() / "france94_contiguity.csv").string();
const std::string kSites = (testing::data_dir() / "france94_sites.csv").string();

}  // namespace

TEST_CASE("dataset CSV parsing") {
  const auto ds = io::parse_dataset_csv("id,x,y,value\na,0,0,1.5\nb,1,0,2\nc,0,1,-3e-1\n");
  CHECK(ds.size() == 3);
  CHECK(ds.values()[2] == -0.3);
  CHECK(ds.site(1).x == 1.0);

  CHECK_THROWS_WITH_AS(io::parse_dataset_csv("id,x,y,value\na,0,0,1\nb,1,zero,2\nc,0,1,3\n", false, "f.csv"),
                       doctest::Contains("f.csv:3"), InputError);
  CHECK_THROWS_WITH_AS(io::parse_dataset_csv("id,x,y,value\na,0,0,1\nb,1,0\nc,0,1,3\n", false, "g.csv"),
                       doctest::Contains("g.csv:3"), InputError);
  CHECK_THROWS_AS(io::parse_dataset_csv("name,x,y,value\na,0,0,1\n"), InputError);
  const auto layout = io::parse_dataset_csv("id,x,y\na,0,0\nb,1,0\nc,0,1\n", true);
  CHECK(layout.values()[0] == 0.0);
  CHECK_THROWS_AS(io::parse_dataset_csv("id,x,y\na,0,0\nb,1,0\nc,0,1\n", false), InputError);
}

TEST_CASE("GeoJSON parsing") {
  const std::string text = R"({"type":"FeatureCollection","features":[
    {"type":"Feature","properties":{"id":"a","income":10},"geometry":{"type":"Point","coordinates":[0,0]}},
    {"type":"Feature","properties":{"id":"b","income":12},"geometry":{"type":"Point","coordinates":[1,0]}},
    {"type":"Feature","properties":{"id":"c","income":9},"geometry":{"type":"Point","coordinates":[0,2]}}]})";
  const auto ds = io::parse_dataset_geojson(text, "income");
  CHECK(ds.size() == 3);
  CHECK(ds.site(2).id == "c");
  CHECK(ds.site(2).y == 2.0);
  CHECK(ds.values()[1] == 12.0);
  CHECK_THROWS_AS(io::parse_dataset_geojson(text, "missing"), InputError);
}

TEST_CASE("weights file round trip") {
  const auto layout = io::read_dataset_csv(kSites, true);
  const auto w = row_standardize(io::read_contiguity_csv(kEdges, layout));
  const auto back = io::parse_weights_csv(io::weights_csv(w, layout), layout);
  REQUIRE(back.nnz() == w.nnz());
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j : w.row_cols(i)) CHECK(back.at(i, j) == w.at(i, j));
  }
  const auto idx = io::parse_weights_csv("i,j,w\n0,1,0.5\n1,0,2\n", layout);
  CHECK(idx.at(0, 1) == 0.5);
  CHECK_THROWS_AS(io::parse_weights_csv("id_i,id_j\n01,zz\n", layout), InputError);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -0.0}) CHECK(std::stod(io::format_double(v)) == v);
}

TEST_CASE("cli: gaussian scan on the bundled example") {
  const auto dir = scratch("gauss");
  const auto r = run_cli({"scan", "--data", kExample, "--out", dir.string(), "--threads", "1"});
  REQUIRE(r.code == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  REQUIRE(report["clusters"].size() >= 1);
  CHECK(report["clusters"][0]["p_value"].get<double>() == doctest::Approx(0.001));
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["seed"] == 1);
  CHECK(manifest["mc_replicates"] == 999);
  CHECK(manifest["outputs"].size() == 2);
  const auto csv = slurp(dir / "clusters.csv");
  CHECK(csv.rfind("cluster,n_sites,mean_inside,sd_inside,mean_outside,sd_outside,p_value", 0) == 0);
}

TEST_CASE("cli: report files are reproducible across thread counts") {
  const auto a = scratch("rep_a"), b = scratch("rep_b");
  REQUIRE(run_cli({"scan", "--data", kExample, "--method", "np-sar", "--contiguity", kEdges, "--seed", "9", "--out",
                   a.string(), "--threads", "1"})
              .code == 0);
  REQUIRE(run_cli({"scan", "--data", kExample, "--method", "np-sar", "--contiguity", kEdges, "--seed", "9", "--out",
                   b.string(), "--threads", "3"})
              .code == 0);
  CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
  CHECK(slurp(a / "clusters.csv") == slurp(b / "clusters.csv"));
}

TEST_CASE("cli: knn-select records the choice in the manifest") {
  const auto dir = scratch("knnsel");
  const auto r = run_cli({"scan", "--data", kExample, "--method", "p-sar", "--knn-select", "2..10", "--mc", "99",
                          "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["selected_k"].get<int>() >= 2);
  CHECK(manifest["selected_k"].get<int>() <= 10);
  CHECK(manifest.contains("morans_i"));
  CHECK(manifest["rho_hat"].is_number());
  CHECK(manifest["delta_bic"].is_number());
}

TEST_CASE("cli: input errors exit with 2") {
  const auto dir = scratch("bad");
  {
    std::ofstream f(dir / "bad.csv");
    f << "id,x,y,value\na,0,0,1\nb,1,0,2\nc,0,1,oops\nd,1,1,4\n";
  }
  auto r = run_cli({"scan", "--data", (dir / "bad.csv").string(), "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find(":4") != std::string::npos);

  r = run_cli({"scan", "--data", kExample, "--method", "p-sar", "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("weights") != std::string::npos);

  CHECK(run_cli({"scan", "--data", (dir / "missing.csv").string()}).code == 2);
  CHECK(run_cli({"scan", "--data", kExample, "--method", "poisson"}).code == 2);
  CHECK(run_cli({"scan", "--data", kExample, "--mc", "5", "--out", (dir / "o").string()}).code == 2);
  CHECK(run_cli({"scan", "--data", kExample, "--knn", "3", "--contiguity", kEdges}).code == 2);
  CHECK(run_cli({"frobnicate"}).code == 2);
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"--help"}).code == 0);
}

TEST_CASE("cli: numerical failures exit with 3") {
  const auto dir = scratch("flat");
  {
    std::ofstream f(dir / "flat.csv");
    f << "id,x,y,value\na,0,0,1\nb,1,0,1\nc,0,1,1\nd,1,1,1\n";
  }
  const auto r = run_cli({"scan", "--data", (dir / "flat.csv").string(), "--mc", "19", "--out", (dir / "o").string()});
  CHECK(r.code == 3);
}

TEST_CASE("cli: weights subcommand standardizes rows") {
  const auto dir = scratch("weights");
  const auto r = run_cli({"weights", "--data", kSites, "--contiguity", kEdges, "--standardize", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto text = slurp(dir / "weights.csv");
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  CHECK(line == "id_i,id_j,w");
  std::map<std::string, double> sums;
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.rfind(',');
    sums[line.substr(0, a)] += std::stod(line.substr(b + 1));
  }
  CHECK(sums.size() == 94);
  for (const auto& [id, s] : sums) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("cli: moran subcommand") {
  const auto dir = scratch("moran");
  const auto r = run_cli({"moran", "--data", kExample, "--contiguity", kEdges, "--out", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("morans_i = ", 0) == 0);
  const auto doc = nlohmann::json::parse(slurp(dir / "moran.json"));
  CHECK(doc["morans_i"].get<double>() > 0.0);
  CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("cli: simulate emits one row per cell") {
  const auto dir = scratch("sim");
  {
    std::ofstream f(dir / "tiny.cfg");
    f << "layout = " << kSites << "\ncontiguity = " << kEdges
      << "\ntrue_cluster_center = 63\nrho_grid = 0, 0.4\nc_grid = 0, 1\nS = 2\nM = 19\n";
  }
  const auto r = run_cli({"simulate", "--config", (dir / "tiny.cfg").string(), "--out", (dir / "o").string()});
  REQUIRE(r.code == 0);
  const auto csv = slurp(dir / "o" / "results.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * 2 * 2);
  CHECK(csv.rfind("method,rho,c,power,tp,fp,n_fail\n", 0) == 0);
  CHECK(fs::exists(dir / "o" / "results.json"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "o" / "manifest.json"));
  CHECK(manifest["S"] == 2);
}
