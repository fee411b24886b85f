#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "json.hpp"
#include "voxelflow/volume.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using voxelflow::cli::cli_main;

namespace {

fs::path workdir() {
  const fs::path d = fs::temp_directory_path() / "voxelflow_cli";
  fs::create_directories(d);
  return d;
}

std::string at(const std::string& name) { return (workdir() / name).string(); }

json load(const std::string& path) {
  std::ifstream in(path);
  return json::parse(in);
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "voxelflow");
  return cli_main(args);
}

}  // namespace

TEST_CASE("simulate writes a volume and a manifest") {
  const std::string out = at("sim.nii");
  fs::remove(out);
  CHECK(run({"simulate", "--dims", "6,6,5,70", "--block", "30,30", "--tr", "2", "--signal-box", "2,2,2,3,3,3",
             "--amplitude", "3", "--baseline", "100", "--truth-out", at("truth.nii"), "--out", out, "--seed", "7"}) == 0);
  REQUIRE(fs::exists(out));
  const auto vol = voxelflow::read_volume(out);
  CHECK(vol.dims() == voxelflow::Dims3{6, 6, 5});
  CHECK(vol.frames() == 70);
  const json m = load(out + ".manifest.json");
  CHECK(m["command"] == "simulate");
  CHECK(m["seed"] == 7);
  CHECK(m.contains("config"));
  CHECK(m.contains("elapsed_seconds"));
  CHECK(fs::exists(at("truth.nii")));
}

TEST_CASE("individual map from the simulated volume") {
  const std::string bold = at("sim.nii");
  REQUIRE(fs::exists(bold));
  const std::string out = at("map.nii");
  CHECK(run({"individual", "--bold", bold, "--block", "30,30", "--drift", "1", "--test", "average", "--out", out,
             "--threads", "2"}) == 0);
  const auto map = voxelflow::read_volume(out, voxelflow::NonFinite::Allow);
  CHECK(map.frames() == 1);
  CHECK(map.at({2, 2, 2}, 0) > 0.95);
  const json m = load(out + ".manifest.json");
  CHECK(m["summary"]["voxels_processed"] == 180);
}

TEST_CASE("validate writes the false-positive report") {
  const std::string out = at("fpr.json");
  CHECK(run({"validate", "--dims", "5,5,5,80", "--block", "30,30", "--tr", "2", "--modes", "marginal,average",
             "--out", out}) == 0);
  const json r = load(out);
  REQUIRE(r["individual"].size() == 2);
  for (const auto& e : r["individual"]) {
    CHECK(e.contains("mode"));
    CHECK(e.contains("declared_active"));
    CHECK(e.contains("evaluated"));
    CHECK(e.contains("fpr"));
  }
  CHECK(r["total"] == 125);
  CHECK(r["cutoff"] == 0.95);
}

TEST_CASE("gp-anova report") {
  const std::string a = at("a.csv"), b = at("b.csv"), out = at("gp.json");
  {
    std::ofstream fa(a), fb(b);
    for (int i = 0; i < 4; ++i) {
      for (int t = 0; t < 6; ++t) {
        fa << (t ? "," : "") << 0.1 * t + 0.05 * i;
        fb << (t ? "," : "") << 0.1 * t - 0.03 * i;
      }
      fa << "\n";
      fb << "\n";
    }
  }
  CHECK(run({"gp-anova", "--curves-a", a, "--curves-b", b, "--iters", "600", "--burnin", "100", "--thin", "5",
             "--variant", "derived", "--out", out}) == 0);
  const json r = load(out);
  CHECK(r["probabilities"].size() == 6);
  CHECK(r["samples"] == 100);
  CHECK(r["variant"] == "derived");
}

TEST_CASE("usage and data errors map to exit codes") {
  CHECK(run({"simulate", "--bogus-flag", "--out", at("x.nii")}) == 1);
  CHECK(run({}) == 1);
  CHECK(run({"individual", "--bold", at("missing.nii"), "--block", "30,30", "--out", at("y.nii")}) == 1);
  {
    std::ofstream bad(at("bad.nii"), std::ios::binary);
    bad << std::string(400, 'x');
  }
  CHECK(run({"individual", "--bold", at("bad.nii"), "--block", "30,30", "--out", at("y.nii")}) == 2);
  CHECK(run({"--help"}) == 0);
}

TEST_CASE("config file values are overridden by flags") {
  const std::string cfg = at("sim.toml");
  {
    std::ofstream out(cfg);
    out << "dims = \"4,4,4,40\"\nseed = 3\nsd = 2.0\n";
  }
  const std::string out = at("cfg.nii");
  CHECK(run({"simulate", "--config", cfg, "--seed", "9", "--out", out}) == 0);
  const json m = load(out + ".manifest.json");
  CHECK(m["seed"] == 9);
  CHECK(voxelflow::read_volume(out).frames() == 40);
  {
    std::ofstream bad(cfg);
    bad << "no_such_key = 1\n";
  }
  CHECK(run({"simulate", "--config", cfg, "--out", out}) == 1);
}
