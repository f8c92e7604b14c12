#include <gtest/gtest.h>

#include "support/cli_runner.hpp"
#include "support/tmpdir.hpp"

using namespace vf;
using vf::testing::file_bytes;
using vf::testing::run_cli;
using vf::testing::TempDir;
using vf::testing::tree_bytes;
using nlohmann::json;

namespace {

const std::vector<std::string> kSmallPhantom{"--dims", "48", "40", "32", "--spacing", "6"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

/// Writes `n` phantoms plus list files for `augment`.
void make_dataset(const TempDir& dir, int n) {
  std::ofstream imgs(dir / "images.txt"), labs(dir / "labels.txt");
  for (int i = 0; i < n; ++i) {
    const auto base = dir / ("ph" + std::to_string(i));
    ASSERT_EQ(run_cli(concat({"phantom", "--out", base, "--seed", std::to_string(i)}, kSmallPhantom)).code, 0);
    imgs << base << ".vgrid.json\n";
    labs << base << "_lung.vgrid.json\n";
  }
  std::ofstream(dir / "spec.json") << R"({
    "rotation_rad": [[-0.2, 0.2], [-0.2, 0.2], [-0.5, 0.5]],
    "scale": [[0.9, 1.1], [0.9, 1.1], [0.9, 1.1]],
    "shear": [-0.05, 0.05],
    "reflect_prob": [0.5, 0.5, 0.0],
    "displacement_vox": [3, 3, 2],
    "occlusion_max_vox": 6,
    "noise_sigma": [0, 25],
    "window_lower": [-200, -100],
    "window_upper": [200, 300],
    "seed": 11
  })";
}

}  // namespace

TEST(Cli, UnknownSubcommandIsUsageError) {
  auto r = run_cli({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"morph", "--op", "shrink", "--in", "a", "--out", "b"}).code, 2);
}

TEST(Cli, HelpExitsZero) {
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  auto r = run_cli({"label", "--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("-150"), std::string::npos);
  EXPECT_NE(r.out.find("25"), std::string::npos);
}

TEST(Cli, MissingInputIsIoError) {
  TempDir dir;
  auto r = run_cli({"label", "--organ", "lungs", "--in", dir / "nothing", "--out", dir / "m"});
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.err.rfind("error: IoError:", 0), 0u);
}

TEST(Cli, PhantomIsReproducible) {
  TempDir a, b;
  for (const auto* d : {&a, &b})
    ASSERT_EQ(run_cli(concat({"phantom", "--out", *d / "t", "--seed", "1", "--randomize"}, kSmallPhantom)).code, 0);
  EXPECT_EQ(tree_bytes(a.path()), tree_bytes(b.path()));
  TempDir c;
  ASSERT_EQ(run_cli(concat({"phantom", "--out", c / "t", "--seed", "2", "--randomize"}, kSmallPhantom)).code, 0);
  EXPECT_NE(file_bytes(a / "t.vgrid.raw"), file_bytes(c / "t.vgrid.raw"));
}

TEST(Cli, LungsOnUniformPhantomHasNoCandidate) {
  TempDir dir;
  ASSERT_EQ(run_cli(concat({"phantom", "--out", dir / "u", "--uniform"}, kSmallPhantom)).code, 0);
  auto r = run_cli({"label", "--organ", "lungs", "--in", dir / "u", "--out", dir / "m"});
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("NoCandidate"), std::string::npos);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, LabelLungsAndBones) {
  TempDir dir;
  ASSERT_EQ(run_cli({"phantom", "--out", dir / "p", "--seed", "4"}).code, 0);
  for (std::string organ : {"lungs", "bones"}) {
    auto r = run_cli({"label", "--organ", organ, "--in", dir / "p.vgrid.json", "--out", dir / organ});
    ASSERT_EQ(r.code, 0) << r.err;
    auto m = read_volume<std::uint8_t>(dir / (organ + ".vgrid.json"));
    auto truth = read_volume<std::uint8_t>(dir / (organ == "lungs" ? "p_lung.vgrid.json" : "p_bone.vgrid.json"));
    EXPECT_GE(dice_score(m, truth), organ == "lungs" ? 0.95 : 0.90);
    EXPECT_EQ(json::parse(r.out)["voxels"].get<std::size_t>(), count_nonzero(m));
  }
}

TEST(Cli, VerifyPenaltyReportsFormulaValues) {
  auto r = run_cli({"verify", "--suite", "penalty"});
  ASSERT_EQ(r.code, 0);
  auto j = json::parse(r.out);
  EXPECT_EQ(j["schema"], 1);
  EXPECT_TRUE(j["pass"].get<bool>());
  bool found = false;
  for (const auto& row : j["rows"])
    if (row["eps"] == 5) {
      EXPECT_DOUBLE_EQ(row["eps_over_N"].get<double>(), 0.05);
      EXPECT_DOUBLE_EQ(row["eps_over_N_plus_eps"].get<double>(), 5.0 / 105.0);
      found = true;
    }
  EXPECT_TRUE(found);
}

TEST(Cli, VerifyMetricReportsDiceCounterexample) {
  auto r = run_cli({"verify", "--suite", "metric"});
  ASSERT_EQ(r.code, 0);
  auto j = json::parse(r.out);
  EXPECT_TRUE(j["iou_exhaustive_n3"]["pass"].get<bool>());
  const auto& c = j["dice_exhaustive_n3"]["counterexample"];
  EXPECT_EQ(c["p"], json::array({0, 1}));
  EXPECT_EQ(c["y"], json::array({1, 0}));
  EXPECT_EQ(c["r"], json::array({1, 1}));
}

TEST(Cli, VerifySuitesPass) {
  for (std::string s : {"gradcheck", "restriction"}) {
    auto r = run_cli({"verify", "--suite", s, "--seed", "3"});
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(r.out, run_cli({"verify", "--suite", s, "--seed", "3"}).out);
  }
}

TEST(Cli, MorphResampleLoss) {
  TempDir dir;
  ASSERT_EQ(run_cli(concat({"phantom", "--out", dir / "p", "--noise", "0"}, kSmallPhantom)).code, 0);
  auto r = run_cli({"morph", "--op", "close", "--in", dir / "p_bone", "--out", dir / "c", "--diameter-mm", "13"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["element_dims"], json::array({3, 3, 3}));
  EXPECT_TRUE(is_subset(read_volume<std::uint8_t>(dir / "p_bone.vgrid.json"), read_volume<std::uint8_t>(dir / "c.vgrid.json")));

  r = run_cli({"resample", "--in", dir / "p", "--out", dir / "r", "--res", "12"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_volume(dir / "r.vgrid.json").dims(), (Dims{24, 20, 16}));
  r = run_cli({"resample", "--in", dir / "p_lung", "--out", dir / "rl.nii", "--res", "12", "--labels"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(is_binary(read_volume<std::uint8_t>(dir / "rl.nii")));

  r = run_cli({"loss", "--kind", "iou", "--pred", dir / "p_lung", "--truth", dir / "p_lung", "--grad", dir / "g"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["value"].get<double>(), 0.0);
  r = run_cli({"loss", "--kind", "dice", "--pred", dir / "p_lung", "--truth", dir / "p_bone"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["value"].get<double>(), 1.0);
  r = run_cli({"loss", "--kind", "iou", "--pred", dir / "p", "--truth", dir / "p_bone"});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, AugmentIsReproducibleAcrossRunsThreadsAndBatching) {
  TempDir dir;
  make_dataset(dir, 5);
  auto run = [&](const std::string& out, const std::vector<std::string>& extra,
                 const std::vector<std::string>& global = {}) {
    auto args = concat(global, {"augment", "--in", dir / "images.txt", "--labels", dir / "labels.txt", "--spec",
                                dir / "spec.json", "--out-dir", dir / out});
    auto r = run_cli(concat(args, extra));
    EXPECT_EQ(r.code, 0) << r.err;
    return tree_bytes(dir.path() / out);
  };
  const auto first = run("a", {"--seed", "99"});
  EXPECT_EQ(first, run("b", {"--seed", "99"}));
  EXPECT_EQ(first, run("c", {"--seed", "99", "--batch", "2", "--depth", "1"}));
  EXPECT_EQ(first, run("d", {"--seed", "99", "--batch", "3"}, {"--threads", "1"}));
  EXPECT_EQ(first, run("e", {"--seed", "99"}, {"--threads", "4"}));
  EXPECT_NE(first, run("f", {"--seed", "100"}));
  EXPECT_NE(first, run("g", {}));
  auto params = json::parse(file_bytes(dir.path() / "a" / "item_00003_params.json"));
  EXPECT_EQ(params["item"], 3);
  EXPECT_EQ(params["params"]["window"].size(), 2u);
}

TEST(Cli, AugmentFailureReportsGlobalItem) {
  TempDir dir;
  make_dataset(dir, 4);
  ASSERT_EQ(run_cli({"phantom", "--out", dir / "odd", "--dims", "48", "40", "30", "--spacing", "6"}).code, 0);
  {
    std::ofstream labs(dir / "labels.txt");
    for (int i = 0; i < 3; ++i) labs << dir / ("ph" + std::to_string(i) + "_lung.vgrid.json") << "\n";
    labs << dir / "odd_lung.vgrid.json" << "\n";
  }
  auto r = run_cli({"augment", "--in", dir / "images.txt", "--labels", dir / "labels.txt", "--spec", dir / "spec.json",
                    "--out-dir", dir / "o", "--batch", "2"});
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("PipelineError: item 3"), std::string::npos) << r.err;
}

TEST(Cli, AugmentSpecErrors) {
  TempDir dir;
  make_dataset(dir, 1);
  std::ofstream(dir / "bad.json") << R"({"rotation": [0, 1]})";
  auto r = run_cli({"augment", "--in", dir / "images.txt", "--labels", dir / "labels.txt", "--spec", dir / "bad.json",
                    "--out-dir", dir / "o"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unknown field"), std::string::npos);
}
