#include <gtest/gtest.h>
#include <json.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "aerodepth/cli.hpp"
#include "aerodepth/data.hpp"
#include "aerodepth/evaluation.hpp"
#include "aerodepth/image_io.hpp"
#include "support/tempdir.hpp"

using namespace aerodepth;
namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "aerodepth");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(Colorize, NearIsYellowFarIsBlueInvalidIsBlack) {
  const auto depth = torch::tensor({{1.0f, 2.0f, 0.0f}, {4.0f, 1.0f, std::nanf("")}});
  const auto rgb = cli::colorize_depth(depth);
  ASSERT_EQ(rgb.sizes(), (std::vector<int64_t>{3, 2, 3}));
  auto px = [&](int y, int x) {
    return std::array<double, 3>{rgb[0][y][x].item<double>(), rgb[1][y][x].item<double>(),
                                 rgb[2][y][x].item<double>()};
  };
  EXPECT_EQ(px(0, 0), (std::array<double, 3>{1, 1, 0}));
  EXPECT_EQ(px(1, 0), (std::array<double, 3>{0, 0, 1}));
  EXPECT_EQ(px(0, 2), (std::array<double, 3>{0, 0, 0}));
  EXPECT_EQ(px(1, 2), (std::array<double, 3>{0, 0, 0}));
  // inverse depth 1/2 sits one third of the way from far (1/4) to near (1).
  EXPECT_NEAR(px(0, 1)[0], 2.0 / 3.0, 1e-6);
  EXPECT_NEAR(px(0, 1)[2], 1.0 / 3.0, 1e-6);
}

TEST(Colorize, ConstantMapIsOneHue) {
  const auto rgb = cli::colorize_depth(torch::full({4, 5}, 7.0f));
  EXPECT_TRUE(rgb[0].eq(1).all().item<bool>());
  EXPECT_TRUE(rgb[1].eq(0).all().item<bool>());
  EXPECT_TRUE(rgb[2].eq(0).all().item<bool>());
}

TEST(Cli, ExitCodes) {
  testing_support::TempDir dir;
  EXPECT_EQ(run_cli({}), 2);
  EXPECT_EQ(run_cli({"dance"}), 2);
  EXPECT_EQ(run_cli({"synth"}), 2);
  EXPECT_EQ(run_cli({"synth", "--preset", "moon", "--out", (dir / "x").string()}), 2);
  EXPECT_EQ(run_cli({"synth", "--preset", "demo", "--frames", "4", "--width", "48", "--height",
                     "32", "--set", "scene.colour=red", "--out", (dir / "y").string()}),
            2);
  EXPECT_EQ(run_cli({"colorize", "--depth", (dir / "missing.depth").string()}), 2);
  std::ofstream(dir / "broken.depth") << "garbage";
  EXPECT_EQ(run_cli({"colorize", "--depth", (dir / "broken.depth").string()}), 1);
}

TEST(Cli, PrepareBuildsAManifestFromImageFolders) {
  testing_support::TempDir dir;
  fs::create_directories(dir / "frames");
  for (int i = 1; i <= 5; ++i) {
    io::write_image(dir / ("frames/img" + std::to_string(i) + ".png"), torch::rand({3, 16, 24}));
  }
  std::ofstream(dir / "k.txt") << "fx = 20\nfy = 20\ncx = 11.5\ncy = 7.5\nwidth = 24\nheight = 16\n";
  ASSERT_EQ(run_cli({"prepare", "--images", (dir / "frames").string(), "--intrinsics",
                     (dir / "k.txt").string(), "--offset", "2", "--out",
                     (dir / "data/manifest.txt").string()}),
            0);
  const auto manifest = data::DatasetManifest::read(dir / "data/manifest.txt");
  ASSERT_EQ(manifest.sequences.size(), 1u);
  EXPECT_EQ(manifest.sequences[0].name, "frames");
  EXPECT_EQ(manifest.sequences[0].offset, 2);
  EXPECT_TRUE(fs::exists(dir / "data/run.json"));
}

TEST(Cli, SynthTrainEvalInferColorize) {
  testing_support::TempDir dir;
  const std::string data = (dir / "data").string();
  ASSERT_EQ(run_cli({"synth", "--preset", "demo", "--width", "64", "--height", "48", "--frames",
                     "16", "--out", data}),
            0);
  ASSERT_TRUE(fs::exists(dir / "data/manifest.txt"));

  const std::vector<std::string> small{"--set", "network.width=64",      "--set",
                                       "network.height=48", "--set", "train.batch_size=4",
                                       "--set", "train.steps_per_epoch=1", "--set",
                                       "train.max_epochs=1"};
  std::vector<std::string> train{"train", "--data", data + "/manifest.txt", "--seed", "3",
                                 "--out", (dir / "run").string()};
  train.insert(train.end(), small.begin(), small.end());
  ASSERT_EQ(run_cli(train), 0);
  ASSERT_TRUE(fs::exists(dir / "run/best/depth.pt"));

  const auto info = nlohmann::json::parse(std::ifstream(dir / "run/run.json"));
  EXPECT_EQ(info.at("command"), "train");
  EXPECT_EQ(info.at("seed"), 3);
  EXPECT_TRUE(info.at("versions").contains("torch"));
  EXPECT_EQ(info.at("config").at("train.seed"), "3");

  ASSERT_EQ(run_cli({"eval", "--checkpoint", (dir / "run/best").string(), "--data",
                     data + "/manifest.txt", "--all", "--out", (dir / "eval").string()}),
            0);
  const auto rows = lines_of(dir / "eval/report.csv");
  ASSERT_EQ(rows.size(), 1u + 14u + 1u);
  EXPECT_EQ(rows.front(), "name,rmse,l1_rel,delta_1.25,delta_1.05");
  EXPECT_EQ(rows.back().rfind("mean,", 0), 0u);

  const std::string image = data + "/demo/images/000003.png";
  ASSERT_EQ(run_cli({"infer", "--checkpoint", (dir / "run/best").string(), "--image", image,
                     "--out", (dir / "infer").string()}),
            0);
  const auto depth = evaluation::read_depth_file(dir / "infer/000003.depth");
  EXPECT_EQ(depth.sizes(), (std::vector<int64_t>{48, 64}));
  EXPECT_TRUE(fs::exists(dir / "infer/000003_depth.png"));

  ASSERT_EQ(run_cli({"colorize", "--depth", (dir / "infer/000003.depth").string(), "--out",
                     (dir / "c.png").string()}),
            0);
  EXPECT_EQ(io::read_image(dir / "c.png").sizes(), (std::vector<int64_t>{3, 48, 64}));

  std::vector<std::string> ft{"finetune", "--checkpoint", (dir / "run/best").string(), "--data",
                              data + "/manifest.txt", "--old-data", data + "/manifest.txt",
                              "--mix", "0.5", "--out", (dir / "ft").string(),
                              "--set", "train.steps_per_epoch=1", "--set", "train.max_epochs=1"};
  ASSERT_EQ(run_cli(ft), 0);
  EXPECT_TRUE(fs::exists(dir / "ft/best/depth.pt"));
  EXPECT_EQ(run_cli({"finetune", "--checkpoint", (dir / "run/best").string(), "--data",
                     data + "/manifest.txt", "--mix", "0.5"}),
            2);
}
