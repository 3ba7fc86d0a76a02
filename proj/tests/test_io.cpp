#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "clot/io/config.hpp"
#include "clot/io/formats.hpp"
#include "clot/io/synthetic.hpp"
#include "clot/kernels/kernels.hpp"

using clot::DenseMatrix;
using clot::Rng;
namespace io = clot::io;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("clot_io_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("feature file round-trips at 32-bit precision, bit-exact on re-read") {
  const fs::path dir = temp_dir("feat");
  const std::string path = (dir / "a.cft").string();

  DenseMatrix m(3, 2);
  m.data = {1.0, -2.5, 0.125, 3.14159265358979, -1e-20, 42.0};
  io::write_feature_file(path, m);
  const DenseMatrix back = io::read_feature_file(path);
  REQUIRE(back.rows == 3);
  REQUIRE(back.cols == 2);
  for (std::size_t i = 0; i < m.size(); ++i)
    CHECK(back.data[i] == static_cast<double>(static_cast<float>(m.data[i])));

  // a second round trip is bit-exact (f32 values are now exactly stored)
  const std::string path2 = (dir / "b.cft").string();
  io::write_feature_file(path2, back);
  const DenseMatrix again = io::read_feature_file(path2);
  CHECK(again.data == back.data);
  std::ifstream f1(path2, std::ios::binary), f0(path, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f0)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  fs::remove_all(dir);
}

TEST_CASE("feature file: truncation and magic errors name byte counts") {
  const fs::path dir = temp_dir("feat_err");
  const std::string path = (dir / "bad.cft").string();
  DenseMatrix m(4, 3, 1.5);
  io::write_feature_file(path, m);

  // truncate the payload
  fs::resize_file(path, 20 + 4 * 5);
  try {
    io::read_feature_file(path);
    FAIL("expected FormatError");
  } catch (const clot::FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("68") != std::string::npos);  // expected byte count 20 + 48
    CHECK(msg.find("40") != std::string::npos);  // actual
  }

  std::ofstream bad(path, std::ios::binary | std::ios::trunc);
  bad << "NOTMAGIC" << std::string(12, '\0');
  bad.close();
  CHECK_THROWS_AS(io::read_feature_file(path), clot::FormatError);
  fs::remove_all(dir);
}

TEST_CASE("label files round-trip and reject junk") {
  const fs::path dir = temp_dir("labels");
  const std::string path = (dir / "l.txt").string();
  const std::vector<int> labels{0, 1, 2, 1, 0, 5};
  io::write_labels(path, labels);
  CHECK(io::read_labels(path) == labels);

  std::ofstream bad(path, std::ios::trunc);
  bad << "0\n-3\n";
  bad.close();
  CHECK_THROWS_AS(io::read_labels(path), clot::FormatError);

  std::ofstream junk(path, std::ios::trunc);
  junk << "0\nqq\n";
  junk.close();
  CHECK_THROWS_AS(io::read_labels(path), clot::FormatError);
  fs::remove_all(dir);
}

TEST_CASE("config parsing: values, comments, stage overrides, unknown keys") {
  const auto kv = io::parse_kv_text(
      "# run settings\n"
      "lambda = 0.1\n"
      "epochs = 15   # breakfast-style\n"
      "k = 48\n"
      "stage2_lambda = 0.5\n"
      "use_swd_stage3 = true\n");
  const auto cfg = io::make_train_config(kv);
  CHECK(cfg.epochs == 15);
  CHECK(cfg.k_actions == 48);
  CHECK(cfg.stage1.lambda == doctest::Approx(0.1));
  CHECK(cfg.stage3.lambda == doctest::Approx(0.1));
  CHECK(cfg.stage2.lambda == doctest::Approx(0.5));  // stage override wins
  CHECK(cfg.use_swd_stage3);

  CHECK_THROWS_AS(io::make_train_config(io::parse_kv_text("not_a_key = 1\n")),
                  clot::FormatError);
  CHECK_THROWS_AS(io::parse_kv_text("keyonly\n"), clot::FormatError);
  CHECK_THROWS_AS(io::parse_kv_text("a = 1\na = 2\n"), clot::FormatError);
  CHECK_THROWS_AS(io::make_train_config(io::parse_kv_text("lr = fast\n")), clot::FormatError);
}

TEST_CASE("synthetic: zero noise reproduces prototypes exactly") {
  io::SyntheticSpec spec;
  spec.k_actions = 3;
  spec.n_videos = 2;
  spec.frames_per_video = 30;
  spec.feature_dim = 8;
  spec.noise_sigma = 0.0;
  spec.min_segment = 4;
  spec.max_segment = 15;
  spec.seed = 5;
  const auto ds = io::generate_synthetic_memory(spec);
  REQUIRE(ds.videos.size() == 2);
  for (const auto& video : ds.videos) {
    REQUIRE(video.labels.size() == 30);
    REQUIRE(video.features.rows == 30);
    for (std::size_t i = 0; i < video.features.rows; ++i) {
      const double* proto = ds.prototypes.row(static_cast<std::size_t>(video.labels[i]));
      const double d = clot::kernels::ops().sq_dist(video.features.row(i), proto, 8);
      CHECK(d == 0.0);
    }
  }
  // prototypes are unit norm with pairwise cosine <= 0.3
  for (std::size_t p = 0; p < ds.prototypes.rows; ++p) {
    const double n2 = clot::kernels::ops().dot(ds.prototypes.row(p), ds.prototypes.row(p), 8);
    CHECK(std::fabs(n2 - 1.0) <= 1e-12);
    for (std::size_t q = p + 1; q < ds.prototypes.rows; ++q)
      CHECK(clot::kernels::ops().dot(ds.prototypes.row(p), ds.prototypes.row(q), 8) <=
            0.3 + 1e-12);
  }
}

TEST_CASE("synthetic: fixed ordering shares one action sequence across videos") {
  io::SyntheticSpec spec;
  spec.k_actions = 4;
  spec.n_videos = 3;
  spec.frames_per_video = 60;
  spec.feature_dim = 6;
  spec.ordering = "fixed";
  spec.seed = 9;
  const auto ds = io::generate_synthetic_memory(spec);
  for (const auto& video : ds.videos) {
    std::vector<int> order;
    for (std::size_t i = 0; i < video.labels.size(); ++i)
      if (order.empty() || order.back() != video.labels[i]) order.push_back(video.labels[i]);
    CHECK(order == std::vector<int>{0, 1, 2, 3});
  }
}

TEST_CASE("synthetic: markov ordering avoids self-transitions, plan covers frames") {
  io::SyntheticSpec spec;
  spec.k_actions = 3;
  spec.n_videos = 4;
  spec.frames_per_video = 100;
  spec.feature_dim = 4;
  spec.ordering = "markov";
  spec.min_segment = 5;
  spec.max_segment = 25;
  spec.seed = 33;
  const auto ds = io::generate_synthetic_memory(spec);
  for (const auto& video : ds.videos) {
    REQUIRE(video.labels.size() == 100);
    const auto segments = [&] {
      std::vector<std::pair<std::size_t, int>> runs;
      for (std::size_t i = 0; i < video.labels.size(); ++i)
        if (runs.empty() || runs.back().second != video.labels[i]) runs.push_back({i, video.labels[i]});
      return runs;
    }();
    for (std::size_t s = 1; s < segments.size(); ++s)
      CHECK(segments[s].second != segments[s - 1].second);
  }
}

TEST_CASE("synthetic on disk: counts agree, manifest written, deterministic") {
  const fs::path dir = temp_dir("synth");
  io::SyntheticSpec spec;
  spec.k_actions = 3;
  spec.n_videos = 3;
  spec.frames_per_video = 24;
  spec.feature_dim = 5;
  spec.seed = 77;
  const auto summary = io::generate_synthetic(spec, dir.string());
  CHECK(summary.n_videos == 3);
  CHECK(summary.total_frames == 72);
  CHECK(fs::exists(dir / "manifest.json"));

  const auto videos = io::load_dataset(dir.string(), /*require_labels=*/true);
  REQUIRE(videos.size() == 3);
  for (const auto& v : videos) CHECK(v.labels.size() == v.features.rows);

  // regeneration under the same seed is identical on disk
  const fs::path dir2 = temp_dir("synth2");
  io::generate_synthetic(spec, dir2.string());
  for (const auto& v : videos) {
    std::ifstream f1(dir / "features" / (v.name + ".cft"), std::ios::binary);
    std::ifstream f2(dir2 / "features" / (v.name + ".cft"), std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
  }
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("synthetic: infeasible prototype separation is an error") {
  // d = 1 admits only +1/-1; three prototypes cannot keep pairwise cos <= 0.3.
  io::SyntheticSpec spec;
  spec.k_actions = 3;
  spec.n_videos = 1;
  spec.frames_per_video = 10;
  spec.feature_dim = 1;
  spec.min_segment = 1;
  spec.max_segment = 5;
  spec.seed = 2;
  CHECK_THROWS_AS(io::generate_synthetic_memory(spec), clot::Error);
}

TEST_CASE("synthetic with background replaces a fraction with label K") {
  io::SyntheticSpec spec;
  spec.k_actions = 3;
  spec.n_videos = 2;
  spec.frames_per_video = 80;
  spec.feature_dim = 6;
  spec.ordering = "permuted";
  spec.background_fraction = 0.25;
  spec.seed = 13;
  const auto ds = io::generate_synthetic_memory(spec);
  CHECK(ds.prototypes.rows == 4);  // K + background prototype
  std::size_t bg = 0, total = 0;
  for (const auto& video : ds.videos)
    for (int v : video.labels) {
      bg += v == 3;
      ++total;
    }
  CHECK(bg > 0);
  CHECK(static_cast<double>(bg) / static_cast<double>(total) <= 0.30);
}
