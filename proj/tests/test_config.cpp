#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "tunenet/errors.hpp"
#include "tunenet/experiment.hpp"

using namespace tunenet;
using namespace tunenet::eval;
using nlohmann::json;

namespace {

const std::string kSource = TUNENET_SOURCE_DIR;

json tiny_doc() {
  std::ifstream in(kSource + "/tests/data/tiny.json");
  return json::parse(in);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, SeedsDeriveFromTopLevelSeed) {
  const ExperimentConfig a = parse_config(tiny_doc(), 1);
  const ExperimentConfig b = parse_config(tiny_doc(), 2);
  EXPECT_EQ(a.seed, 1u);
  EXPECT_NE(a.dataset("train").seed, b.dataset("train").seed);
  EXPECT_NE(a.dataset("train").seed, a.dataset("easy").seed);
  EXPECT_NE(a.training.seed, b.training.seed);
  EXPECT_EQ(a.dataset("train").seed, parse_config(tiny_doc(), 1).dataset("train").seed);
  EXPECT_EQ(a.run_dir, "runs/tiny-seed1");
  EXPECT_EQ(a.tune.K, 2u);
  EXPECT_EQ(a.training.epochs, 3u);
}

TEST(Config, HashTracksContentNotRunDir) {
  json doc = tiny_doc();
  const std::string h1 = config_hash(parse_config(doc, 1));
  EXPECT_EQ(h1.size(), 16u);
  EXPECT_NE(h1, config_hash(parse_config(doc, 2)));
  doc["run_dir"] = "/tmp/elsewhere";
  EXPECT_EQ(h1, config_hash(parse_config(doc, 1)));
  doc["training"]["epochs"] = 4;
  EXPECT_NE(h1, config_hash(parse_config(doc, 1)));
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST(Config, ValidationFailures) {
  json doc = tiny_doc();
  doc["bogus"] = 1;
  EXPECT_THROW(parse_config(doc), ParameterDomainError);
  doc = tiny_doc();
  doc["datasets"]["train"]["seed"] = 5;
  EXPECT_THROW(parse_config(doc), ParameterDomainError);
  doc = tiny_doc();
  doc["training"]["seed"] = 5;
  EXPECT_THROW(parse_config(doc), ParameterDomainError);
  doc = tiny_doc();
  doc["tune"]["K"] = 0;
  EXPECT_THROW(parse_config(doc), ParameterDomainError);
  doc = tiny_doc();
  doc["tune"]["steps"] = 3;
  EXPECT_THROW(parse_config(doc), ParameterDomainError);
  doc = tiny_doc();
  doc["bounds"] = json::array({json::array({1, 0})});
  EXPECT_THROW(parse_config(doc), ParameterDomainError);
  doc = tiny_doc();
  doc["train_dataset"] = "nope";
  EXPECT_THROW(parse_config(doc), ParameterDomainError);
  doc = tiny_doc();
  doc["baseline"] = {{"methods", {"mean", "magic"}}};
  EXPECT_THROW(parse_config(doc), ParameterDomainError);
  doc = tiny_doc();
  doc["datasets"]["train"]["n_train"] = "many";
  EXPECT_THROW(parse_config(doc), ParameterDomainError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), MissingArtifactError);
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"ball.json", "arm.json"}) {
    const ExperimentConfig c = load_config(kSource + "/configs/" + name, 7);
    EXPECT_EQ(c.seed, 7u);
  }
}

TEST(Drivers, SmallPipelineWritesManifestAndIsReproducible) {
  const auto root = std::filesystem::temp_directory_path() / "tunenet_driver_test";
  std::filesystem::remove_all(root);
  std::string first;
  for (const char* sub : {"a", "b"}) {
    ExperimentConfig cfg = parse_config(tiny_doc(), 3);
    cfg.run_dir = (root / sub).string();
    EXPECT_THROW(run_train(cfg), MissingArtifactError);
    EXPECT_FALSE(run_gen_data(cfg).empty());
    EXPECT_THROW(run_tune(cfg), MissingArtifactError);
    run_train(cfg);
    const Outputs out = run_tune(cfg);
    ASSERT_FALSE(out.empty());
    const json manifest = json::parse(slurp(root / sub / "manifest.json"));
    EXPECT_EQ(manifest["commands"]["tune"]["seed"], 3);
    EXPECT_EQ(manifest["commands"]["tune"]["config_hash"], config_hash(cfg));
    EXPECT_TRUE(manifest["commands"].contains("gen-data"));
    EXPECT_TRUE(manifest["commands"].contains("train"));
    std::string all;
    for (const auto& f : out) all += slurp(root / sub / f);
    all += slurp(root / sub / "models" / "tunenet.json");
    all += slurp(root / sub / "data" / "train.tnds");
    if (first.empty()) {
      first = all;
    } else {
      EXPECT_EQ(all, first);
    }
  }
  const std::string trace = slurp(root / "a" / "tune_trace.csv");
  std::istringstream lines(trace);
  std::string header;
  std::getline(lines, header);
  EXPECT_EQ(header.rfind("method,dataset,episode,iteration,rollouts", 0), 0u);
  std::size_t rows = 0;
  for (std::string l; std::getline(lines, l);) ++rows;
  EXPECT_EQ(rows, 5u * 3u);  // 5 episodes, iterations 0..K
}

TEST(Task, WorldObservationAndPerfectOracle) {
  data::DatasetSpec spec;
  spec.frames = 400;
  const sim::Observation o = world_observation(0.5, 4.5, spec);
  EXPECT_EQ(o.num_channels(), 3u);
  EXPECT_EQ(o.length(), 400u);
  EXPECT_DOUBLE_EQ(o.channels[2][0], 4.5);
}
