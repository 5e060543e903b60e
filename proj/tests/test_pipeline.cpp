#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "xgkn/error.hpp"
#include "xgkn/pipeline/pipeline.hpp"

using namespace xgkn;
using namespace xgkn::pipeline;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an xgkn::Error";
  return ErrorCode::kInvalidArgument;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("xgkn_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig tiny(const fs::path& out) {
  RunConfig c;
  c.dataset.n_graphs = 20;
  c.dataset.seed = 3;
  c.model.num_filters = 2;
  c.model.filter_size = 3;
  c.model.d_embed = 4;
  c.model.max_size = 6;
  c.train.epochs = 4;
  c.train.batch_size = 8;
  c.aim.samples_per_graph = 2;
  c.explain.grid = {0.2, 0.4, 0.6};
  c.seeds = {0, 1};
  c.output = out;
  return c;
}

}  // namespace

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c = tiny("/tmp/x");
  c.model.agg = model::AggMode::kMax;
  c.model.norm = model::NormScope::kColumn;
  c.dataset.feature_policy = "degree";
  c.jobs = 3;
  const RunConfig back = RunConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
  EXPECT_EQ(c.hash().size(), 16u);
}

TEST(RunConfig, HashIgnoresOutputAndJobs) {
  RunConfig a = tiny("/tmp/a");
  RunConfig b = tiny("/tmp/b");
  b.jobs = 4;
  EXPECT_EQ(a.hash(), b.hash());
  b.train.lr = 0.02;
  EXPECT_NE(a.hash(), b.hash());
  b = a;
  b.seeds = {0, 2};
  EXPECT_NE(a.hash(), b.hash());
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  nlohmann::json j = tiny("/tmp/x").to_json();
  j["model"]["filters"] = 3;
  EXPECT_EQ(code_of([&] { RunConfig::from_json(j); }), ErrorCode::kFormat);
  j = nlohmann::json{{"colour", 1}};
  EXPECT_EQ(code_of([&] { RunConfig::from_json(j); }), ErrorCode::kFormat);

  RunConfig c = tiny("/tmp/x");
  c.seeds = {1, 1};
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kInvalidArgument);
  c = tiny("/tmp/x");
  c.dataset.source = "mnist";
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kInvalidArgument);
  c = tiny("/tmp/x");
  c.explain.grid = {1.5};
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kInvalidArgument);
  c = tiny("/tmp/x");
  c.dataset.source = "tu";
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kInvalidArgument);
}

TEST(Pipeline, PrepareRoundTrip) {
  const RunConfig c = tiny(scratch("prepare"));
  const Prepared p = cmd_prepare(c);
  EXPECT_EQ(p.ds.size(), 20u);
  EXPECT_EQ(p.splits.size(), 2u);
  EXPECT_TRUE(p.ds.has_instance_masks());
  EXPECT_EQ(p.ds.gt_motifs.size(), 2u);
  EXPECT_EQ(p.ds.content_hash(), build_dataset(c.dataset).content_hash());
  const Prepared again = load_prepared(c);
  EXPECT_EQ(again.splits[1].test, p.splits[1].test);
  EXPECT_EQ(again.config_hash, c.hash());
}

TEST(Pipeline, RefusesArtifactsOfAnotherConfig) {
  RunConfig c = tiny(scratch("mismatch"));
  cmd_prepare(c);
  c.train.epochs = 5;
  EXPECT_EQ(code_of([&] { load_prepared(c); }), ErrorCode::kAlignment);
  RunConfig fresh = tiny(scratch("missing"));
  EXPECT_EQ(code_of([&] { load_prepared(fresh); }), ErrorCode::kIo);
  EXPECT_EQ(code_of([&] { cmd_train(fresh); }), ErrorCode::kIo);
}

TEST(Pipeline, RunAllIsReproducible) {
  const RunConfig a = tiny(scratch("run_a"));
  RunConfig b = tiny(scratch("run_b"));
  b.jobs = 2;
  std::vector<std::string> lines;
  const metrics::AimReport ra = run_all(a, [&](const std::string& s) { lines.push_back(s); });
  run_all(b);
  EXPECT_FALSE(lines.empty());
  EXPECT_EQ(ra.seeds, (std::vector<std::uint64_t>{0, 1}));
  for (const char* f : {"report.json", "report.csv", "radar.csv"}) {
    ASSERT_TRUE(fs::exists(a.output / f)) << f;
    EXPECT_EQ(slurp(a.output / f), slurp(b.output / f)) << f;
  }
  for (std::uint64_t s : a.seeds) {
    for (const char* f : {"checkpoint.json", "history.csv", "explanations.jsonl", "threshold.json"})
      EXPECT_EQ(slurp(seed_dir(a, s) / f), slurp(seed_dir(b, s) / f)) << f;
    EXPECT_TRUE(fs::exists(seed_dir(a, s) / "timing.json"));
  }
  for (const auto& m : ra.metrics) {
    if (!m.available) continue;
    EXPECT_GE(m.mean, 0.0) << m.name;
    EXPECT_LE(m.mean, 1.0) << m.name;
  }
}

TEST(Pipeline, EvaluateComparesReports) {
  const RunConfig a = tiny(scratch("cmp_a"));
  run_all(a);
  RunConfig b = tiny(scratch("cmp_b"));
  b.train.lr = 0.02;
  run_all(b);
  const metrics::AimReport r = cmd_evaluate(b, a.output / "report.json");
  EXPECT_EQ(r.comparisons.size(), 1 + metrics::metric_names().size());
  EXPECT_TRUE(fs::exists(b.output / "comparisons.csv"));
}
