#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "xgkn/xgkn.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  xgkn_string_free(s);
  return out;
}

xgkn_config* tiny_config(const fs::path& out) {
  xgkn_config* cfg = nullptr;
  EXPECT_EQ(xgkn_config_default(&cfg), XGKN_OK);
  const json patch = {
      {"dataset", {{"n_graphs", 20}, {"seed", 3}}},
      {"model", {{"num_filters", 2}, {"filter_size", 3}, {"d_embed", 4}, {"max_size", 6}}},
      {"train", {{"epochs", 3}, {"batch_size", 8}}},
      {"aim", {{"samples_per_graph", 2}}},
      {"explain", {{"grid", {0.2, 0.5}}}},
      {"seeds", {0, 1}},
      {"output", out.string()},
  };
  EXPECT_EQ(xgkn_config_patch(cfg, patch.dump().c_str()), XGKN_OK) << xgkn_last_error();
  return cfg;
}

}  // namespace

TEST(CApi, StatusNamesAndVersion) {
  EXPECT_STREQ(xgkn_status_name(XGKN_OK), "ok");
  EXPECT_STRNE(xgkn_status_name(XGKN_ERR_ALIGNMENT), xgkn_status_name(XGKN_ERR_FORMAT));
  EXPECT_STREQ(xgkn_status_name(XGKN_ERR_INTERNAL), "internal");
  EXPECT_GT(std::string(xgkn_version()).size(), 0u);
}

TEST(CApi, ConfigDefaultPatchAndHash) {
  xgkn_config* cfg = nullptr;
  ASSERT_EQ(xgkn_config_default(&cfg), XGKN_OK);
  char* h0 = nullptr;
  ASSERT_EQ(xgkn_config_hash(cfg, &h0), XGKN_OK);
  const std::string hash0 = take(h0);
  EXPECT_EQ(hash0.size(), 16u);

  ASSERT_EQ(xgkn_config_patch(cfg, R"({"jobs": 4, "output": "/tmp/elsewhere"})"), XGKN_OK);
  char* h1 = nullptr;
  ASSERT_EQ(xgkn_config_hash(cfg, &h1), XGKN_OK);
  EXPECT_EQ(take(h1), hash0);

  ASSERT_EQ(xgkn_config_patch(cfg, R"({"model": {"num_filters": 6}})"), XGKN_OK);
  char* js = nullptr;
  ASSERT_EQ(xgkn_config_to_json(cfg, &js), XGKN_OK);
  const json j = json::parse(take(js));
  EXPECT_EQ(j["model"]["num_filters"], 6);
  EXPECT_EQ(j["jobs"], 4);

  xgkn_config* back = nullptr;
  ASSERT_EQ(xgkn_config_from_json(j.dump().c_str(), &back), XGKN_OK);
  char* h2 = nullptr;
  char* h3 = nullptr;
  ASSERT_EQ(xgkn_config_hash(back, &h2), XGKN_OK);
  ASSERT_EQ(xgkn_config_hash(cfg, &h3), XGKN_OK);
  EXPECT_EQ(take(h2), take(h3));
  xgkn_config_free(back);
  xgkn_config_free(cfg);
}

TEST(CApi, ConfigErrors) {
  xgkn_config* cfg = nullptr;
  EXPECT_EQ(xgkn_config_default(nullptr), XGKN_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(xgkn_last_error()), "");
  EXPECT_EQ(xgkn_config_from_json("{not json", &cfg), XGKN_ERR_FORMAT);
  EXPECT_EQ(cfg, nullptr);
  EXPECT_EQ(xgkn_config_from_json(R"({"unknown": 1})", &cfg), XGKN_ERR_FORMAT);
  ASSERT_EQ(xgkn_config_default(&cfg), XGKN_OK);
  EXPECT_EQ(xgkn_config_patch(cfg, R"({"model": {"bogus": 1}})"), XGKN_ERR_FORMAT);
  EXPECT_EQ(xgkn_config_patch(cfg, R"({"seeds": []})"), XGKN_OK);
  EXPECT_EQ(xgkn_config_validate(cfg), XGKN_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(xgkn_config_load("/nonexistent/config.json", &cfg), XGKN_ERR_IO);
  xgkn_config_free(cfg);
  xgkn_config_free(nullptr);
}

TEST(CApi, DatasetGenerateAndInspect) {
  xgkn_dataset* ds = nullptr;
  ASSERT_EQ(xgkn_dataset_generate("ba2motifs", 10, 1, &ds), XGKN_OK);
  EXPECT_EQ(xgkn_dataset_size(ds), 10u);
  std::size_t nodes = 0, edges = 0;
  int label = -1;
  ASSERT_EQ(xgkn_dataset_graph_info(ds, 0, &nodes, &edges, &label), XGKN_OK);
  EXPECT_EQ(nodes, 25u);
  EXPECT_GE(edges, 25u);
  EXPECT_TRUE(label == 0 || label == 1);
  EXPECT_EQ(xgkn_dataset_graph_info(ds, 10, &nodes, &edges, &label), XGKN_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(xgkn_dataset_size(nullptr), 0u);
  xgkn_dataset_free(ds);

  EXPECT_EQ(xgkn_dataset_generate("mnist", 10, 1, &ds), XGKN_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(xgkn_dataset_load_tu("/nonexistent", "X", &ds), XGKN_ERR_IO);
}

TEST(CApi, PipelineAndModelEndToEnd) {
  const fs::path out = fs::path(::testing::TempDir()) / "xgkn_capi_run";
  fs::remove_all(out);
  xgkn_config* cfg = tiny_config(out);

  std::vector<std::string> logs;
  xgkn_set_log([](const char* m, void* u) { static_cast<std::vector<std::string>*>(u)->push_back(m); }, &logs);
  char* s = nullptr;
  ASSERT_EQ(xgkn_train(cfg, &s), XGKN_ERR_IO) << "train before prepare";
  ASSERT_EQ(xgkn_prepare(cfg, &s), XGKN_OK) << xgkn_last_error();
  const json prep = json::parse(take(s));
  EXPECT_EQ(prep["graphs"], 20);
  EXPECT_EQ(prep["content_hash"].get<std::string>().size(), 16u);
  ASSERT_EQ(xgkn_train(cfg, &s), XGKN_OK) << xgkn_last_error();
  EXPECT_EQ(json::parse(take(s))["seeds"].size(), 2u);
  ASSERT_EQ(xgkn_explain(cfg, &s), XGKN_OK) << xgkn_last_error();
  take(s);
  ASSERT_EQ(xgkn_evaluate(cfg, nullptr, &s), XGKN_OK) << xgkn_last_error();
  const json report = json::parse(take(s));
  EXPECT_EQ(report["format"], "xgkn-aim-report");
  xgkn_set_log(nullptr, nullptr);
  EXPECT_FALSE(logs.empty());

  char* csv = nullptr;
  ASSERT_EQ(xgkn_report_render((out / "report.json").c_str(), "csv", &csv), XGKN_OK);
  EXPECT_EQ(take(csv).rfind("metric,", 0), 0u);
  EXPECT_EQ(xgkn_report_render((out / "report.json").c_str(), "pdf", &csv), XGKN_ERR_INVALID_ARGUMENT);

  xgkn_model* model = nullptr;
  ASSERT_EQ(xgkn_model_load((out / "seed_0" / "checkpoint.json").c_str(), &model), XGKN_OK) << xgkn_last_error();
  EXPECT_EQ(xgkn_model_num_concepts(model), 2u);
  xgkn_dataset* ds = nullptr;
  ASSERT_EQ(xgkn_dataset_generate("ba2motifs", 20, 3, &ds), XGKN_OK);
  int cls = -1;
  ASSERT_EQ(xgkn_model_predict(model, ds, 0, &cls), XGKN_OK);
  EXPECT_TRUE(cls == 0 || cls == 1);

  double baseline[2];
  ASSERT_EQ(xgkn_model_baseline(model, ds, nullptr, 0, baseline, 2), XGKN_OK);
  EXPECT_EQ(xgkn_model_baseline(model, ds, nullptr, 0, baseline, 3), XGKN_ERR_SHAPE);
  const std::size_t ids[] = {0, 1, 2};
  double partial[2];
  ASSERT_EQ(xgkn_model_baseline(model, ds, ids, 3, partial, 2), XGKN_OK);

  char* rec = nullptr;
  ASSERT_EQ(xgkn_model_explain(model, ds, 4, baseline, 2, 0.5, &rec), XGKN_OK) << xgkn_last_error();
  const json e = json::parse(take(rec));
  EXPECT_EQ(e["graph"], 4);
  double sum = 0.0;
  for (double v : e["importance"]) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_FALSE(e["selected"].empty());
  EXPECT_EQ(xgkn_model_explain(model, ds, 99, baseline, 2, 0.5, &rec), XGKN_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(xgkn_model_explain(model, ds, 0, nullptr, 2, 0.5, &rec), XGKN_ERR_INVALID_ARGUMENT);

  xgkn_dataset_free(ds);
  xgkn_model_free(model);

  // Changing the configuration invalidates the prepared artifacts.
  ASSERT_EQ(xgkn_config_patch(cfg, R"({"train": {"epochs": 4}})"), XGKN_OK);
  EXPECT_EQ(xgkn_train(cfg, &s), XGKN_ERR_ALIGNMENT);
  EXPECT_NE(std::string(xgkn_last_error()).find("config"), std::string::npos);
  xgkn_config_free(cfg);
}
