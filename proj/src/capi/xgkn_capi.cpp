#include "xgkn/xgkn.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <new>
#include <sstream>
#include <string>

#include "json.hpp"
#include "xgkn/data/dataset.hpp"
#include "xgkn/error.hpp"
#include "xgkn/explain/explainer.hpp"
#include "xgkn/metrics/metrics.hpp"
#include "xgkn/model/model.hpp"
#include "xgkn/pipeline/pipeline.hpp"

struct xgkn_config {
  xgkn::pipeline::RunConfig cfg;
};

struct xgkn_dataset {
  xgkn::data::Dataset ds;
};

struct xgkn_model {
  xgkn::model::XgknModel model;
};

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

std::mutex g_log_mutex;
xgkn_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

xgkn::pipeline::Log current_log() {
  return [](const std::string& msg) {
    std::lock_guard<std::mutex> lock(g_log_mutex);
    if (g_log_fn) g_log_fn(msg.c_str(), g_log_user);
  };
}

xgkn_status set_error(xgkn_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
xgkn_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return XGKN_OK;
  } catch (const xgkn::Error& e) {
    return set_error(static_cast<xgkn_status>(static_cast<int>(e.code())), e.what());
  } catch (const json::exception& e) {
    return set_error(XGKN_ERR_FORMAT, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(XGKN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(XGKN_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(XGKN_ERR_INTERNAL, "unknown exception");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

void need(const void* p, const char* what) {
  xgkn::require(p != nullptr, xgkn::ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

std::string read_file(const char* path) {
  std::ifstream in(path, std::ios::binary);
  xgkn::require(static_cast<bool>(in), xgkn::ErrorCode::kIo, std::string("cannot open ") + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

extern "C" {

const char* xgkn_version(void) { return "1.0.0"; }

const char* xgkn_status_name(xgkn_status status) {
  if (status == XGKN_OK) return "ok";
  if (status == XGKN_ERR_INTERNAL) return "internal";
  if (status >= XGKN_ERR_INVALID_ARGUMENT && status <= XGKN_ERR_TRACE)
    return xgkn::error_code_name(static_cast<xgkn::ErrorCode>(static_cast<int>(status)));
  return "unknown";
}

const char* xgkn_last_error(void) { return g_last_error.c_str(); }

void xgkn_string_free(char* s) { std::free(s); }

void xgkn_set_log(xgkn_log_fn fn, void* user) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user;
}

// ---- config ----------------------------------------------------------------

xgkn_status xgkn_config_default(xgkn_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new xgkn_config{};
  });
}

xgkn_status xgkn_config_from_json(const char* text, xgkn_config** out) {
  return guarded([&] {
    need(text, "json");
    need(out, "out");
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      xgkn::fail(xgkn::ErrorCode::kFormat, std::string("config: ") + e.what());
    }
    auto cfg = xgkn::pipeline::RunConfig::from_json(j);
    *out = new xgkn_config{std::move(cfg)};
  });
}

xgkn_status xgkn_config_load(const char* path, xgkn_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new xgkn_config{xgkn::pipeline::load_run_config(path)};
  });
}

xgkn_status xgkn_config_patch(xgkn_config* cfg, const char* json_patch) {
  return guarded([&] {
    need(cfg, "config");
    need(json_patch, "patch");
    json patch;
    try {
      patch = json::parse(json_patch);
    } catch (const json::exception& e) {
      xgkn::fail(xgkn::ErrorCode::kFormat, std::string("config patch: ") + e.what());
    }
    json j = cfg->cfg.to_json();
    j.merge_patch(patch);
    cfg->cfg = xgkn::pipeline::RunConfig::from_json(j);
  });
}

xgkn_status xgkn_config_validate(const xgkn_config* cfg) {
  return guarded([&] {
    need(cfg, "config");
    cfg->cfg.validate();
  });
}

xgkn_status xgkn_config_to_json(const xgkn_config* cfg, char** out_json) {
  return guarded([&] {
    need(cfg, "config");
    need(out_json, "out");
    put(out_json, cfg->cfg.to_json().dump(2));
  });
}

xgkn_status xgkn_config_hash(const xgkn_config* cfg, char** out_hash) {
  return guarded([&] {
    need(cfg, "config");
    need(out_hash, "out");
    put(out_hash, cfg->cfg.hash());
  });
}

void xgkn_config_free(xgkn_config* cfg) { delete cfg; }

// ---- pipeline ----------------------------------------------------------------

xgkn_status xgkn_prepare(const xgkn_config* cfg, char** out_json) {
  return guarded([&] {
    need(cfg, "config");
    const auto p = xgkn::pipeline::cmd_prepare(cfg->cfg, current_log());
    std::size_t masks = 0;
    for (const auto& m : p.ds.gt_instance_masks) masks += m && !m->empty() ? 1 : 0;
    put(out_json, json{{"config_hash", p.config_hash},
                       {"name", p.ds.name},
                       {"graphs", p.ds.size()},
                       {"classes", p.ds.num_classes},
                       {"graphs_with_masks", masks},
                       {"content_hash", hex64(p.ds.content_hash())}}
                      .dump(2));
  });
}

xgkn_status xgkn_train(const xgkn_config* cfg, char** out_json) {
  return guarded([&] {
    need(cfg, "config");
    const auto runs = xgkn::pipeline::cmd_train(cfg->cfg, current_log());
    json arr = json::array();
    for (const auto& r : runs)
      arr.push_back({{"seed", r.seed},
                     {"train_accuracy", r.train_accuracy},
                     {"test_accuracy", r.test_accuracy},
                     {"epochs_run", r.history.epochs.size()},
                     {"early_stopped", r.history.early_stopped}});
    put(out_json, json{{"config_hash", cfg->cfg.hash()}, {"seeds", std::move(arr)}}.dump(2));
  });
}

xgkn_status xgkn_explain(const xgkn_config* cfg, char** out_json) {
  return guarded([&] {
    need(cfg, "config");
    const auto runs = xgkn::pipeline::cmd_explain(cfg->cfg, current_log());
    json arr = json::array();
    auto opt = [](const std::optional<double>& v) -> json { return v ? json(*v) : json(nullptr); };
    for (const auto& r : runs)
      arr.push_back({{"seed", r.seed},
                     {"criterion", r.criterion},
                     {"p", r.choice.p},
                     {"score", r.choice.score},
                     {"score_below", opt(r.score_below)},
                     {"score_above", opt(r.score_above)},
                     {"seconds_per_graph", r.seconds_per_graph}});
    put(out_json, json{{"config_hash", cfg->cfg.hash()}, {"seeds", std::move(arr)}}.dump(2));
  });
}

xgkn_status xgkn_evaluate(const xgkn_config* cfg, const char* compare_with, char** out_json) {
  return guarded([&] {
    need(cfg, "config");
    std::optional<std::filesystem::path> other;
    if (compare_with && *compare_with) other = compare_with;
    const auto report = xgkn::pipeline::cmd_evaluate(cfg->cfg, other, current_log());
    put(out_json, xgkn::metrics::report_to_json(report).dump(2));
  });
}

xgkn_status xgkn_report_render(const char* report_path, const char* format, char** out_text) {
  return guarded([&] {
    need(report_path, "report path");
    need(format, "format");
    need(out_text, "out");
    json j;
    try {
      j = json::parse(read_file(report_path));
    } catch (const json::exception& e) {
      xgkn::fail(xgkn::ErrorCode::kFormat, std::string(report_path) + ": " + e.what());
    }
    const auto r = xgkn::metrics::report_from_json(j);
    const std::string f = format;
    if (f == "json")
      put(out_text, xgkn::metrics::report_to_json(r).dump(2) + "\n");
    else if (f == "csv")
      put(out_text, xgkn::metrics::report_csv(r));
    else if (f == "radar")
      put(out_text, xgkn::metrics::radar_csv(r));
    else if (f == "comparisons")
      put(out_text, xgkn::metrics::comparisons_csv(r));
    else
      xgkn::fail(xgkn::ErrorCode::kInvalidArgument, "unknown report format '" + f + "'");
  });
}

// ---- datasets ------------------------------------------------------------------

xgkn_status xgkn_dataset_generate(const char* kind, size_t n_graphs, uint64_t seed, xgkn_dataset** out) {
  return guarded([&] {
    need(kind, "kind");
    need(out, "out");
    xgkn::pipeline::DatasetSpec spec;
    spec.source = kind;
    xgkn::require(spec.source == "ba2motifs" || spec.source == "bamultishapes", xgkn::ErrorCode::kInvalidArgument,
                  "unknown generator '" + spec.source + "'");
    spec.n_graphs = n_graphs;
    spec.seed = seed;
    *out = new xgkn_dataset{xgkn::pipeline::build_dataset(spec)};
  });
}

xgkn_status xgkn_dataset_load_tu(const char* directory, const char* name, xgkn_dataset** out) {
  return guarded([&] {
    need(directory, "directory");
    need(name, "name");
    need(out, "out");
    *out = new xgkn_dataset{xgkn::data::parse_tu_dataset(directory, name)};
  });
}

size_t xgkn_dataset_size(const xgkn_dataset* ds) { return ds ? ds->ds.size() : 0; }

xgkn_status xgkn_dataset_graph_info(const xgkn_dataset* ds, size_t graph, size_t* out_nodes, size_t* out_edges,
                                    int* out_label) {
  return guarded([&] {
    need(ds, "dataset");
    xgkn::require(graph < ds->ds.size(), xgkn::ErrorCode::kInvalidArgument, "graph index out of range");
    const auto& g = ds->ds.graphs[graph];
    if (out_nodes) *out_nodes = g.size();
    if (out_edges) *out_edges = g.edge_count();
    if (out_label) *out_label = g.label().value_or(-1);
  });
}

void xgkn_dataset_free(xgkn_dataset* ds) { delete ds; }

// ---- models ----------------------------------------------------------------------

xgkn_status xgkn_model_load(const char* checkpoint_path, xgkn_model** out) {
  return guarded([&] {
    need(checkpoint_path, "path");
    need(out, "out");
    *out = new xgkn_model{xgkn::model::load_checkpoint(checkpoint_path)};
  });
}

size_t xgkn_model_num_concepts(const xgkn_model* model) { return model ? model->model.config().num_filters : 0; }

xgkn_status xgkn_model_predict(const xgkn_model* model, const xgkn_dataset* ds, size_t graph, int* out_class) {
  return guarded([&] {
    need(model, "model");
    need(ds, "dataset");
    need(out_class, "out");
    xgkn::require(graph < ds->ds.size(), xgkn::ErrorCode::kInvalidArgument, "graph index out of range");
    *out_class = model->model.predict(ds->ds.graphs[graph]);
  });
}

xgkn_status xgkn_model_baseline(const xgkn_model* model, const xgkn_dataset* ds, const size_t* ids, size_t n_ids,
                                double* out, size_t out_len) {
  return guarded([&] {
    need(model, "model");
    need(ds, "dataset");
    need(out, "out");
    const std::size_t m = model->model.config().num_filters;
    xgkn::require(out_len == m, xgkn::ErrorCode::kShape, "baseline buffer must hold one value per concept");
    std::vector<std::size_t> list;
    if (n_ids == 0) {
      for (std::size_t i = 0; i < ds->ds.size(); ++i) list.push_back(i);
    } else {
      need(ids, "ids");
      list.assign(ids, ids + n_ids);
      for (std::size_t id : list)
        xgkn::require(id < ds->ds.size(), xgkn::ErrorCode::kInvalidArgument, "graph index out of range");
    }
    const auto b = xgkn::explain::baseline_z(model->model, ds->ds, list);
    for (std::size_t i = 0; i < m; ++i) out[i] = b[i];
  });
}

xgkn_status xgkn_model_explain(const xgkn_model* model, const xgkn_dataset* ds, size_t graph, const double* baseline,
                               size_t baseline_len, double p, char** out_json) {
  return guarded([&] {
    need(model, "model");
    need(ds, "dataset");
    need(baseline, "baseline");
    need(out_json, "out");
    xgkn::require(graph < ds->ds.size(), xgkn::ErrorCode::kInvalidArgument, "graph index out of range");
    const auto& g = ds->ds.graphs[graph];
    const auto imp =
        xgkn::explain::node_importance(model->model, g, std::span<const double>(baseline, baseline_len));
    const auto e = xgkn::explain::threshold_explanation(g, imp.importance, p, graph);
    put(out_json, xgkn::explain::explanation_jsonl(e));
  });
}

void xgkn_model_free(xgkn_model* model) { delete model; }

}  // extern "C"
