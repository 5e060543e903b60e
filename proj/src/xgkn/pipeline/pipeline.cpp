#include "xgkn/pipeline/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "xgkn/error.hpp"

namespace xgkn::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kModelStream = 0x6d6f'6465'6c00ULL;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + p.string());
  out << text;
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + p.string());
}

json read_json(const fs::path& p) {
  const std::string text = read_text(p);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  require(j.is_object(), ErrorCode::kFormat, std::string(where) + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    require(ok, ErrorCode::kFormat, std::string(where) + ": unknown key '" + key + "'");
  }
}

void check_hash(const json& j, const std::string& expected, const fs::path& artifact) {
  const std::string found = j.value("config_hash", std::string());
  require(found == expected, ErrorCode::kAlignment,
          artifact.string() + " was produced by config " + (found.empty() ? "<none>" : found) + ", current config is " +
              expected);
}

void emit(const Log& log, const std::string& msg) {
  if (log) log(msg);
}

std::string fmt(double v, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

json graph_json(const Graph& g) {
  json edges = json::array();
  for (const auto& [a, b] : g.edges()) edges.push_back({a, b});
  const auto& f = g.features();
  return {{"nodes", g.size()},
          {"edges", std::move(edges)},
          {"features", {{"rows", f.rows()},
                        {"cols", f.cols()},
                        {"values", std::vector<double>(f.values().begin(), f.values().end())}}}};
}

Graph graph_from(const json& j) {
  const auto n = j.at("nodes").get<std::size_t>();
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
  const auto& f = j.at("features");
  num::Matrix feats(f.at("rows").get<std::size_t>(), f.at("cols").get<std::size_t>(),
                    f.at("values").get<std::vector<double>>());
  return Graph::from_edges(n, edges, std::move(feats));
}

metrics::ThresholdCriterion resolve_criterion(const std::string& name, const data::Dataset& ds) {
  if (name == "a1") return metrics::ThresholdCriterion::kA1;
  if (name == "i1+i2") return metrics::ThresholdCriterion::kSufficiencyPlusNecessity;
  return ds.has_instance_masks() ? metrics::ThresholdCriterion::kA1
                                 : metrics::ThresholdCriterion::kSufficiencyPlusNecessity;
}

const char* criterion_name(metrics::ThresholdCriterion c) {
  return c == metrics::ThresholdCriterion::kA1 ? "a1" : "i1+i2";
}

// Grid points such as 0.3 - 0.1 land on 0.19999999999999998 otherwise.
double snap(double p) { return std::round(p * 1e9) / 1e9; }

model::ModelConfig model_config_for(const RunConfig& cfg, const data::Dataset& ds) {
  model::ModelConfig mc = cfg.model;
  mc.input_dim = ds.feature_dim();
  mc.num_classes = static_cast<std::size_t>(ds.num_classes);
  return mc;
}

metrics::AimConfig aim_for(const RunConfig& cfg) {
  metrics::AimConfig a = cfg.aim;
  a.jobs = cfg.jobs;
  return a;
}

model::XgknModel load_seed_model(const RunConfig& cfg, std::uint64_t seed) {
  const fs::path p = seed_dir(cfg, seed) / "checkpoint.json";
  const json j = read_json(p);
  check_hash(j, cfg.hash(), p);
  return model::model_from_json(j.dump());
}

std::vector<explain::Explanation> load_explanations(const RunConfig& cfg, std::uint64_t seed,
                                                    const data::Dataset& ds) {
  const fs::path p = seed_dir(cfg, seed) / "explanations.jsonl";
  const std::string text = read_text(p);
  const std::string first = text.substr(0, text.find('\n'));
  json meta;
  try {
    meta = json::parse(first).at("meta");
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, p.string() + ": missing metadata line: " + e.what());
  }
  check_hash(meta, cfg.hash(), p);
  const auto records = explain::parse_explanations_jsonl(text);
  require(records.size() == ds.size(), ErrorCode::kAlignment,
          p.string() + " holds " + std::to_string(records.size()) + " records for " + std::to_string(ds.size()) +
              " graphs");
  std::vector<explain::Explanation> out(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    require(r.graph_id == i, ErrorCode::kAlignment, p.string() + ": record " + std::to_string(i) + " is graph " +
                                                        std::to_string(r.graph_id));
    out[i].graph_id = r.graph_id;
    out[i].importance = r.importance;
    out[i].threshold = r.threshold;
    out[i].selected = NodeSet(r.selected, r.graph_id);
  }
  return out;
}

std::vector<explain::Explanation> pick(const std::vector<explain::Explanation>& all,
                                       const std::vector<std::size_t>& ids) {
  std::vector<explain::Explanation> out;
  out.reserve(ids.size());
  for (std::size_t id : ids) out.push_back(all.at(id));
  return out;
}

template <typename F>
std::optional<metrics::MetricValue> optional_metric(F&& f, std::initializer_list<ErrorCode> unavailable,
                                                    std::vector<std::string>& notes, const std::string& what) {
  try {
    return f();
  } catch (const Error& e) {
    if (std::find(unavailable.begin(), unavailable.end(), e.code()) == unavailable.end()) throw;
    notes.push_back(what + " unavailable: " + e.what());
    return std::nullopt;
  }
}

}  // namespace

// ---- config ---------------------------------------------------------------------

void RunConfig::validate() const {
  const auto& d = dataset;
  require(d.source == "ba2motifs" || d.source == "bamultishapes" || d.source == "tu", ErrorCode::kInvalidArgument,
          "dataset.source must be ba2motifs, bamultishapes or tu");
  if (d.source == "tu") {
    require(!d.path.empty() && !d.tu_name.empty(), ErrorCode::kInvalidArgument,
            "dataset: source tu needs path and tu_name");
  } else {
    require(d.n_graphs >= 2 && d.n_graphs % 2 == 0, ErrorCode::kInvalidArgument,
            "dataset.n_graphs must be positive and even");
  }
  (void)data::parse_feature_policy(d.feature_policy);
  require(d.test_fraction > 0.0 && d.test_fraction < 1.0, ErrorCode::kInvalidArgument,
          "dataset.test_fraction must lie in (0, 1)");
  model.validate();
  train.validate();
  aim.validate();
  require(!explain.grid.empty(), ErrorCode::kInvalidArgument, "explain.grid must not be empty");
  for (double p : explain.grid)
    require(p >= 0.0 && p <= 1.0, ErrorCode::kInvalidArgument, "explain.grid values must lie in [0, 1]");
  require(explain.criterion == "auto" || explain.criterion == "a1" || explain.criterion == "i1+i2",
          ErrorCode::kInvalidArgument, "explain.criterion must be auto, a1 or i1+i2");
  require(explain.sensitivity > 0.0 && explain.sensitivity < 1.0, ErrorCode::kInvalidArgument,
          "explain.sensitivity must lie in (0, 1)");
  require(!seeds.empty(), ErrorCode::kInvalidArgument, "seeds must not be empty");
  require(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == seeds.size(), ErrorCode::kInvalidArgument,
          "seeds must be distinct");
  require(jobs >= 1, ErrorCode::kInvalidArgument, "jobs must be >= 1");
}

json RunConfig::to_json() const {
  const auto& d = dataset;
  const auto& m = model;
  const auto& t = train;
  json aim_json = aim.to_json();
  return {{"dataset",
           {{"source", d.source},
            {"n_graphs", d.n_graphs},
            {"seed", d.seed},
            {"path", d.path.string()},
            {"tu_name", d.tu_name},
            {"gt_sidecar", d.gt_sidecar.string()},
            {"feature_policy", d.feature_policy},
            {"degree_cap", d.degree_cap},
            {"test_fraction", d.test_fraction},
            {"split_seed", d.split_seed}}},
          {"model",
           {{"num_filters", m.num_filters},
            {"filter_size", m.filter_size},
            {"d_embed", m.d_embed},
            {"k", m.k},
            {"max_size", m.max_size},
            {"agg", model::agg_mode_name(m.agg)},
            {"norm", model::norm_scope_name(m.norm)},
            {"hidden", m.hidden},
            {"eps", m.eps}}},
          {"train",
           {{"epochs", t.epochs},
            {"lr", t.lr},
            {"weight_decay", t.weight_decay},
            {"batch_size", t.batch_size},
            {"patience", t.patience}}},
          {"aim", std::move(aim_json)},
          {"explain", {{"grid", explain.grid}, {"criterion", explain.criterion}, {"sensitivity", explain.sensitivity}}},
          {"seeds", seeds},
          {"output", output.string()},
          {"jobs", jobs}};
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  try {
    check_keys(j, "config", {"dataset", "model", "train", "aim", "explain", "seeds", "output", "jobs"});
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      check_keys(d, "dataset",
                 {"source", "n_graphs", "seed", "path", "tu_name", "gt_sidecar", "feature_policy", "degree_cap",
                  "test_fraction", "split_seed"});
      auto& s = c.dataset;
      s.source = d.value("source", s.source);
      s.n_graphs = d.value("n_graphs", s.n_graphs);
      s.seed = d.value("seed", s.seed);
      s.path = d.value("path", s.path.string());
      s.tu_name = d.value("tu_name", s.tu_name);
      s.gt_sidecar = d.value("gt_sidecar", s.gt_sidecar.string());
      s.feature_policy = d.value("feature_policy", s.feature_policy);
      s.degree_cap = d.value("degree_cap", s.degree_cap);
      s.test_fraction = d.value("test_fraction", s.test_fraction);
      s.split_seed = d.value("split_seed", s.split_seed);
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      check_keys(m, "model", {"num_filters", "filter_size", "d_embed", "k", "max_size", "agg", "norm", "hidden", "eps"});
      auto& s = c.model;
      s.num_filters = m.value("num_filters", s.num_filters);
      s.filter_size = m.value("filter_size", s.filter_size);
      s.d_embed = m.value("d_embed", s.d_embed);
      s.k = m.value("k", s.k);
      s.max_size = m.value("max_size", s.max_size);
      if (m.contains("agg")) s.agg = model::parse_agg_mode(m["agg"].get<std::string>());
      if (m.contains("norm")) s.norm = model::parse_norm_scope(m["norm"].get<std::string>());
      s.hidden = m.value("hidden", s.hidden);
      s.eps = m.value("eps", s.eps);
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      check_keys(t, "train", {"epochs", "lr", "weight_decay", "batch_size", "patience"});
      auto& s = c.train;
      s.epochs = t.value("epochs", s.epochs);
      s.lr = t.value("lr", s.lr);
      s.weight_decay = t.value("weight_decay", s.weight_decay);
      s.batch_size = t.value("batch_size", s.batch_size);
      s.patience = t.value("patience", s.patience);
    }
    if (j.contains("aim")) {
      check_keys(j["aim"], "aim",
                 {"samples_per_graph", "max_retries", "inclusion", "delta_features", "delta_remove", "delta_add_scale",
                  "delta_m1", "delta_m2", "edge_threshold", "alpha", "a1_empty_as_zero", "pool_train_only"});
      c.aim = metrics::AimConfig::from_json(j["aim"]);
    }
    if (j.contains("explain")) {
      const auto& e = j["explain"];
      check_keys(e, "explain", {"grid", "criterion", "sensitivity"});
      c.explain.grid = e.value("grid", c.explain.grid);
      c.explain.criterion = e.value("criterion", c.explain.criterion);
      c.explain.sensitivity = e.value("sensitivity", c.explain.sensitivity);
    }
    c.seeds = j.value("seeds", c.seeds);
    c.output = j.value("output", c.output.string());
    c.jobs = j.value("jobs", c.jobs);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("config: ") + e.what());
  }
  return c;
}

std::string RunConfig::hash() const {
  json j = to_json();
  j.erase("output");
  j.erase("jobs");
  return hex64(fnv1a(j.dump()));
}

RunConfig load_run_config(const fs::path& path) { return RunConfig::from_json(read_json(path)); }

fs::path seed_dir(const RunConfig& cfg, std::uint64_t seed) { return cfg.output / ("seed_" + std::to_string(seed)); }

// ---- prepare ----------------------------------------------------------------------

data::Dataset build_dataset(const DatasetSpec& spec) {
  data::Dataset ds;
  if (spec.source == "ba2motifs") {
    Rng rng(spec.seed);
    ds = data::generate_ba2motifs(spec.n_graphs, rng);
  } else if (spec.source == "bamultishapes") {
    Rng rng(spec.seed);
    ds = data::generate_bamultishapes(spec.n_graphs, rng);
  } else {
    require(fs::is_directory(spec.path), ErrorCode::kIo, "dataset directory " + spec.path.string() + " not found");
    ds = data::parse_tu_dataset(spec.path, spec.tu_name);
  }
  if (!spec.gt_sidecar.empty()) ds = data::load_ground_truth_masks(std::move(ds), spec.gt_sidecar);
  const auto policy = data::parse_feature_policy(spec.feature_policy);
  if (policy != data::FeaturePolicy::kOneHotLabel) ds = data::apply_feature_policy(std::move(ds), policy, spec.degree_cap);
  ds.validate();
  return ds;
}

Prepared cmd_prepare(const RunConfig& cfg, const Log& log) {
  cfg.validate();
  Prepared p;
  p.config_hash = cfg.hash();
  p.ds = build_dataset(cfg.dataset);
  p.splits = data::stratified_split(p.ds, cfg.dataset.test_fraction, cfg.seeds.size(), cfg.dataset.split_seed);

  const fs::path dir = cfg.output / "dataset";
  fs::create_directories(dir);
  data::write_tu_dataset(p.ds, dir);
  if (!p.ds.gt_instance_masks.empty()) data::write_ground_truth_masks(p.ds, dir / "masks.txt");
  json motifs = json::array();
  for (const auto& g : p.ds.gt_motifs) motifs.push_back(graph_json(g));
  write_json(dir / "motifs.json", {{"config_hash", p.config_hash}, {"motifs", std::move(motifs)}});

  json splits = json::array();
  for (std::size_t i = 0; i < p.splits.size(); ++i)
    splits.push_back({{"seed", cfg.seeds[i]}, {"fold", p.splits[i].fold}, {"train", p.splits[i].train},
                      {"test", p.splits[i].test}});
  write_json(cfg.output / "manifest.json",
             {{"format", "xgkn-manifest"},
              {"version", 1},
              {"config_hash", p.config_hash},
              {"config", cfg.to_json()},
              {"dataset",
               {{"name", p.ds.name},
                {"content_hash", hex64(p.ds.content_hash())},
                {"graphs", p.ds.size()},
                {"classes", p.ds.num_classes},
                {"feature_dim", p.ds.feature_dim()},
                {"feature_policy", data::feature_policy_name(p.ds.feature_policy)},
                {"masks", !p.ds.gt_instance_masks.empty()}}},
              {"splits", std::move(splits)}});

  // Parse the artifacts back so later stages see exactly what was written.
  Prepared back = load_prepared(cfg);
  emit(log, "prepared " + p.ds.name + ": " + std::to_string(p.ds.size()) + " graphs, content hash " +
                hex64(p.ds.content_hash()));
  return back;
}

Prepared load_prepared(const RunConfig& cfg) {
  const fs::path mpath = cfg.output / "manifest.json";
  require(fs::exists(mpath), ErrorCode::kIo, mpath.string() + " not found; run prepare first");
  const json m = read_json(mpath);
  check_hash(m, cfg.hash(), mpath);
  Prepared p;
  p.config_hash = cfg.hash();
  try {
    const auto& d = m.at("dataset");
    const fs::path dir = cfg.output / "dataset";
    p.ds = data::parse_tu_dataset(dir, d.at("name").get<std::string>());
    if (d.at("masks").get<bool>()) p.ds = data::load_ground_truth_masks(std::move(p.ds), dir / "masks.txt");
    const json mj = read_json(dir / "motifs.json");
    check_hash(mj, p.config_hash, dir / "motifs.json");
    for (const auto& g : mj.at("motifs")) p.ds.gt_motifs.push_back(graph_from(g));
    p.ds.feature_policy = data::parse_feature_policy(d.at("feature_policy").get<std::string>());
    p.ds.validate();
    require(hex64(p.ds.content_hash()) == d.at("content_hash").get<std::string>(), ErrorCode::kFormat,
            "dataset in " + dir.string() + " does not match the manifest content hash");
    for (const auto& s : m.at("splits")) {
      data::Split sp;
      sp.fold = s.at("fold").get<std::size_t>();
      sp.seed = cfg.dataset.split_seed;
      sp.train = s.at("train").get<std::vector<std::size_t>>();
      sp.test = s.at("test").get<std::vector<std::size_t>>();
      p.splits.push_back(std::move(sp));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, mpath.string() + ": " + e.what());
  }
  require(p.splits.size() == cfg.seeds.size(), ErrorCode::kAlignment, "manifest splits do not match the seed list");
  return p;
}

// ---- train ------------------------------------------------------------------------

std::vector<SeedTraining> cmd_train(const RunConfig& cfg, const Log& log) {
  cfg.validate();
  const Prepared p = load_prepared(cfg);
  std::vector<SeedTraining> out;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    const std::uint64_t seed = cfg.seeds[i];
    const data::Split& split = p.splits[i];
    const fs::path dir = seed_dir(cfg, seed);
    fs::create_directories(dir);
    Rng init(seed, kModelStream);
    model::XgknModel m(model_config_for(cfg, p.ds), init);
    model::TrainConfig tc = cfg.train;
    tc.seed = seed;
    tc.jobs = cfg.jobs;
    std::string history = "# config_hash=" + p.config_hash + "\nepoch,loss,accuracy\n";
    tc.on_epoch = [&](const model::EpochRecord& r) {
      history += std::to_string(r.epoch) + "," + fmt(r.loss, "%.17g") + "," + fmt(r.accuracy, "%.17g") + "\n";
      if (log && (r.epoch + 1) % 50 == 0)
        log("seed " + std::to_string(seed) + " epoch " + std::to_string(r.epoch + 1) + " loss " + fmt(r.loss, "%.4f") +
            " acc " + fmt(r.accuracy, "%.3f"));
    };
    SeedTraining st;
    st.seed = seed;
    try {
      st.history = model::train(m, p.ds, split, tc);
    } catch (const Error&) {
      write_text(dir / "history.csv", history);
      throw;
    }
    write_text(dir / "history.csv", history);
    st.train_accuracy = model::accuracy(m, p.ds, split.train, cfg.jobs);
    st.test_accuracy = model::accuracy(m, p.ds, split.test, cfg.jobs);
    json ck = json::parse(model::checkpoint_json(m));
    ck["config_hash"] = p.config_hash;
    write_text(dir / "checkpoint.json", ck.dump(1) + "\n");
    write_json(dir / "train.json", {{"config_hash", p.config_hash},
                                    {"seed", seed},
                                    {"fold", split.fold},
                                    {"epochs_run", st.history.epochs.size()},
                                    {"best_epoch", st.history.best_epoch},
                                    {"best_loss", st.history.best_loss},
                                    {"early_stopped", st.history.early_stopped},
                                    {"train_accuracy", st.train_accuracy},
                                    {"test_accuracy", st.test_accuracy}});
    emit(log, "seed " + std::to_string(seed) + ": train accuracy " + fmt(st.train_accuracy, "%.3f") +
                  ", test accuracy " + fmt(st.test_accuracy, "%.3f") + " after " +
                  std::to_string(st.history.epochs.size()) + " epochs");
    out.push_back(std::move(st));
  }
  return out;
}

// ---- explain ----------------------------------------------------------------------

std::vector<SeedExplanation> cmd_explain(const RunConfig& cfg, const Log& log) {
  cfg.validate();
  const Prepared p = load_prepared(cfg);
  const auto crit = resolve_criterion(cfg.explain.criterion, p.ds);
  const metrics::AimConfig aim = aim_for(cfg);
  std::vector<std::size_t> all(p.ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<SeedExplanation> out;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    const std::uint64_t seed = cfg.seeds[i];
    const data::Split& split = p.splits[i];
    const fs::path dir = seed_dir(cfg, seed);
    const model::XgknModel m = load_seed_model(cfg, seed);
    const auto baseline = explain::baseline_z(m, p.ds, split.train, cfg.jobs);

    SeedExplanation se;
    se.seed = seed;
    se.criterion = criterion_name(crit);
    se.choice = metrics::select_threshold(m, p.ds, split.test, baseline, crit, cfg.explain.grid, aim, seed);
    auto score_at = [&](double q) -> std::optional<double> {
      q = snap(q);
      if (q < 0.0 || q > 1.0) return std::nullopt;
      const double grid[] = {q};
      return metrics::select_threshold(m, p.ds, split.test, baseline, crit, grid, aim, seed).score;
    };
    se.score_below = score_at(se.choice.p - cfg.explain.sensitivity);
    se.score_above = score_at(se.choice.p + cfg.explain.sensitivity);

    metrics::ExplainContext ctx{&m, baseline, se.choice.p};
    const auto t0 = std::chrono::steady_clock::now();
    const auto expl = metrics::explain_all(ctx, p.ds, all, cfg.jobs);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    se.seconds_per_graph = secs * static_cast<double>(cfg.jobs) / static_cast<double>(all.size());

    std::string text = json{{"meta", {{"config_hash", p.config_hash}, {"seed", seed}, {"threshold", se.choice.p}}}}.dump();
    text += "\n";
    for (const auto& e : expl) text += explain::explanation_jsonl(e) + "\n";
    write_text(dir / "explanations.jsonl", text);

    json scores = json::array();
    for (const auto& [q, s] : se.choice.scores) scores.push_back({{"p", q}, {"score", s}});
    auto side = [&](double q, const std::optional<double>& s) -> json {
      if (!s) return nullptr;
      return {{"p", snap(q)}, {"score", *s}};
    };
    write_json(dir / "threshold.json",
               {{"config_hash", p.config_hash},
                {"seed", seed},
                {"criterion", se.criterion},
                {"p", se.choice.p},
                {"score", se.choice.score},
                {"grid", std::move(scores)},
                {"sensitivity",
                 {{"delta", cfg.explain.sensitivity},
                  {"below", side(se.choice.p - cfg.explain.sensitivity, se.score_below)},
                  {"above", side(se.choice.p + cfg.explain.sensitivity, se.score_above)}}}});
    write_json(dir / "timing.json", {{"config_hash", p.config_hash},
                                     {"graphs", all.size()},
                                     {"jobs", cfg.jobs},
                                     {"seconds_total", secs},
                                     {"seconds_per_graph", se.seconds_per_graph}});
    emit(log, "seed " + std::to_string(seed) + ": threshold p=" + fmt(se.choice.p, "%.2f") + " (" + se.criterion +
                  " " + fmt(se.choice.score, "%.4f") + "), " + fmt(se.seconds_per_graph * 1e3, "%.2f") +
                  " ms per graph");
    out.push_back(std::move(se));
  }
  return out;
}

// ---- evaluate ---------------------------------------------------------------------

metrics::AimReport cmd_evaluate(const RunConfig& cfg, const std::optional<fs::path>& compare_with, const Log& log) {
  cfg.validate();
  const Prepared p = load_prepared(cfg);
  const auto& ds = p.ds;
  const metrics::AimConfig aim = aim_for(cfg);
  const std::size_t S = cfg.seeds.size();

  std::vector<std::vector<explain::Explanation>> all_expl(S);
  std::vector<double> thresholds(S);
  for (std::size_t i = 0; i < S; ++i) {
    const fs::path tp = seed_dir(cfg, cfg.seeds[i]) / "threshold.json";
    const json t = read_json(tp);
    check_hash(t, p.config_hash, tp);
    thresholds[i] = t.at("p").get<double>();
    all_expl[i] = load_explanations(cfg, cfg.seeds[i], ds);
  }

  std::vector<std::string> notes;
  std::vector<metrics::RunMetrics> runs;
  for (std::size_t i = 0; i < S; ++i) {
    const std::uint64_t seed = cfg.seeds[i];
    const data::Split& split = p.splits[i];
    const model::XgknModel m = load_seed_model(cfg, seed);
    const auto test_expl = pick(all_expl[i], split.test);
    const metrics::ExplainContext ctx = metrics::make_context(m, ds, split.train, thresholds[i], cfg.jobs);
    const num::Matrix pool = aim.pool_train_only ? ds.feature_pool(split.train) : ds.feature_pool();
    const std::string tag = "seed " + std::to_string(seed) + ": ";

    metrics::RunMetrics r;
    r.seed = seed;
    r.threshold = thresholds[i];
    r.accuracy = model::accuracy(m, ds, split.test, cfg.jobs);
    auto& v = r.values;
    v["A1"] = optional_metric([&] { return metrics::metric_a1(test_expl, ds, aim.a1_empty_as_zero); },
                              {ErrorCode::kMissingGroundTruth}, notes, tag + "A1");
    v["A2"] = optional_metric([&] { return metrics::metric_a2(m, ds, aim); },
                              {ErrorCode::kMissingGroundTruth, ErrorCode::kCapacity}, notes, tag + "A2");
    v["I1"] = metrics::metric_sufficiency_necessity(ctx, ds, test_expl, metrics::SamplingMode::kSufficiency, aim, seed);
    v["I2"] = metrics::metric_sufficiency_necessity(ctx, ds, test_expl, metrics::SamplingMode::kNecessity, aim, seed);
    v["I3"] = metrics::metric_robustness(ctx, ds, test_expl, metrics::RobustnessMode::kNodes, pool, aim, seed);
    v["I4"] = optional_metric(
        [&] { return metrics::metric_robustness(ctx, ds, test_expl, metrics::RobustnessMode::kEdges, pool, aim, seed); },
        {ErrorCode::kInvalidArgument}, notes, tag + "I4");
    if (S >= 2) {
      metrics::MetricValue c;
      double s = 0.0;
      for (std::size_t j = 0; j < S; ++j) {
        if (j == i) continue;
        const auto mv = metrics::metric_consistency(all_expl[i], all_expl[j]);
        s += mv.value;
        c.evaluated += mv.evaluated;
      }
      c.value = metrics::checked_unit(s / static_cast<double>(S - 1), "I5");
      v["I5"] = c;
    } else {
      v["I5"] = std::nullopt;
    }
    v["M1"] = metrics::metric_correctness(ctx, ds, test_expl, split.train, model::PerturbMode::kFeatures, pool, aim, seed);
    v["M2"] = metrics::metric_correctness(ctx, ds, test_expl, split.train, model::PerturbMode::kEdges, pool, aim, seed);
    v["M3"] = optional_metric([&] { return metrics::metric_redundancy(m, ds, split.test, cfg.jobs); },
                              {ErrorCode::kUndefinedMetric}, notes, tag + "M3");
    emit(log, tag + "metrics done, test accuracy " + fmt(r.accuracy, "%.3f"));
    runs.push_back(std::move(r));
  }
  if (S < 2) notes.push_back("I5 unavailable: needs at least two seeds");

  json snapshot = cfg.to_json();
  snapshot.erase("output");
  snapshot.erase("jobs");
  snapshot["config_hash"] = p.config_hash;
  snapshot["dataset_content_hash"] = hex64(ds.content_hash());
  metrics::AimReport report = metrics::aim_report(ds.name, runs, snapshot);
  report.notes.push_back("Metrics use each seed's test split; I5 uses every graph of the dataset.");
  report.notes.push_back(std::string("Threshold criterion: ") + criterion_name(resolve_criterion(cfg.explain.criterion, ds)) +
                         " on the test split.");
  for (auto& n : notes) report.notes.push_back(std::move(n));

  if (compare_with) {
    fs::path other = *compare_with;
    if (fs::is_directory(other)) other /= "report.json";
    const metrics::AimReport theirs = metrics::report_from_json(read_json(other));
    report.comparisons = metrics::compare(report, theirs, cfg.aim.alpha);
    write_text(cfg.output / "comparisons.csv", "# config_hash=" + p.config_hash + "\n" + metrics::comparisons_csv(report));
  }
  write_json(cfg.output / "report.json", metrics::report_to_json(report));
  write_text(cfg.output / "report.csv", "# config_hash=" + p.config_hash + "\n" + metrics::report_csv(report));
  write_text(cfg.output / "radar.csv", "# config_hash=" + p.config_hash + "\n" + metrics::radar_csv(report));
  emit(log, "report written to " + (cfg.output / "report.json").string());
  return report;
}

metrics::AimReport run_all(const RunConfig& cfg, const Log& log) {
  cmd_prepare(cfg, log);
  cmd_train(cfg, log);
  cmd_explain(cfg, log);
  return cmd_evaluate(cfg, std::nullopt, log);
}

}  // namespace xgkn::pipeline
