#include "xgkn/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xgkn/error.hpp"
#include "xgkn/parallel.hpp"

namespace xgkn::metrics {

namespace {

// Rng stream tags, one per metric, so metrics never share draws.
enum : std::uint64_t {
  kStreamI1 = 0x4931,
  kStreamI2 = 0x4932,
  kStreamI3 = 0x4933,
  kStreamI4 = 0x4934,
  kStreamM1 = 0x4d31,
  kStreamM2 = 0x4d32,
};

bool in_open_unit(double p) { return p > 0.0 && p < 1.0; }

MetricValue finish(const std::vector<std::optional<double>>& per_graph, const char* name) {
  MetricValue mv;
  double s = 0.0;
  for (const auto& v : per_graph) {
    if (v) {
      s += *v;
      ++mv.evaluated;
    } else {
      ++mv.skipped;
    }
  }
  mv.value = mv.evaluated ? checked_unit(s / static_cast<double>(mv.evaluated), name) : 0.0;
  mv.valid = mv.evaluated > 0 && 2 * mv.skipped <= per_graph.size();
  return mv;
}

}  // namespace

void AimConfig::validate() const {
  require(samples_per_graph >= 1, ErrorCode::kInvalidArgument, "aim: samples_per_graph must be >= 1");
  require(in_open_unit(inclusion) && in_open_unit(delta_features) && in_open_unit(delta_remove) &&
              in_open_unit(delta_m1) && in_open_unit(delta_m2) && in_open_unit(alpha) && in_open_unit(edge_threshold),
          ErrorCode::kInvalidArgument, "aim: probabilities must lie in (0, 1)");
  require(delta_add_scale > 0.0, ErrorCode::kInvalidArgument, "aim: delta_add_scale must be positive");
}

nlohmann::json AimConfig::to_json() const {
  return {{"samples_per_graph", samples_per_graph},
          {"max_retries", max_retries},
          {"inclusion", inclusion},
          {"delta_features", delta_features},
          {"delta_remove", delta_remove},
          {"delta_add_scale", delta_add_scale},
          {"delta_m1", delta_m1},
          {"delta_m2", delta_m2},
          {"edge_threshold", edge_threshold},
          {"alpha", alpha},
          {"a1_empty_as_zero", a1_empty_as_zero},
          {"pool_train_only", pool_train_only}};
}

AimConfig AimConfig::from_json(const nlohmann::json& j) {
  AimConfig c;
  c.samples_per_graph = j.value("samples_per_graph", c.samples_per_graph);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.inclusion = j.value("inclusion", c.inclusion);
  c.delta_features = j.value("delta_features", c.delta_features);
  c.delta_remove = j.value("delta_remove", c.delta_remove);
  c.delta_add_scale = j.value("delta_add_scale", c.delta_add_scale);
  c.delta_m1 = j.value("delta_m1", c.delta_m1);
  c.delta_m2 = j.value("delta_m2", c.delta_m2);
  c.edge_threshold = j.value("edge_threshold", c.edge_threshold);
  c.alpha = j.value("alpha", c.alpha);
  c.a1_empty_as_zero = j.value("a1_empty_as_zero", c.a1_empty_as_zero);
  c.pool_train_only = j.value("pool_train_only", c.pool_train_only);
  return c;
}

double checked_unit(double value, const char* metric) {
  constexpr double kSlack = 1e-9;
  require(std::isfinite(value) && value >= -kSlack && value <= 1.0 + kSlack, ErrorCode::kNumeric,
          std::string(metric) + ": value " + std::to_string(value) + " outside [0, 1]");
  return std::clamp(value, 0.0, 1.0);
}

explain::Explanation ExplainContext::explain(const Graph& g, std::uint64_t graph_id) const {
  const auto imp = explain::node_importance(*model, g, baseline);
  return explain::threshold_explanation(g, imp.importance, threshold, graph_id);
}

ExplainContext make_context(const model::XgknModel& model, const data::Dataset& ds,
                            const std::vector<std::size_t>& train_ids, double threshold, std::size_t jobs) {
  ExplainContext ctx;
  ctx.model = &model;
  ctx.baseline = explain::baseline_z(model, ds, train_ids, jobs);
  ctx.threshold = threshold;
  return ctx;
}

std::vector<explain::Explanation> explain_all(const ExplainContext& ctx, const data::Dataset& ds,
                                              const std::vector<std::size_t>& ids, std::size_t jobs) {
  std::vector<explain::Explanation> out(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t b) { out[b] = ctx.explain(ds.graphs.at(ids[b]), ids[b]); });
  return out;
}

MetricValue metric_a1(std::span<const explain::Explanation> explanations, const data::Dataset& ds,
                      bool empty_as_zero) {
  require(ds.has_instance_masks(), ErrorCode::kMissingGroundTruth,
          "A1: dataset '" + ds.name + "' has no instance-level ground truth");
  std::vector<std::optional<double>> per;
  MetricValue mv;
  double s = 0.0;
  for (const auto& e : explanations) {
    const auto& mask = ds.gt_instance_masks.at(e.graph_id);
    if (!mask || mask->empty()) {
      if (!empty_as_zero) continue;
      ++mv.evaluated;
      continue;
    }
    s += iou_nodes(e.selected, *mask);
    ++mv.evaluated;
  }
  require(mv.evaluated > 0, ErrorCode::kMissingGroundTruth, "A1: no evaluated graph has a ground-truth mask");
  mv.value = checked_unit(s / static_cast<double>(mv.evaluated), "A1");
  return mv;
}

MetricValue metric_a2(const model::XgknModel& model, const data::Dataset& ds, const AimConfig& cfg) {
  require(!ds.gt_motifs.empty(), ErrorCode::kMissingGroundTruth,
          "A2: dataset '" + ds.name + "' has no model-level ground truth");
  const auto q = ged::FeatureQuantizer::from_dataset(ds, model.encoder());
  std::vector<Graph> filters;
  for (const auto& f : model.filters()) filters.push_back(ged::binarize_filter(f, cfg.edge_threshold, q));
  std::vector<double> best(ds.gt_motifs.size(), 1.0);
  parallel_for(ds.gt_motifs.size(), cfg.jobs, [&](std::size_t j) {
    for (const auto& h : filters) best[j] = std::min(best[j], ged::ged_normalized(h, ds.gt_motifs[j]));
  });
  double gamma = 0.0;
  for (double b : best) gamma += b;
  gamma /= static_cast<double>(best.size());
  MetricValue mv;
  mv.value = checked_unit(1.0 - gamma, "A2");
  mv.evaluated = best.size();
  return mv;
}

MetricValue metric_sufficiency_necessity(const ExplainContext& ctx, const data::Dataset& ds,
                                         std::span<const explain::Explanation> explanations, SamplingMode mode,
                                         const AimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const bool suff = mode == SamplingMode::kSufficiency;
  const Rng master(seed, suff ? kStreamI1 : kStreamI2);
  std::vector<std::optional<double>> per(explanations.size());
  parallel_for(explanations.size(), cfg.jobs, [&](std::size_t b) {
    const auto& e = explanations[b];
    const Graph& g = ds.graphs.at(e.graph_id);
    const int c = ctx.predict(g);
    Rng rng = master.fork(e.graph_id);
    double hits = 0.0;
    std::size_t drawn = 0;
    for (std::size_t s = 0; s < cfg.samples_per_graph; ++s) {
      for (std::size_t attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        std::vector<NodeId> ids;
        for (std::size_t v = 0; v < g.size(); ++v) {
          const NodeId id = g.node_ids()[v];
          const bool in_expl = e.selected.contains(id);
          if (in_expl ? suff : rng.bernoulli(cfg.inclusion)) ids.push_back(id);
        }
        if (ids.empty()) continue;
        const int pred = ctx.predict(induced_subgraph(g, NodeSet(std::move(ids))));
        hits += (suff ? pred == c : pred != c) ? 1.0 : 0.0;
        ++drawn;
        break;
      }
    }
    if (drawn > 0) per[b] = hits / static_cast<double>(drawn);
  });
  return finish(per, suff ? "I1" : "I2");
}

MetricValue metric_robustness(const ExplainContext& ctx, const data::Dataset& ds,
                              std::span<const explain::Explanation> explanations, RobustnessMode mode,
                              const num::Matrix& feature_pool, const AimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const bool nodes = mode == RobustnessMode::kNodes;
  const double delta_add = cfg.delta_add_scale * ds.average_density();
  require(nodes || in_open_unit(delta_add), ErrorCode::kInvalidArgument,
          "I4: edge-addition probability " + std::to_string(delta_add) + " outside (0, 1)");
  const Rng master(seed, nodes ? kStreamI3 : kStreamI4);
  std::vector<std::optional<double>> per(explanations.size());
  parallel_for(explanations.size(), cfg.jobs, [&](std::size_t b) {
    const auto& e = explanations[b];
    const Graph& g = ds.graphs.at(e.graph_id);
    const int c = ctx.predict(g);
    Rng rng = master.fork(e.graph_id);
    const std::vector<Edge> locked = nodes ? std::vector<Edge>{} : pairs_within(g, e.selected);
    double s = 0.0;
    std::size_t kept = 0;
    for (std::size_t k = 0; k < cfg.samples_per_graph; ++k) {
      for (std::size_t attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        const Graph p = nodes ? perturb_features(g, cfg.delta_features, feature_pool, rng, NodeSet(e.selected.ids()))
                              : perturb_edges(g, delta_add, cfg.delta_remove, rng, locked);
        if (ctx.predict(p) != c) continue;
        s += iou_nodes(ctx.explain(p, e.graph_id).selected, e.selected);
        ++kept;
        break;
      }
    }
    if (kept > 0) per[b] = s / static_cast<double>(kept);
  });
  return finish(per, nodes ? "I3" : "I4");
}

MetricValue metric_consistency(std::span<const explain::Explanation> a, std::span<const explain::Explanation> b) {
  require(a.size() == b.size(), ErrorCode::kAlignment, "I5: runs cover different numbers of graphs");
  require(!a.empty(), ErrorCode::kAlignment, "I5: no graphs to compare");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    require(a[i].graph_id == b[i].graph_id, ErrorCode::kAlignment,
            "I5: graph " + std::to_string(a[i].graph_id) + " aligned with graph " + std::to_string(b[i].graph_id));
    s += iou_nodes(a[i].selected, b[i].selected);
  }
  MetricValue mv;
  mv.value = checked_unit(s / static_cast<double>(a.size()), "I5");
  mv.evaluated = a.size();
  return mv;
}

MetricValue metric_correctness(const ExplainContext& ctx, const data::Dataset& ds,
                               std::span<const explain::Explanation> explanations,
                               const std::vector<std::size_t>& train_ids, model::PerturbMode mode,
                               const num::Matrix& feature_pool, const AimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const bool feats = mode == model::PerturbMode::kFeatures;
  Rng rng(seed, feats ? kStreamM1 : kStreamM2);
  const model::XgknModel perturbed =
      model::perturb_filters(*ctx.model, mode, feats ? cfg.delta_m1 : cfg.delta_m2, feature_pool, rng);
  const ExplainContext other = make_context(perturbed, ds, train_ids, ctx.threshold, cfg.jobs);
  std::vector<double> iou(explanations.size());
  parallel_for(explanations.size(), cfg.jobs, [&](std::size_t b) {
    const auto& e = explanations[b];
    iou[b] = iou_nodes(other.explain(ds.graphs.at(e.graph_id), e.graph_id).selected, e.selected);
  });
  MetricValue mv;
  mv.evaluated = iou.size();
  mv.value = checked_unit(1.0 - (iou.empty() ? 1.0 : num::mean(iou)), feats ? "M1" : "M2");
  return mv;
}

MetricValue metric_redundancy(const model::XgknModel& model, const data::Dataset& ds,
                              const std::vector<std::size_t>& ids, std::size_t jobs) {
  const std::size_t m = model.config().num_filters;
  require(m >= 2, ErrorCode::kUndefinedMetric, "M3: needs at least two concepts");
  require(ids.size() >= 2, ErrorCode::kUndefinedMetric, "M3: needs at least two graphs");
  std::vector<std::vector<double>> zs(ids.size());
  const auto& cfg = model.config();
  parallel_for(ids.size(), jobs, [&](std::size_t b) {
    zs[b] = model::f_agg(model.f_sim(ds.graphs.at(ids[b])).R, cfg.agg, cfg.eps, cfg.norm).z;
  });
  std::vector<std::vector<double>> streams(m, std::vector<double>(ids.size()));
  for (std::size_t b = 0; b < ids.size(); ++b)
    for (std::size_t i = 0; i < m; ++i) streams[i][b] = zs[b][i];
  double s = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      s += num::spearman_abs(streams[i], streams[j]);
      ++pairs;
    }
  MetricValue mv;
  mv.evaluated = pairs;
  mv.value = checked_unit(1.0 - s / static_cast<double>(pairs), "M3");
  return mv;
}

explain::ThresholdChoice select_threshold(const model::XgknModel& model, const data::Dataset& ds,
                                          const std::vector<std::size_t>& eval_ids,
                                          const std::vector<double>& baseline, ThresholdCriterion criterion,
                                          std::span<const double> grid, const AimConfig& cfg, std::uint64_t seed) {
  if (criterion == ThresholdCriterion::kA1)
    require(ds.has_instance_masks(), ErrorCode::kMissingGroundTruth,
            "threshold selection by A1 needs instance-level ground truth");
  std::vector<std::vector<double>> importance(eval_ids.size());
  parallel_for(eval_ids.size(), cfg.jobs, [&](std::size_t b) {
    importance[b] = explain::node_importance(model, ds.graphs.at(eval_ids[b]), baseline).importance;
  });
  ExplainContext ctx{&model, baseline, 0.0};
  return explain::select_threshold(grid, [&](double p) {
    std::vector<explain::Explanation> ex(eval_ids.size());
    for (std::size_t b = 0; b < eval_ids.size(); ++b)
      ex[b] = explain::threshold_explanation(ds.graphs[eval_ids[b]], importance[b], p, eval_ids[b]);
    if (criterion == ThresholdCriterion::kA1) return metric_a1(ex, ds, cfg.a1_empty_as_zero).value;
    ctx.threshold = p;
    return metric_sufficiency_necessity(ctx, ds, ex, SamplingMode::kSufficiency, cfg, seed).value +
           metric_sufficiency_necessity(ctx, ds, ex, SamplingMode::kNecessity, cfg, seed).value;
  });
}

// ---- reports ----------------------------------------------------------------------

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"A1", "A2", "I1", "I2", "I3", "I4", "I5", "M1", "M2", "M3"};
  return names;
}

bool reported_as_complement(const std::string& metric) {
  return metric == "A2" || metric == "M1" || metric == "M2" || metric == "M3";
}

namespace {

void summarize(MetricSummary& s) {
  s.available = !s.per_run.empty();
  s.mean = num::mean(s.per_run);
  s.std = num::sample_std(s.per_run);
}

nlohmann::json summary_json(const MetricSummary& s) {
  nlohmann::json j{{"name", s.name}, {"available", s.available}};
  if (s.available) {
    j["mean"] = s.mean;
    j["std"] = s.std;
  } else {
    j["mean"] = nullptr;
    j["std"] = nullptr;
  }
  j["per_run"] = s.per_run;
  j["evaluated"] = s.evaluated;
  j["skipped"] = s.skipped;
  j["valid"] = s.valid;
  j["orientation"] = s.complement ? "1-gamma" : "direct";
  return j;
}

MetricSummary summary_from(const nlohmann::json& j) {
  MetricSummary s;
  s.name = j.at("name").get<std::string>();
  s.available = j.at("available").get<bool>();
  if (s.available) {
    s.mean = j.at("mean").get<double>();
    s.std = j.at("std").get<double>();
  }
  s.per_run = j.at("per_run").get<std::vector<double>>();
  s.evaluated = j.at("evaluated").get<std::size_t>();
  s.skipped = j.at("skipped").get<std::size_t>();
  s.valid = j.at("valid").get<bool>();
  s.complement = j.at("orientation").get<std::string>() == "1-gamma";
  return s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

AimReport aim_report(const std::string& label, std::span<const RunMetrics> runs, const nlohmann::json& config) {
  require(!runs.empty(), ErrorCode::kInvalidArgument, "aim_report: no runs");
  AimReport r;
  r.label = label;
  r.config = config;
  r.accuracy.name = "accuracy";
  for (const auto& run : runs) {
    r.seeds.push_back(run.seed);
    r.thresholds.push_back(run.threshold);
    r.accuracy.per_run.push_back(run.accuracy);
  }
  summarize(r.accuracy);
  for (const auto& name : metric_names()) {
    MetricSummary s;
    s.name = name;
    s.complement = reported_as_complement(name);
    for (const auto& run : runs) {
      const auto it = run.values.find(name);
      if (it == run.values.end() || !it->second) continue;
      s.per_run.push_back(it->second->value);
      s.evaluated += it->second->evaluated;
      s.skipped += it->second->skipped;
      s.valid = s.valid && it->second->valid;
    }
    summarize(s);
    if (!s.available) s.valid = false;
    r.metrics.push_back(std::move(s));
  }
  r.notes = {
      "A2, M1, M2 and M3 are reported as 1 - gamma so that higher is better.",
      "M3 averages |Spearman| over the m(m-1)/2 unordered concept pairs.",
      "I5 compares explanations of models trained with different seeds on the same graphs.",
      "Shapley baseline: mean concept scores over each run's training split.",
      "std is the sample standard deviation over runs (n - 1).",
  };
  return r;
}

std::vector<Comparison> compare(const AimReport& a, const AimReport& b, double alpha) {
  std::vector<Comparison> out;
  auto add = [&](const MetricSummary& x, const MetricSummary& y) {
    Comparison c;
    c.metric = x.name;
    if (!x.available || !y.available) {
      c.note = "unavailable";
    } else if (x.per_run == y.per_run) {
      num::TTestResult same;
      same.df = static_cast<double>(2 * x.per_run.size()) - 2.0;
      c.test = same;
    } else if (x.per_run.size() < 2 || y.per_run.size() < 2) {
      c.note = "needs at least two runs per side";
    } else {
      try {
        c.test = num::welch_ttest(x.per_run, y.per_run, alpha);
      } catch (const Error& e) {
        c.note = e.what();
      }
    }
    out.push_back(std::move(c));
  };
  add(a.accuracy, b.accuracy);
  for (std::size_t i = 0; i < a.metrics.size() && i < b.metrics.size(); ++i) add(a.metrics[i], b.metrics[i]);
  return out;
}

nlohmann::json report_to_json(const AimReport& r) {
  nlohmann::json metrics = nlohmann::json::array();
  for (const auto& s : r.metrics) metrics.push_back(summary_json(s));
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : r.comparisons) {
    nlohmann::json j{{"metric", c.metric}};
    if (c.test) {
      j["t"] = c.test->t;
      j["df"] = c.test->df;
      j["p_value"] = c.test->p_value;
      j["significant"] = c.test->significant;
    } else {
      j["t"] = nullptr;
      j["df"] = nullptr;
      j["p_value"] = nullptr;
      j["significant"] = nullptr;
    }
    j["note"] = c.note;
    comps.push_back(std::move(j));
  }
  return {{"format", "xgkn-aim-report"},
          {"version", 1},
          {"label", r.label},
          {"seeds", r.seeds},
          {"thresholds", r.thresholds},
          {"accuracy", summary_json(r.accuracy)},
          {"metrics", std::move(metrics)},
          {"comparisons", std::move(comps)},
          {"notes", r.notes},
          {"config", r.config}};
}

AimReport report_from_json(const nlohmann::json& j) {
  try {
    require(j.at("format") == "xgkn-aim-report", ErrorCode::kFormat, "report: unknown format tag");
    AimReport r;
    r.label = j.at("label").get<std::string>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.thresholds = j.at("thresholds").get<std::vector<double>>();
    r.accuracy = summary_from(j.at("accuracy"));
    for (const auto& m : j.at("metrics")) r.metrics.push_back(summary_from(m));
    r.notes = j.at("notes").get<std::vector<std::string>>();
    r.config = j.at("config");
    for (const auto& c : j.at("comparisons")) {
      Comparison cmp;
      cmp.metric = c.at("metric").get<std::string>();
      cmp.note = c.at("note").get<std::string>();
      if (!c.at("p_value").is_null()) {
        num::TTestResult t;
        t.t = c.at("t").get<double>();
        t.df = c.at("df").get<double>();
        t.p_value = c.at("p_value").get<double>();
        t.significant = c.at("significant").get<bool>();
        cmp.test = t;
      }
      r.comparisons.push_back(std::move(cmp));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("report: ") + e.what());
  }
}

std::string report_csv(const AimReport& r) {
  std::string out = "metric,available,mean,std,runs,evaluated,skipped,valid,orientation\n";
  auto row = [&](const MetricSummary& s) {
    out += s.name + "," + (s.available ? "1" : "0") + "," + (s.available ? fmt(s.mean) : "") + "," +
           (s.available ? fmt(s.std) : "") + "," + std::to_string(s.per_run.size()) + "," +
           std::to_string(s.evaluated) + "," + std::to_string(s.skipped) + "," + (s.valid ? "1" : "0") + "," +
           (s.complement ? "1-gamma" : "direct") + "\n";
  };
  row(r.accuracy);
  for (const auto& s : r.metrics) row(s);
  return out;
}

std::string radar_csv(const AimReport& r) {
  std::string out = "axis,value\n";
  for (const auto& s : r.metrics) out += s.name + "," + (s.available ? fmt(s.mean) : "") + "\n";
  return out;
}

std::string comparisons_csv(const AimReport& r) {
  std::string out = "metric,t,df,p_value,significant,note\n";
  for (const auto& c : r.comparisons) {
    if (c.test)
      out += c.metric + "," + fmt(c.test->t) + "," + fmt(c.test->df) + "," + fmt(c.test->p_value) + "," +
             (c.test->significant ? "1" : "0") + "," + c.note + "\n";
    else
      out += c.metric + ",,,,," + c.note + "\n";
  }
  return out;
}

}  // namespace xgkn::metrics
