#include "xgkn/model/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "xgkn/error.hpp"
#include "xgkn/num/optim.hpp"
#include "xgkn/parallel.hpp"

namespace xgkn::model {

const char* agg_mode_name(AggMode mode) {
  switch (mode) {
    case AggMode::kSum: return "sum";
    case AggMode::kMax: return "max";
    case AggMode::kEntropy: return "negative_entropy";
  }
  return "sum";
}

AggMode parse_agg_mode(const std::string& name) {
  if (name == "sum") return AggMode::kSum;
  if (name == "max") return AggMode::kMax;
  if (name == "negative_entropy" || name == "entropy") return AggMode::kEntropy;
  fail(ErrorCode::kInvalidArgument, "unknown aggregation mode '" + name + "'");
}

const char* norm_scope_name(NormScope scope) { return scope == NormScope::kGlobal ? "global" : "column"; }

NormScope parse_norm_scope(const std::string& name) {
  if (name == "global") return NormScope::kGlobal;
  if (name == "column") return NormScope::kColumn;
  fail(ErrorCode::kInvalidArgument, "unknown norm scope '" + name + "'");
}

void ModelConfig::validate() const {
  require(input_dim >= 1, ErrorCode::kInvalidArgument, "model: input_dim must be >= 1");
  require(num_classes >= 2, ErrorCode::kInvalidArgument, "model: need at least 2 classes");
  require(num_filters >= 1, ErrorCode::kInvalidArgument, "model: need at least one filter");
  require(filter_size >= 1, ErrorCode::kInvalidArgument, "model: filter_size must be >= 1");
  require(d_embed >= 1, ErrorCode::kInvalidArgument, "model: d_embed must be >= 1");
  require(k >= 1 && max_size >= 1, ErrorCode::kInvalidArgument, "model: k and max_size must be >= 1");
  require(eps > 0.0, ErrorCode::kInvalidArgument, "model: eps must be positive");
}

void TrainConfig::validate() const {
  require(epochs >= 1 && epochs <= 1000, ErrorCode::kInvalidArgument, "train: epochs must lie in [1, 1000]");
  require(lr >= 0.0 && weight_decay >= 0.0, ErrorCode::kInvalidArgument, "train: lr and weight_decay must be >= 0");
  require(batch_size >= 1, ErrorCode::kInvalidArgument, "train: batch_size must be >= 1");
  require(patience >= 1, ErrorCode::kInvalidArgument, "train: patience must be >= 1");
}

int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

// ---- aggregation ---------------------------------------------------------------

AggResult f_agg(const num::Matrix& R, AggMode mode, double eps, NormScope scope) {
  require(R.rows() >= 1 && R.cols() >= 1, ErrorCode::kShape, "f_agg: empty response matrix");
  require(eps > 0.0, ErrorCode::kInvalidArgument, "f_agg: eps must be positive");
  const std::size_t n = R.rows();
  const std::size_t m = R.cols();
  AggResult out;
  out.z.assign(m, 0.0);
  switch (mode) {
    case AggMode::kSum:
      out.contributions = R;
      break;
    case AggMode::kMax: {
      out.contributions = num::Matrix(n, m);
      out.argmax.assign(m, 0);
      for (std::size_t i = 0; i < m; ++i) {
        std::size_t best = 0;
        for (std::size_t v = 1; v < n; ++v)
          if (R(v, i) > R(best, i)) best = v;
        out.argmax[i] = best;
        out.contributions(best, i) = R(best, i);
      }
      break;
    }
    case AggMode::kEntropy: {
      num::Matrix q(n, m);
      for (std::size_t j = 0; j < R.size(); ++j) q[j] = std::max(R[j], eps);
      if (scope == NormScope::kGlobal) {
        double s = 0.0;
        for (double x : q.values()) s += x * x;
        out.norm = std::sqrt(s);
        for (double& x : q.values()) x /= out.norm;
      } else {
        for (std::size_t i = 0; i < m; ++i) {
          double s = 0.0;
          for (std::size_t v = 0; v < n; ++v) s += q(v, i) * q(v, i);
          const double norm = std::sqrt(s);
          if (i == 0) out.norm = norm;
          for (std::size_t v = 0; v < n; ++v) q(v, i) /= norm;
        }
      }
      for (double& x : q.values()) x = x * std::log(x);
      out.contributions = std::move(q);
      break;
    }
  }
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t i = 0; i < m; ++i) out.z[i] += out.contributions(v, i);
  return out;
}

num::Var col_max(num::Var a) {
  const num::Matrix& x = a.value();
  num::Matrix y(1, x.cols());
  std::vector<std::size_t> rows(x.cols(), 0);
  for (std::size_t i = 0; i < x.cols(); ++i) {
    for (std::size_t v = 1; v < x.rows(); ++v)
      if (x(v, i) > x(rows[i], i)) rows[i] = v;
    y(0, i) = x(rows[i], i);
  }
  return a.tape().record(std::move(y), {a}, [rows](num::Tape& t, std::size_t self) {
    if (num::Matrix* g = t.grad_sink(t.inputs(self)[0])) {
      const num::Matrix& gy = t.grad(self);
      for (std::size_t i = 0; i < rows.size(); ++i) (*g)(rows[i], i) += gy(0, i);
    }
  });
}

num::Var f_agg(num::Var R, AggMode mode, double eps, NormScope scope) {
  switch (mode) {
    case AggMode::kSum:
      return num::col_sum(R);
    case AggMode::kMax:
      return col_max(R);
    case AggMode::kEntropy: {
      num::Var rc = num::clamp_min(R, eps);
      num::Var q = scope == NormScope::kGlobal
                       ? num::div_scalar(rc, num::frobenius_norm(rc))
                       : num::mul_row(rc, num::rsqrt(num::col_sum(num::square(rc))));
      return num::col_sum(num::xlogx(q));
    }
  }
  fail(ErrorCode::kInvalidArgument, "f_agg: unknown mode");
}

// ---- model -----------------------------------------------------------------------

namespace {

num::Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  num::Matrix m(rows, cols);
  for (double& x : m.values()) x = bound * (2.0 * rng.uniform() - 1.0);
  return m;
}

}  // namespace

XgknModel::XgknModel(const ModelConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  encoder_ = kernel::Encoder::random(config_.input_dim, config_.d_embed, rng);
  for (std::size_t i = 0; i < config_.num_filters; ++i) {
    filters_.push_back(kernel::GraphFilter::random(config_.filter_size, config_.d_embed, rng));
    filters_.back().logits.name = "filters." + std::to_string(i) + ".logits";
    filters_.back().features.name = "filters." + std::to_string(i) + ".features";
  }
  const std::size_t m = config_.num_filters;
  const std::size_t c = config_.num_classes;
  auto& p = predictor_;
  p.bn.gamma = num::Parameter("bn.gamma", num::Matrix(1, m, 1.0));
  p.bn.beta = num::Parameter("bn.beta", num::Matrix(1, m, 0.0));
  p.bn.running_mean = num::Matrix(1, m, 0.0);
  p.bn.running_var = num::Matrix(1, m, 1.0);
  const double b1 = 1.0 / std::sqrt(static_cast<double>(m));
  const std::size_t out1 = config_.hidden > 0 ? config_.hidden : c;
  p.w1 = num::Parameter("pred.w1", uniform_matrix(m, out1, b1, rng));
  p.b1 = num::Parameter("pred.b1", uniform_matrix(1, out1, b1, rng));
  if (config_.hidden > 0) {
    const double b2 = 1.0 / std::sqrt(static_cast<double>(config_.hidden));
    p.w2 = num::Parameter("pred.w2", uniform_matrix(config_.hidden, c, b2, rng));
    p.b2 = num::Parameter("pred.b2", uniform_matrix(1, c, b2, rng));
  }
}

std::vector<num::Parameter*> XgknModel::parameters() {
  std::vector<num::Parameter*> out = {&encoder_.weight};
  for (auto& f : filters_) {
    out.push_back(&f.logits);
    out.push_back(&f.features);
  }
  out.push_back(&predictor_.bn.gamma);
  out.push_back(&predictor_.bn.beta);
  out.push_back(&predictor_.w1);
  out.push_back(&predictor_.b1);
  if (predictor_.mlp()) {
    out.push_back(&predictor_.w2);
    out.push_back(&predictor_.b2);
  }
  return out;
}

std::vector<const num::Parameter*> XgknModel::parameters() const {
  auto ps = const_cast<XgknModel*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

bool operator==(const XgknModel& a, const XgknModel& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (pa[i]->name != pb[i]->name || !(pa[i]->value == pb[i]->value)) return false;
  const auto& ca = a.config_;
  const auto& cb = b.config_;
  return ca.input_dim == cb.input_dim && ca.num_classes == cb.num_classes && ca.num_filters == cb.num_filters &&
         ca.filter_size == cb.filter_size && ca.d_embed == cb.d_embed && ca.k == cb.k &&
         ca.max_size == cb.max_size && ca.agg == cb.agg && ca.norm == cb.norm && ca.hidden == cb.hidden &&
         ca.eps == cb.eps && a.predictor_.bn.running_mean == b.predictor_.bn.running_mean &&
         a.predictor_.bn.running_var == b.predictor_.bn.running_var && a.predictor_.bn.eps == b.predictor_.bn.eps;
}

kernel::KernelResponse XgknModel::f_sim(const Graph& g) const {
  require(!g.empty(), ErrorCode::kInvalidArgument, "forward: empty graph");
  require(g.feature_dim() == config_.input_dim, ErrorCode::kFeatureDim,
          "forward: graph has " + std::to_string(g.feature_dim()) + " features, model expects " +
              std::to_string(config_.input_dim));
  return kernel::f_sim(g, filters_, encoder_, config_.k, config_.max_size);
}

std::vector<double> XgknModel::f_pred(std::span<const double> z) const {
  const std::size_t m = config_.num_filters;
  require(z.size() == m, ErrorCode::kShape,
          "f_pred: expected " + std::to_string(m) + " concept scores, got " + std::to_string(z.size()));
  const auto& p = predictor_;
  std::vector<double> y(m);
  for (std::size_t i = 0; i < m; ++i)
    y[i] = (z[i] - p.bn.running_mean[i]) / std::sqrt(p.bn.running_var[i] + p.bn.eps) * p.bn.gamma.value[i] +
           p.bn.beta.value[i];
  auto affine = [](const std::vector<double>& x, const num::Matrix& w, const num::Matrix& b) {
    std::vector<double> out(w.cols());
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double s = b[j];
      for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w(i, j);
      out[j] = s;
    }
    return out;
  };
  std::vector<double> h = affine(y, p.w1.value, p.b1.value);
  if (!p.mlp()) return h;
  for (double& x : h) x = std::max(x, 0.0);
  return affine(h, p.w2.value, p.b2.value);
}

ForwardTrace XgknModel::forward(const Graph& g) const {
  ForwardTrace t;
  t.response = f_sim(g);
  AggResult agg = f_agg(t.response.R, config_.agg, config_.eps, config_.norm);
  t.contributions = std::move(agg.contributions);
  t.argmax = std::move(agg.argmax);
  t.z = std::move(agg.z);
  t.norm = agg.norm;
  t.logits = f_pred(t.z);
  t.predicted = argmax_lowest(t.logits);
  return t;
}

std::vector<kernel::AnchoredHood> XgknModel::hoods(const Graph& g) const {
  return kernel::anchored_hoods(g, config_.k, config_.max_size, config_.filter_size);
}

num::Var XgknModel::z_on_tape(num::Tape& tape, const Graph& g, const std::vector<kernel::AnchoredHood>& hoods) {
  require(g.feature_dim() == config_.input_dim, ErrorCode::kFeatureDim, "z_on_tape: feature dimension mismatch");
  num::Var e = encoder_.embed(tape, g.features());
  std::vector<num::Var> cols;
  cols.reserve(filters_.size());
  for (auto& f : filters_) {
    num::Var fe = num::row_normalize(tape.parameter(f.features));
    num::Var s = num::matmul_bt(e, fe);
    num::Var a = num::symmetric_sigmoid(tape.parameter(f.logits));
    cols.push_back(kernel::anchored_response(s, a, hoods));
  }
  return f_agg(num::concat_cols(cols), config_.agg, config_.eps, config_.norm);
}

num::Var XgknModel::logits_on_tape(num::Tape& tape, num::Var z, bool training, bool update_running) {
  auto& p = predictor_;
  const std::size_t m = config_.num_filters;
  require(z.cols() == m, ErrorCode::kShape, "logits_on_tape: concept width mismatch");
  num::Var zn;
  if (training) {
    require(z.rows() >= 2, ErrorCode::kShape, "batch-norm training needs at least 2 rows");
    num::Var mean = num::col_mean(z);
    num::Var centered = num::add_row(z, num::scale(mean, -1.0));
    num::Var var = num::col_mean(num::square(centered));
    zn = num::mul_row(centered, num::rsqrt(num::add_scalar(var, p.bn.eps)));
    if (update_running) {
      const double n = static_cast<double>(z.rows());
      for (std::size_t i = 0; i < m; ++i) {
        p.bn.running_mean[i] = (1.0 - p.bn.momentum) * p.bn.running_mean[i] + p.bn.momentum * mean.value()[i];
        p.bn.running_var[i] =
            (1.0 - p.bn.momentum) * p.bn.running_var[i] + p.bn.momentum * var.value()[i] * n / (n - 1.0);
      }
    }
  } else {
    num::Matrix shift(1, m), inv(1, m);
    for (std::size_t i = 0; i < m; ++i) {
      shift[i] = -p.bn.running_mean[i];
      inv[i] = 1.0 / std::sqrt(p.bn.running_var[i] + p.bn.eps);
    }
    zn = num::mul_row(num::add_row(z, tape.constant(shift)), tape.constant(inv));
  }
  num::Var y = num::add_row(num::mul_row(zn, tape.parameter(p.bn.gamma)), tape.parameter(p.bn.beta));
  num::Var h = num::add_row(num::matmul(y, tape.parameter(p.w1)), tape.parameter(p.b1));
  if (!p.mlp()) return h;
  return num::add_row(num::matmul(num::relu(h), tape.parameter(p.w2)), tape.parameter(p.b2));
}

// ---- training ----------------------------------------------------------------------

void finalize_batch_norm(XgknModel& model, const data::Dataset& ds, const std::vector<std::size_t>& ids,
                         std::size_t jobs) {
  require(!ids.empty(), ErrorCode::kInvalidArgument, "finalize_batch_norm: no graphs");
  const std::size_t m = model.config().num_filters;
  std::vector<std::vector<double>> zs(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t b) {
    const auto R = model.f_sim(ds.graphs.at(ids[b])).R;
    zs[b] = f_agg(R, model.config().agg, model.config().eps, model.config().norm).z;
  });
  auto& bn = model.predictor().bn;
  const double n = static_cast<double>(ids.size());
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (const auto& z : zs) s += z[i];
    const double mean = s / n;
    double ss = 0.0;
    for (const auto& z : zs) ss += (z[i] - mean) * (z[i] - mean);
    bn.running_mean[i] = mean;
    bn.running_var[i] = ids.size() > 1 ? ss / (n - 1.0) : 0.0;
  }
}

double accuracy(const XgknModel& model, const data::Dataset& ds, const std::vector<std::size_t>& ids,
                std::size_t jobs) {
  if (ids.empty()) return 0.0;
  std::vector<int> hit(ids.size(), 0);
  parallel_for(ids.size(), jobs, [&](std::size_t b) {
    hit[b] = model.predict(ds.graphs.at(ids[b])) == ds.label(ids[b]) ? 1 : 0;
  });
  double s = 0.0;
  for (int h : hit) s += h;
  return s / static_cast<double>(ids.size());
}

TrainHistory train(XgknModel& model, const data::Dataset& ds, const data::Split& split, const TrainConfig& cfg) {
  cfg.validate();
  require(split.train.size() >= 2, ErrorCode::kSplit, "train: need at least 2 training graphs");
  const std::size_t m = model.config().num_filters;

  std::vector<std::vector<kernel::AnchoredHood>> hoods(ds.size());
  parallel_for(split.train.size(), cfg.jobs, [&](std::size_t b) {
    const std::size_t i = split.train[b];
    hoods[i] = model.hoods(ds.graphs.at(i));
  });

  auto params = model.parameters();
  num::AdamState adam = num::make_adam_state(params, {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  for (auto* p : params) p->zero_grad();

  Rng rng(cfg.seed, 0x7472'6169'6e00ULL);
  std::vector<std::size_t> order = split.train;
  TrainHistory hist;
  hist.best_loss = std::numeric_limits<double>::infinity();
  XgknModel best = model;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    std::vector<std::pair<std::size_t, std::size_t>> batches;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size)
      batches.emplace_back(s, std::min(order.size(), s + cfg.batch_size));
    // Batch-norm needs two rows; fold a trailing singleton into its neighbor.
    if (batches.size() > 1 && batches.back().second - batches.back().first == 1) {
      batches[batches.size() - 2].second = batches.back().second;
      batches.pop_back();
    }
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const auto& [lo, hi] : batches) {
      const std::size_t B = hi - lo;
      std::vector<std::unique_ptr<num::Tape>> tapes(B);
      std::vector<num::Var> zv(B);
      parallel_for(B, cfg.jobs, [&](std::size_t b) {
        const std::size_t i = order[lo + b];
        tapes[b] = std::make_unique<num::Tape>();
        zv[b] = model.z_on_tape(*tapes[b], ds.graphs[i], hoods[i]);
      });
      num::Parameter zp("z", num::Matrix(B, m));
      std::vector<int> labels(B);
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t i = 0; i < m; ++i) zp.value(b, i) = zv[b].value()[i];
        labels[b] = ds.label(order[lo + b]);
      }
      require(zp.value.all_finite(), ErrorCode::kTrainingDiverged,
              "training diverged at epoch " + std::to_string(epoch) + ": non-finite concept scores");
      num::Tape bt;
      num::Var logits = model.logits_on_tape(bt, bt.parameter(zp), true, true);
      num::Var loss = num::cross_entropy(logits, labels);
      const double lv = loss.scalar();
      require(std::isfinite(lv), ErrorCode::kTrainingDiverged,
              "training diverged at epoch " + std::to_string(epoch) + ": loss is not finite");
      bt.backward(loss);
      parallel_for(B, cfg.jobs, [&](std::size_t b) {
        num::Matrix seed(1, m);
        for (std::size_t i = 0; i < m; ++i) seed[i] = zp.grad(b, i);
        tapes[b]->backward(zv[b], seed, false);
      });
      for (std::size_t b = 0; b < B; ++b) tapes[b]->accumulate_parameter_grads();
      for (auto* p : params)
        require(p->grad.all_finite(), ErrorCode::kTrainingDiverged,
                "training diverged at epoch " + std::to_string(epoch) + ": non-finite gradient in " + p->name);
      num::adam_step(params, adam);
      loss_sum += lv * static_cast<double>(B);
      for (std::size_t b = 0; b < B; ++b)
        if (argmax_lowest(logits.value().row_span(b)) == labels[b]) ++correct;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(order.size());
    rec.accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    hist.epochs.push_back(rec);
    if (cfg.on_epoch) cfg.on_epoch(rec);
    if (rec.loss < hist.best_loss) {
      hist.best_loss = rec.loss;
      hist.best_epoch = epoch;
      best = model;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      hist.early_stopped = true;
      model = std::move(best);
      break;
    }
  }
  finalize_batch_norm(model, ds, split.train, cfg.jobs);
  return hist;
}

// ---- perturbation --------------------------------------------------------------------

XgknModel perturb_filters(const XgknModel& model, PerturbMode mode, double delta, const num::Matrix& pool,
                          Rng& rng) {
  require(delta > 0.0 && delta < 1.0, ErrorCode::kInvalidArgument, "perturb_filters: delta must lie in (0, 1)");
  XgknModel out = model;
  if (mode == PerturbMode::kFeatures) {
    require(pool.rows() >= 1 && pool.cols() == model.config().input_dim, ErrorCode::kFeatureDim,
            "perturb_filters: feature pool does not match the encoder input");
    for (auto& f : out.filters()) {
      for (std::size_t r = 0; r < f.size(); ++r) {
        if (!rng.bernoulli(delta)) continue;
        const std::size_t pick = rng.below(pool.rows());
        const num::Matrix row = num::Matrix::row(pool.row_span(pick));
        const num::Matrix emb = out.encoder().embed(row);
        for (std::size_t c = 0; c < emb.cols(); ++c) f.features.value(r, c) = emb(0, c);
      }
    }
  } else {
    for (auto& f : out.filters()) {
      auto& b = f.logits.value;
      for (std::size_t i = 0; i < f.size(); ++i)
        for (std::size_t j = i + 1; j < f.size(); ++j) {
          if (!rng.bernoulli(delta)) continue;
          // sigmoid(-x) = 1 - sigmoid(x) on the symmetrized logit.
          const double bij = b(i, j);
          b(i, j) = -b(j, i);
          b(j, i) = -bij;
        }
    }
  }
  return out;
}

}  // namespace xgkn::model
