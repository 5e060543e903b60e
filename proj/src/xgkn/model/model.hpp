#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xgkn/data/dataset.hpp"
#include "xgkn/kernel/kernel.hpp"
#include "xgkn/num/matrix.hpp"
#include "xgkn/num/tape.hpp"
#include "xgkn/rng.hpp"

namespace xgkn::model {

enum class AggMode { kSum, kMax, kEntropy };
// Normalizer of the entropy aggregation: one Frobenius norm for the whole
// response matrix, or one L2 norm per filter column.
enum class NormScope { kGlobal, kColumn };

const char* agg_mode_name(AggMode mode);
AggMode parse_agg_mode(const std::string& name);
const char* norm_scope_name(NormScope scope);
NormScope parse_norm_scope(const std::string& name);

struct ModelConfig {
  std::size_t input_dim = 1;
  std::size_t num_classes = 2;
  std::size_t num_filters = 4;
  std::size_t filter_size = 6;
  std::size_t d_embed = 16;
  std::size_t k = 2;          // hop radius of node neighborhoods
  std::size_t max_size = 10;  // neighborhood node cap
  AggMode agg = AggMode::kEntropy;
  NormScope norm = NormScope::kGlobal;
  std::size_t hidden = 0;  // 0: single linear layer, else a ReLU MLP of this width
  double eps = 1e-8;

  void validate() const;
};

struct BatchNorm {
  num::Parameter gamma;  // 1 × m
  num::Parameter beta;   // 1 × m
  num::Matrix running_mean;
  num::Matrix running_var;
  double eps = 1e-5;
  double momentum = 0.1;
};

struct Predictor {
  BatchNorm bn;
  num::Parameter w1, b1;
  num::Parameter w2, b2;  // present only for the MLP
  bool mlp() const { return !w2.value.empty(); }
};

struct AggResult {
  std::vector<double> z;            // m
  num::Matrix contributions;        // n × m additive terms; max mode: one-hot · z_i
  std::vector<std::size_t> argmax;  // max mode only: winning row per column
  double norm = 0.0;                // entropy: global normalizer (first column's for kColumn)
};

AggResult f_agg(const num::Matrix& R, AggMode mode, double eps = 1e-8, NormScope scope = NormScope::kGlobal);
// Differentiable counterpart returning z as 1 × m.
num::Var f_agg(num::Var R, AggMode mode, double eps = 1e-8, NormScope scope = NormScope::kGlobal);
// Column maxima with the gradient routed to the winning row (lowest index on ties).
num::Var col_max(num::Var a);

struct ForwardTrace {
  kernel::KernelResponse response;
  num::Matrix contributions;
  std::vector<std::size_t> argmax;
  std::vector<double> z;
  std::vector<double> logits;
  int predicted = 0;
  double norm = 0.0;
};

class XgknModel {
 public:
  XgknModel() = default;
  XgknModel(const ModelConfig& config, Rng& rng);

  const ModelConfig& config() const { return config_; }
  const kernel::Encoder& encoder() const { return encoder_; }
  kernel::Encoder& encoder() { return encoder_; }
  const std::vector<kernel::GraphFilter>& filters() const { return filters_; }
  std::vector<kernel::GraphFilter>& filters() { return filters_; }
  const Predictor& predictor() const { return predictor_; }
  Predictor& predictor() { return predictor_; }

  // Trainable parameters in a fixed order.
  std::vector<num::Parameter*> parameters();
  std::vector<const num::Parameter*> parameters() const;

  kernel::KernelResponse f_sim(const Graph& g) const;
  // Inference-mode predictor (frozen batch-norm statistics).
  std::vector<double> f_pred(std::span<const double> z) const;
  ForwardTrace forward(const Graph& g) const;
  int predict(const Graph& g) const { return forward(g).predicted; }

  // Differentiable z (1 × m) of one graph with precomputed hoods.
  num::Var z_on_tape(num::Tape& tape, const Graph& g, const std::vector<kernel::AnchoredHood>& hoods);
  // Differentiable logits of a batch of z rows; training mode uses batch
  // statistics (and updates running ones when update_running is set).
  num::Var logits_on_tape(num::Tape& tape, num::Var z_batch, bool training, bool update_running);

  std::vector<kernel::AnchoredHood> hoods(const Graph& g) const;

  friend bool operator==(const XgknModel& a, const XgknModel& b);

 private:
  ModelConfig config_;
  kernel::Encoder encoder_;
  std::vector<kernel::GraphFilter> filters_;
  Predictor predictor_;
};

int argmax_lowest(std::span<const double> v);

// ---- training --------------------------------------------------------------

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainConfig {
  std::size_t epochs = 1000;
  double lr = 0.01;
  double weight_decay = 1e-4;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  std::size_t patience = 100;  // epochs without a train-loss improvement
  std::size_t jobs = 1;
  // Called after every completed epoch, so callers keep a partial history
  // when training throws.
  std::function<void(const EpochRecord&)> on_epoch;

  void validate() const;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_loss = 0.0;
  bool early_stopped = false;
};

// Mini-batch Adam on mean cross-entropy. After the last epoch the batch-norm
// running statistics are replaced by population statistics of z over the
// training split, so inference matches the final parameters exactly.
TrainHistory train(XgknModel& model, const data::Dataset& ds, const data::Split& split,
                   const TrainConfig& cfg);

// Population mean and unbiased variance of z over the listed graphs.
void finalize_batch_norm(XgknModel& model, const data::Dataset& ds, const std::vector<std::size_t>& ids,
                         std::size_t jobs = 1);

double accuracy(const XgknModel& model, const data::Dataset& ds, const std::vector<std::size_t>& ids,
                std::size_t jobs = 1);

// ---- perturbation ------------------------------------------------------------

enum class PerturbMode { kFeatures, kEdges };

// Copy of the model with perturbed filters. kFeatures: each filter node,
// with probability delta, takes the encoded feature of a uniformly drawn pool
// row. kEdges: each filter node pair, with probability delta, has its edge
// weight flipped to 1 - a (an edge becomes a non-edge and vice versa).
XgknModel perturb_filters(const XgknModel& model, PerturbMode mode, double delta, const num::Matrix& pool,
                          Rng& rng);

// ---- checkpoints ---------------------------------------------------------------

std::string checkpoint_json(const XgknModel& model);
XgknModel model_from_json(const std::string& text);
void save_checkpoint(const XgknModel& model, const std::filesystem::path& path);
XgknModel load_checkpoint(const std::filesystem::path& path);

}  // namespace xgkn::model
