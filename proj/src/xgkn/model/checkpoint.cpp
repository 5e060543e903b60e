#include <fstream>
#include <sstream>

#include "json.hpp"
#include "xgkn/error.hpp"
#include "xgkn/model/model.hpp"

namespace xgkn::model {

using nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

json matrix_json(const num::Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"values", std::vector<double>(m.values().begin(), m.values().end())}};
}

num::Matrix matrix_from(const json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  auto values = j.at("values").get<std::vector<double>>();
  require(values.size() == rows * cols, ErrorCode::kFormat, "checkpoint: matrix value count mismatch");
  return num::Matrix(rows, cols, std::move(values));
}

json config_json(const ModelConfig& c) {
  return json{{"input_dim", c.input_dim},     {"num_classes", c.num_classes},
              {"num_filters", c.num_filters}, {"filter_size", c.filter_size},
              {"d_embed", c.d_embed},         {"k", c.k},
              {"max_size", c.max_size},       {"agg", agg_mode_name(c.agg)},
              {"norm", norm_scope_name(c.norm)}, {"hidden", c.hidden},
              {"eps", c.eps}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.num_filters = j.at("num_filters").get<std::size_t>();
  c.filter_size = j.at("filter_size").get<std::size_t>();
  c.d_embed = j.at("d_embed").get<std::size_t>();
  c.k = j.at("k").get<std::size_t>();
  c.max_size = j.at("max_size").get<std::size_t>();
  c.agg = parse_agg_mode(j.at("agg").get<std::string>());
  c.norm = parse_norm_scope(j.at("norm").get<std::string>());
  c.hidden = j.at("hidden").get<std::size_t>();
  c.eps = j.at("eps").get<double>();
  return c;
}

}  // namespace

std::string checkpoint_json(const XgknModel& model) {
  json params = json::array();
  for (const auto* p : model.parameters()) {
    json e = matrix_json(p->value);
    e["name"] = p->name;
    params.push_back(std::move(e));
  }
  const auto& bn = model.predictor().bn;
  json j{{"format", "xgkn-checkpoint"},
         {"version", kCheckpointVersion},
         {"config", config_json(model.config())},
         {"parameters", std::move(params)},
         {"batch_norm",
          {{"running_mean", matrix_json(bn.running_mean)},
           {"running_var", matrix_json(bn.running_var)},
           {"eps", bn.eps},
           {"momentum", bn.momentum}}}};
  return j.dump(1);
}

XgknModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("checkpoint: ") + e.what());
  }
  try {
    require(j.at("format") == "xgkn-checkpoint", ErrorCode::kFormat, "checkpoint: unknown format tag");
    const int version = j.at("version").get<int>();
    require(version == kCheckpointVersion, ErrorCode::kFormat,
            "checkpoint: unsupported version " + std::to_string(version));
    const ModelConfig cfg = config_from(j.at("config"));
    // Shapes come from the config; values are then overwritten.
    Rng rng(0);
    XgknModel model(cfg, rng);
    auto params = model.parameters();
    const json& pj = j.at("parameters");
    require(pj.size() == params.size(), ErrorCode::kFormat, "checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      require(pj[i].at("name").get<std::string>() == params[i]->name, ErrorCode::kFormat,
              "checkpoint: expected parameter " + params[i]->name);
      num::Matrix v = matrix_from(pj[i]);
      require(v.same_shape(params[i]->value), ErrorCode::kFormat, "checkpoint: shape mismatch in " + params[i]->name);
      params[i]->value = std::move(v);
      params[i]->zero_grad();
    }
    auto& bn = model.predictor().bn;
    const json& bj = j.at("batch_norm");
    bn.running_mean = matrix_from(bj.at("running_mean"));
    bn.running_var = matrix_from(bj.at("running_var"));
    bn.eps = bj.at("eps").get<double>();
    bn.momentum = bj.at("momentum").get<double>();
    require(bn.running_mean.same_shape(bn.gamma.value) && bn.running_var.same_shape(bn.gamma.value),
            ErrorCode::kFormat, "checkpoint: batch-norm statistics shape mismatch");
    return model;
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const XgknModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << checkpoint_json(model) << "\n";
  if (!out) fail(ErrorCode::kIo, "write failed: " + path.string());
}

XgknModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace xgkn::model
