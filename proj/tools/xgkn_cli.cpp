// Command-line driver over the C API.
//
//   xgkn prepare|train|explain|evaluate|run|report|config [options]
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xgkn/xgkn.h"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr const char* kOutputRootEnv = "XGKN_OUTPUT_ROOT";

struct Options {
  std::string config_path;
  std::string output;
  std::optional<std::size_t> jobs;
  std::vector<std::string> sets;
  std::string seeds;
  std::optional<std::size_t> epochs;
  std::string compare;
  std::string report_path;
  std::string format = "csv";
  bool quiet = false;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RuntimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream g_sidecar;
bool g_quiet = false;

void on_log(const char* message, void*) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  if (!g_quiet) std::cerr << message << "\n";
  if (g_sidecar) g_sidecar << stamp << " " << message << "\n" << std::flush;
}

std::string take(char* s) {
  std::string out = s ? s : "";
  xgkn_string_free(s);
  return out;
}

// Usage-class statuses map to exit code 2.
[[noreturn]] void raise(xgkn_status st, const std::string& context) {
  const std::string msg = context + ": " + xgkn_status_name(st) + ": " + xgkn_last_error();
  if (st == XGKN_ERR_INVALID_ARGUMENT) throw UsageError(msg);
  throw RuntimeError(msg);
}

void check(xgkn_status st, const std::string& context) {
  if (st != XGKN_OK) raise(st, context);
}

// "a.b.c=value": value parsed as JSON when possible, else taken as a string.
json patch_for(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json patch = value;
  std::size_t end = key.size();
  while (true) {
    const auto dot = key.rfind('.', end - 1);
    const std::size_t start = dot == std::string::npos ? 0 : dot + 1;
    const std::string part = key.substr(start, end - start);
    if (part.empty()) throw UsageError("--set: malformed key '" + key + "'");
    patch = json{{part, patch}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  return patch;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--seeds expects comma-separated integers, got '" + text + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

struct ConfigHandle {
  xgkn_config* ptr = nullptr;
  ~ConfigHandle() { xgkn_config_free(ptr); }
};

void apply_patch(xgkn_config* cfg, const json& patch) {
  const xgkn_status st = xgkn_config_patch(cfg, patch.dump().c_str());
  if (st != XGKN_OK) throw UsageError(std::string("config override: ") + xgkn_last_error());
}

// Config file, then flag overrides, then the default output location.
void resolve_config(const Options& o, ConfigHandle& h) {
  if (!o.config_path.empty()) {
    if (!std::filesystem::exists(o.config_path)) throw UsageError("config file " + o.config_path + " not found");
    if (xgkn_config_load(o.config_path.c_str(), &h.ptr) != XGKN_OK)
      throw UsageError(std::string("config: ") + xgkn_last_error());
  } else {
    check(xgkn_config_default(&h.ptr), "config");
  }
  for (const auto& s : o.sets) apply_patch(h.ptr, patch_for(s));
  if (!o.seeds.empty()) apply_patch(h.ptr, json{{"seeds", parse_seeds(o.seeds)}});
  if (o.epochs) apply_patch(h.ptr, json{{"train", {{"epochs", *o.epochs}}}});
  if (o.jobs) apply_patch(h.ptr, json{{"jobs", *o.jobs}});
  if (!o.output.empty()) apply_patch(h.ptr, json{{"output", o.output}});

  if (xgkn_config_validate(h.ptr) != XGKN_OK) throw UsageError(std::string("config: ") + xgkn_last_error());
  const json cfg = json::parse(take([&] {
    char* s = nullptr;
    check(xgkn_config_to_json(h.ptr, &s), "config");
    return s;
  }()));
  if (cfg["output"].get<std::string>().empty()) {
    char* hs = nullptr;
    check(xgkn_config_hash(h.ptr, &hs), "config");
    const char* root = std::getenv(kOutputRootEnv);
    const std::filesystem::path base = root && *root ? root : "runs";
    apply_patch(h.ptr, json{{"output", (base / take(hs)).string()}});
  }
  const auto& d = cfg["dataset"];
  if (d["source"] == "tu" && !std::filesystem::is_directory(d["path"].get<std::string>()))
    throw UsageError("dataset path " + d["path"].get<std::string>() + " not found");
  if (!d["gt_sidecar"].get<std::string>().empty() &&
      !std::filesystem::exists(d["gt_sidecar"].get<std::string>()))
    throw UsageError("ground-truth sidecar " + d["gt_sidecar"].get<std::string>() + " not found");
}

std::string output_dir(xgkn_config* cfg) {
  char* s = nullptr;
  check(xgkn_config_to_json(cfg, &s), "config");
  return json::parse(take(s))["output"].get<std::string>();
}

void open_sidecar(xgkn_config* cfg) {
  const std::filesystem::path dir = output_dir(cfg);
  std::filesystem::create_directories(dir);
  g_sidecar.open(dir / "run.log", std::ios::app);
}

using Command = xgkn_status (*)(const xgkn_config*, char**);

void run_step(xgkn_config* cfg, Command cmd, const char* name) {
  char* out = nullptr;
  const xgkn_status st = cmd(cfg, &out);
  if (st != XGKN_OK) raise(st, name);
  std::cout << take(out) << "\n";
}

int dispatch(const std::string& command, const Options& o) {
  g_quiet = o.quiet;
  if (command == "report") {
    std::string path = o.report_path;
    if (path.empty()) {
      ConfigHandle h;
      resolve_config(o, h);
      path = (std::filesystem::path(output_dir(h.ptr)) / "report.json").string();
    }
    if (!std::filesystem::exists(path)) throw UsageError("report " + path + " not found; run evaluate first");
    char* text = nullptr;
    check(xgkn_report_render(path.c_str(), o.format.c_str(), &text), "report");
    std::cout << take(text);
    return kExitOk;
  }

  ConfigHandle h;
  resolve_config(o, h);
  if (command == "config") {
    char* s = nullptr;
    check(xgkn_config_to_json(h.ptr, &s), "config");
    std::cout << take(s) << "\n";
    check(xgkn_config_hash(h.ptr, &s), "config");
    std::cerr << "config hash " << take(s) << "\n";
    return kExitOk;
  }
  open_sidecar(h.ptr);
  xgkn_set_log(on_log, nullptr);
  if (command == "prepare") run_step(h.ptr, xgkn_prepare, "prepare");
  if (command == "train") run_step(h.ptr, xgkn_train, "train");
  if (command == "explain") run_step(h.ptr, xgkn_explain, "explain");
  if (command == "run") {
    run_step(h.ptr, xgkn_prepare, "prepare");
    run_step(h.ptr, xgkn_train, "train");
    run_step(h.ptr, xgkn_explain, "explain");
  }
  if (command == "evaluate" || command == "run") {
    char* out = nullptr;
    const xgkn_status st = xgkn_evaluate(h.ptr, o.compare.empty() ? nullptr : o.compare.c_str(), &out);
    if (st != XGKN_OK) raise(st, "evaluate");
    xgkn_string_free(out);
    char* csv = nullptr;
    const auto report = (std::filesystem::path(output_dir(h.ptr)) / "report.json").string();
    check(xgkn_report_render(report.c_str(), "csv", &csv), "report");
    std::cout << take(csv);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explainable graph kernel networks: data preparation, training, explanation and AIM evaluation"};
  app.require_subcommand(1, 1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config_path, "Run configuration (JSON)");
    sub->add_option("-o,--output", o.output,
                    std::string("Output directory (default: $") + kOutputRootEnv + "/<config hash> or runs/<hash>)");
    sub->add_option("-j,--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--set", o.sets, "Override a config key, e.g. --set model.num_filters=8");
    sub->add_option("--seeds", o.seeds, "Comma-separated seed list");
    sub->add_option("--epochs", o.epochs, "Training epochs")->check(CLI::Range(1, 1000));
    sub->add_flag("-q,--quiet", o.quiet, "Suppress progress messages");
  };

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"prepare", "Materialize the dataset, masks and split manifest"},
      {"train", "Train one model per seed"},
      {"explain", "Select the threshold and export explanations per seed"},
      {"evaluate", "Compute the AIM metrics and write the report"},
      {"run", "prepare, train, explain and evaluate in sequence"},
      {"config", "Print the resolved configuration and its hash"},
      {"report", "Print a saved report"},
  };
  std::vector<CLI::App*> apps;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_common(sub);
    apps.push_back(sub);
  }
  for (CLI::App* sub : apps) {
    const std::string n = sub->get_name();
    if (n == "evaluate" || n == "run")
      sub->add_option("--compare", o.compare, "Another run directory (or report.json) to t-test against");
    if (n == "report") {
      sub->add_option("--report", o.report_path, "Path to report.json (default: <output>/report.json)");
      sub->add_option("--format", o.format, "json, csv, radar or comparisons")
          ->check(CLI::IsMember({"json", "csv", "radar", "comparisons"}));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  std::string command;
  for (CLI::App* sub : apps)
    if (sub->parsed()) command = sub->get_name();
  try {
    return dispatch(command, o);
  } catch (const UsageError& e) {
    std::cerr << "xgkn " << command << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "xgkn " << command << ": " << e.what() << "\n";
    return kExitFailure;
  }
}
