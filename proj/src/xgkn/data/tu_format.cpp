#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "xgkn/data/dataset.hpp"
#include "xgkn/error.hpp"

namespace xgkn::data {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_lines(const fs::path& path, bool required) {
  std::ifstream in(path);
  if (!in) {
    if (required) fail(ErrorCode::kIo, "cannot open " + path.string());
    return {};
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  // Trailing blank lines carry no records.
  while (!lines.empty() && lines.back().find_first_not_of(" \t") == std::string::npos)
    lines.pop_back();
  return lines;
}

std::vector<double> parse_numbers(const std::string& line, const fs::path& path, std::size_t lineno) {
  std::string s = line;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream is(s);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      fail(ErrorCode::kFormat, path.string() + ":" + std::to_string(lineno) + ": bad number '" + tok + "'");
    }
  }
  return out;
}

long parse_int(const std::string& line, const fs::path& path, std::size_t lineno) {
  auto nums = parse_numbers(line, path, lineno);
  require(nums.size() == 1 && nums[0] == static_cast<double>(static_cast<long>(nums[0])),
          ErrorCode::kFormat, path.string() + ":" + std::to_string(lineno) + ": expected one integer");
  return static_cast<long>(nums[0]);
}

fs::path tu_file(const fs::path& dir, const std::string& name, const char* suffix) {
  return dir / (name + "_" + suffix + ".txt");
}

}  // namespace

Dataset parse_tu_dataset(const fs::path& directory, const std::string& name) {
  const auto a_path = tu_file(directory, name, "A");
  const auto ind_path = tu_file(directory, name, "graph_indicator");
  const auto gl_path = tu_file(directory, name, "graph_labels");
  const auto nl_path = tu_file(directory, name, "node_labels");
  const auto na_path = tu_file(directory, name, "node_attributes");
  const auto a_lines = read_lines(a_path, true);
  const auto ind_lines = read_lines(ind_path, true);
  const auto gl_lines = read_lines(gl_path, true);
  const auto nl_lines = read_lines(nl_path, false);
  const auto na_lines = read_lines(na_path, false);

  // Node -> graph (both 1-based in the files, contiguous and nondecreasing).
  const std::size_t n_nodes = ind_lines.size();
  std::vector<std::size_t> graph_of(n_nodes);
  long prev = 0;
  for (std::size_t i = 0; i < n_nodes; ++i) {
    const long gid = parse_int(ind_lines[i], ind_path, i + 1);
    require(gid == prev || gid == prev + 1, ErrorCode::kFormat,
            ind_path.string() + ":" + std::to_string(i + 1) +
                ": graph ids must be contiguous and nondecreasing from 1 (gap or reorder at id " +
                std::to_string(gid) + ")");
    require(gid >= 1, ErrorCode::kFormat, ind_path.string() + ": graph ids start at 1");
    graph_of[i] = static_cast<std::size_t>(gid - 1);
    prev = gid;
  }
  const std::size_t n_graphs = static_cast<std::size_t>(prev);
  require(gl_lines.size() == n_graphs, ErrorCode::kFormat,
          gl_path.string() + ": expected " + std::to_string(n_graphs) + " labels, found " +
              std::to_string(gl_lines.size()));

  std::vector<std::size_t> first(n_graphs + 1, n_nodes);
  for (std::size_t i = n_nodes; i-- > 0;) first[graph_of[i]] = i;
  first[n_graphs] = n_nodes;

  std::vector<long> raw_labels;
  for (std::size_t g = 0; g < n_graphs; ++g) raw_labels.push_back(parse_int(gl_lines[g], gl_path, g + 1));
  std::set<long> label_values(raw_labels.begin(), raw_labels.end());
  std::map<long, int> label_index;
  for (long v : label_values) label_index.emplace(v, static_cast<int>(label_index.size()));

  // Node features: one-hot node labels, else attributes, else constant.
  num::Matrix features;
  FeaturePolicy policy = FeaturePolicy::kConstant;
  if (!nl_lines.empty()) {
    require(nl_lines.size() == n_nodes, ErrorCode::kFormat, nl_path.string() + ": line count != node count");
    std::vector<long> nl;
    for (std::size_t i = 0; i < n_nodes; ++i) nl.push_back(parse_int(nl_lines[i], nl_path, i + 1));
    std::set<long> vals(nl.begin(), nl.end());
    std::map<long, std::size_t> idx;
    for (long v : vals) idx.emplace(v, idx.size());
    features = num::Matrix(n_nodes, idx.size());
    for (std::size_t i = 0; i < n_nodes; ++i) features(i, idx[nl[i]]) = 1.0;
    policy = FeaturePolicy::kOneHotLabel;
  } else if (!na_lines.empty()) {
    require(na_lines.size() == n_nodes, ErrorCode::kFormat, na_path.string() + ": line count != node count");
    std::size_t d = 0;
    for (std::size_t i = 0; i < n_nodes; ++i) {
      auto row = parse_numbers(na_lines[i], na_path, i + 1);
      if (i == 0) {
        d = row.size();
        features = num::Matrix(n_nodes, d);
      }
      require(row.size() == d, ErrorCode::kFormat,
              na_path.string() + ":" + std::to_string(i + 1) + ": attribute count differs");
      for (std::size_t c = 0; c < d; ++c) features(i, c) = row[c];
    }
  } else {
    features = num::Matrix(n_nodes, 1, 1.0);
  }

  std::vector<num::Matrix> adj(n_graphs);
  for (std::size_t g = 0; g < n_graphs; ++g) {
    const std::size_t n = first[g + 1] - first[g];
    adj[g] = num::Matrix(n, n);
  }
  for (std::size_t k = 0; k < a_lines.size(); ++k) {
    auto nums = parse_numbers(a_lines[k], a_path, k + 1);
    require(nums.size() == 2, ErrorCode::kFormat,
            a_path.string() + ":" + std::to_string(k + 1) + ": expected 'i, j'");
    const long u = static_cast<long>(nums[0]);
    const long v = static_cast<long>(nums[1]);
    require(u >= 1 && v >= 1 && static_cast<std::size_t>(u) <= n_nodes &&
                static_cast<std::size_t>(v) <= n_nodes,
            ErrorCode::kFormat, a_path.string() + ":" + std::to_string(k + 1) + ": node id out of range");
    const std::size_t ui = static_cast<std::size_t>(u - 1);
    const std::size_t vi = static_cast<std::size_t>(v - 1);
    require(graph_of[ui] == graph_of[vi], ErrorCode::kFormat,
            a_path.string() + ":" + std::to_string(k + 1) + ": edge joins nodes of different graphs");
    if (ui == vi) continue;
    const std::size_t g = graph_of[ui];
    adj[g](ui - first[g], vi - first[g]) = 1.0;
    adj[g](vi - first[g], ui - first[g]) = 1.0;
  }

  Dataset ds;
  ds.name = name;
  ds.num_classes = static_cast<int>(label_index.size());
  ds.feature_policy = policy;
  for (std::size_t g = 0; g < n_graphs; ++g) {
    const std::size_t n = first[g + 1] - first[g];
    num::Matrix f(n, features.cols());
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t c = 0; c < features.cols(); ++c) f(v, c) = features(first[g] + v, c);
    ds.graphs.emplace_back(std::move(adj[g]), std::move(f), std::vector<NodeId>{},
                           label_index[raw_labels[g]]);
  }
  return ds;
}

void write_tu_dataset(const Dataset& ds, const fs::path& directory) {
  fs::create_directories(directory);
  auto open = [&](const char* suffix) {
    const auto path = tu_file(directory, ds.name, suffix);
    std::ofstream out(path);
    if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
    out.precision(17);
    return out;
  };
  auto a = open("A");
  auto ind = open("graph_indicator");
  auto gl = open("graph_labels");
  auto na = open("node_attributes");
  std::size_t offset = 0;
  for (std::size_t g = 0; g < ds.graphs.size(); ++g) {
    const Graph& gr = ds.graphs[g];
    for (std::size_t i = 0; i < gr.size(); ++i) {
      for (std::size_t j = 0; j < gr.size(); ++j)
        if (gr.has_edge(i, j)) a << (offset + i + 1) << ", " << (offset + j + 1) << "\n";
      ind << (g + 1) << "\n";
      for (std::size_t c = 0; c < gr.feature_dim(); ++c)
        na << (c ? ", " : "") << gr.features()(i, c);
      na << "\n";
    }
    gl << ds.label(g) << "\n";
    offset += gr.size();
  }
}

Dataset load_ground_truth_masks(Dataset ds, const fs::path& sidecar) {
  std::ifstream in(sidecar);
  if (!in) fail(ErrorCode::kIo, "cannot open " + sidecar.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  require(lines.size() == ds.size(), ErrorCode::kFormat,
          sidecar.string() + ": expected " + std::to_string(ds.size()) + " lines, found " +
              std::to_string(lines.size()));
  ds.gt_instance_masks.assign(ds.size(), std::nullopt);
  for (std::size_t g = 0; g < lines.size(); ++g) {
    std::istringstream is(lines[g]);
    std::vector<NodeId> ids;
    std::string tok;
    while (is >> tok) {
      long v = -1;
      try {
        std::size_t used = 0;
        v = std::stol(tok, &used);
        if (used != tok.size()) v = -1;
      } catch (const std::exception&) {
        v = -1;
      }
      require(v >= 0 && static_cast<std::size_t>(v) < ds.graphs[g].size(), ErrorCode::kFormat,
              sidecar.string() + ":" + std::to_string(g + 1) + ": node id '" + tok +
                  "' out of range for a graph of " + std::to_string(ds.graphs[g].size()) + " nodes");
      ids.push_back(static_cast<NodeId>(v));
    }
    if (!ids.empty()) ds.gt_instance_masks[g] = NodeSet(std::move(ids), g);
  }
  return ds;
}

void write_ground_truth_masks(const Dataset& ds, const fs::path& sidecar) {
  std::ofstream out(sidecar);
  if (!out) fail(ErrorCode::kIo, "cannot write " + sidecar.string());
  for (std::size_t g = 0; g < ds.size(); ++g) {
    if (g < ds.gt_instance_masks.size() && ds.gt_instance_masks[g]) {
      const auto& ids = ds.gt_instance_masks[g]->ids();
      for (std::size_t k = 0; k < ids.size(); ++k) out << (k ? " " : "") << ids[k];
    }
    out << "\n";
  }
}

}  // namespace xgkn::data
