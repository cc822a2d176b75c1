#pragma once

// Checkpoint and CSV formats. Floats are written with 17 significant digits
// so every file round-trips value-exactly.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "l3rs/bench.hpp"
#include "l3rs/controller.hpp"
#include "l3rs/error.hpp"
#include "l3rs/inner_loop.hpp"
#include "l3rs/nes.hpp"
#include "l3rs/nn.hpp"

namespace l3rs {

using json = nlohmann::json;

inline constexpr int kCheckpointFormatVersion = 1;

inline std::string format_double(double x) {
  if (x == 0.0) return std::signbit(x) ? "-0.0" : "0";
  if (!std::isfinite(x)) throw ConfigError("cannot serialize a non-finite value");
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string format_array(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += format_double(v[i]);
  }
  return s + "]";
}

inline std::vector<double> read_double_array(const json& j) {
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(x.get<double>());
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline json parse_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Meta-parameter checkpoints

inline std::string layout_json_text(const Layout& layout) {
  std::string kinds;
  for (std::size_t i = 0; i < layout.kinds.size(); ++i) {
    if (i) kinds += ",";
    kinds += "\"" + std::string(to_string(layout.kinds[i])) + "\"";
  }
  return "{\"P\":" + std::to_string(layout.num_dirs()) + ",\"L\":" + std::to_string(layout.num_components) +
         ",\"num_gammas\":" + std::to_string(layout.gammas.size()) + ",\"gammas\":" + format_array(layout.gammas) +
         ",\"variant\":\"" + std::string(to_string(layout.variant)) + "\",\"base_optimizers\":[" + kinds +
         "],\"renormalize\":" + (layout.renormalize ? "true" : "false") + "}";
}

inline Layout layout_from_json(const json& j) {
  Layout l;
  l.kinds.clear();
  for (const auto& k : j.at("base_optimizers")) l.kinds.push_back(parse_optimizer_kind(k.get<std::string>()));
  l.num_components = j.at("L").get<std::size_t>();
  l.gammas = read_double_array(j.at("gammas"));
  l.variant = parse_variant(j.at("variant").get<std::string>());
  l.renormalize = j.value("renormalize", false);
  if (j.at("P").get<std::size_t>() != l.kinds.size() || j.at("num_gammas").get<std::size_t>() != l.gammas.size()) {
    throw ConfigError("layout descriptor is inconsistent");
  }
  return l;
}

struct PsiCheckpoint {
  Layout layout;
  std::int64_t generation = 0;
  std::string config_hash;
  std::vector<GenerationRecord> history;
  std::vector<double> psi;
};

inline std::string psi_checkpoint_text(const PsiCheckpoint& c) {
  std::string s = "{\n";
  s += "  \"format_version\": " + std::to_string(kCheckpointFormatVersion) + ",\n";
  s += "  \"layout\": " + layout_json_text(c.layout) + ",\n";
  s += "  \"generation\": " + std::to_string(c.generation) + ",\n";
  s += "  \"config_hash\": \"" + c.config_hash + "\",\n";
  s += "  \"history\": [";
  for (std::size_t i = 0; i < c.history.size(); ++i) {
    const auto& h = c.history[i];
    s += (i ? ",\n    [" : "\n    [") + std::to_string(h.generation) + "," + format_double(h.mean_fitness) + "," +
         format_double(h.best_fitness) + "," + format_double(h.alpha) + "," + format_double(h.sigma) + "]";
  }
  s += c.history.empty() ? "],\n" : "\n  ],\n";
  s += "  \"psi\": " + format_array(c.psi) + "\n}\n";
  return s;
}

inline PsiCheckpoint psi_checkpoint_from_json(const json& j) {
  if (j.at("format_version").get<int>() != kCheckpointFormatVersion) {
    throw ConfigError("unsupported checkpoint format_version");
  }
  PsiCheckpoint c;
  c.layout = layout_from_json(j.at("layout"));
  c.generation = j.value("generation", std::int64_t{0});
  c.config_hash = j.value("config_hash", std::string{});
  if (j.contains("history")) {
    for (const auto& h : j.at("history")) {
      c.history.push_back({h.at(0).get<std::int64_t>(), h.at(1).get<double>(), h.at(2).get<double>(),
                           h.at(3).get<double>(), h.at(4).get<double>()});
    }
  }
  c.psi = read_double_array(j.at("psi"));
  if (c.psi.size() != c.layout.flat_size()) throw ConfigError("checkpoint psi length does not match its layout");
  return c;
}

inline void save_psi_checkpoint(const std::filesystem::path& path, const PsiCheckpoint& c) {
  write_text_file(path, psi_checkpoint_text(c));
}

inline PsiCheckpoint load_psi_checkpoint(const std::filesystem::path& path) {
  try {
    return psi_checkpoint_from_json(parse_json_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// Loads a checkpoint and checks it against the layout the caller expects.
inline PsiCheckpoint load_psi_checkpoint(const std::filesystem::path& path, const Layout& expected) {
  auto c = load_psi_checkpoint(path);
  if (!(c.layout == expected)) {
    throw ConfigError(path.string() + ": checkpoint layout " + layout_json_text(c.layout) +
                      " does not match configured layout " + layout_json_text(expected));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Model weight checkpoints

inline std::string params_checkpoint_text(const NetworkSpec& spec, const ParamSet& p, const std::string& metrics) {
  std::string s = "{\n  \"format_version\": " + std::to_string(kCheckpointFormatVersion) + ",\n";
  s += "  \"network\": {\"input_dim\":" + std::to_string(spec.input_dim) + ",\"hidden\":[";
  for (std::size_t i = 0; i < spec.hidden.size(); ++i) s += (i ? "," : "") + std::to_string(spec.hidden[i]);
  s += "],\"output_dim\":" + std::to_string(spec.output_dim) + "},\n";
  if (!metrics.empty()) s += "  \"metrics\": " + metrics + ",\n";
  s += "  \"components\": [";
  for (std::size_t c = 0; c < p.size(); ++c) {
    const auto& comp = p.components[c];
    s += c ? ",\n    {" : "\n    {";
    s += "\"name\":\"" + comp.id.name + "\",\"shape\":[";
    for (std::size_t d = 0; d < comp.value.shape.size(); ++d) s += (d ? "," : "") + std::to_string(comp.value.shape[d]);
    s += "],\"data\":" + format_array(comp.value.data) + "}";
  }
  s += "\n  ]\n}\n";
  return s;
}

struct ParamsCheckpoint {
  NetworkSpec spec;
  ParamSet params;
};

inline ParamsCheckpoint load_params_checkpoint(const std::filesystem::path& path) {
  try {
    const json j = parse_json_file(path);
    ParamsCheckpoint out;
    const auto& n = j.at("network");
    out.spec.input_dim = n.at("input_dim").get<std::size_t>();
    out.spec.hidden = n.at("hidden").get<std::vector<std::size_t>>();
    out.spec.output_dim = n.at("output_dim").get<std::size_t>();
    out.params = zero_params(out.spec);
    const auto& comps = j.at("components");
    if (comps.size() != out.params.size()) throw ConfigError("component count does not match network");
    for (std::size_t c = 0; c < comps.size(); ++c) {
      if (comps[c].at("name").get<std::string>() != out.params.components[c].id.name) {
        throw ConfigError("unexpected component name");
      }
      out.params[c] = Tensor(comps[c].at("shape").get<std::vector<std::size_t>>(), read_double_array(comps[c].at("data")));
      if (!out.params[c].same_shape(zero_params(out.spec)[c])) throw ConfigError("component shape mismatch");
    }
    return out;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV

inline std::string history_csv(const std::vector<GenerationRecord>& history) {
  std::string s = "generation,mean_fitness,best_fitness,alpha,sigma\n";
  for (const auto& h : history) {
    s += std::to_string(h.generation) + "," + format_double(h.mean_fitness) + "," + format_double(h.best_fitness) +
         "," + format_double(h.alpha) + "," + format_double(h.sigma) + "\n";
  }
  return s;
}

inline std::string report_csv(const EvalReport& r) {
  std::string s = "optimizer,K,n_tasks,mean_acc,std_acc,mean_loss,std_loss\n";
  for (const auto& c : r.cells) {
    const auto a = c.acc_stats();
    const auto l = c.loss_stats();
    s += c.optimizer + "," + std::to_string(c.K) + "," + std::to_string(c.accuracy.size()) + "," +
         format_double(a.mean) + "," + format_double(a.std) + "," + format_double(l.mean) + "," +
         format_double(l.std) + "\n";
  }
  return s;
}

inline std::string per_task_csv(const EvalReport& r) {
  std::string s = "optimizer,K,task_index,task_seed,acc,loss\n";
  for (const auto& c : r.cells) {
    for (std::size_t i = 0; i < c.accuracy.size(); ++i) {
      s += c.optimizer + "," + std::to_string(c.K) + "," + std::to_string(i) + "," + std::to_string(c.task_seeds[i]) +
           "," + format_double(c.accuracy[i]) + "," + format_double(c.loss[i]) + "\n";
    }
  }
  return s;
}

inline std::string trajectory_csv(const TrajectoryLog& log, std::size_t P) {
  std::string s = "step,component";
  for (std::size_t p = 0; p < P; ++p) s += ",mu_" + std::to_string(p);
  s += ",lambda,loss\n";
  for (const auto& r : log.rows) {
    s += std::to_string(r.step) + "," + std::to_string(r.component);
    for (std::size_t p = 0; p < P; ++p) s += "," + (p < r.mu.size() ? format_double(r.mu[p]) : std::string("0"));
    s += "," + format_double(r.lambda) + "," + format_double(r.loss) + "\n";
  }
  return s;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string s = "base_set,variant,gammas,K,meta_params,mean_acc,std_acc,mean_loss,std_loss,components_identical\n";
  for (const auto& r : rows) {
    s += r.base_set + "," + r.variant + "," + r.gammas + "," + std::to_string(r.K) + "," +
         std::to_string(r.meta_params) + "," + format_double(r.acc.mean) + "," + format_double(r.acc.std) + "," +
         format_double(r.loss.mean) + "," + format_double(r.loss.std) + "," +
         (r.components_identical ? "true" : "false") + "\n";
  }
  return s;
}

// Minimal reader for the comma-separated files written above (no quoting).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ConfigError("CSV has no column '" + name + "'");
  }
};

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      t.rows.push_back(std::move(fields));
    }
  }
  return t;
}

}  // namespace l3rs
