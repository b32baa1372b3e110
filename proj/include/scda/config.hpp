#pragma once

// Run configuration: a TOML-style document with one section per module.
// Supported subset: [section] headers, key = value lines, '#' comments,
// integers, floats, booleans, double-quoted strings and single-line arrays
// of scalars. Unknown sections or keys are rejected so typos cannot
// silently fall back to defaults.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "scda/harness.hpp"
#include "scda/io.hpp"
#include "scda/report.hpp"
#include "scda/stain.hpp"
#include "scda/synth.hpp"
#include "scda/trainer.hpp"

namespace scda {

struct ConfigValue {
  enum class Kind { Int, Float, Bool, Str, Array };
  Kind kind = Kind::Int;
  std::int64_t int_value = 0;
  double float_value = 0.0;
  bool bool_value = false;
  std::string str_value;
  std::vector<ConfigValue> array;

  std::int64_t as_int(const std::string& where) const {
    require(kind == Kind::Int, ErrorCode::BadConfig, where + " must be an integer");
    return int_value;
  }
  double as_double(const std::string& where) const {
    if (kind == Kind::Int) return static_cast<double>(int_value);
    require(kind == Kind::Float, ErrorCode::BadConfig, where + " must be a number");
    return float_value;
  }
  bool as_bool(const std::string& where) const {
    require(kind == Kind::Bool, ErrorCode::BadConfig, where + " must be a boolean");
    return bool_value;
  }
  const std::string& as_str(const std::string& where) const {
    require(kind == Kind::Str, ErrorCode::BadConfig, where + " must be a string");
    return str_value;
  }
  std::vector<int> as_int_array(const std::string& where) const {
    require(kind == Kind::Array, ErrorCode::BadConfig, where + " must be an array");
    std::vector<int> out;
    for (const auto& v : array)
      out.push_back(static_cast<int>(v.as_int(where + " element")));
    return out;
  }
  std::vector<std::string> as_str_array(const std::string& where) const {
    require(kind == Kind::Array, ErrorCode::BadConfig, where + " must be an array");
    std::vector<std::string> out;
    for (const auto& v : array) out.push_back(v.as_str(where + " element"));
    return out;
  }
};

using ConfigDoc = std::map<std::string, std::map<std::string, ConfigValue>>;

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

inline ConfigValue parse_scalar(const std::string& tok, int line_no) {
  const std::string where = "config line " + std::to_string(line_no);
  ConfigValue v;
  if (tok == "true" || tok == "false") {
    v.kind = ConfigValue::Kind::Bool;
    v.bool_value = tok == "true";
    return v;
  }
  if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"') {
    v.kind = ConfigValue::Kind::Str;
    for (std::size_t i = 1; i + 1 < tok.size(); ++i) {
      if (tok[i] == '\\' && i + 2 < tok.size()) ++i;
      v.str_value.push_back(tok[i]);
    }
    return v;
  }
  const bool looks_float = tok.find_first_of(".eE") != std::string::npos &&
                           tok.find_first_not_of("+-0123456789") != std::string::npos;
  if (!looks_float) {
    std::int64_t out = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    require(res.ec == std::errc() && res.ptr == tok.data() + tok.size(),
            ErrorCode::BadConfig, where + ": cannot parse '" + tok + "'");
    v.kind = ConfigValue::Kind::Int;
    v.int_value = out;
    return v;
  }
  double out = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  require(res.ec == std::errc() && res.ptr == tok.data() + tok.size(),
          ErrorCode::BadConfig, where + ": cannot parse '" + tok + "'");
  v.kind = ConfigValue::Kind::Float;
  v.float_value = out;
  return v;
}

// Strips a trailing comment, respecting double-quoted strings.
inline std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

}  // namespace detail

inline ConfigDoc parse_config(const std::string& text) {
  ConfigDoc doc;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string line = text.substr(pos, eol == std::string::npos ? eol : eol - pos);
    pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    line = detail::trim(detail::strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', ErrorCode::BadConfig,
              "config line " + std::to_string(line_no) + ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      require(!section.empty(), ErrorCode::BadConfig,
              "config line " + std::to_string(line_no) + ": empty section name");
      doc[section];
      continue;
    }
    const std::size_t eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::BadConfig,
            "config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    require(!key.empty() && !value.empty(), ErrorCode::BadConfig,
            "config line " + std::to_string(line_no) + ": empty key or value");
    require(!section.empty(), ErrorCode::BadConfig,
            "config line " + std::to_string(line_no) + ": key outside any section");
    require(doc[section].count(key) == 0, ErrorCode::BadConfig,
            "duplicate key '" + key + "' in [" + section + "]");

    if (value.front() == '[') {
      require(value.back() == ']', ErrorCode::BadConfig,
              "config line " + std::to_string(line_no) + ": unterminated array");
      ConfigValue arr;
      arr.kind = ConfigValue::Kind::Array;
      std::string body = value.substr(1, value.size() - 2);
      std::size_t start = 0;
      bool in_str = false;
      for (std::size_t i = 0; i <= body.size(); ++i) {
        if (i < body.size() && body[i] == '"') in_str = !in_str;
        if (i == body.size() || (body[i] == ',' && !in_str)) {
          const std::string tok = detail::trim(body.substr(start, i - start));
          if (!tok.empty()) arr.array.push_back(detail::parse_scalar(tok, line_no));
          start = i + 1;
        }
      }
      doc[section][key] = std::move(arr);
    } else {
      doc[section][key] = detail::parse_scalar(value, line_no);
    }
  }
  return doc;
}

struct RunConfig {
  std::uint64_t seed = 42;
  SynthConfig synth;
  double train_fraction = 0.8;
  TrainConfig train;
  std::string fewshot_base_center;  // empty: first center of the dataset
  std::vector<int> fewshot_k = {2, 4, 6, 8, 10};
  int fewshot_n_seeds = 5;
  bool fewshot_zero_shot = true;
  bool fewshot_all = true;
  bool fewshot_shots_in_prototypes = true;
  stain::MacenkoParams stain_params;
};

inline void apply_config(const ConfigDoc& doc, RunConfig& cfg) {
  using Handler = std::function<void(const ConfigValue&, const std::string&)>;
  std::map<std::string, std::map<std::string, Handler>> schema;

  schema["global"]["seed"] = [&](const ConfigValue& v, const std::string& w) {
    const auto s = v.as_int(w);
    require(s >= 0, ErrorCode::BadConfig, w + " must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(s);
  };

  auto& synth = schema["synth"];
  synth["dim"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.synth.dim = static_cast<int>(v.as_int(w));
  };
  synth["n_classes"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.synth.n_classes = static_cast<int>(v.as_int(w));
  };
  synth["n_centers"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.synth.n_centers = static_cast<int>(v.as_int(w));
  };
  synth["slides_per_cell"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.synth.slides_per_cell = static_cast<int>(v.as_int(w));
  };
  synth["slides_per_cell_table"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.synth.slides_per_cell_table = v.as_int_array(w);
  };
  synth["patches_min"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.synth.patches_min = static_cast<int>(v.as_int(w));
  };
  synth["patches_max"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.synth.patches_max = static_cast<int>(v.as_int(w));
  };
  synth["class_separation_deg"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.synth.class_separation_deg = v.as_double(w);
  };
  synth["rotation_magnitude"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.synth.rotation_magnitude = v.as_double(w);
  };
  synth["translation_magnitude"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.synth.translation_magnitude = v.as_double(w);
  };
  synth["slide_jitter_sigma"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.synth.slide_jitter_sigma = v.as_double(w);
  };
  synth["patch_noise_sigma"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.synth.patch_noise_sigma = v.as_double(w);
  };
  synth["class_names"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.synth.class_names = v.as_str_array(w);
  };
  synth["center_names"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.synth.center_names = v.as_str_array(w);
  };

  schema["split"]["train_fraction"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.train_fraction = v.as_double(w);
  };

  auto& train = schema["train"];
  train["temperature"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.train.temperature = v.as_double(w);
  };
  train["learning_rate"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.train.learning_rate = v.as_double(w);
  };
  train["steps"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.train.steps = static_cast<int>(v.as_int(w));
  };
  train["adam_beta1"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.train.adam_beta1 = v.as_double(w);
  };
  train["adam_beta2"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.train.adam_beta2 = v.as_double(w);
  };
  train["adam_eps"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.train.adam_eps = v.as_double(w);
  };
  train["head"] = [&](const ConfigValue& v, const std::string& w) {
    const auto& s = v.as_str(w);
    require(s == "linear" || s == "mlp", ErrorCode::BadConfig,
            w + " must be \"linear\" or \"mlp\"");
    cfg.train.head_shape = s == "linear" ? HeadShape::Linear : HeadShape::Mlp;
  };
  train["hidden_dim"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.train.hidden_dim = static_cast<int>(v.as_int(w));
  };

  schema["sampler"]["quota"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.train.batch_spec.quota = static_cast<int>(v.as_int(w));
  };
  schema["sampler"]["allow_replacement"] = [&](const ConfigValue& v,
                                               const std::string& w) {
    cfg.train.batch_spec.allow_replacement = v.as_bool(w);
  };

  auto& fewshot = schema["fewshot"];
  fewshot["base_center"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.fewshot_base_center = v.as_str(w);
  };
  fewshot["k_values"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.fewshot_k = v.as_int_array(w);
  };
  fewshot["n_seeds"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.fewshot_n_seeds = static_cast<int>(v.as_int(w));
  };
  fewshot["include_zero_shot"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.fewshot_zero_shot = v.as_bool(w);
  };
  fewshot["include_all"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.fewshot_all = v.as_bool(w);
  };
  fewshot["shots_in_prototypes"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.fewshot_shots_in_prototypes = v.as_bool(w);
  };

  auto& st = schema["stain"];
  st["io_reference"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.stain_params.io_reference = v.as_double(w);
  };
  st["beta"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.stain_params.beta = v.as_double(w);
  };
  st["alpha"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.stain_params.alpha = v.as_double(w);
  };
  st["concentration_percentile"] = [&](const ConfigValue& v, const std::string& w) {
    cfg.stain_params.concentration_percentile = v.as_double(w);
  };

  for (const auto& [section, entries] : doc) {
    const auto sec_it = schema.find(section);
    require(sec_it != schema.end(), ErrorCode::BadConfig,
            "unknown config section [" + section + "]");
    for (const auto& [key, value] : entries) {
      const auto key_it = sec_it->second.find(key);
      require(key_it != sec_it->second.end(), ErrorCode::BadConfig,
              "unknown config key '" + key + "' in [" + section + "]");
      key_it->second(value, "[" + section + "]." + key);
    }
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig cfg;
  apply_config(parse_config(detail::read_file(path)), cfg);
  return cfg;
}

// Canonical serialization of the effective configuration; re-parsing this
// text reproduces the configuration value-for-value.
inline std::string dump_run_config(const RunConfig& cfg) {
  const auto str_array = [](const std::vector<std::string>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i)
      out += (i ? ", \"" : "\"") + v[i] + "\"";
    return out + "]";
  };
  const auto int_array = [](const std::vector<int>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i)
      out += (i ? ", " : "") + std::to_string(v[i]);
    return out + "]";
  };

  std::string out;
  out += "[global]\nseed = " + std::to_string(cfg.seed) + "\n\n";
  out += "[synth]\n";
  out += "dim = " + std::to_string(cfg.synth.dim) + "\n";
  out += "n_classes = " + std::to_string(cfg.synth.n_classes) + "\n";
  out += "n_centers = " + std::to_string(cfg.synth.n_centers) + "\n";
  out += "slides_per_cell = " + std::to_string(cfg.synth.slides_per_cell) + "\n";
  out += "slides_per_cell_table = " + int_array(cfg.synth.resolved_cell_table()) + "\n";
  out += "patches_min = " + std::to_string(cfg.synth.patches_min) + "\n";
  out += "patches_max = " + std::to_string(cfg.synth.patches_max) + "\n";
  out += "class_separation_deg = " + fmt_double(cfg.synth.class_separation_deg) + "\n";
  out += "rotation_magnitude = " + fmt_double(cfg.synth.rotation_magnitude) + "\n";
  out += "translation_magnitude = " + fmt_double(cfg.synth.translation_magnitude) + "\n";
  out += "slide_jitter_sigma = " + fmt_double(cfg.synth.slide_jitter_sigma) + "\n";
  out += "patch_noise_sigma = " + fmt_double(cfg.synth.patch_noise_sigma) + "\n";
  out += "class_names = " + str_array(cfg.synth.resolved_class_names()) + "\n";
  out += "center_names = " + str_array(cfg.synth.resolved_center_names()) + "\n\n";
  out += "[split]\ntrain_fraction = " + fmt_double(cfg.train_fraction) + "\n\n";
  out += "[train]\n";
  out += "temperature = " + fmt_double(cfg.train.temperature) + "\n";
  out += "learning_rate = " + fmt_double(cfg.train.learning_rate) + "\n";
  out += "steps = " + std::to_string(cfg.train.steps) + "\n";
  out += "adam_beta1 = " + fmt_double(cfg.train.adam_beta1) + "\n";
  out += "adam_beta2 = " + fmt_double(cfg.train.adam_beta2) + "\n";
  out += "adam_eps = " + fmt_double(cfg.train.adam_eps) + "\n";
  out += std::string("head = ") +
         (cfg.train.head_shape == HeadShape::Linear ? "\"linear\"" : "\"mlp\"") + "\n";
  out += "hidden_dim = " + std::to_string(cfg.train.hidden_dim) + "\n\n";
  out += "[sampler]\n";
  out += "quota = " + std::to_string(cfg.train.batch_spec.quota) + "\n";
  out += std::string("allow_replacement = ") +
         (cfg.train.batch_spec.allow_replacement ? "true" : "false") + "\n\n";
  out += "[fewshot]\n";
  out += "base_center = \"" + cfg.fewshot_base_center + "\"\n";
  out += "k_values = " + int_array(cfg.fewshot_k) + "\n";
  out += "n_seeds = " + std::to_string(cfg.fewshot_n_seeds) + "\n";
  out += std::string("include_zero_shot = ") + (cfg.fewshot_zero_shot ? "true" : "false") + "\n";
  out += std::string("include_all = ") + (cfg.fewshot_all ? "true" : "false") + "\n";
  out += std::string("shots_in_prototypes = ") +
         (cfg.fewshot_shots_in_prototypes ? "true" : "false") + "\n\n";
  out += "[stain]\n";
  out += "io_reference = " + fmt_double(cfg.stain_params.io_reference) + "\n";
  out += "beta = " + fmt_double(cfg.stain_params.beta) + "\n";
  out += "alpha = " + fmt_double(cfg.stain_params.alpha) + "\n";
  out += "concentration_percentile = " +
         fmt_double(cfg.stain_params.concentration_percentile) + "\n";
  return out;
}

}  // namespace scda
