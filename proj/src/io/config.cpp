#include "clot/io/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

namespace clot::io {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t idx = 0;
    const double v = std::stod(value, &idx);
    if (idx != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw FormatError("config: value for '" + key + "' is not a number: " + value);
  }
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    std::size_t idx = 0;
    const long v = std::stol(value, &idx);
    if (idx != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw FormatError("config: value for '" + key + "' is not an integer: " + value);
  }
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  const long v = parse_long(key, value);
  if (v < 0) throw FormatError("config: value for '" + key + "' must be nonnegative: " + value);
  return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw FormatError("config: value for '" + key + "' must be true/false: " + value);
}

}  // namespace

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config: line " + std::to_string(line_no) + " is not key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw FormatError("config: line " + std::to_string(line_no) + " has empty key or value");
    if (!kv.emplace(key, value).second)
      throw FormatError("config: duplicate key '" + key + "'");
  }
  return kv;
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("config: cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_kv_text(text);
}

pipeline::TrainConfig make_train_config(const std::map<std::string, std::string>& kv) {
  pipeline::TrainConfig cfg;
  std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters;

  auto count_key = [&](const char* key, std::size_t& field) {
    setters[key] = [&field](const std::string& k, const std::string& v) {
      field = parse_count(k, v);
    };
  };
  auto double_key = [&](const char* key, double& field) {
    setters[key] = [&field](const std::string& k, const std::string& v) {
      field = parse_double(k, v);
    };
  };
  auto bool_key = [&](const char* key, bool& field) {
    setters[key] = [&field](const std::string& k, const std::string& v) {
      field = parse_bool(k, v);
    };
  };

  count_key("epochs", cfg.epochs);
  count_key("batch_size", cfg.batch_size);
  count_key("frames_per_video", cfg.frames_per_video);
  double_key("lr", cfg.lr);
  double_key("weight_decay", cfg.weight_decay);
  double_key("dropout", cfg.dropout);
  double_key("rho", cfg.rho);
  double_key("rho_s", cfg.rho_s);
  double_key("nr_fraction", cfg.nr_fraction);
  setters["nseg"] = [&cfg](const std::string& k, const std::string& v) {
    cfg.nseg = parse_long(k, v);
  };
  count_key("p_factor", cfg.p_factor);
  double_key("tau", cfg.tau);
  setters["seed"] = [&cfg](const std::string& k, const std::string& v) {
    cfg.seed = static_cast<std::uint64_t>(parse_long(k, v));
  };
  count_key("k", cfg.k_actions);
  count_key("hidden_dim", cfg.hidden_dim);
  count_key("embed_dim", cfg.embed_dim);
  count_key("dec_dim", cfg.dec_dim);
  count_key("layers", cfg.layers);
  count_key("heads", cfg.heads);
  bool_key("use_swd_stage3", cfg.use_swd_stage3);
  bool_key("detach_s_in_refine", cfg.detach_s_in_refine);
  bool_key("eval_subsample", cfg.eval_subsample);

  // OT settings: bare keys hit all stages, stageN_ prefixes one stage.
  ot::OtConfig* stages[3] = {&cfg.stage1, &cfg.stage2, &cfg.stage3};
  auto ot_double = [&](const char* name, double ot::OtConfig::* field) {
    setters[name] = [stages, field](const std::string& k, const std::string& v) {
      for (auto* s : stages) s->*field = parse_double(k, v);
    };
    for (int i = 0; i < 3; ++i) {
      const std::string key = "stage" + std::to_string(i + 1) + "_" + name;
      ot::OtConfig* stage = stages[i];
      setters[key] = [stage, field](const std::string& k, const std::string& v) {
        stage->*field = parse_double(k, v);
      };
    }
  };
  auto ot_count = [&](const char* name, std::size_t ot::OtConfig::* field) {
    setters[name] = [stages, field](const std::string& k, const std::string& v) {
      for (auto* s : stages) s->*field = parse_count(k, v);
    };
    for (int i = 0; i < 3; ++i) {
      const std::string key = "stage" + std::to_string(i + 1) + "_" + name;
      ot::OtConfig* stage = stages[i];
      setters[key] = [stage, field](const std::string& k, const std::string& v) {
        stage->*field = parse_count(k, v);
      };
    }
  };
  ot_double("alpha", &ot::OtConfig::alpha);
  ot_double("epsilon", &ot::OtConfig::epsilon);
  ot_double("lambda", &ot::OtConfig::lambda);
  ot_double("tol", &ot::OtConfig::tol);
  ot_count("outer_iters", &ot::OtConfig::outer_iters);
  ot_count("inner_iters", &ot::OtConfig::inner_iters);

  // Ordered application: bare keys first so stage overrides win.
  for (const auto& [key, value] : kv) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw FormatError("config: unknown key '" + key + "'");
    if (key.rfind("stage", 0) == 0) continue;
    it->second(key, value);
  }
  for (const auto& [key, value] : kv) {
    if (key.rfind("stage", 0) != 0) continue;
    setters.at(key)(key, value);
  }
  return cfg;
}

SyntheticSpec make_synthetic_spec(const std::map<std::string, std::string>& kv) {
  SyntheticSpec spec;
  for (const auto& [key, value] : kv) {
    if (key == "k_actions") spec.k_actions = parse_count(key, value);
    else if (key == "n_videos") spec.n_videos = parse_count(key, value);
    else if (key == "frames_per_video") spec.frames_per_video = parse_count(key, value);
    else if (key == "feature_dim") spec.feature_dim = parse_count(key, value);
    else if (key == "noise_sigma") spec.noise_sigma = parse_double(key, value);
    else if (key == "min_segment") spec.min_segment = parse_count(key, value);
    else if (key == "max_segment") spec.max_segment = parse_count(key, value);
    else if (key == "ordering") {
      if (value != "fixed" && value != "permuted" && value != "markov")
        throw FormatError("config: ordering must be fixed|permuted|markov, got " + value);
      spec.ordering = value;
    } else if (key == "background_fraction") spec.background_fraction = parse_double(key, value);
    else if (key == "seed") spec.seed = static_cast<std::uint64_t>(parse_long(key, value));
    else throw FormatError("config: unknown key '" + key + "'");
  }
  if (spec.k_actions < 1 || spec.n_videos < 1 || spec.frames_per_video < 1 ||
      spec.feature_dim < 1)
    throw ParamError("synthetic spec: counts must be >= 1");
  if (spec.noise_sigma < 0.0) throw ParamError("synthetic spec: noise_sigma must be >= 0");
  if (spec.min_segment < 1 || spec.max_segment < spec.min_segment)
    throw ParamError("synthetic spec: need max_segment >= min_segment >= 1");
  if (spec.background_fraction < 0.0 || spec.background_fraction >= 1.0)
    throw ParamError("synthetic spec: background_fraction must be in [0,1)");
  return spec;
}

}  // namespace clot::io
