#include "driftgate/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "driftgate/error.hpp"

namespace driftgate {

namespace {

class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  void check_keys(const std::set<std::string>& allowed) const {
    if (!table_) return;
    for (const auto& [key, value] : *table_) {
      if (!allowed.contains(std::string(key.str()))) {
        throw InputError("unknown key '" + std::string(key.str()) + "' in [" + name_ + "]");
      }
    }
  }

  const toml::node* get(const char* key) const { return table_ ? table_->get(key) : nullptr; }

  std::string where(const char* key) const { return "[" + name_ + "]." + key; }

  template <typename T>
  void read_int(const char* key, T& out, std::int64_t min) const {
    const toml::node* n = get(key);
    if (!n) return;
    const auto v = n->value_exact<std::int64_t>();
    if (!v) throw InputError(where(key) + " must be an integer");
    if (*v < min) throw InputError(where(key) + " must be >= " + std::to_string(min));
    out = static_cast<T>(*v);
  }

  void read_real(const char* key, double& out) const {
    const toml::node* n = get(key);
    if (!n) return;
    const auto v = n->value<double>();
    if (!v) throw InputError(where(key) + " must be a number");
    out = *v;
  }

  void read_bool(const char* key, bool& out) const {
    const toml::node* n = get(key);
    if (!n) return;
    const auto v = n->value_exact<bool>();
    if (!v) throw InputError(where(key) + " must be a boolean");
    out = *v;
  }

  void read_string(const char* key, std::string& out) const {
    const toml::node* n = get(key);
    if (!n) return;
    const auto v = n->value_exact<std::string>();
    if (!v) throw InputError(where(key) + " must be a string");
    out = *v;
  }

  template <typename T, typename Convert>
  void read_list(const char* key, std::vector<T>& out, Convert convert) const {
    const toml::node* n = get(key);
    if (!n) return;
    const toml::array* arr = n->as_array();
    if (!arr) throw InputError(where(key) + " must be an array");
    std::vector<T> values;
    for (const auto& item : *arr) values.push_back(convert(item, where(key)));
    out = std::move(values);
  }

 private:
  const toml::table* table_;
  std::string name_;
};

std::int64_t as_integer(const toml::node& n, const std::string& where) {
  const auto v = n.value_exact<std::int64_t>();
  if (!v) throw InputError(where + " entries must be integers");
  return *v;
}

double as_real(const toml::node& n, const std::string& where) {
  const auto v = n.value<double>();
  if (!v) throw InputError(where + " entries must be numbers");
  return *v;
}

const toml::table* section(const toml::table& root, const char* name) {
  const toml::node* n = root.get(name);
  if (!n) return nullptr;
  const toml::table* t = n->as_table();
  if (!t) throw InputError(std::string("'") + name + "' must be a table");
  return t;
}

}  // namespace

AlphaPolicy parse_alpha_policy(std::string_view text) {
  constexpr std::string_view lw = "ledoit-wolf";
  if (text.substr(0, lw.size()) == lw) {
    LedoitWolfAlpha policy;
    std::string_view rest = text.substr(lw.size());
    if (rest.empty()) return policy;
    if (rest.front() != ':') throw InputError("bad alpha policy '" + std::string(text) + "'");
    rest.remove_prefix(1);
    const auto [ptr, ec] =
        std::from_chars(rest.data(), rest.data() + rest.size(), policy.reservoir_capacity);
    if (ec != std::errc{} || ptr != rest.data() + rest.size() || policy.reservoir_capacity == 0) {
      throw InputError("bad reservoir capacity in '" + std::string(text) + "'");
    }
    return policy;
  }
  double alpha = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), alpha);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InputError("alpha must be 'ledoit-wolf' or a number, got '" + std::string(text) + "'");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("alpha must lie in [0, 1]");
  return FixedAlpha{alpha};
}

ExperimentConfig parse_config(std::string_view text, const std::string& name) {
  toml::table root;
  try {
    root = toml::parse(text, name);
  } catch (const toml::parse_error& e) {
    const auto& begin = e.source().begin;
    throw FormatError(FormatError::Kind::Malformed,
                      name + ":" + std::to_string(begin.line) + ":" + std::to_string(begin.column) +
                          ": " + std::string(e.description()));
  }

  for (const auto& [key, value] : root) {
    static const std::set<std::string> known{"stats", "pipeline", "sweep", "synthetic"};
    if (!known.contains(std::string(key.str()))) {
      throw InputError("unknown section '" + std::string(key.str()) + "'");
    }
  }

  ExperimentConfig config;

  const Section stats(section(root, "stats"), "stats");
  stats.check_keys({"dim", "m0", "sigma", "seed", "alpha", "reservoir"});
  stats.read_int("dim", config.stats.dim, 1);
  stats.read_int("m0", config.stats.init.samples, 2);
  stats.read_real("sigma", config.stats.init.sigma);
  if (!(config.stats.init.sigma >= 0.0)) throw InputError("[stats].sigma must be >= 0");
  stats.read_int("seed", config.stats.init.seed, 0);
  if (const toml::node* a = stats.get("alpha")) {
    if (auto s = a->value_exact<std::string>()) {
      if (*s != "ledoit-wolf") throw InputError("[stats].alpha must be \"ledoit-wolf\" or a number");
      config.stats.policy = LedoitWolfAlpha{};
    } else if (auto v = a->value<double>()) {
      if (!(*v >= 0.0 && *v <= 1.0)) throw InputError("[stats].alpha must lie in [0, 1]");
      config.stats.policy = FixedAlpha{*v};
    } else {
      throw InputError("[stats].alpha must be \"ledoit-wolf\" or a number");
    }
  }
  if (stats.get("reservoir")) {
    auto* lw = std::get_if<LedoitWolfAlpha>(&config.stats.policy);
    if (!lw) throw InputError("[stats].reservoir only applies to alpha = \"ledoit-wolf\"");
    stats.read_int("reservoir", lw->reservoir_capacity, 1);
  }

  const Section pipeline(section(root, "pipeline"), "pipeline");
  pipeline.check_keys({"threshold", "input"});
  pipeline.read_real("threshold", config.pipeline.threshold);
  if (!(config.pipeline.threshold > 0.0)) throw InputError("[pipeline].threshold must be positive");
  pipeline.read_string("input", config.pipeline.input);

  const Section sweep(section(root, "sweep"), "sweep");
  sweep.check_keys({"redundancy_factors", "thresholds", "seeds", "shuffle", "pair_budget"});
  sweep.read_list("redundancy_factors", config.redundancy_factors,
                  [](const toml::node& n, const std::string& w) {
                    const auto v = as_integer(n, w);
                    if (v < 1) throw InputError(w + " entries must be >= 1");
                    return static_cast<std::uint32_t>(v);
                  });
  sweep.read_list("thresholds", config.thresholds, as_real);
  sweep.read_list("seeds", config.seeds, [](const toml::node& n, const std::string& w) {
    const auto v = as_integer(n, w);
    if (v < 0) throw InputError(w + " entries must be >= 0");
    return static_cast<std::uint64_t>(v);
  });
  sweep.read_bool("shuffle", config.shuffle);
  if (const toml::node* b = sweep.get("pair_budget")) {
    if (auto s = b->value_exact<std::string>(); s && *s == "all") {
      config.pair_budget.reset();
    } else {
      std::uint64_t budget = 0;
      sweep.read_int("pair_budget", budget, 1);
      config.pair_budget = budget;
    }
  }

  if (const toml::table* t = section(root, "synthetic")) {
    const Section synth(t, "synthetic");
    synth.check_keys({"records", "dim", "classes", "center_scale", "spread", "imbalance",
                      "patches_per_frame", "seed"});
    SyntheticSpec spec;
    spec.dim = config.stats.dim;
    synth.read_int("records", spec.records, 0);
    synth.read_int("dim", spec.dim, 1);
    synth.read_int("classes", spec.classes, 1);
    synth.read_real("center_scale", spec.center_scale);
    synth.read_real("spread", spec.spread);
    synth.read_real("imbalance", spec.imbalance);
    synth.read_int("patches_per_frame", spec.patches_per_frame, 1);
    synth.read_int("seed", spec.seed, 0);
    if (spec.dim != config.stats.dim) {
      if (stats.get("dim")) {
        throw InputError("[synthetic].dim differs from [stats].dim");
      }
      config.stats.dim = spec.dim;
    }
    if (!(spec.imbalance > 0.0)) throw InputError("[synthetic].imbalance must be positive");
    if (!(spec.spread >= 0.0) || !(spec.center_scale >= 0.0)) {
      throw InputError("[synthetic] spread and center_scale must be >= 0");
    }
    config.synthetic = spec;
  }

  validate(config);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

}  // namespace driftgate
