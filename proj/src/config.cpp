#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "periodavg/errors.hpp"
#include "periodavg/experiment.hpp"

namespace pavg {

namespace {

using nlohmann::json;

// A JSON object whose keys must all be consumed. `path` prefixes error
// messages, e.g. "strategies[2].p".
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(describe("") + " must be an object");
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  const json& required(const std::string& key) {
    if (!node_.contains(key)) throw ConfigError("missing required key '" + describe(key) + "'");
    used_.insert(key);
    return node_.at(key);
  }

  const json* optional(const std::string& key) {
    if (!node_.contains(key)) return nullptr;
    used_.insert(key);
    return &node_.at(key);
  }

  std::string describe(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void reject_unknown() const {
    for (const auto& item : node_.items()) {
      if (!used_.count(item.key())) throw ConfigError("unknown key '" + describe(item.key()) + "'");
    }
  }

  template <typename T>
  T get(const std::string& key) {
    return convert<T>(required(key), describe(key));
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    const json* v = optional(key);
    return v ? convert<T>(*v, describe(key)) : fallback;
  }

  template <typename T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("'" + where + "' must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("'" + where + "' must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return v.get<T>();
        if (v.get<long long>() < 0) throw ConfigError("'" + where + "' must be non-negative");
      }
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("'" + where + "' must be a number");
      return v.get<T>();
    } else {
      if (!v.is_string()) throw ConfigError("'" + where + "' must be a string");
      return v.get<std::string>();
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename T>
void require_range(bool ok, const Section& s, const std::string& key, const std::string& rule) {
  if (!ok) throw ConfigError("'" + s.describe(key) + "' out of range: " + rule);
}

ModelSpec parse_model(const json& node) {
  Section s(node, "model");
  ModelSpec spec;
  const std::string kind = s.get<std::string>("kind");
  try {
    spec.kind = model_kind_from_string(kind);
  } catch (const UsageError&) {
    throw ConfigError("'model.kind' must be linear_regression_mse, logistic_regression or mlp");
  }
  if (const json* hidden = s.optional("hidden")) {
    if (spec.kind != ModelKind::kMlp) throw ConfigError("'model.hidden' is only valid for mlp");
    if (!hidden->is_array()) throw ConfigError("'model.hidden' must be a list of widths");
    for (const auto& w : *hidden) {
      const auto width = Section::convert<std::size_t>(w, "model.hidden");
      if (width == 0) throw ConfigError("'model.hidden' widths must be positive");
      spec.hidden.push_back(width);
    }
  }
  if (const json* classes = s.optional("num_classes")) {
    if (spec.kind != ModelKind::kMlp) throw ConfigError("'model.num_classes' is only valid for mlp");
    spec.num_classes = Section::convert<std::size_t>(*classes, "model.num_classes");
    if (spec.num_classes < 2) throw ConfigError("'model.num_classes' out of range: must be >= 2");
  }
  spec.l2_reg = s.get_or<double>("l2_reg", 0.0);
  if (!(spec.l2_reg >= 0.0)) throw ConfigError("'model.l2_reg' out of range: must be >= 0");
  s.reject_unknown();
  return spec;
}

TaskKind parse_task(const std::string& name, const std::string& where) {
  if (name == "regression") return TaskKind::kRegression;
  if (name == "classification") return TaskKind::kClassification;
  throw ConfigError("'" + where + "' must be regression or classification");
}

DatasetConfig parse_dataset(const json& node) {
  Section s(node, "dataset");
  DatasetConfig cfg;
  const bool has_synth = s.has("synthetic");
  const bool has_csv = s.has("csv");
  if (has_synth == has_csv) throw ConfigError("'dataset' needs exactly one of 'synthetic' or 'csv'");
  if (has_synth) {
    cfg.synthetic = true;
    Section syn(s.required("synthetic"), "dataset.synthetic");
    try {
      cfg.synthetic_spec.kind = synthetic_kind_from_string(syn.get<std::string>("kind"));
    } catch (const UsageError&) {
      throw ConfigError("'dataset.synthetic.kind' must be linreg_gaussian, two_gaussians or ring_classes");
    }
    cfg.synthetic_spec.n_samples = syn.get<std::size_t>("n_samples");
    cfg.synthetic_spec.input_dim = syn.get<std::size_t>("input_dim");
    cfg.synthetic_spec.noise = syn.get_or<double>("noise", 0.0);
    cfg.synthetic_spec.seed = syn.get_or<std::uint64_t>("seed", 0);
    cfg.synthetic_spec.num_classes = syn.get_or<std::size_t>("num_classes", 3);
    if (cfg.synthetic_spec.n_samples == 0) throw ConfigError("'dataset.synthetic.n_samples' out of range: must be >= 1");
    if (cfg.synthetic_spec.input_dim == 0) throw ConfigError("'dataset.synthetic.input_dim' out of range: must be >= 1");
    if (!(cfg.synthetic_spec.noise >= 0.0)) throw ConfigError("'dataset.synthetic.noise' out of range: must be >= 0");
    syn.reject_unknown();
    cfg.eval_samples = s.get_or<std::size_t>("eval_samples", 0);
  } else {
    cfg.synthetic = false;
    Section csv(s.required("csv"), "dataset.csv");
    cfg.csv_path = csv.get<std::string>("path");
    cfg.csv_schema.target_column = csv.get<std::string>("target_column");
    cfg.csv_schema.task = parse_task(csv.get<std::string>("task"), "dataset.csv.task");
    cfg.eval_csv_path = csv.get_or<std::string>("eval_path", "");
    csv.reject_unknown();
  }
  s.reject_unknown();
  return cfg;
}

LrSchedule parse_lr(const json& node) {
  Section s(node, "lr");
  LrSchedule sched;
  sched.base_lr = s.get<double>("base");
  if (!(sched.base_lr > 0.0)) throw ConfigError("'lr.base' out of range: must be > 0");
  if (const json* ms = s.optional("milestones")) {
    if (!ms->is_array()) throw ConfigError("'lr.milestones' must be a list of epochs");
    for (const auto& m : *ms) sched.milestones.push_back(Section::convert<int>(m, "lr.milestones"));
  }
  sched.decay_factor = s.get_or<double>("decay_factor", 0.1);
  sched.warmup_epochs = s.get_or<int>("warmup_epochs", 0);
  const std::string mode = s.get_or<std::string>("warmup_mode", sched.warmup_epochs > 0 ? "linear" : "none");
  if (mode == "none") {
    sched.warmup_mode = WarmupMode::kNone;
  } else if (mode == "linear") {
    sched.warmup_mode = WarmupMode::kLinear;
  } else {
    throw ConfigError("'lr.warmup_mode' must be none or linear");
  }
  s.reject_unknown();
  try {
    validate(sched);
  } catch (const UsageError& e) {
    throw ConfigError(std::string("'lr': ") + e.what());
  }
  return sched;
}

// Strategy keys that identify each variant.
const std::vector<std::pair<std::string, std::string>>& variant_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"p", "constant_period"},
      {"p_init", "adaptive_period"},
      {"segments", "piecewise_constant"},
      {"bits", "quantized"},
  };
  return keys;
}

std::string default_name(const SyncStrategy& strategy) {
  if (std::holds_alternative<FullSync>(strategy)) return "fullsync";
  if (const auto* c = std::get_if<ConstantPeriod>(&strategy)) return "cpsgd_p" + std::to_string(c->p);
  if (std::holds_alternative<AdaptivePeriod>(strategy)) return "adpsgd";
  if (std::holds_alternative<PiecewiseConstant>(strategy)) return "piecewise";
  return "qsgd_" + std::to_string(std::get<Quantized>(strategy).bits) + "bit";
}

StrategyConfig parse_strategy(const json& node, const std::string& path) {
  Section s(node, path);
  std::string kind;
  for (const auto& [key, variant] : variant_keys()) {
    if (!s.has(key)) continue;
    if (!kind.empty() && kind != variant) throw ConfigError("ambiguous strategy at '" + path + "'");
    kind = variant;
  }
  if (const json* type = s.optional("type")) {
    const std::string declared = Section::convert<std::string>(*type, s.describe("type"));
    static const std::set<std::string> known = {"full_sync", "constant_period", "adaptive_period",
                                                "piecewise_constant", "quantized"};
    if (!known.count(declared)) throw ConfigError("'" + s.describe("type") + "' is not a known strategy type");
    if (!kind.empty() && kind != declared) throw ConfigError("ambiguous strategy at '" + path + "'");
    kind = declared;
  }
  if (kind.empty()) kind = "full_sync";

  StrategyConfig out;
  if (kind == "full_sync") {
    out.strategy = FullSync{};
  } else if (kind == "constant_period") {
    ConstantPeriod c;
    c.p = s.get<int>("p");
    require_range<int>(c.p >= 1, s, "p", "must be >= 1");
    out.strategy = c;
  } else if (kind == "adaptive_period") {
    AdaptivePeriod a;
    a.p_init = s.get<int>("p_init");
    require_range<int>(a.p_init >= 1, s, "p_init", "must be >= 1");
    a.ks_fraction = s.get_or<double>("K_s_fraction", 0.25);
    require_range<double>(a.ks_fraction > 0.0 && a.ks_fraction < 1.0, s, "K_s_fraction", "must be in (0, 1)");
    a.band_low = s.get_or<double>("band_low", 0.7);
    a.band_high = s.get_or<double>("band_high", 1.3);
    require_range<double>(a.band_low > 0.0 && a.band_low < 1.0, s, "band_low", "must be in (0, 1)");
    require_range<double>(a.band_high > 1.0, s, "band_high", "must be > 1");
    a.warmup_epochs_p1 = s.get_or<int>("warmup_epochs_p1", 1);
    require_range<int>(a.warmup_epochs_p1 >= 0, s, "warmup_epochs_p1", "must be >= 0");
    out.strategy = a;
  } else if (kind == "piecewise_constant") {
    PiecewiseConstant pc;
    const json& segs = s.required("segments");
    if (!segs.is_array() || segs.empty()) throw ConfigError("'" + s.describe("segments") + "' must be a non-empty list");
    for (const auto& seg : segs) {
      if (!seg.is_array() || seg.size() != 2) {
        throw ConfigError("'" + s.describe("segments") + "' entries must be [start_epoch, p] pairs");
      }
      pc.segments.push_back(PeriodSegment{Section::convert<int>(seg[0], s.describe("segments")),
                                          Section::convert<int>(seg[1], s.describe("segments"))});
    }
    out.strategy = pc;
  } else {
    Quantized q;
    q.bits = s.get<int>("bits");
    require_range<int>(q.bits >= 2 && q.bits <= 8, s, "bits", "must be in [2, 8]");
    out.strategy = q;
  }
  try {
    validate(out.strategy);
  } catch (const ConfigError& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }

  out.name = s.get_or<std::string>("name", default_name(out.strategy));
  static const std::regex name_re("[A-Za-z0-9_.-]+");
  if (!std::regex_match(out.name, name_re)) {
    throw ConfigError("'" + s.describe("name") + "' may only contain letters, digits, '_', '-' and '.'");
  }
  s.reject_unknown();
  return out;
}

CostModel parse_cost(const json& node) {
  Section s(node, "cost_model");
  CostModel cost;
  cost.bandwidth_bytes_per_s = s.get_or<double>("bandwidth_bytes_per_s", cost.bandwidth_bytes_per_s);
  cost.latency_s = s.get_or<double>("latency_s", cost.latency_s);
  cost.bytes_per_scalar = s.get_or<std::size_t>("bytes_per_scalar", 4);
  require_range<double>(cost.bandwidth_bytes_per_s > 0.0, s, "bandwidth_bytes_per_s", "must be > 0");
  require_range<double>(cost.latency_s >= 0.0, s, "latency_s", "must be >= 0");
  require_range<std::size_t>(cost.bytes_per_scalar > 0, s, "bytes_per_scalar", "must be > 0");
  s.reject_unknown();
  return cost;
}

ExperimentConfig parse_root(const json& root) {
  Section s(root, "");
  ExperimentConfig cfg;
  cfg.model = parse_model(s.required("model"));
  cfg.dataset = parse_dataset(s.required("dataset"));
  // CSV feature counts are only known once the file is read.
  cfg.model.input_dim = cfg.dataset.synthetic ? cfg.dataset.synthetic_spec.input_dim : 0;

  cfg.n_workers = s.get<std::size_t>("n_workers");
  require_range<std::size_t>(cfg.n_workers >= 1, s, "n_workers", "must be >= 1");
  cfg.per_worker_batch = s.get<std::size_t>("per_worker_batch");
  require_range<std::size_t>(cfg.per_worker_batch >= 1, s, "per_worker_batch", "must be >= 1");
  cfg.epochs = s.get<int>("epochs");
  require_range<int>(cfg.epochs >= 1, s, "epochs", "must be >= 1");

  const json& seeds = s.required("seeds");
  if (!seeds.is_array() || seeds.empty()) throw ConfigError("'seeds' must be a non-empty list");
  for (const auto& seed : seeds) cfg.seeds.push_back(Section::convert<std::uint64_t>(seed, "seeds"));
  if (std::set<std::uint64_t>(cfg.seeds.begin(), cfg.seeds.end()).size() != cfg.seeds.size()) {
    throw ConfigError("'seeds' must not repeat");
  }

  cfg.schedule = parse_lr(s.required("lr"));
  cfg.momentum = s.get_or<double>("momentum", 0.9);
  require_range<double>(cfg.momentum >= 0.0 && cfg.momentum < 1.0, s, "momentum", "must be in [0, 1)");

  const bool single = s.has("strategy");
  const bool many = s.has("strategies");
  if (single == many) throw ConfigError("config needs exactly one of 'strategy' or 'strategies'");
  if (single) {
    cfg.strategies.push_back(parse_strategy(s.required("strategy"), "strategy"));
  } else {
    const json& list = s.required("strategies");
    if (!list.is_array() || list.empty()) throw ConfigError("'strategies' must be a non-empty list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      cfg.strategies.push_back(parse_strategy(list[i], "strategies[" + std::to_string(i) + "]"));
    }
  }
  std::set<std::string> names;
  for (const auto& st : cfg.strategies) {
    if (!names.insert(st.name).second) throw ConfigError("duplicate strategy name '" + st.name + "'");
  }

  if (const json* cost = s.optional("cost_model")) cfg.cost = parse_cost(*cost);
  cfg.cost.n = static_cast<int>(cfg.n_workers);
  cfg.eval_every = s.get_or<long>("eval_every", 100);
  require_range<long>(cfg.eval_every >= 1, s, "eval_every", "must be >= 1");
  cfg.output_dir = s.get_or<std::string>("output_dir", "output");
  cfg.worker_threads = s.get_or<std::size_t>("worker_threads", 1);
  require_range<std::size_t>(cfg.worker_threads >= 1, s, "worker_threads", "must be >= 1");
  s.reject_unknown();

  if (cfg.dataset.synthetic) {
    const auto& syn = cfg.dataset.synthetic_spec;
    const bool classification = syn.kind != SyntheticKind::kLinregGaussian;
    if (classification != is_classifier(cfg.model)) {
      throw ConfigError("'model.kind' does not match the task of 'dataset.synthetic.kind'");
    }
    if (cfg.n_workers * cfg.per_worker_batch > syn.n_samples) {
      throw ConfigError("'n_workers' * 'per_worker_batch' exceeds 'dataset.synthetic.n_samples'");
    }
  }
  return cfg;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_root(root);
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  ExperimentConfig cfg = parse_config_text(text.str());
  // Relative CSV paths are resolved against the config file's directory.
  if (!cfg.dataset.synthetic) {
    const auto slash = path.find_last_of('/');
    const std::string base = slash == std::string::npos ? "" : path.substr(0, slash + 1);
    if (!cfg.dataset.csv_path.empty() && cfg.dataset.csv_path.front() != '/') cfg.dataset.csv_path = base + cfg.dataset.csv_path;
    if (!cfg.dataset.eval_csv_path.empty() && cfg.dataset.eval_csv_path.front() != '/') {
      cfg.dataset.eval_csv_path = base + cfg.dataset.eval_csv_path;
    }
  }
  return cfg;
}

}  // namespace pavg
