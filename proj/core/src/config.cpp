#include "ser/config.h"

#include <json.hpp>
#include <set>

#include "ser/binary_io.h"
#include "ser/error.h"
#include "ser/random.h"

namespace ser {

using nlohmann::ordered_json;

nn::LrSchedule default_lr_schedule(SystemKind kind) {
  if (kind == SystemKind::kLfPt) return {0.01, 0};
  if (strategy_of(kind) == Strategy::kWarmStart) return {0.0001, 40};
  return {0.0007, 40};
}

nn::LrSchedule ExperimentConfig::lr_schedule() const {
  auto s = default_lr_schedule(system);
  if (base_lr) s.base_lr = *base_lr;
  if (warmup_steps) s.warmup_steps = *warmup_steps;
  return s;
}

void ExperimentConfig::validate() const {
  model.validate();
  const auto lr = lr_schedule();
  if (!(lr.base_lr > 0.0)) throw Error("base_lr must be positive");
  if (batch_size == 0) throw Error("batch_size must be positive");
  if (seeds.empty()) throw Error("at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw Error("seeds must be distinct");
  }
  if (max_text_len == 0 || max_audio_len == 0) throw Error("maximum sequence lengths must be positive");
  if (workers == 0) throw Error("workers must be positive");
  if (paths.folds.empty() && criterion.kind == FoldCriterion::Kind::kRand && k < 2) {
    throw Error("random folds need k >= 2");
  }
}

namespace {

std::string path_string(const std::filesystem::path& p) { return p.generic_string(); }

ordered_json to_json(const ExperimentConfig& cfg, bool for_hash) {
  ordered_json j;
  j["name"] = cfg.name;
  j["system"] = std::string(to_string(cfg.system));
  j["model"] = ordered_json::parse(model_config_to_json(cfg.model));
  const auto lr = cfg.lr_schedule();
  j["base_lr"] = lr.base_lr;
  j["warmup_steps"] = lr.warmup_steps;
  j["epochs"] = cfg.epochs;
  j["branch_epochs"] = cfg.effective_branch_epochs();
  j["batch_size"] = cfg.batch_size;
  j["seeds"] = cfg.seeds;
  j["folds"] = {{"criterion", to_string(cfg.criterion)},
                {"improv_in_train", cfg.criterion.improv_in_train},
                {"k", cfg.k},
                {"seed", cfg.fold_seed}};
  j["max_seq_len"] = {{"text", cfg.max_text_len}, {"audio", cfg.max_audio_len}};
  j["text_dim"] = cfg.text_dim;
  ordered_json p;
  p["manifest"] = path_string(cfg.paths.manifest);
  p["features"] = path_string(cfg.paths.features);
  p["embeddings"] = path_string(cfg.paths.embeddings);
  if (!for_hash) p["output_dir"] = path_string(cfg.paths.output_dir);
  p["folds"] = path_string(cfg.paths.folds);
  p["pretrained_dir"] = path_string(cfg.paths.pretrained_dir);
  j["paths"] = p;
  if (!for_hash) j["workers"] = cfg.workers;
  return j;
}

template <typename T>
void take(const nlohmann::json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void check_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw Error(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw Error("unknown config key '" + where + (where.empty() ? "" : ".") + key + "'");
  }
}

std::filesystem::path resolve(const std::string& value, const std::filesystem::path& base) {
  if (value.empty()) return {};
  std::filesystem::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  check_keys(j,
             {"name", "system", "model", "base_lr", "warmup_steps", "epochs", "branch_epochs", "batch_size", "seeds",
              "folds", "max_seq_len", "text_dim", "paths", "workers"},
             "");
  ExperimentConfig cfg;
  take(j, "name", cfg.name);
  if (j.contains("system")) cfg.system = parse_system_kind(j.at("system").get<std::string>());
  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, {"size", "text", "audio", "ef_hidden", "dropout_rate", "lf_scalar_mix"}, "model");
    cfg.model = model_config_from_json(m.dump());
  }
  if (j.contains("base_lr") && !j.at("base_lr").is_null()) cfg.base_lr = j.at("base_lr").get<double>();
  if (j.contains("warmup_steps") && !j.at("warmup_steps").is_null()) {
    cfg.warmup_steps = j.at("warmup_steps").get<std::size_t>();
  }
  take(j, "epochs", cfg.epochs);
  take(j, "branch_epochs", cfg.branch_epochs);
  take(j, "batch_size", cfg.batch_size);
  take(j, "seeds", cfg.seeds);
  take(j, "text_dim", cfg.text_dim);
  take(j, "workers", cfg.workers);
  if (j.contains("folds")) {
    const auto& f = j.at("folds");
    check_keys(f, {"criterion", "improv_in_train", "k", "seed"}, "folds");
    if (f.contains("criterion")) cfg.criterion = parse_fold_criterion(f.at("criterion").get<std::string>());
    take(f, "improv_in_train", cfg.criterion.improv_in_train);
    take(f, "k", cfg.k);
    take(f, "seed", cfg.fold_seed);
  }
  if (j.contains("max_seq_len")) {
    const auto& m = j.at("max_seq_len");
    check_keys(m, {"text", "audio"}, "max_seq_len");
    take(m, "text", cfg.max_text_len);
    take(m, "audio", cfg.max_audio_len);
  }
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    check_keys(p, {"manifest", "features", "embeddings", "output_dir", "folds", "pretrained_dir"}, "paths");
    auto path = [&](const char* key, std::filesystem::path& out) {
      if (p.contains(key)) out = resolve(p.at(key).get<std::string>(), base_dir);
    };
    path("manifest", cfg.paths.manifest);
    path("features", cfg.paths.features);
    path("embeddings", cfg.paths.embeddings);
    path("output_dir", cfg.paths.output_dir);
    path("folds", cfg.paths.folds);
    path("pretrained_dir", cfg.paths.pretrained_dir);
  }
  cfg.validate();
  return cfg;
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  try {
    return from_json(nlohmann::json::parse(json_text), base_dir);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_text_file(path), path.parent_path());
}

void apply_override(ExperimentConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw Error("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  auto j = nlohmann::json::parse(config_to_json(cfg));
  // The learning rate fields stay unset unless named, so per-system
  // defaults still follow a changed system.
  if (!cfg.base_lr) j["base_lr"] = nullptr;
  if (!cfg.warmup_steps) j["warmup_steps"] = nullptr;
  if (j["branch_epochs"] == j["epochs"] && cfg.branch_epochs == 0) j["branch_epochs"] = 0;
  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw Error("unknown config key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
  if (key == "model.size") {
    // Widths follow the new size variant.
    for (const char* w : {"text", "audio", "ef_hidden"}) j["model"].erase(w);
  }
  try {
    cfg = from_json(j, {});
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid override '" + std::string(assignment) + "': " + e.what());
  }
}

std::string config_to_json(const ExperimentConfig& cfg) { return to_json(cfg, false).dump(2) + "\n"; }

std::string config_hash(const ExperimentConfig& cfg) { return hex64(fnv1a64(to_json(cfg, true).dump())); }

std::filesystem::path run_directory(const ExperimentConfig& cfg) {
  const std::string stem = cfg.name.empty() ? std::string(to_string(cfg.system)) : cfg.name;
  return cfg.paths.output_dir / (stem + "-" + config_hash(cfg));
}

}  // namespace ser
