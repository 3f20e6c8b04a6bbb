#include "ser/folds.h"

#include <algorithm>
#include <json.hpp>
#include <map>
#include <sstream>

#include "ser/binary_io.h"
#include "ser/error.h"
#include "ser/random.h"

namespace ser {

std::string to_string(const FoldCriterion& c) {
  switch (c.kind) {
    case FoldCriterion::Kind::kRand: return "rand";
    case FoldCriterion::Kind::kSp: return "sp";
    case FoldCriterion::Kind::kSpSc: return "sp_sc:" + c.test_script;
  }
  return "sp";
}

FoldCriterion parse_fold_criterion(std::string_view text) {
  if (text == "rand") return FoldCriterion::rand();
  if (text == "sp") return FoldCriterion::sp();
  if (text.rfind("sp_sc:", 0) == 0 && text.size() > 6) return FoldCriterion::sp_sc(std::string(text.substr(6)));
  throw Error("unknown fold criterion '" + std::string(text) + "' (expected rand, sp, or sp_sc:<script>)");
}

namespace {

std::vector<std::string> sorted_sessions(const Manifest& manifest) {
  std::set<std::string> s;
  for (const auto& r : manifest.records) s.insert(r.session_id);
  return {s.begin(), s.end()};
}

void finish(FoldAssignment& out) {
  for (auto& f : out.folds) {
    std::sort(f.train_ids.begin(), f.train_ids.end());
    std::sort(f.test_ids.begin(), f.test_ids.end());
  }
  validate_assignment(out);
}

}  // namespace

FoldAssignment make_folds(const Manifest& manifest, const FoldCriterion& criterion, std::size_t k,
                          std::uint64_t seed) {
  if (manifest.records.empty()) throw Error("cannot build folds from an empty manifest");
  FoldAssignment out;

  if (criterion.kind == FoldCriterion::Kind::kRand) {
    if (k < 2) throw Error("random folds need k >= 2");
    std::vector<std::string> ids;
    for (const auto& r : manifest.records) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end());
    if (ids.size() < k) throw Error("fewer utterances than folds");
    Rng rng(derive_seed(seed, "rand-folds"));
    rng.shuffle(ids);
    const std::size_t base = ids.size() / k, extra = ids.size() % k;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t n = base + (i < extra ? 1 : 0);
      Fold f;
      f.index = i;
      for (std::size_t j = 0; j < ids.size(); ++j) {
        (j >= pos && j < pos + n ? f.test_ids : f.train_ids).push_back(ids[j]);
      }
      pos += n;
      out.folds.push_back(std::move(f));
    }
    finish(out);
    return out;
  }

  const auto sessions = sorted_sessions(manifest);
  if (k != sessions.size()) {
    throw Error("k = " + std::to_string(k) + " but the manifest has " + std::to_string(sessions.size()) +
                " sessions");
  }
  const bool scripted = criterion.kind == FoldCriterion::Kind::kSpSc;
  if (scripted) {
    if (criterion.test_script.empty()) throw Error("sp_sc folds need a test script");
    if (criterion.test_script == kImprovScript) throw Error("improvised utterances cannot be the test script");
    std::set<std::string> with_script;
    for (const auto& r : manifest.records) {
      if (r.script_id == criterion.test_script) with_script.insert(r.session_id);
    }
    for (const auto& s : sessions) {
      if (!with_script.count(s)) {
        throw Error("test script '" + criterion.test_script + "' is missing from session '" + s + "'");
      }
    }
  }

  for (std::size_t i = 0; i < k; ++i) {
    Fold f;
    f.index = i;
    for (const auto& r : manifest.records) {
      const bool held_out = r.session_id == sessions[i];
      if (!scripted) {
        (held_out ? f.test_ids : f.train_ids).push_back(r.id);
        continue;
      }
      if (held_out) {
        if (r.script_id == criterion.test_script) f.test_ids.push_back(r.id);
      } else if (r.script_id != criterion.test_script && (criterion.improv_in_train || !r.is_improv())) {
        f.train_ids.push_back(r.id);
      }
    }
    out.folds.push_back(std::move(f));
  }
  finish(out);
  return out;
}

void validate_assignment(const FoldAssignment& folds) {
  if (folds.folds.empty()) throw Error("fold assignment has no folds");
  std::set<std::string> tested;
  for (const auto& f : folds.folds) {
    if (f.test_ids.empty()) throw Error("fold " + std::to_string(f.index) + " has an empty test set");
    std::set<std::string> train(f.train_ids.begin(), f.train_ids.end());
    if (train.size() != f.train_ids.size()) throw Error("fold " + std::to_string(f.index) + " repeats a train id");
    for (const auto& id : f.test_ids) {
      if (train.count(id)) throw Error("fold " + std::to_string(f.index) + " trains and tests on '" + id + "'");
      if (!tested.insert(id).second) throw Error("utterance '" + id + "' is tested in more than one fold");
    }
  }
}

bool LeakageReport::clean() const {
  return std::all_of(folds.begin(), folds.end(), [](const FoldLeakage& f) { return f.clean(); });
}

bool LeakageReport::any_speaker_overlap() const {
  return std::any_of(folds.begin(), folds.end(), [](const FoldLeakage& f) { return !f.shared_speakers.empty(); });
}

bool LeakageReport::any_script_overlap() const {
  return std::any_of(folds.begin(), folds.end(), [](const FoldLeakage& f) { return !f.shared_scripts.empty(); });
}

LeakageReport audit_leakage(const FoldAssignment& folds, const Manifest& manifest) {
  std::map<std::string_view, const UtteranceRecord*> index;
  for (const auto& r : manifest.records) index.emplace(r.id, &r);
  auto lookup = [&](const std::string& id) {
    auto it = index.find(id);
    if (it == index.end()) throw Error("fold references unknown utterance '" + id + "'");
    return it->second;
  };

  LeakageReport report;
  for (const auto& f : folds.folds) {
    std::set<std::string> train_spk, train_scr, test_spk, test_scr;
    for (const auto& id : f.train_ids) {
      const auto* r = lookup(id);
      train_spk.insert(r->speaker_id);
      train_scr.insert(r->script_id);
    }
    for (const auto& id : f.test_ids) {
      const auto* r = lookup(id);
      test_spk.insert(r->speaker_id);
      test_scr.insert(r->script_id);
    }
    FoldLeakage leak;
    leak.fold = f.index;
    std::set_intersection(train_spk.begin(), train_spk.end(), test_spk.begin(), test_spk.end(),
                          std::inserter(leak.shared_speakers, leak.shared_speakers.end()));
    std::set_intersection(train_scr.begin(), train_scr.end(), test_scr.begin(), test_scr.end(),
                          std::inserter(leak.shared_scripts, leak.shared_scripts.end()));
    report.folds.push_back(std::move(leak));
  }
  return report;
}

std::string serialize_folds(const FoldAssignment& folds) {
  std::string out;
  for (const auto& f : folds.folds) {
    nlohmann::ordered_json j;
    j["fold"] = f.index;
    j["train"] = f.train_ids;
    j["test"] = f.test_ids;
    out += j.dump();
    out += '\n';
  }
  return out;
}

FoldAssignment parse_folds(std::string_view text) {
  FoldAssignment out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Fold f;
      f.index = j.at("fold").get<std::size_t>();
      f.train_ids = j.at("train").get<std::vector<std::string>>();
      f.test_ids = j.at("test").get<std::vector<std::string>>();
      if (f.index != out.folds.size()) throw Error("folds must be listed in order starting at 0");
      out.folds.push_back(std::move(f));
    } catch (const nlohmann::json::exception& e) {
      throw Error("fold file line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  validate_assignment(out);
  return out;
}

void save_folds(const FoldAssignment& folds, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_folds(folds));
}

FoldAssignment load_folds(const std::filesystem::path& path) { return parse_folds(io::read_text_file(path)); }

std::string leakage_report_json(const LeakageReport& report) {
  nlohmann::ordered_json j;
  j["clean"] = report.clean();
  j["folds"] = nlohmann::ordered_json::array();
  for (const auto& f : report.folds) {
    nlohmann::ordered_json fj;
    fj["fold"] = f.fold;
    fj["shared_speakers"] = std::vector<std::string>(f.shared_speakers.begin(), f.shared_speakers.end());
    fj["shared_scripts"] = std::vector<std::string>(f.shared_scripts.begin(), f.shared_scripts.end());
    fj["clean"] = f.clean();
    j["folds"].push_back(std::move(fj));
  }
  return j.dump(2) + "\n";
}

std::string leakage_report_table(const LeakageReport& report) {
  auto join = [](const std::set<std::string>& s) {
    if (s.empty()) return std::string("-");
    std::string out;
    for (const auto& x : s) out += (out.empty() ? "" : ",") + x;
    return out;
  };
  std::ostringstream os;
  os << "fold  clean  shared_speakers  shared_scripts\n";
  for (const auto& f : report.folds) {
    os << f.fold << "     " << (f.clean() ? "yes" : "no ") << "    " << join(f.shared_speakers) << "  "
       << join(f.shared_scripts) << '\n';
  }
  os << "overall: " << (report.clean() ? "clean" : "LEAKAGE") << '\n';
  return os.str();
}

}  // namespace ser
