#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ser/manifest.h"

namespace ser {

struct FoldCriterion {
  enum class Kind { kRand, kSp, kSpSc };
  Kind kind = Kind::kSp;
  std::string test_script;  // SP_SC only
  /// SP_SC: improvised utterances join the training pools (they are never
  /// tested).
  bool improv_in_train = true;

  static FoldCriterion rand() { return {Kind::kRand, {}, true}; }
  static FoldCriterion sp() { return {Kind::kSp, {}, true}; }
  static FoldCriterion sp_sc(std::string script, bool improv_in_train = true) {
    return {Kind::kSpSc, std::move(script), improv_in_train};
  }
};

std::string to_string(const FoldCriterion& c);
/// "rand", "sp", or "sp_sc:<script>".
FoldCriterion parse_fold_criterion(std::string_view text);

struct Fold {
  std::size_t index = 0;
  std::vector<std::string> train_ids;  // sorted
  std::vector<std::string> test_ids;   // sorted
};

struct FoldAssignment {
  std::vector<Fold> folds;
  std::size_t k() const { return folds.size(); }
};

/// RAND shuffles the sorted ids with a seeded generator and deals them into
/// k contiguous shares. SP holds out one session per fold (sessions in
/// sorted order; k must equal the session count). SP_SC tests on the held
/// out session's utterances of the test script and trains on the other
/// sessions minus that script everywhere.
FoldAssignment make_folds(const Manifest& manifest, const FoldCriterion& criterion, std::size_t k,
                          std::uint64_t seed);

/// Throws ser::Error if a fold's train and test sets intersect, a test id
/// appears in two folds, or a test set is empty.
void validate_assignment(const FoldAssignment& folds);

struct FoldLeakage {
  std::size_t fold = 0;
  std::set<std::string> shared_speakers;
  std::set<std::string> shared_scripts;
  bool clean() const { return shared_speakers.empty() && shared_scripts.empty(); }
};

struct LeakageReport {
  std::vector<FoldLeakage> folds;
  bool clean() const;
  bool any_speaker_overlap() const;
  bool any_script_overlap() const;
};

/// Exact speaker and script intersections between each fold's train and
/// test sets. Throws ser::Error on ids missing from the manifest.
LeakageReport audit_leakage(const FoldAssignment& folds, const Manifest& manifest);

/// One JSON object per fold: {"fold", "train", "test"}.
std::string serialize_folds(const FoldAssignment& folds);
FoldAssignment parse_folds(std::string_view text);
void save_folds(const FoldAssignment& folds, const std::filesystem::path& path);
FoldAssignment load_folds(const std::filesystem::path& path);

std::string leakage_report_json(const LeakageReport& report);
std::string leakage_report_table(const LeakageReport& report);

}  // namespace ser
