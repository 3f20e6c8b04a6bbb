#include <gtest/gtest.h>

#include <fstream>

#include "ser/config.h"
#include "ser/error.h"
#include "support.h"

namespace ser {
namespace {

TEST(Config, Defaults) {
  const auto cfg = parse_config("{}");
  EXPECT_EQ(cfg.system, SystemKind::kEfCs);
  EXPECT_EQ(cfg.batch_size, 32u);
  EXPECT_EQ(cfg.epochs, 20u);
  EXPECT_EQ(cfg.seeds.size(), 10u);
  EXPECT_EQ(cfg.k, 5u);
  EXPECT_EQ(cfg.max_text_len, 64u);
  EXPECT_EQ(cfg.max_audio_len, 1200u);
  EXPECT_EQ(cfg.criterion.kind, FoldCriterion::Kind::kSp);
  EXPECT_EQ(cfg.model.text.reduce_dim, 128u);
}

TEST(Config, PerSystemLearningRates) {
  for (SystemKind k : {SystemKind::kAudioOnly, SystemKind::kTextOnly, SystemKind::kEfCs, SystemKind::kEfPt,
                       SystemKind::kLfCs}) {
    const auto lr = default_lr_schedule(k);
    EXPECT_EQ(lr.base_lr, 0.0007);
    EXPECT_EQ(lr.warmup_steps, 40u);
  }
  for (SystemKind k : {SystemKind::kEfWs, SystemKind::kLfWs}) {
    EXPECT_EQ(default_lr_schedule(k).base_lr, 0.0001);
    EXPECT_EQ(default_lr_schedule(k).warmup_steps, 40u);
  }
  EXPECT_EQ(default_lr_schedule(SystemKind::kLfPt).base_lr, 0.01);
  EXPECT_EQ(default_lr_schedule(SystemKind::kLfPt).warmup_steps, 0u);

  auto cfg = parse_config(R"({"system":"lf_pt","base_lr":0.002})");
  EXPECT_EQ(cfg.lr_schedule().base_lr, 0.002);
  EXPECT_EQ(cfg.lr_schedule().warmup_steps, 0u);
}

TEST(Config, FullDocument) {
  const auto cfg = parse_config(R"({
    "name": "exp", "system": "ef_ws", "model": {"size": "small", "dropout_rate": 0.25},
    "epochs": 3, "branch_epochs": 7, "batch_size": 16, "seeds": [4, 2],
    "folds": {"criterion": "sp_sc:script03", "improv_in_train": false, "k": 5, "seed": 9},
    "max_seq_len": {"text": 10, "audio": 100}, "text_dim": 8,
    "paths": {"manifest": "data/m.jsonl", "embeddings": "/abs/e.bin", "output_dir": "out"},
    "workers": 3})",
                                "/base");
  EXPECT_EQ(cfg.name, "exp");
  EXPECT_EQ(cfg.model.size, SizeVariant::kSmall);
  EXPECT_EQ(cfg.model.text.reduce_dim, 64u);
  EXPECT_EQ(cfg.model.dropout_rate, 0.25);
  EXPECT_EQ(cfg.effective_branch_epochs(), 7u);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{4, 2}));
  EXPECT_EQ(cfg.criterion.test_script, "script03");
  EXPECT_FALSE(cfg.criterion.improv_in_train);
  EXPECT_EQ(cfg.fold_seed, 9u);
  EXPECT_EQ(cfg.paths.manifest, std::filesystem::path("/base/data/m.jsonl"));
  EXPECT_EQ(cfg.paths.embeddings, std::filesystem::path("/abs/e.bin"));
  EXPECT_EQ(cfg.workers, 3u);
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_config(R"({"epoch": 3})"), Error);
  EXPECT_THROW(parse_config(R"({"model": {"sise": "small"}})"), Error);
  EXPECT_THROW(parse_config(R"({"system": "ef_xx"})"), Error);
  EXPECT_THROW(parse_config(R"({"seeds": []})"), Error);
  EXPECT_THROW(parse_config(R"({"seeds": [1, 1]})"), Error);
  EXPECT_THROW(parse_config(R"({"batch_size": 0})"), Error);
  EXPECT_THROW(parse_config(R"({"folds": {"criterion": "rand", "k": 1}})"), Error);
  EXPECT_THROW(parse_config("[1,2"), Error);
  EXPECT_THROW(load_config("/nonexistent/config.json"), Error);
}

TEST(Config, Overrides) {
  auto cfg = parse_config("{}");
  apply_override(cfg, "model.size=small");
  EXPECT_EQ(cfg.model.text.conv_filters, 64u);
  apply_override(cfg, "seeds=[1,2,3]");
  EXPECT_EQ(cfg.seeds.size(), 3u);
  apply_override(cfg, "system=text_only");
  EXPECT_EQ(cfg.system, SystemKind::kTextOnly);
  apply_override(cfg, "folds.criterion=sp_sc:script02");
  EXPECT_EQ(cfg.criterion.test_script, "script02");
  apply_override(cfg, "epochs=4");
  EXPECT_EQ(cfg.epochs, 4u);
  EXPECT_THROW(apply_override(cfg, "epochs"), Error);
  EXPECT_THROW(apply_override(cfg, "nope.key=1"), Error);
  EXPECT_THROW(apply_override(cfg, "batch_size=0"), Error);
}

TEST(Config, HashBindsContentNotExecution) {
  auto a = parse_config(R"({"epochs": 3})");
  auto b = a;
  b.workers = 7;
  b.paths.output_dir = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.epochs = 4;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(parse_config(config_to_json(a))), config_hash(a));
  EXPECT_EQ(config_hash(a).size(), 16u);
  a.name = "x";
  EXPECT_EQ(run_directory(a), std::filesystem::path("runs") / ("x-" + config_hash(a)));
  a.name.clear();
  EXPECT_EQ(run_directory(a).filename().string().rfind("ef_cs-", 0), 0u);
}

TEST(Config, ExplicitDefaultsHashLikeImplicitOnes) {
  const auto implicit = parse_config(R"({"system":"ef_ws"})");
  const auto explicit_ = parse_config(R"({"system":"ef_ws","base_lr":0.0001,"warmup_steps":40,"batch_size":32})");
  EXPECT_EQ(config_hash(implicit), config_hash(explicit_));
}

TEST(Config, LoadResolvesAgainstFileDirectory) {
  testing::TempDir dir("config");
  {
    std::ofstream os(dir.path() / "c.json");
    os << R"({"paths": {"manifest": "m.jsonl"}})";
  }
  const auto cfg = load_config(dir.path() / "c.json");
  EXPECT_EQ(cfg.paths.manifest, (dir.path() / "m.jsonl").lexically_normal());
}

}  // namespace
}  // namespace ser
