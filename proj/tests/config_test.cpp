#include "sglr/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "sglr/runner.hpp"

namespace {

namespace fs = std::filesystem;
using sglr::ExperimentConfig;

TEST(Config, FlatKeyValueParsing) {
  const std::string text = R"(
# comment line
dataset.kind = gaussian_mixture
dataset.n = 200
dataset.test_n = 100
dataset.k = 3
model.hidden = 32,16
train.epochs = 7
train.milestones = 4,6
attack.eps = 0.1
attack.random_start = false
labels.strategy = sglr
labels.r = 0.3
seed = 42
out_dir = /tmp/cfg_run
)";
  const ExperimentConfig cfg = sglr::parse_config_text(text);
  EXPECT_EQ(cfg.dataset_n, 200u);
  EXPECT_EQ(cfg.dataset_k, 3);
  EXPECT_EQ(cfg.model_hidden, (std::vector<std::size_t>{32, 16}));
  EXPECT_EQ(cfg.train_epochs, 7);
  EXPECT_EQ(cfg.train_milestones, (std::vector<int>{4, 6}));
  EXPECT_DOUBLE_EQ(cfg.attack_eps, 0.1);
  EXPECT_FALSE(cfg.attack_random_start);
  EXPECT_EQ(cfg.labels_strategy, "sglr");
  EXPECT_EQ(cfg.seed, 42u);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(sglr::parse_config_text("dataset.unknown = 1"),
               std::invalid_argument);
  EXPECT_THROW(sglr::parse_config_text("nonsense"), std::invalid_argument);
  EXPECT_THROW(sglr::parse_config_text("train.epochs = soon"),
               std::invalid_argument);
}

TEST(Config, JsonMatchesFlatParsing) {
  const std::string flat = R"(
dataset.n = 500
dataset.k = 5
model.hidden = 8,8
labels.strategy = uniform_ls
labels.r = 0.25
seed = 11
)";
  const ExperimentConfig a = sglr::parse_config_text(flat);
  const sglr::json doc = {
      {"dataset", {{"n", 500}, {"k", 5}}},
      {"model", {{"hidden", {8, 8}}}},
      {"labels", {{"strategy", "uniform_ls"}, {"r", 0.25}}},
      {"seed", 11},
  };
  const ExperimentConfig b = sglr::parse_config_json(doc);
  EXPECT_EQ(sglr::to_json(a), sglr::to_json(b));
}

TEST(Config, JsonRoundTripReproducesConfig) {
  ExperimentConfig cfg;
  cfg.dataset_kind = "two_moons";
  cfg.dataset_n = 321;
  cfg.labels_strategy = "sglr";
  cfg.labels_r = 0.4;
  cfg.train_schedule = "cosine";
  cfg.seed = 77;
  const ExperimentConfig back = sglr::parse_config_json(sglr::to_json(cfg));
  EXPECT_EQ(sglr::to_json(back), sglr::to_json(cfg));
}

TEST(Config, DerivedSeedsDocumented) {
  ExperimentConfig cfg;
  cfg.seed = 5;
  const sglr::json doc = sglr::to_json(cfg);
  ASSERT_TRUE(doc.contains("derived_seeds"));
  EXPECT_EQ(doc["derived_seeds"]["data"], sglr::derive_seed(5, "data"));
  EXPECT_EQ(doc["derived_seeds"]["attack"], sglr::derive_seed(5, "attack"));
}

TEST(Config, ConversionToModuleConfigs) {
  ExperimentConfig cfg;
  cfg.labels_strategy = "sglr";
  cfg.labels_r = 0.2;
  cfg.labels_ema_init = "zero-renormalized";
  cfg.train_objective = "trades";
  cfg.train_beta = 4.5;
  const sglr::TrainConfig tcfg = sglr::train_config_from(cfg);
  EXPECT_EQ(tcfg.labels.strategy, sglr::LabelStrategy::sglr);
  EXPECT_EQ(tcfg.labels.ema_init, sglr::EmaInit::zero_renormalized);
  EXPECT_EQ(tcfg.objective, sglr::Objective::trades);
  EXPECT_DOUBLE_EQ(tcfg.trades_beta, 4.5);

  const sglr::MlpSpec spec = sglr::mlp_spec_from(cfg, 20);
  EXPECT_EQ(spec.input_dim, 20u);
  EXPECT_EQ(spec.classes, 4u);
}

TEST(Config, NoiseSpecParsing) {
  ExperimentConfig cfg;
  cfg.dataset_k = 3;
  cfg.dataset_noise_mode = "asymmetric";
  cfg.dataset_noise_rate = 0.2;
  cfg.dataset_transition = "0.8,0.1,0.1;0.2,0.7,0.1;0.0,0.3,0.7";
  const auto spec = sglr::noise_spec_from(cfg);
  ASSERT_TRUE(spec.has_value());
  EXPECT_EQ(spec->mode, sglr::NoiseSpec::Mode::asymmetric);
  ASSERT_TRUE(spec->transition.has_value());
  EXPECT_DOUBLE_EQ(spec->transition->at(1, 0), 0.2);

  cfg.dataset_transition = "0.8,0.2;0.1,0.9";  // wrong row count for k=3
  EXPECT_THROW(sglr::noise_spec_from(cfg), std::invalid_argument);

  cfg.dataset_noise_mode = "none";
  cfg.dataset_noise_rate = 0.1;
  EXPECT_THROW(sglr::noise_spec_from(cfg), std::invalid_argument);
}

TEST(Config, ValidateCatchesBadValues) {
  ExperimentConfig cfg;
  cfg.train_lr = -1.0;
  EXPECT_THROW(sglr::validate(cfg), std::invalid_argument);

  cfg = ExperimentConfig{};
  cfg.labels_strategy = "mystery";
  EXPECT_THROW(sglr::validate(cfg), std::invalid_argument);

  cfg = ExperimentConfig{};
  cfg.dataset_kind = "parquet";
  EXPECT_THROW(sglr::validate(cfg), std::invalid_argument);

  EXPECT_NO_THROW(sglr::validate(ExperimentConfig{}));
}

TEST(Runner, BuildDatasetsSplitsAndCorrupts) {
  ExperimentConfig cfg;
  cfg.dataset_n = 300;
  cfg.dataset_test_n = 100;
  cfg.dataset_k = 4;
  cfg.dataset_dim = 6;
  cfg.dataset_noise_mode = "symmetric_all";
  cfg.dataset_noise_rate = 0.4;
  cfg.seed = 3;
  auto [train_ds, test_ds] = sglr::build_datasets(cfg);
  EXPECT_EQ(train_ds.n(), 300u);
  EXPECT_EQ(test_ds.n(), 100u);
  // Train labels corrupted, test untouched.
  EXPECT_GT(sglr::corrupted_fraction(train_ds), 0.2);
  EXPECT_DOUBLE_EQ(sglr::corrupted_fraction(test_ds), 0.0);
  // Determinism.
  auto [train2, test2] = sglr::build_datasets(cfg);
  EXPECT_EQ(train2.labels, train_ds.labels);
  for (std::size_t i = 0; i < test_ds.features.size(); ++i) {
    EXPECT_EQ(test2.features[i], test_ds.features[i]);
  }
}

TEST(Runner, TrainRunWritesRunDirectory) {
  ExperimentConfig cfg;
  cfg.dataset_n = 120;
  cfg.dataset_test_n = 60;
  cfg.dataset_k = 3;
  cfg.dataset_dim = 4;
  cfg.model_hidden = {8};
  cfg.train_epochs = 3;
  cfg.train_milestones = {2};
  cfg.attack_eps = 0.02;
  cfg.attack_step = 0.005;
  cfg.attack_iters = 3;
  cfg.seed = 8;
  cfg.out_dir = (fs::temp_directory_path() / "sglr_runner_test").string();
  fs::remove_all(cfg.out_dir);
  const sglr::RunOutput out = sglr::run_train(cfg);
  EXPECT_TRUE(fs::exists(out.dir / "config.json"));
  EXPECT_TRUE(fs::exists(out.dir / "metrics.csv"));
  EXPECT_TRUE(fs::exists(out.dir / "best.ckpt"));
  EXPECT_TRUE(fs::exists(out.dir / "final.ckpt"));
  EXPECT_TRUE(fs::exists(out.dir / "summary.json"));

  // Re-running from the emitted effective config reproduces the metrics.
  const ExperimentConfig back = sglr::load_run_config(out.dir);
  ExperimentConfig redo = back;
  redo.out_dir = (fs::temp_directory_path() / "sglr_runner_test_redo").string();
  fs::remove_all(redo.out_dir);
  const sglr::RunOutput again = sglr::run_train(redo);
  EXPECT_EQ(again.result.history.to_csv(), out.result.history.to_csv());

  // Checkpoints load back and evaluate.
  const auto report = sglr::run_eval(out.dir, "final");
  EXPECT_TRUE(report.contains("robust_acc"));
  fs::remove_all(cfg.out_dir);
  fs::remove_all(redo.out_dir);
}

TEST(Runner, TheoryChecksAllPass) {
  const sglr::json reports = sglr::run_theory_checks("all", 31337);
  EXPECT_GE(reports.size(), 7u);
  for (const auto& report : reports) {
    EXPECT_TRUE(report.at("pass").get<bool>()) << report.dump(2);
  }
  EXPECT_THROW(sglr::run_theory_checks("bogus", 1), std::invalid_argument);
}

}  // namespace
