#include "sglr/attack.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "sglr/dataset.hpp"
#include "sglr/net.hpp"
#include "sglr/rng.hpp"

namespace {

using sglr::AttackConfig;
using sglr::Classifier;
using sglr::MlpSpec;
using sglr::ParamSet;
using sglr::Rng;
using sglr::Tensor;

// Scalar quadratic loss (x - a)^2 summed over entries: convex with the
// epsilon-ball maximizer at the box corner farthest from a.
sglr::LossGrad quadratic_away_from(double a) {
  return [a](const Tensor& x, Tensor& grad) {
    double loss = 0.0;
    grad = Tensor(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      loss += (x[i] - a) * (x[i] - a);
      grad[i] = 2.0 * (x[i] - a);
    }
    return loss;
  };
}

TEST(Pgd, ZeroEpsilonReturnsInputExactly) {
  MlpSpec spec{3, {4}, 2};
  ParamSet params = sglr::init_mlp_params(spec, 1);
  Classifier model{&params, &spec, 1.0};
  Rng rng(2);
  Tensor x = Tensor::zeros(4, 3);
  for (double& v : x.values()) v = rng.uniform(0, 1);
  AttackConfig cfg;
  cfg.epsilon = 0.0;
  cfg.step_size = 0.1;
  cfg.iters = 5;
  cfg.random_start = false;
  Tensor adv = sglr::pgd(model, x, sglr::one_hot({0, 1, 0, 1}, 2), cfg, rng);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(adv[i], x[i]);
}

TEST(Pgd, SingleBigStepMatchesFgsm) {
  MlpSpec spec{3, {6}, 3};
  ParamSet params = sglr::init_mlp_params(spec, 3);
  Classifier model{&params, &spec, 1.0};
  Rng rng(4);
  Tensor x = Tensor::zeros(5, 3);
  for (double& v : x.values()) v = rng.uniform(0.2, 0.8);
  Tensor targets = sglr::one_hot({0, 1, 2, 0, 1}, 3);

  AttackConfig cfg;
  cfg.epsilon = 0.05;
  cfg.step_size = 0.08;  // >= epsilon, projection forces the sign step
  cfg.iters = 1;
  cfg.random_start = false;

  Tensor via_pgd = sglr::pgd(model, x, targets, cfg, rng);
  Tensor via_fgsm = sglr::fgsm(model, x, targets, cfg);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_DOUBLE_EQ(via_pgd[i], via_fgsm[i]);
  }
}

TEST(Pgd, EndpointMatchesClosedFormMaximizer) {
  // Maximizing (x - a)^2 over |x - x0| <= eps within [0,1] lands on the
  // feasible endpoint farthest from a.
  AttackConfig cfg;
  cfg.epsilon = 0.2;
  cfg.step_size = 0.05;
  cfg.iters = 30;
  cfg.random_start = false;
  Rng rng(5);

  const double x0 = 0.5, a = 0.4;
  Tensor x({1, 1}, {x0});
  Tensor adv = sglr::pgd(quadratic_away_from(a), x, cfg, rng);
  // Farthest feasible point from a: the upper end x0 + eps.
  EXPECT_NEAR(adv[0], x0 + cfg.epsilon, 1e-12);

  const double a2 = 0.9;
  Tensor adv2 = sglr::pgd(quadratic_away_from(a2), x, cfg, rng);
  EXPECT_NEAR(adv2[0], x0 - cfg.epsilon, 1e-12);
}

TEST(Pgd, ProjectionSoundnessUnderRandomStart) {
  MlpSpec spec{6, {8}, 4};
  ParamSet params = sglr::init_mlp_params(spec, 7);
  Classifier model{&params, &spec, 1.0};
  Rng rng(8);
  AttackConfig cfg;
  cfg.epsilon = 0.07;
  cfg.step_size = cfg.epsilon / 4.0;
  cfg.iters = 10;
  cfg.random_start = true;

  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = Tensor::zeros(9, 6);
    for (double& v : x.values()) v = rng.uniform(0, 1);
    std::vector<int> y(9);
    for (int& v : y) v = static_cast<int>(rng.index(4));
    Tensor adv = sglr::pgd(model, x, sglr::one_hot(y, 4), cfg, rng);
    EXPECT_LE(sglr::linf_distance(adv, x), cfg.epsilon + 1e-12);
    for (double v : adv.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Pgd, LossNeverDecreasesOnConvexToyLoss) {
  // Small steps on a convex loss: each projected ascent step is monotone.
  AttackConfig cfg;
  cfg.epsilon = 0.3;
  cfg.step_size = 0.01;
  cfg.random_start = false;
  Rng rng(9);
  auto loss = quadratic_away_from(0.2);

  Tensor x({1, 4}, {0.5, 0.4, 0.6, 0.55});
  Tensor grad(x.shape());
  double prev = loss(x, grad);
  Tensor current = x;
  for (int iters = 1; iters <= 25; ++iters) {
    cfg.iters = 1;
    current = sglr::pgd(loss, current, cfg, rng);
    // Re-center the ball on the original x by projecting explicitly.
    for (std::size_t i = 0; i < current.size(); ++i) {
      current[i] = std::clamp(current[i], x[i] - cfg.epsilon, x[i] + cfg.epsilon);
    }
    const double now = loss(current, grad);
    EXPECT_GE(now, prev - 1e-12);
    prev = now;
  }
}

TEST(PgdKl, ProjectionContractAndNontrivialDivergence) {
  MlpSpec spec{4, {10}, 3};
  ParamSet params = sglr::init_mlp_params(spec, 11);
  Classifier model{&params, &spec, 1.0};
  Rng rng(12);
  Tensor x = Tensor::zeros(6, 4);
  for (double& v : x.values()) v = rng.uniform(0.1, 0.9);

  AttackConfig cfg;
  cfg.epsilon = 0.1;
  cfg.step_size = 0.025;
  cfg.iters = 10;
  cfg.random_start = false;

  Tensor adv = sglr::pgd_kl(model, x, cfg, rng);
  EXPECT_LE(sglr::linf_distance(adv, x), cfg.epsilon + 1e-12);
  // The crafted points should move the predictive distribution.
  EXPECT_GT(sglr::kl_div(model.probs(adv), model.probs(x)), 0.0);
}

TEST(Fgsm, StepBoundAndDomainClamp) {
  MlpSpec spec{2, {5}, 2};
  ParamSet params = sglr::init_mlp_params(spec, 13);
  Classifier model{&params, &spec, 1.0};
  Rng rng(14);
  Tensor x = Tensor::zeros(8, 2);
  for (double& v : x.values()) v = rng.uniform(0, 1);
  AttackConfig cfg;
  cfg.epsilon = 0.5;  // big enough that the domain clamp matters
  Tensor adv = sglr::fgsm(model, x, sglr::one_hot({0, 1, 0, 1, 0, 1, 0, 1}, 2), cfg);
  EXPECT_LE(sglr::linf_distance(adv, x), cfg.epsilon + 1e-12);
  for (double v : adv.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Attack, ConfigValidation) {
  AttackConfig cfg;
  cfg.epsilon = -0.1;
  EXPECT_THROW(sglr::validate(cfg), std::invalid_argument);
  cfg.epsilon = 0.1;
  cfg.iters = 3;
  cfg.step_size = 0.0;
  EXPECT_THROW(sglr::validate(cfg), std::invalid_argument);
}

TEST(Transfer, TargetNeverQueriedDuringCrafting) {
  // The source is a live model; the target intentionally has a different
  // architecture, which would make any accidental target query throw or
  // diverge in accuracy terms. We only check the call contract here.
  MlpSpec src_spec{3, {8}, 3};
  ParamSet src_params = sglr::init_mlp_params(src_spec, 15);
  Classifier source{&src_params, &src_spec, 1.0};

  MlpSpec tgt_spec{3, {5, 5}, 3};
  ParamSet tgt_params = sglr::init_mlp_params(tgt_spec, 16);
  Classifier target{&tgt_params, &tgt_spec, 1.0};

  sglr::Dataset ds = sglr::gen_gaussian_mixture(3, 40, 3, 4.0, 17);
  AttackConfig cfg;
  cfg.epsilon = 0.05;
  cfg.step_size = cfg.epsilon / 4.0;
  cfg.iters = 5;
  cfg.random_start = false;
  Rng rng(18);
  const double robust = sglr::transfer_eval(source, target, ds, cfg, rng);
  EXPECT_GE(robust, 0.0);
  EXPECT_LE(robust, 1.0);
}

TEST(Attack, MonotoneBudgetOnAverage) {
  // Robust accuracy is non-increasing in epsilon for a fixed model,
  // averaged over attack seeds.
  MlpSpec spec{4, {12}, 3};
  ParamSet params = sglr::init_mlp_params(spec, 19);
  Classifier model{&params, &spec, 1.0};
  sglr::Dataset ds = sglr::gen_gaussian_mixture(3, 100, 4, 6.0, 20);

  auto robust_at = [&](double eps) {
    double acc_sum = 0.0;
    for (std::uint64_t s = 0; s < 3; ++s) {
      Rng rng(100 + s);
      AttackConfig cfg;
      cfg.epsilon = eps;
      cfg.step_size = eps > 0 ? eps / 4.0 : 0.01;
      cfg.iters = 10;
      cfg.random_start = true;
      Tensor adv = sglr::pgd(model, ds.features, sglr::one_hot(ds.labels, 3), cfg, rng);
      acc_sum += sglr::accuracy(model.probs(adv), ds.labels);
    }
    return acc_sum / 3.0;
  };

  const double at0 = robust_at(0.0);
  const double at5 = robust_at(0.05);
  const double at15 = robust_at(0.15);
  EXPECT_GE(at0 + 1e-9, at5);
  EXPECT_GE(at5 + 1e-9, at15);
}

}  // namespace
