#include "sglr/theory.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "sglr/rng.hpp"

namespace {

namespace theory = sglr::theory;
using sglr::Rng;
using sglr::Tensor;

std::vector<double> simplex(std::initializer_list<double> vals) {
  return std::vector<double>(vals);
}

TEST(Prop1, AlphaZeroBothSidesAreCrossEntropy) {
  const auto q = simplex({0.3, 0.5, 0.2});
  const auto p = simplex({0.6, 0.1, 0.3});
  const auto report = theory::check_prop1(q, p, 0.0);
  EXPECT_TRUE(report.pass);
  double h_qp = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) h_qp -= q[i] * std::log(p[i]);
  EXPECT_NEAR(report.lhs, h_qp, 1e-12);
  EXPECT_NEAR(report.rhs, h_qp, 1e-12);
}

TEST(Prop1, EqualDistributionsCollapseToEntropy) {
  const auto p = simplex({0.25, 0.25, 0.5});
  const auto report = theory::check_prop1(p, p, 0.7);
  EXPECT_TRUE(report.pass);
  double h = 0.0;
  for (double v : p) h -= v * std::log(v);
  EXPECT_NEAR(report.lhs, h, 1e-12);
}

TEST(Prop1, RandomSweepHoldsAtTightTolerance) {
  const auto summary = theory::run_prop1_trials(1000, 101);
  EXPECT_TRUE(summary.pass);
  EXPECT_LT(summary.max_residual, 1e-12);
  // The additive-KL variant must NOT hold: its worst residual is large.
  EXPECT_NE(summary.notes.find("additive"), std::string::npos);
}

TEST(Prop2, RandomSweepHoldsAtTightTolerance) {
  const auto summary = theory::run_prop2_trials(1000, 202);
  EXPECT_TRUE(summary.pass);
  EXPECT_LT(summary.max_residual, 1e-12);
}

TEST(LogSum, HoldsAndDetectsEquality) {
  const auto strict = theory::check_log_sum({1.0, 2.0}, {2.0, 1.0});
  EXPECT_TRUE(strict.pass);
  EXPECT_EQ(strict.trial, "strict");

  const auto equal = theory::check_log_sum({1.0, 2.0, 4.0}, {0.5, 1.0, 2.0});
  EXPECT_TRUE(equal.pass);
  EXPECT_EQ(equal.trial, "equality (constant ratios)");
  EXPECT_NEAR(equal.lhs, equal.rhs, 1e-12);

  const auto sweep = theory::run_log_sum_trials(10000, 303);
  EXPECT_TRUE(sweep.pass);
}

TEST(LogSum, ZeroHandling) {
  // a_i = 0 contributes nothing; the inequality still holds.
  const auto with_zero = theory::check_log_sum({0.0, 2.0}, {1.0, 1.0});
  EXPECT_TRUE(with_zero.pass);
  EXPECT_THROW(theory::check_log_sum({-1.0}, {1.0}), std::invalid_argument);
}

TEST(RiskDecomposition, EtaZeroIsCleanRisk) {
  Rng rng(404);
  Tensor probs({2, 3}, {0.5, 0.3, 0.2, 0.1, 0.6, 0.3});
  const auto report =
      theory::risk_decomposition_symmetric(probs, {0, 1}, 0.0);
  EXPECT_TRUE(report.pass);
  const double clean =
      0.5 * (-std::log(0.5) - std::log(0.6));
  EXPECT_NEAR(report.lhs, clean, 1e-12);
}

TEST(RiskDecomposition, UniformPredictorGivesLogK) {
  // Constant per-class loss log K on a uniform predictor: the noisy risk
  // equals the clean risk for every eta.
  for (double eta : {0.0, 0.2, 0.5, 0.7}) {
    Tensor probs = Tensor::full({4, 5}, 0.2);
    const auto report = theory::risk_decomposition_symmetric(
        probs, {0, 1, 2, 3}, eta, theory::RiskLoss::cross_entropy);
    EXPECT_TRUE(report.pass);
    EXPECT_NEAR(report.lhs, std::log(5.0), 1e-12);
    EXPECT_NEAR(report.rhs, std::log(5.0), 1e-12);
  }
}

TEST(RiskDecomposition, RandomSweepExact) {
  const auto summary = theory::run_symmetric_decomposition_trials(200, 505);
  EXPECT_TRUE(summary.pass);
  EXPECT_LT(summary.max_residual, 1e-10);
}

TEST(RiskOrdering, ZeroCleanRiskClassifierStaysAhead) {
  const auto summary = theory::run_asymmetric_ordering_cases(50, 606);
  EXPECT_TRUE(summary.pass);
}

TEST(RiskOrdering, MaeLossSumsToConstant) {
  // The bounded loss underlying the ordering satisfies the symmetry
  // condition: summing over classes gives 2 (K - 1) regardless of f.
  Rng rng(707);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng.index(8);
    Tensor probs = Tensor::zeros(1, k);
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      probs.at(0, c) = rng.uniform(0, 1);
      sum += probs.at(0, c);
    }
    for (std::size_t c = 0; c < k; ++c) probs.at(0, c) /= sum;
    double loss_sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      loss_sum += 2.0 * (1.0 - probs.at(0, c));
    }
    EXPECT_NEAR(loss_sum, 2.0 * (k - 1.0), 1e-12);
  }
}

TEST(GTerm, ClosedForms) {
  // One-hot predictions: 0 log 0 = 0 everywhere.
  EXPECT_DOUBLE_EQ(theory::g_term(sglr::one_hot({0, 1, 2}, 3)), 0.0);

  // Uniform predictions over K classes: log K / (K - 1).
  for (int k : {2, 3, 10}) {
    Tensor probs = Tensor::full({4, static_cast<std::size_t>(k)}, 1.0 / k);
    EXPECT_NEAR(theory::g_term(probs), std::log(static_cast<double>(k)) / (k - 1),
                1e-12);
  }

  // Random probabilities match an independent summation oracle.
  Rng rng(808);
  Tensor probs = Tensor::zeros(6, 4);
  for (std::size_t r = 0; r < 6; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      probs.at(r, c) = std::exp(rng.uniform(-2, 2));
      sum += probs.at(r, c);
    }
    for (std::size_t c = 0; c < 4; ++c) probs.at(r, c) /= sum;
  }
  double oracle = 0.0;
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      oracle += probs.at(r, c) * std::log(probs.at(r, c));
    }
  }
  oracle = -oracle / (6.0 * 3.0);
  EXPECT_NEAR(theory::g_term(probs), oracle, 1e-12);
}

TEST(XentDecomposition, ExactOnRandomWorlds) {
  const auto summary = theory::run_xent_decomposition_trials(50, 909);
  EXPECT_TRUE(summary.pass);
  EXPECT_LT(summary.max_residual, 1e-10);
}

TEST(XentDecomposition, MutualInformationNonnegative) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto world = theory::DiscreteWorld::random(4, 3, 8, seed);
    const auto d = theory::decompose_xent_discrete(world);
    EXPECT_GE(d.mutual_info, -1e-12);
  }
}

TEST(IiwReduction, EndpointsExact) {
  const auto world = theory::DiscreteWorld::random(4, 3, 8, 1010);
  // lambda = 0: uniform labels carry no weight information, exactly zero.
  EXPECT_EQ(theory::label_channel_mutual_info(world, 0.0), 0.0);
  // lambda = 1 reproduces the hard-label information.
  const double hard = theory::label_channel_mutual_info(world, 1.0);
  const auto d = theory::decompose_xent_discrete(world);
  EXPECT_NEAR(hard, d.mutual_info, 1e-12);
}

TEST(IiwReduction, SoftLabelsReduceInformation) {
  const auto summary = theory::run_iiw_reduction_check(1111);
  EXPECT_TRUE(summary.pass);

  // Information is monotone in lambda on the grid for these worlds.
  const auto world = theory::DiscreteWorld::random(4, 3, 8, 1212);
  double prev = -1.0;
  for (int i = 0; i <= 10; ++i) {
    const double info = theory::label_channel_mutual_info(world, 0.1 * i);
    EXPECT_GE(info, prev - 1e-12);
    prev = info;
  }
}

}  // namespace
