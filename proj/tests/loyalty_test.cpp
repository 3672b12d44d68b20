#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "distilkit/loyalty.hpp"

using namespace distilkit;

namespace {

PredictionSet classification_set(std::vector<int> labels,
                                 std::vector<std::vector<double>> probs) {
  PredictionSet ps;
  ps.kind = PredictionSet::Kind::classification;
  for (std::size_t i = 0; i < labels.size(); ++i) ps.ids.push_back(std::to_string(i));
  ps.labels = std::move(labels);
  ps.probabilities = std::move(probs);
  return ps;
}

PredictionSet regression_set(std::vector<double> scalars) {
  PredictionSet ps;
  ps.kind = PredictionSet::Kind::regression;
  for (std::size_t i = 0; i < scalars.size(); ++i) ps.ids.push_back(std::to_string(i));
  ps.scalars = std::move(scalars);
  return ps;
}

std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t arity) {
  std::uniform_real_distribution<double> unit(1e-6, 1.0);
  std::vector<double> p(arity);
  double sum = 0.0;
  for (auto& v : p) {
    v = unit(rng);
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

}  // namespace

TEST(JensenShannon, BoundsAndKnownValues) {
  // identical distributions
  EXPECT_NEAR(jensen_shannon_divergence({0.3, 0.7}, {0.3, 0.7}), 0.0, 1e-15);
  // disjoint point masses reach the base-2 maximum of 1
  EXPECT_NEAR(jensen_shannon_divergence({1, 0}, {0, 1}), 1.0, 1e-12);
  // hand case: Pt=[0.5,0.5], Ps=[0.75,0.25] -> ~0.0488 bits
  EXPECT_NEAR(jensen_shannon_divergence({0.5, 0.5}, {0.75, 0.25}), 0.0487949, 1e-6);
  EXPECT_THROW(jensen_shannon_divergence({0.5, 0.5}, {1.0}), ContractError);
}

TEST(JensenShannon, SymmetryAndRangeOnRandomPairs) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> arity(2, 8);
  for (int trial = 0; trial < 10000; ++trial) {
    std::size_t c = arity(rng);
    auto p = random_distribution(rng, c);
    auto q = random_distribution(rng, c);
    double pq = jensen_shannon_divergence(p, q);
    double qp = jensen_shannon_divergence(q, p);
    EXPECT_NEAR(pq, qp, 1e-12);
    EXPECT_GE(pq, -1e-15);
    EXPECT_LE(pq, 1.0 + 1e-12);
  }
}

TEST(LabelLoyalty, HandCases) {
  auto t = classification_set({1, 0, 1, 1, 0, 1, 0, 1, 0, 1},
                              std::vector<std::vector<double>>(10, {0.5, 0.5}));
  auto same = t;
  EXPECT_DOUBLE_EQ(label_loyalty(t, same), 1.0);

  auto flipped = classification_set({0, 1, 0, 0, 1, 0, 1, 0, 1, 0},
                                    std::vector<std::vector<double>>(10, {0.5, 0.5}));
  EXPECT_DOUBLE_EQ(label_loyalty(t, flipped), 0.0);

  auto nine = t;
  nine.labels[3] = 1 - nine.labels[3];
  EXPECT_DOUBLE_EQ(label_loyalty(t, nine), 0.9);
}

TEST(LabelLoyalty, EqualsTaskmetricsAccuracy) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> lab(0, 3);
  std::vector<int> tl(50), sl(50);
  for (auto& v : tl) v = lab(rng);
  for (auto& v : sl) v = lab(rng);
  auto t = classification_set(tl, std::vector<std::vector<double>>(50, {0.25, 0.25, 0.25, 0.25}));
  auto s = classification_set(sl, std::vector<std::vector<double>>(50, {0.25, 0.25, 0.25, 0.25}));
  EXPECT_DOUBLE_EQ(label_loyalty(t, s), accuracy(tl, sl));
}

TEST(LabelLoyalty, MisalignedIdsListed) {
  auto t = classification_set({0, 1}, {{1, 0}, {0, 1}});
  auto s = classification_set({0, 1}, {{1, 0}, {0, 1}});
  s.ids[1] = "weird-id";
  try {
    label_loyalty(t, s);
    FAIL() << "expected AlignmentError";
  } catch (const AlignmentError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(ProbabilityLoyalty, HandCases) {
  auto t = classification_set({0, 0}, {{0.5, 0.5}, {0.5, 0.5}});
  auto same = t;
  EXPECT_NEAR(probability_loyalty(t, same), 1.0, 1e-12);

  auto opposite = classification_set({0, 1}, {{0, 1}, {1, 0}});
  auto anti = classification_set({1, 0}, {{1, 0}, {0, 1}});
  EXPECT_NEAR(probability_loyalty(opposite, anti), 0.0, 1e-9);

  auto skew = classification_set({0, 0}, {{0.75, 0.25}, {0.75, 0.25}});
  EXPECT_NEAR(probability_loyalty(t, skew), 0.7791, 1e-3);
}

TEST(ProbabilityLoyalty, SymmetricInArguments) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    auto p = random_distribution(rng, 4);
    auto q = random_distribution(rng, 4);
    auto t = classification_set({0}, {p});
    auto s = classification_set({0}, {q});
    EXPECT_NEAR(probability_loyalty(t, s), probability_loyalty(s, t), 1e-12);
  }
}

TEST(ProbabilityLoyalty, OneExactlyWhenDistributionsAgree) {
  std::mt19937_64 rng(11);
  auto p = random_distribution(rng, 5);
  auto t = classification_set({0}, {p});
  EXPECT_NEAR(probability_loyalty(t, t), 1.0, 1e-12);
  auto q = p;
  q[0] += 0.01;
  q[1] -= 0.01;
  auto s = classification_set({0}, {q});
  EXPECT_LT(probability_loyalty(t, s), 1.0);
}

TEST(ProbabilityLoyalty, ArityMismatchRejected) {
  auto t = classification_set({0}, {{0.5, 0.5}});
  auto s = classification_set({0}, {{0.3, 0.3, 0.4}});
  EXPECT_THROW(probability_loyalty(t, s), ContractError);
}

TEST(RegressionLoyalty, HandCases) {
  auto t = regression_set({0.1, 0.5, 0.9});
  auto same = t;
  EXPECT_NEAR(regression_loyalty(t, same), 1.0, 1e-12);

  auto affine = regression_set({0.2 * 0.1 + 0.4, 0.2 * 0.5 + 0.4, 0.2 * 0.9 + 0.4});
  EXPECT_NEAR(regression_loyalty(t, affine), 1.0, 1e-12);

  // hand covariance: cov = 0.2, var_t = 0.32, var_s = 0.126667 -> r = 0.99340
  auto s = regression_set({0.2, 0.4, 0.7});
  EXPECT_NEAR(regression_loyalty(t, s), 0.99340, 1e-5);
}

TEST(RegressionLoyalty, KindAndVarianceGates) {
  auto t = regression_set({0.1, 0.5, 0.9});
  auto flat = regression_set({0.5, 0.5, 0.5});
  EXPECT_THROW(regression_loyalty(t, flat), DomainError);
  auto cls = classification_set({0}, {{1.0, 0.0}});
  EXPECT_THROW(regression_loyalty(cls, t), ContractError);
}

TEST(MultiTeacher, DuplicateTeachersEqualSingle) {
  auto t = classification_set({1, 0, 1, 1}, std::vector<std::vector<double>>(4, {0.4, 0.6}));
  auto s = classification_set({1, 1, 1, 0}, std::vector<std::vector<double>>(4, {0.3, 0.7}));
  LoyaltyReport one = multi_teacher_loyalty({t}, s);
  LoyaltyReport two = multi_teacher_loyalty({t, t}, s);
  EXPECT_DOUBLE_EQ(*one.label_loyalty, *two.label_loyalty);
  EXPECT_DOUBLE_EQ(*one.probability_loyalty, *two.probability_loyalty);
  EXPECT_EQ(two.per_teacher.size(), 2u);
  // k = 1 equals the pairwise operations
  EXPECT_DOUBLE_EQ(*one.label_loyalty, label_loyalty(t, s));
  EXPECT_DOUBLE_EQ(*one.probability_loyalty, probability_loyalty(t, s));
}

TEST(MultiTeacher, AveragesAcrossTeachers) {
  // teachers with L-L 0.8 and 0.9 against the student -> 0.85
  std::vector<std::vector<double>> uniform(10, {0.5, 0.5});
  auto s = classification_set({1, 1, 1, 1, 1, 1, 1, 1, 1, 1}, uniform);
  auto t1 = classification_set({1, 1, 1, 1, 1, 1, 1, 1, 0, 0}, uniform);  // 0.8
  auto t2 = classification_set({1, 1, 1, 1, 1, 1, 1, 1, 1, 0}, uniform);  // 0.9
  LoyaltyReport r = multi_teacher_loyalty({t1, t2}, s);
  EXPECT_DOUBLE_EQ(*r.label_loyalty, 0.85);
  EXPECT_DOUBLE_EQ(*r.per_teacher[0].label_loyalty, 0.8);
  EXPECT_DOUBLE_EQ(*r.per_teacher[1].label_loyalty, 0.9);
}

TEST(MultiTeacher, RegressionKindAveraged) {
  auto s = regression_set({0.1, 0.4, 0.8, 0.9});
  auto t1 = regression_set({0.2, 0.5, 0.7, 1.0});
  auto t2 = regression_set({0.15, 0.45, 0.75, 0.95});
  LoyaltyReport r = multi_teacher_loyalty({t1, t2}, s);
  ASSERT_TRUE(r.regression_loyalty.has_value());
  double expect = 0.5 * (regression_loyalty(t1, s) + regression_loyalty(t2, s));
  EXPECT_NEAR(*r.regression_loyalty, expect, 1e-12);
  EXPECT_FALSE(r.label_loyalty.has_value());
}

TEST(MultiTeacher, ErrorsCarryTeacherIndex) {
  auto s = classification_set({1, 0}, {{0.5, 0.5}, {0.5, 0.5}});
  auto good = classification_set({1, 0}, {{0.5, 0.5}, {0.5, 0.5}});
  auto bad = classification_set({1, 0}, {{0.5, 0.5}, {0.5, 0.5}});
  bad.ids[0] = "zzz";
  try {
    multi_teacher_loyalty({good, bad}, s);
    FAIL() << "expected AlignmentError";
  } catch (const AlignmentError& e) {
    EXPECT_NE(std::string(e.what()).find("teacher 1"), std::string::npos);
  }
}

TEST(LoyaltyReport, JsonShape) {
  auto t = classification_set({1}, {{0.2, 0.8}});
  auto s = classification_set({1}, {{0.25, 0.75}});
  auto j = multi_teacher_loyalty({t}, s).to_json();
  EXPECT_TRUE(j.contains("label_loyalty"));
  EXPECT_TRUE(j.contains("probability_loyalty"));
  EXPECT_FALSE(j.contains("regression_loyalty"));
  EXPECT_EQ(j["per_teacher"].size(), 1u);
}
