#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "ost/survival_core.hpp"

using ost::CensoredObservation;

namespace {

std::vector<double> probe_times(const std::vector<CensoredObservation>& obs) {
  std::vector<double> t{-1.0, 0.0};
  for (const auto& o : obs) {
    t.push_back(o.time);
    t.push_back(o.time + 0.125);
  }
  t.push_back(100.0);
  return t;
}

}  // namespace

TEST(KaplanMeier, HandComputedExample) {
  // times 1,2,2,3,4 with censoring at the second 2 and at 4
  std::vector<CensoredObservation> obs{{1, true}, {2, true}, {2, false}, {3, true}, {4, false}};
  const auto km = ost::kaplan_meier(obs);
  EXPECT_DOUBLE_EQ(km(0.5), 1.0);
  EXPECT_DOUBLE_EQ(km(1.0), 0.8);
  EXPECT_DOUBLE_EQ(km(2.0), 0.8 * 0.75);
  EXPECT_DOUBLE_EQ(km(3.0), 0.8 * 0.75 * 0.5);
  EXPECT_DOUBLE_EQ(km(10.0), 0.8 * 0.75 * 0.5);
  ASSERT_EQ(km.jump_times.size(), 3u);
}

TEST(KaplanMeier, NoEventsIsFlat) {
  std::vector<CensoredObservation> obs{{1, false}, {2, false}};
  const auto km = ost::kaplan_meier(obs);
  EXPECT_TRUE(km.jump_times.empty());
  EXPECT_DOUBLE_EQ(km(5.0), 1.0);
  EXPECT_DOUBLE_EQ(ost::restricted_mean_survival(km, 10.0), 10.0);
}

TEST(KaplanMeier, AllEventsReachZero) {
  std::vector<CensoredObservation> obs{{1, true}, {2, true}, {3, true}};
  const auto km = ost::kaplan_meier(obs);
  EXPECT_DOUBLE_EQ(km(3.0), 0.0);
  EXPECT_NEAR(ost::restricted_mean_survival(km, 10.0), 1.0 + 2.0 / 3.0 + 1.0 / 3.0, 1e-12);
}

TEST(KaplanMeier, EmptyInputThrows) {
  std::vector<CensoredObservation> none;
  EXPECT_THROW(ost::kaplan_meier(none), ost::EmptyInput);
  EXPECT_THROW(ost::nelson_aalen(none), ost::EmptyInput);
}

TEST(KaplanMeier, EventsPrecedeCensoringAtTies) {
  // A subject censored at 2 is still at risk at 2.
  std::vector<CensoredObservation> obs{{2, true}, {2, false}};
  EXPECT_DOUBLE_EQ(ost::kaplan_meier(obs)(2.0), 0.5);
  EXPECT_DOUBLE_EQ(ost::nelson_aalen(obs)(2.0), 0.5);
}

TEST(RestrictedMean, InvalidHorizon) {
  std::vector<CensoredObservation> obs{{1, true}};
  const auto km = ost::kaplan_meier(obs);
  EXPECT_THROW(ost::restricted_mean_survival(km, 0.0), ost::InvalidHorizon);
  EXPECT_THROW(ost::restricted_mean_survival(km, -1.0), ost::InvalidHorizon);
  EXPECT_THROW(ost::restricted_mean_survival(km, std::nan("")), ost::InvalidHorizon);
}

TEST(RestrictedMean, HorizonBeforeFirstEvent) {
  std::vector<CensoredObservation> obs{{5, true}, {6, false}};
  EXPECT_DOUBLE_EQ(ost::restricted_mean_survival(ost::kaplan_meier(obs), 3.0), 3.0);
}

TEST(Estimators, MatchBruteForceOnRandomSamples) {
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<int> size(1, 120);
  double worst = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto obs = oracle::random_sample(rng, static_cast<std::size_t>(size(rng)), 0.4, rep % 2 == 1);
    const auto km = ost::kaplan_meier(obs);
    const auto na = ost::nelson_aalen(obs);
    for (double t : probe_times(obs)) {
      worst = std::max(worst, std::abs(km(t) - oracle::km_at(obs, t)));
      worst = std::max(worst, std::abs(na(t) - oracle::na_at(obs, t)));
    }
    for (double h : {0.3, 2.5, 10.0})
      worst = std::max(worst, std::abs(ost::restricted_mean_survival(km, h) - oracle::rmst(obs, h)));
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(Estimators, SurvivalIsMonotoneAndBounded) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 100; ++rep) {
    const auto obs = oracle::random_sample(rng, 60, 0.3, true);
    const auto km = ost::kaplan_meier(obs);
    double prev = 1.0;
    for (double v : km.values) {
      EXPECT_LE(v, prev + 1e-15);
      EXPECT_GE(v, 0.0);
      prev = v;
    }
    const auto na = ost::nelson_aalen(obs);
    for (std::size_t i = 1; i < na.values.size(); ++i) EXPECT_GE(na.values[i], na.values[i - 1]);
  }
}

TEST(NelsonAalen, SumOverSubjectsEqualsEventCount) {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 200; ++rep) {
    const auto obs = oracle::random_sample(rng, 1 + rep % 150, 0.35, rep % 3 == 0);
    const auto na = ost::nelson_aalen(obs);
    double sum = 0, events = 0;
    for (const auto& o : obs) {
      sum += o.weight * na(o.time);
      if (o.event) events += o.weight;
    }
    EXPECT_NEAR(sum, events, 1e-9);
  }
}

TEST(Estimators, WeightsActAsReplication) {
  std::vector<CensoredObservation> weighted{{1, true, 2.0}, {2, false, 1.0}, {3, true, 3.0}};
  std::vector<CensoredObservation> replicated{{1, true}, {1, true}, {2, false}, {3, true}, {3, true}, {3, true}};
  const auto a = ost::kaplan_meier(weighted), b = ost::kaplan_meier(replicated);
  for (double t : {0.5, 1.0, 2.0, 3.0, 4.0}) EXPECT_NEAR(a(t), b(t), 1e-15);
  const auto ha = ost::nelson_aalen(weighted), hb = ost::nelson_aalen(replicated);
  for (double t : {0.5, 1.0, 2.0, 3.0, 4.0}) EXPECT_NEAR(ha(t), hb(t), 1e-15);
}
