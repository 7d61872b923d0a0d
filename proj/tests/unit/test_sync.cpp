#include <gtest/gtest.h>

#include <cmath>

#include "../support/oracles.hpp"
#include "periodavg/errors.hpp"
#include "periodavg/sync.hpp"

using namespace pavg;

namespace {

StepClock at(long k, long per_epoch = 1000, long total = 100000) {
  return StepClock{k, static_cast<int>(k / per_epoch), per_epoch, total};
}

std::vector<WorkerState> make_workers(std::size_t n, const ParamVector& w0, double mu = 0.0) {
  std::vector<WorkerState> ws;
  for (std::size_t i = 0; i < n; ++i) {
    ws.push_back(WorkerState{static_cast<int>(i), w0, make_momentum(w0.size(), mu), RngStream(1, i)});
  }
  return ws;
}

AdaptiveControllerState adapting(double c2, int p) {
  AdaptiveControllerState s = make_controller(AdaptivePeriod{});
  s.c2_sum = c2;
  s.c2_count = 1;
  s.c2 = c2;
  s.p = p;
  s.phase = AdaptivePhase::kAdapting;
  return s;
}

}  // namespace

TEST(ShouldSync, FullSyncAndPeriodOneAlwaysSync) {
  for (long k = 0; k < 50; ++k) {
    EXPECT_TRUE(should_sync(FullSync{}, nullptr, at(k)));
    EXPECT_TRUE(should_sync(ConstantPeriod{1}, nullptr, at(k)));
    EXPECT_TRUE(should_sync(Quantized{8}, nullptr, at(k)));
  }
}

TEST(ShouldSync, PeriodEightTwiceInSixteen) {
  int count = 0;
  for (long k = 0; k < 16; ++k) count += should_sync(ConstantPeriod{8}, nullptr, at(k));
  EXPECT_EQ(count, 2);
  EXPECT_TRUE(should_sync(ConstantPeriod{8}, nullptr, at(7)));
  EXPECT_TRUE(should_sync(ConstantPeriod{8}, nullptr, at(15)));
}

TEST(ShouldSync, PiecewiseSegments) {
  const PiecewiseConstant pc{{{0, 20}, {80, 5}}};
  const long per_epoch = 10;
  std::vector<long> syncs;
  for (long k = 0; k < 820; ++k) {
    if (should_sync(pc, nullptr, at(k, per_epoch))) syncs.push_back(k);
    EXPECT_EQ(current_period(pc, nullptr, at(k, per_epoch)), k < 800 ? 20 : 5);
  }
  ASSERT_EQ(syncs.size(), 40u + 4u);
  for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(syncs[i], static_cast<long>(20 * i + 19));
  EXPECT_EQ(syncs[40], 804);
}

TEST(ShouldSync, AdaptiveNeedsController) {
  EXPECT_THROW(should_sync(AdaptivePeriod{}, nullptr, at(0)), UsageError);
  EXPECT_THROW(should_sync(FullSync{}, nullptr, at(-1)), UsageError);
}

TEST(ShouldSync, AdaptiveWarmupThenCounter) {
  AdaptivePeriod a;
  a.warmup_epochs_p1 = 1;
  AdaptiveControllerState c = make_controller(a);
  EXPECT_TRUE(should_sync(a, &c, at(5, 10)));
  EXPECT_EQ(current_period(a, &c, at(5, 10)), 1);
  c.cnt = 2;
  EXPECT_FALSE(should_sync(a, &c, at(15, 10)));
  c.cnt = 3;
  EXPECT_TRUE(should_sync(a, &c, at(15, 10)));
  EXPECT_EQ(current_period(a, &c, at(15, 10)), 4);
}

TEST(AverageParams, Examples) {
  const std::vector<ParamVector> two = {ParamVector{0}, ParamVector{2}};
  EXPECT_EQ(average_params(std::span<const ParamVector>(two)), (ParamVector{1}));
  const std::vector<ParamVector> same(5, ParamVector{0.1, -3.7, 1e-300});
  EXPECT_EQ(average_params(std::span<const ParamVector>(same)), same[0]);
  const std::vector<ParamVector> none;
  EXPECT_THROW(average_params(std::span<const ParamVector>(none)), UsageError);
}

TEST(ComputeSk, Examples) {
  const std::vector<ParamVector> same(3, ParamVector{1, 2});
  EXPECT_EQ(compute_sk(std::span<const ParamVector>(same)), 0.0);
  const std::vector<ParamVector> two = {ParamVector{0}, ParamVector{2}};
  EXPECT_EQ(compute_sk(std::span<const ParamVector>(two)), 1.0);
  const std::vector<ParamVector> corners = {{0, 0}, {2, 0}, {0, 2}, {2, 2}};
  EXPECT_EQ(compute_sk(std::span<const ParamVector>(corners)), 2.0);
}

TEST(ComputeSk, MatchesDefinitionOnRandomInputs) {
  RngStream rng(3, 0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ParamVector> ws(2 + rng.uniform_below(6), ParamVector(1 + rng.uniform_below(5)));
    std::vector<std::vector<double>> raw;
    for (auto& w : ws) {
      for (auto& x : w) x = rng.normal();
      raw.push_back(w.values());
    }
    EXPECT_NEAR(compute_sk(std::span<const ParamVector>(ws)), oracle::definitional_variance(raw), 1e-12);
  }
}

TEST(AdaptPeriod, BandExamples) {
  EXPECT_EQ(adapt_period(adapting(2.0, 4), 0.10, 0.1, 50, 10, 0.7, 1.3).p, 5);
  EXPECT_EQ(adapt_period(adapting(2.0, 4), 0.20, 0.1, 50, 10, 0.7, 1.3).p, 4);
  EXPECT_EQ(adapt_period(adapting(2.0, 4), 0.30, 0.1, 50, 10, 0.7, 1.3).p, 3);
  EXPECT_EQ(adapt_period(adapting(2.0, 1), 0.30, 0.1, 50, 10, 0.7, 1.3).p, 1);
}

TEST(AdaptPeriod, SamplingAveragesRatio) {
  AdaptiveControllerState s = make_controller(AdaptivePeriod{});
  s.cnt = 3;
  s = adapt_period(s, 0.1, 0.1, 0, 10, 0.7, 1.3);
  EXPECT_EQ(s.cnt, 0);
  s = adapt_period(s, 0.3, 0.1, 4, 10, 0.7, 1.3);
  EXPECT_NEAR(s.c2, 2.0, 1e-15);
  EXPECT_EQ(s.p, 4);
  EXPECT_EQ(s.phase, AdaptivePhase::kSampling);
}

TEST(AdaptPeriod, NoSamplesIsConfigError) {
  AdaptiveControllerState s = make_controller(AdaptivePeriod{});
  EXPECT_THROW(adapt_period(s, 0.1, 0.1, 10, 10, 0.7, 1.3), ConfigError);
  EXPECT_THROW(adapt_period(s, 0.1, 0.0, 0, 10, 0.7, 1.3), UsageError);
  EXPECT_THROW(adapt_period(s, -1.0, 0.1, 0, 10, 0.7, 1.3), UsageError);
}

TEST(AdaptPeriod, PeriodMovesByAtMostOneAndStaysPositive) {
  RngStream rng(4, 0);
  AdaptiveControllerState s = adapting(1.0, 3);
  for (int i = 0; i < 2000; ++i) {
    const int before = s.p;
    s = adapt_period(s, rng.uniform() * 0.3, 0.1, 100 + i, 100, 0.7, 1.3);
    EXPECT_LE(std::abs(s.p - before), 1);
    EXPECT_GE(s.p, 1);
  }
}

TEST(Quantize, ZeroVector) {
  RngStream rng(1, 0);
  const QuantizedGrad q = quantize(ParamVector(5), 8, rng);
  EXPECT_EQ(q.scale, 0.0);
  for (auto l : q.levels) EXPECT_EQ(l, 0);
  EXPECT_EQ(dequantize(q), ParamVector(5));
}

TEST(Quantize, ExtremesAreExact) {
  RngStream rng(1, 0);
  const ParamVector g{-2.5, 1.0, 2.5};
  for (int bits = 2; bits <= 8; ++bits) {
    const QuantizedGrad q = quantize(g, bits, rng);
    EXPECT_EQ(q.levels[0], -q.max_level());
    EXPECT_EQ(q.levels[2], q.max_level());
    const ParamVector x = dequantize(q);
    EXPECT_EQ(x[0], -2.5);
    EXPECT_EQ(x[2], 2.5);
  }
}

TEST(Quantize, UnbiasedAndBounded) {
  RngStream rng(42, 0);
  const ParamVector g{0.3, -1.0, 0.05};
  const int draws = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int t = 0; t < draws; ++t) {
    const QuantizedGrad q = quantize(g, 8, rng);
    const ParamVector x = dequantize(q);
    for (std::size_t j = 0; j < 3; ++j) ASSERT_LE(std::fabs(x[j] - g[j]), q.scale / q.max_level());
    sum += x[0];
    sum_sq += x[0] * x[0];
  }
  const double m = sum / draws;
  const double se = std::sqrt((sum_sq / draws - m * m) / draws);
  EXPECT_LE(std::fabs(m - 0.3), 3 * se);
}

TEST(Quantize, PayloadAndErrors) {
  RngStream rng(1, 0);
  const QuantizedGrad q8 = quantize(ParamVector(10, 1.0), 8, rng);
  EXPECT_EQ(q8.component_payload_bytes(), 10u);
  EXPECT_EQ(q8.payload_bytes(4), 14u);
  const QuantizedGrad q3 = quantize(ParamVector(10, 1.0), 3, rng);
  EXPECT_EQ(q3.component_payload_bytes(), 4u);
  EXPECT_THROW(quantize(ParamVector{1.0}, 9, rng), UsageError);
  EXPECT_THROW(quantize(ParamVector{NAN}, 8, rng), NumericError);
}

TEST(ApplySync, FullSyncKeepsWorkersIdentical) {
  auto ws = make_workers(2, ParamVector{1.0, -1.0}, 0.9);
  RngStream rng(5, 0);
  for (long k = 0; k < 20; ++k) {
    std::vector<ParamVector> grads = {ParamVector{rng.normal(), rng.normal()}, ParamVector{rng.normal(), 0.0}};
    const SyncOutcome out = apply_sync(FullSync{}, nullptr, ws, grads, at(k), 0.1, 4);
    ASSERT_TRUE(out.event.has_value());
    EXPECT_EQ(ws[0].params, ws[1].params);
    EXPECT_EQ(out.event->bytes_per_worker, 8u);
    EXPECT_FALSE(out.event->scalar_allreduce);
  }
}

TEST(ApplySync, ConstantPeriodEventCount) {
  auto ws = make_workers(3, ParamVector{0.0});
  RngStream rng(6, 0);
  int events = 0;
  for (long k = 0; k < 4000; ++k) {
    std::vector<ParamVector> grads(3, ParamVector{0.0});
    for (auto& g : grads) g[0] = rng.normal();
    events += apply_sync(ConstantPeriod{8}, nullptr, ws, grads, at(k), 0.01, 4).event.has_value();
  }
  EXPECT_EQ(events, 500);
}

TEST(ApplySync, VarianceIsPreAveragingAndZeroAfter) {
  auto ws = make_workers(2, ParamVector{0.0});
  std::vector<ParamVector> grads = {ParamVector{1.0}, ParamVector{-1.0}};
  const SyncOutcome first = apply_sync(ConstantPeriod{2}, nullptr, ws, grads, at(0), 1.0, 4);
  EXPECT_FALSE(first.event.has_value());
  EXPECT_EQ(first.variance_before_sync, 1.0);
  const SyncOutcome second = apply_sync(ConstantPeriod{2}, nullptr, ws, grads, at(1), 1.0, 4);
  ASSERT_TRUE(second.event.has_value());
  EXPECT_EQ(second.event->s_k, 4.0);
  EXPECT_EQ(ws[0].params, ws[1].params);
  const std::vector<ParamVector> after = {ws[0].params, ws[1].params};
  EXPECT_EQ(compute_sk(std::span<const ParamVector>(after)), 0.0);
}

TEST(ApplySync, AdaptiveChargesScalarAndTracksCounter) {
  AdaptivePeriod a;
  a.warmup_epochs_p1 = 0;
  a.p_init = 3;
  AdaptiveControllerState c = make_controller(a);
  auto ws = make_workers(2, ParamVector{0.0});
  std::vector<ParamVector> grads = {ParamVector{1.0}, ParamVector{-1.0}};
  std::vector<long> syncs;
  for (long k = 0; k < 9; ++k) {
    const SyncOutcome out = apply_sync(a, &c, ws, grads, StepClock{k, 0, 100, 100}, 0.1, 4);
    if (out.event) {
      syncs.push_back(k);
      EXPECT_TRUE(out.event->scalar_allreduce);
      EXPECT_EQ(out.event->bytes_per_worker, 4u + 4u);
      EXPECT_EQ(c.cnt, 0);
    }
  }
  EXPECT_EQ(syncs, (std::vector<long>{2, 5, 8}));
  EXPECT_EQ(c.c2_count, 3);
}

TEST(ApplySync, QuantizedKeepsWorkersIdentical) {
  auto ws = make_workers(4, ParamVector(6));
  RngStream rng(8, 0);
  for (long k = 0; k < 30; ++k) {
    std::vector<ParamVector> grads(4, ParamVector(6));
    for (auto& g : grads) {
      for (auto& x : g) x = rng.normal();
    }
    const SyncOutcome out = apply_sync(Quantized{8}, nullptr, ws, grads, at(k), 0.1, 4);
    ASSERT_TRUE(out.event.has_value());
    EXPECT_EQ(out.event->payload_bytes, 6u);
    EXPECT_EQ(out.event->bytes_per_worker, 10u);
    for (const auto& w : ws) EXPECT_EQ(w.params, ws[0].params);
  }
}

TEST(ApplySync, Misaligned) {
  auto ws = make_workers(2, ParamVector{0.0});
  std::vector<ParamVector> grads = {ParamVector{1.0}};
  EXPECT_THROW(apply_sync(FullSync{}, nullptr, ws, grads, at(0), 0.1, 4), UsageError);
  std::vector<ParamVector> two(2, ParamVector{1.0});
  EXPECT_THROW(apply_sync(AdaptivePeriod{}, nullptr, ws, two, at(0), 0.1, 4), UsageError);
}

TEST(Validate, StrategyRanges) {
  EXPECT_THROW(validate(SyncStrategy{ConstantPeriod{0}}), ConfigError);
  AdaptivePeriod bad;
  bad.ks_fraction = 1.5;
  EXPECT_THROW(validate(SyncStrategy{bad}), ConfigError);
  AdaptivePeriod band;
  band.band_high = 0.9;
  EXPECT_THROW(validate(SyncStrategy{band}), ConfigError);
  EXPECT_THROW(validate(SyncStrategy{PiecewiseConstant{{{1, 4}}}}), ConfigError);
  EXPECT_THROW(validate(SyncStrategy{PiecewiseConstant{{{0, 4}, {0, 2}}}}), ConfigError);
  EXPECT_THROW(validate(SyncStrategy{Quantized{1}}), ConfigError);
  EXPECT_EQ(strategy_kind(SyncStrategy{PiecewiseConstant{{{0, 4}}}}), "piecewise_constant");
}
