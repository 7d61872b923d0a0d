#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "../support/oracles.hpp"
#include "periodavg/errors.hpp"
#include "periodavg/metrics.hpp"

using namespace pavg;
namespace fs = std::filesystem;

namespace {

MetricsRecord rec(long k, double var) {
  MetricsRecord r;
  r.k = k;
  r.var_wk = var;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(VarianceOfWorkers, Examples) {
  const std::vector<ParamVector> same(4, ParamVector{3, 1});
  EXPECT_EQ(variance_of_workers(std::span<const ParamVector>(same)), 0.0);
  const std::vector<ParamVector> two = {ParamVector{0}, ParamVector{2}};
  EXPECT_EQ(variance_of_workers(std::span<const ParamVector>(two)), 1.0);
  RngStream rng(1, 0);
  std::vector<ParamVector> ws(5, ParamVector(3));
  for (auto& w : ws) {
    for (auto& x : w) x = rng.normal();
  }
  EXPECT_EQ(variance_of_workers(std::span<const ParamVector>(ws)), compute_sk(std::span<const ParamVector>(ws)));
}

TEST(VarianceOfWorkers, TranslationAndScaling) {
  RngStream rng(2, 0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<ParamVector> ws(4, ParamVector(3));
    for (auto& w : ws) {
      for (auto& x : w) x = rng.normal();
    }
    const double base = variance_of_workers(std::span<const ParamVector>(ws));
    std::vector<ParamVector> shifted = ws, scaled = ws;
    const ParamVector shift{rng.normal(), rng.normal(), rng.normal()};
    for (auto& w : shifted) axpy_inplace(1.0, shift, w);
    for (auto& w : scaled) {
      for (auto& x : w) x *= 3.0;
    }
    EXPECT_NEAR(variance_of_workers(std::span<const ParamVector>(shifted)), base, 1e-12);
    EXPECT_NEAR(variance_of_workers(std::span<const ParamVector>(scaled)), 9.0 * base, 1e-12);
  }
}

TEST(VtSeries, ConstantVarianceGivesConstantVt) {
  std::vector<MetricsRecord> records;
  for (long k = 0; k < 12; ++k) records.push_back(rec(k, 0.25));
  const std::vector<long> syncs = {3, 7, 11};
  const auto series = vt_series(records, syncs);
  ASSERT_EQ(series.size(), 3u);
  for (const auto& pt : series) EXPECT_EQ(pt.v_t, 0.25);
  EXPECT_EQ(series[1].sync_k, 7);
}

TEST(VtSeries, WindowIncludesClosingSync) {
  std::vector<MetricsRecord> records = {rec(0, 1), rec(1, 2), rec(2, 3), rec(3, 10), rec(4, 20)};
  const std::vector<long> syncs = {2, 4};
  const auto series = vt_series(records, syncs);
  ASSERT_EQ(series.size(), 2u);
  EXPECT_EQ(series[0].v_t, 2.0);
  EXPECT_EQ(series[1].v_t, 15.0);
}

TEST(VtSeries, NoiseWalkMatchesClosedForm) {
  for (int p : {1, 4, 8}) {
    std::vector<double> means;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto series = oracle::noise_walk_vt(ConstantPeriod{p}, 8, 4, 0.1, 1.0, 200L * p, seed);
      ASSERT_EQ(series.size(), 200u);
      double sum = 0.0;
      for (const auto& pt : series) sum += pt.v_t;
      means.push_back(sum / 200.0);
    }
    EXPECT_NEAR(mean(means) / oracle::noise_walk_vt_closed_form(0.1, 1.0, 8, p), 1.0, 0.1) << "p=" << p;
  }
}

TEST(VtSeries, ScalesWithLearningRateSquared) {
  double hi = 0.0, lo = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const auto& pt : oracle::noise_walk_vt(ConstantPeriod{8}, 8, 4, 0.1, 1.0, 1600, seed)) hi += pt.v_t;
    for (const auto& pt : oracle::noise_walk_vt(ConstantPeriod{8}, 8, 4, 0.01, 1.0, 1600, seed)) lo += pt.v_t;
  }
  EXPECT_GE(hi / lo, 30.0);
  EXPECT_LE(hi / lo, 300.0);
}

TEST(WeightedGradNorm, Examples) {
  std::vector<MetricsRecord> constant(3);
  for (int i = 0; i < 3; ++i) {
    constant[i].lr = 0.1;
    constant[i].grad_sq_norm = i + 1.0;
  }
  EXPECT_NEAR(weighted_grad_norm_metric(constant), 2.0, 1e-15);
  const std::vector<double> zeros = {0, 0};
  const std::vector<double> lrs = {1, 1};
  EXPECT_EQ(weighted_grad_norm_metric(lrs, zeros), 0.0);
  const std::vector<double> lr2 = {1, 3};
  const std::vector<double> g2 = {2, 6};
  EXPECT_EQ(weighted_grad_norm_metric(lr2, g2), 5.0);
  const std::vector<double> with_gap = {2, NAN, 6};
  const std::vector<double> lr3 = {1, 100, 3};
  EXPECT_EQ(weighted_grad_norm_metric(lr3, with_gap), 5.0);
}

TEST(AllreduceTime, Formula) {
  CostModel m;
  m.n = 1;
  EXPECT_EQ(allreduce_time(m, 123456), 0.0);
  m.n = 2;
  m.latency_s = 0.0;
  m.bandwidth_bytes_per_s = 1000.0;
  EXPECT_EQ(allreduce_time(m, 500), 0.5);
  m.n = 4;
  m.latency_s = 1e-3;
  EXPECT_NEAR(allreduce_time(m, 1000), 6e-3 + 1.5, 1e-15);
}

TEST(CostModel, Validation) {
  CostModel m;
  m.bandwidth_bytes_per_s = 0.0;
  EXPECT_THROW(validate(m), ConfigError);
}

TEST(CommAccount, PeriodEightIsExactlyEighthOfFullSync) {
  CostModel cost;
  cost.n = 8;
  CommAccount full, cp;
  const SyncEvent e{0, 0.0, 1, 1, 2952, 2952, false};
  for (int k = 0; k < 1920; ++k) {
    full.record(e);
    if ((k + 1) % 8 == 0) cp.record(e);
  }
  EXPECT_EQ(cp.modeled_time(cost), full.modeled_time(cost) / 8.0);
  EXPECT_EQ(cp.bytes(), 240 * 2952);
}

TEST(CommAccount, ScalarAllreducesAddOneEach) {
  CostModel cost;
  cost.n = 4;
  CommAccount acc;
  for (int i = 0; i < 10; ++i) acc.record(SyncEvent{i, 0.0, 4, 4, 404, 400, true});
  EXPECT_EQ(acc.scalar_allreduces(), 10);
  EXPECT_EQ(acc.bytes(), 4040);
  EXPECT_EQ(acc.modeled_time(cost), 10.0 * allreduce_time(cost, 400) + 10.0 * allreduce_time(cost, 4));
}

TEST(MetricsCsv, HeaderOnlyForEmpty) {
  const std::string path = (fs::temp_directory_path() / "periodavg_empty_metrics.csv").string();
  write_metrics_csv({}, path);
  EXPECT_EQ(slurp(path),
            "k,epoch,lr,train_loss,eval_accuracy,var_wk,s_k,period,sync_count_cum,bytes_cum,"
            "comm_time_modeled_cum,grad_sq_norm\n");
  EXPECT_TRUE(read_metrics_csv(path).empty());
}

TEST(MetricsCsv, RoundTripWithNaNCells) {
  MetricsRecord r;
  r.k = 41;
  r.epoch = 2;
  r.lr = 0.1;
  r.train_loss = 0.1 + 0.2;
  r.eval_accuracy = NAN;
  r.var_wk = 1.0 / 3.0;
  r.s_k = NAN;
  r.period = 7;
  r.sync_count_cum = 6;
  r.bytes_cum = 1234;
  r.comm_time_modeled_cum = 3.14159e-5;
  r.grad_sq_norm = 2.5e-300;
  const std::string path = (fs::temp_directory_path() / "periodavg_one_metrics.csv").string();
  write_metrics_csv(std::vector<MetricsRecord>{r}, path);
  const std::string text = slurp(path);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_NE(text.find(",,"), std::string::npos);
  const auto back = read_metrics_csv(path);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].k, 41);
  EXPECT_EQ(back[0].train_loss, r.train_loss);
  EXPECT_TRUE(std::isnan(back[0].eval_accuracy));
  EXPECT_EQ(back[0].var_wk, r.var_wk);
  EXPECT_TRUE(std::isnan(back[0].s_k));
  EXPECT_EQ(back[0].period, 7);
  EXPECT_EQ(back[0].bytes_cum, 1234);
  EXPECT_EQ(back[0].comm_time_modeled_cum, r.comm_time_modeled_cum);
  EXPECT_EQ(back[0].grad_sq_norm, r.grad_sq_norm);
}

TEST(MetricsCsv, Errors) {
  EXPECT_THROW(write_metrics_csv({}, "/nonexistent/dir/x.csv"), IoError);
  const std::string path = (fs::temp_directory_path() / "periodavg_bad_metrics.csv").string();
  std::ofstream(path) << "k,epoch\n1,2\n";
  EXPECT_THROW(read_metrics_csv(path), FormatError);
}

TEST(FormatReal, SeventeenDigits) {
  EXPECT_EQ(format_real(0.1), "0.10000000000000001");
  EXPECT_EQ(format_real(NAN), "");
  EXPECT_EQ(format_real(2.0), "2");
}
