#include <gtest/gtest.h>

#include <cmath>

#include "spbp/metrics.hpp"

using namespace spbp;

TEST(Composite, FullDelivery) { EXPECT_DOUBLE_EQ(composite_latency(50, 1.0, 1000), 50.0); }

TEST(Composite, NoDelivery) { EXPECT_DOUBLE_EQ(composite_latency(0, 0.0, 1000), 1000.0); }

TEST(Composite, HalfDelivered) {
  FlowSpec f{0, 1, 1.0, FlowKind::Streaming, 0, 30};
  FlowCounters c{20, 10, 400};
  auto m = flow_metrics(f, c, 1000);
  EXPECT_DOUBLE_EQ(m.mean_latency, 40.0);
  EXPECT_DOUBLE_EQ(m.delivery_ratio, 0.5);
  EXPECT_DOUBLE_EQ(m.composite_latency, 520.0);
  EXPECT_DOUBLE_EQ(m.throughput, 0.01);
}

TEST(Composite, MonotoneInDeliveryRatio) {
  for (double lat : {0.0, 10.0, 999.0})
    for (double r = 0.0; r < 1.0; r += 0.05)
      EXPECT_GE(composite_latency(lat, r, 1000), composite_latency(lat, r + 0.05, 1000));
}

TEST(Finalize, EmptyFlowConvention) {
  std::vector<FlowSpec> flows{{0, 1, 0.0, FlowKind::Bursty, 0, 30}};
  std::vector<FlowCounters> c{{0, 0, 0}};
  auto r = finalize(flows, c, 1000);
  ASSERT_EQ(r.flows.size(), 1u);
  EXPECT_TRUE(r.flows[0].empty);
  EXPECT_DOUBLE_EQ(r.flows[0].delivery_ratio, 1.0);
  EXPECT_DOUBLE_EQ(r.flows[0].composite_latency, 0.0);
}

TEST(Finalize, KindAverages) {
  std::vector<FlowSpec> flows{{0, 1, 1.0, FlowKind::Streaming, 0, 30},
                              {1, 2, 1.0, FlowKind::Streaming, 0, 30},
                              {2, 0, 1.0, FlowKind::Bursty, 5, 30}};
  std::vector<FlowCounters> c{{10, 10, 20}, {10, 5, 50}, {4, 4, 4}};
  auto r = finalize(flows, c, 100);
  ASSERT_EQ(r.by_kind.size(), 2u);
  const auto* s = r.kind(FlowKind::Streaming);
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(s->flows, 2);
  EXPECT_DOUBLE_EQ(s->throughput, (0.10 + 0.05) / 2);
  EXPECT_DOUBLE_EQ(s->composite_latency, (2.0 + (10.0 * 0.5 + 100 * 0.5)) / 2);
  EXPECT_DOUBLE_EQ(r.kind(FlowKind::Bursty)->mean_latency, 1.0);
  EXPECT_EQ(r.generated, 24);
  EXPECT_EQ(r.delivered, 19);
}

TEST(Aggregate, IdenticalRecordsZeroWidth) {
  std::vector<SampleRow> rows{{{"a"}, {3.0}}, {{"a"}, {3.0}}, {{"a"}, {3.0}}};
  auto g = aggregate(rows);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_DOUBLE_EQ(g[0].mean[0], 3.0);
  EXPECT_DOUBLE_EQ(g[0].ci95[0], 0.0);
}

TEST(Aggregate, TwoValues) {
  std::vector<SampleRow> rows{{{"a"}, {0.0}}, {{"a"}, {2.0}}};
  auto g = aggregate(rows);
  EXPECT_DOUBLE_EQ(g[0].mean[0], 1.0);
  EXPECT_DOUBLE_EQ(g[0].ci95[0], 1.96 * std::sqrt(2.0) / std::sqrt(2.0));
}

TEST(Aggregate, InsufficientSamples) {
  std::vector<SampleRow> rows{{{"a"}, {0.0}}, {{"a"}, {2.0}}, {{"b"}, {1.0}}};
  EXPECT_THROW(aggregate(rows), InsufficientSamples);
}

TEST(Aggregate, CoverageMonteCarlo) {
  // 100 draws of N(5, 1) per repetition; the CI should cover 5 about 95%
  // of the time.
  SplitMix64 rng(2024);
  auto normal = [&rng]() {
    double u1 = rng.uniform01(), u2 = rng.uniform01();
    return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  };
  const int reps = 1000;
  int covered = 0;
  for (int r = 0; r < reps; ++r) {
    std::vector<SampleRow> rows;
    for (int k = 0; k < 100; ++k) rows.push_back({{"g"}, {5.0 + normal()}});
    auto g = aggregate(rows);
    if (std::abs(g[0].mean[0] - 5.0) <= g[0].ci95[0]) ++covered;
  }
  const double rate = static_cast<double>(covered) / reps;
  EXPECT_GT(rate, 0.92);
  EXPECT_LT(rate, 0.98);
}
