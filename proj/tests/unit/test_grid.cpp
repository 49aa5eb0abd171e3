#include <gtest/gtest.h>

#include <random>

#include "sdemap/grid.hpp"
#include "sdemap/path.hpp"

using namespace sdemap;

namespace {

void expect_times(const TimeGrid& g, const std::vector<double>& expected) {
  ASSERT_EQ(g.size(), expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_NEAR(g.time(k), expected[k], 1e-15) << k;
}

}  // namespace

TEST(Grid, UniformSplit) { expect_times(make_uniform_grid(1.0, 2, {}), {0.0, 0.5, 1.0}); }

TEST(Grid, EndpointMeasurementAlreadyPresent) {
  const TimeGrid g = make_uniform_grid(5.0, 5, {5.0});
  expect_times(g, {0, 1, 2, 3, 4, 5});
  ASSERT_EQ(g.measurement_indices().size(), 1u);
  EXPECT_EQ(g.measurement_indices()[0], 5u);
}

TEST(Grid, MeasurementMergedInOrder) {
  const TimeGrid g = make_uniform_grid(1.0, 2, {0.3});
  expect_times(g, {0.0, 0.3, 0.5, 1.0});
  EXPECT_EQ(g.index_of(0.3), 1u);
  EXPECT_EQ(g.segments(), 3u);
}

TEST(Grid, RejectsBadInput) {
  EXPECT_THROW(make_uniform_grid(1.0, 0, {}), std::invalid_argument);
  EXPECT_THROW(make_uniform_grid(1.0, 2, {1.5}), std::invalid_argument);
  EXPECT_THROW(make_uniform_grid(1.0, 2, {-0.1}), std::invalid_argument);
  EXPECT_THROW(make_uniform_grid(0.0, 2, {}), std::invalid_argument);
  EXPECT_THROW(TimeGrid({0.0, 0.5, 0.5, 1.0}, {}), std::invalid_argument);
  EXPECT_THROW(TimeGrid({0.1, 1.0}, {}), std::invalid_argument);
  EXPECT_THROW(TimeGrid({0.0, 0.5, 1.0}, {0.3}), std::invalid_argument);
}

TEST(Grid, MeshBoundEnforced) {
  // One long segment among many short ones: N * mesh = 11 * 0.9 = 9.9.
  std::vector<double> t{0.0};
  for (int k = 1; k <= 10; ++k) t.push_back(0.01 * k);
  t.push_back(1.0);
  EXPECT_THROW(TimeGrid(t, {}, 5.0), std::invalid_argument);
  EXPECT_NO_THROW(TimeGrid(t, {}, 10.0));
}

TEST(Grid, RefineExamples) {
  expect_times(refine_grid(TimeGrid({0.0, 1.0}, {}), 2), {0.0, 0.5, 1.0});
  expect_times(refine_grid(TimeGrid({0.0, 0.5, 1.0}, {}), 2), {0.0, 0.25, 0.5, 0.75, 1.0});
  EXPECT_THROW(refine_grid(TimeGrid({0.0, 1.0}, {}), 1), std::invalid_argument);
}

TEST(Grid, RefineIsNestedAndKeepsMeasurements) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> meas{u(gen), u(gen), 3.0};
    const TimeGrid g = make_uniform_grid(3.0, 7 + trial, meas);
    for (int factor : {2, 3}) {
      const TimeGrid r = refine_grid(g, factor);
      EXPECT_EQ(r.segments(), g.segments() * static_cast<std::size_t>(factor));
      for (double t : g.times()) EXPECT_TRUE(r.find(t).has_value());
      ASSERT_EQ(r.measurement_indices().size(), meas.size());
      for (std::size_t i = 0; i < meas.size(); ++i)
        EXPECT_NEAR(r.time(r.measurement_indices()[i]), r.measurement_times()[i], r.tolerance());
    }
  }
}

TEST(Grid, UniformRefinementHalvesMesh) {
  const TimeGrid g = make_uniform_grid(2.0, 8, {});
  EXPECT_DOUBLE_EQ(refine_grid(g, 2).mesh(), g.mesh() / 2.0);
}

TEST(Grid, ConstructionIsDeterministic) {
  const TimeGrid a = make_uniform_grid(16.0, 1600, {0.1, 3.3, 7.77});
  const TimeGrid b = make_uniform_grid(16.0, 1600, {0.1, 3.3, 7.77});
  EXPECT_TRUE(a == b);
}

TEST(Grid, SegmentLookup) {
  const TimeGrid g({0.0, 0.3, 0.5, 1.0}, {});
  EXPECT_EQ(g.segment_of(-1.0), 0u);
  EXPECT_EQ(g.segment_of(0.4), 1u);
  EXPECT_EQ(g.segment_of(0.5), 2u);
  EXPECT_EQ(g.segment_of(2.0), 2u);
  EXPECT_FALSE(g.find(0.4).has_value());
  EXPECT_THROW(g.index_of(0.4), std::out_of_range);
}

TEST(Path, FlatLayoutIsNodeMajor) {
  const TimeGrid g({0.0, 0.5, 1.0}, {});
  Matrix s(2, 3);
  s << 1, 2, 3, 4, 5, 6;
  const DiscretePath p(g, s);
  const Vector f = p.flat();
  EXPECT_EQ(f(0), 1);
  EXPECT_EQ(f(1), 4);
  EXPECT_EQ(f(2), 2);
  const DiscretePath q = DiscretePath::from_flat(g, 2, f);
  EXPECT_EQ(q.states(), s);
  EXPECT_THROW(DiscretePath(g, Matrix::Zero(2, 2)), std::invalid_argument);
}

TEST(Path, InterpolationAndResample) {
  const TimeGrid g({0.0, 1.0, 2.0}, {});
  Matrix s(1, 3);
  s << 0.0, 2.0, 0.0;
  const DiscretePath p(g, s);
  EXPECT_DOUBLE_EQ(p.at(0.25)(0), 0.5);
  EXPECT_DOUBLE_EQ(p.at(1.5)(0), 1.0);
  EXPECT_DOUBLE_EQ(p.at(3.0)(0), 0.0);
  const DiscretePath r = p.resample(make_uniform_grid(2.0, 4, {}));
  EXPECT_DOUBLE_EQ(r.state(1)(0), 1.0);
  EXPECT_DOUBLE_EQ(r.state(2)(0), 2.0);
  EXPECT_THROW(p.resample(make_uniform_grid(3.0, 4, {})), std::invalid_argument);
}

TEST(Path, SupDistanceUsesCommonPoints) {
  const DiscretePath coarse = DiscretePath::constant(make_uniform_grid(1.0, 2, {}), Vector::Constant(1, 1.0));
  Matrix s(1, 5);
  s << 1.0, 7.0, 1.5, 7.0, 0.0;
  const DiscretePath fine(make_uniform_grid(1.0, 4, {}), s);
  EXPECT_DOUBLE_EQ(sup_distance(coarse, fine), 1.0);
  const DiscretePath other = DiscretePath::constant(TimeGrid({0.0, 0.3}, {}), Vector::Zero(1));
  const DiscretePath shifted = DiscretePath::constant(TimeGrid({0.0, 0.4}, {}), Vector::Zero(1));
  EXPECT_DOUBLE_EQ(sup_distance(other, shifted), 0.0);  // t = 0 is shared
}
