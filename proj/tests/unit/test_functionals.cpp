#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "sdemap/functionals.hpp"
#include "sdemap/optimizer.hpp"
#include "sdemap/oracle.hpp"

using namespace sdemap;

namespace {

const double kLog2Pi = std::log(2.0 * M_PI);

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

DiscretePath scalar_path(std::vector<double> t, std::vector<double> x) {
  Matrix s(1, static_cast<Index>(x.size()));
  for (std::size_t k = 0; k < x.size(); ++k) s(0, static_cast<Index>(k)) = x[k];
  return DiscretePath(TimeGrid(std::move(t), {}), s);
}

Model zero_model(Index n = 1) {
  return Model{std::make_shared<LinearDrift>(Matrix::Zero(n, n)), Diffusion(Matrix::Identity(n, n)),
               std::make_shared<GaussianDensity>(Vector::Zero(n), Matrix::Identity(n, n))};
}

DiscretePath random_path(const TimeGrid& g, Index n, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Matrix s(n, static_cast<Index>(g.size()));
  for (Index i = 0; i < s.size(); ++i) s.data()[i] = d(gen);
  return DiscretePath(g, s);
}

Problem benes_setup() {
  Problem pr{builtin_model("benes"), {}, 5.0};
  pr.measurements.push_back({5.0, vec({1.5}), GaussianLikelihood::component(1, 0, 0.16)});
  return pr;
}

double check_gradient(const std::function<MeritValue(const DiscretePath&)>& f, const DiscretePath& p) {
  const MeritValue v = f(p);
  EXPECT_TRUE(v.gradient.has_value());
  const Vector fd = fd_gradient(
      [&](const Vector& x) { return f(DiscretePath::from_flat(p.grid(), p.dim(), x)).value; }, p.flat());
  return gradient_relative_error(*v.gradient, fd);
}

}  // namespace

TEST(EulerEnergy, Examples) {
  const Model z = zero_model();
  EXPECT_DOUBLE_EQ(euler_energy(scalar_path({0, 1}, {0, 2}), *z.drift, z.diffusion).value, -2.0);
  EXPECT_DOUBLE_EQ(euler_energy(scalar_path({0, 0.2, 0.7, 1.5}, {3, 3, 3, 3}), *z.drift, z.diffusion).value, 0.0);
  const Model b = builtin_model("benes");
  EXPECT_DOUBLE_EQ(euler_energy(scalar_path({0, 0.5}, {0, 1}), *b.drift, b.diffusion).value, -1.0);
}

TEST(EulerMerit, Examples) {
  Problem p{zero_model(), {}, 1.0};
  const DiscretePath zero = DiscretePath::constant(make_uniform_grid(1.0, 4, {1.0}), Vector::Zero(1));
  EXPECT_NEAR(euler_merit(zero, p).value, -0.5 * kLog2Pi, 1e-15);
  EXPECT_NEAR(-0.5 * kLog2Pi, -0.918939, 1e-6);
  p.measurements.push_back({1.0, vec({0.0}), GaussianLikelihood::component(1, 0, 1.0)});
  EXPECT_NEAR(euler_merit(zero, p).value, -kLog2Pi, 1e-15);
  EXPECT_NEAR(-kLog2Pi, -1.837877, 1e-6);
}

TEST(EulerMerit, BenesOptimizerPathMatchesIndependentSum) {
  const Problem p = benes_setup();
  const TimeGrid g = make_uniform_grid(5.0, 4, {5.0});
  const auto r = solve(p, MeritKind::euler, initial_path(g, p, InitStrategy::prior_mean));
  // Independent summation of the Euler merit.
  double s = 0.0;
  const auto& x = r.path.states();
  for (Index k = 0; k < 4; ++k) {
    const double d = 1.25;
    const double res = (x(0, k + 1) - x(0, k)) / d - std::tanh(x(0, k));
    s -= 0.5 * d * res * res;
  }
  s += -0.5 * std::log(2.0 * M_PI * 0.16) - 0.5 * x(0, 0) * x(0, 0) / 0.16;
  s += -0.5 * std::log(2.0 * M_PI * 0.16) - 0.5 * (1.5 - x(0, 4)) * (1.5 - x(0, 4)) / 0.16;
  EXPECT_NEAR(euler_merit(r.path, p).value, s, 1e-10);
  EXPECT_NEAR(r.merit, s, 1e-10);
}

TEST(Trapezoidal, ZeroDriftEqualsEuler) {
  std::mt19937_64 gen(1);
  const Model z = zero_model(2);
  const DiscretePath p = random_path(make_uniform_grid(2.0, 9, {0.77}), 2, gen);
  EXPECT_DOUBLE_EQ(trapezoidal_om(p, *z.drift, z.diffusion).value, euler_energy(p, *z.drift, z.diffusion).value);
}

TEST(Trapezoidal, ScalarLinearExample) {
  // ln(1 - 0.5 * 0.5) - 0.5 * 0.5 * (2 - (0 + 1) / 2)^2 = ln 0.75 - 0.5625.
  const LinearDrift f(Matrix::Identity(1, 1));
  const Diffusion g(Matrix::Identity(1, 1));
  const double v = trapezoidal_om(scalar_path({0, 0.5}, {0, 1}), f, g).value;
  EXPECT_NEAR(v, std::log(0.75) - 0.5625, 1e-15);
  EXPECT_NEAR(v, -0.8501821, 1e-7);
}

TEST(Trapezoidal, VanDerPolLogDeterminant) {
  // One segment, constant zero path: only ln det(I - 0.005 [[0, 1], [-1, 2]]) = ln 0.990025 remains.
  const Model m = builtin_model("vdp");
  const DiscretePath p = DiscretePath::constant(TimeGrid({0.0, 0.01}, {}), Vector::Zero(2));
  const double v = trapezoidal_om(p, *m.drift, m.diffusion).value;
  EXPECT_NEAR(v, std::log(0.990025), 1e-15);
  EXPECT_NEAR(v, -0.0100251, 1e-7);
}

TEST(Trapezoidal, MeshTooCoarseRaises) {
  const LinearDrift f(Matrix::Identity(1, 1));
  const Diffusion g(Matrix::Identity(1, 1));
  try {
    trapezoidal_om(scalar_path({0, 0.5, 3.0}, {0, 1, 2}), f, g);
    FAIL() << "expected MeshTooCoarseError";
  } catch (const MeshTooCoarseError& e) {
    EXPECT_EQ(e.segment(), 1u);
    EXPECT_NE(std::string(e.what()).find("refine"), std::string::npos);
  }
}

TEST(Trapezoidal, MeritExample) {
  Problem p{zero_model(), {}, 1.0};
  const DiscretePath zero = DiscretePath::constant(make_uniform_grid(1.0, 3, {}), Vector::Zero(1));
  EXPECT_NEAR(trapezoidal_merit(zero, p).value, -0.5 * kLog2Pi, 1e-15);
}

TEST(Posterior, NegativeInfinityCarriesNoGradient) {
  Problem p{zero_model(), {}, 1.0};
  p.model.initial = std::make_shared<CallbackDensity>(
      1,
      [](const Vector& x) { return x(0) < 0.0 ? -std::numeric_limits<double>::infinity() : -x(0); },
      [](const Vector&) { return Vector::Constant(1, -1.0); }, Vector::Constant(1, 1.0));
  const TimeGrid g = make_uniform_grid(1.0, 2, {});
  const MeritValue bad = euler_merit(DiscretePath::constant(g, Vector::Constant(1, -1.0)), p);
  EXPECT_FALSE(bad.is_finite());
  EXPECT_FALSE(bad.gradient.has_value());
  const MeritValue good = trapezoidal_merit(DiscretePath::constant(g, Vector::Constant(1, 2.0)), p);
  EXPECT_DOUBLE_EQ(good.value, -2.0);
  ASSERT_TRUE(good.gradient.has_value());
}

TEST(Posterior, EulerEqualsTrapezoidalWhenJacobianVanishes) {
  // Constant drift: U and R differ only by the drift average, which is the same constant.
  std::mt19937_64 gen(2);
  auto c = std::make_shared<CallbackDrift>(
      2, [](double, const Vector&) { return Vector(vec({0.3, -0.7})); },
      [](double, const Vector&) { return Matrix(Matrix::Zero(2, 2)); });
  Problem p{zero_model(2), {}, 3.0};
  p.model.drift = c;
  for (int trial = 0; trial < 10; ++trial) {
    const DiscretePath x = random_path(make_uniform_grid(3.0, 5 + trial, {}), 2, gen);
    EXPECT_NEAR(euler_merit(x, p).value, trapezoidal_merit(x, p).value, 1e-12);
  }
}

TEST(Continuous, EnergyExamples) {
  const Model z = zero_model();
  EXPECT_NEAR(continuous_energy(scalar_path({0, 1}, {0, 1}), *z.drift, z.diffusion).value, -0.5, 1e-15);
  const Model b = builtin_model("benes");
  EXPECT_DOUBLE_EQ(continuous_energy(scalar_path({0, 0.4, 2}, {0, 0, 0}), *b.drift, b.diffusion).value, 0.0);
}

TEST(Continuous, DivergenceShift) {
  std::mt19937_64 gen(4);
  BuiltinParams par;
  par.ou_rate = 1.7;
  const Model ou = builtin_model("ou", par);
  const Model z = zero_model();
  for (int trial = 0; trial < 5; ++trial) {
    const DiscretePath x = random_path(make_uniform_grid(2.5, 10 + trial, {}), 1, gen);
    const double je = continuous_energy(x, *ou.drift, ou.diffusion).value;
    EXPECT_NEAR(continuous_om(x, *ou.drift, ou.diffusion).value - je, 0.5 * 1.7 * 2.5, 1e-12);
    EXPECT_DOUBLE_EQ(continuous_om(x, *z.drift, z.diffusion).value,
                     continuous_energy(x, *z.drift, z.diffusion).value);
  }
  const Model vdp = builtin_model("vdp");
  const DiscretePath zero = DiscretePath::constant(make_uniform_grid(16.0, 64, {}), Vector::Zero(2));
  EXPECT_NEAR(continuous_om(zero, *vdp.drift, vdp.diffusion).value -
                  continuous_energy(zero, *vdp.drift, vdp.diffusion).value,
              -16.0, 1e-12);
}

TEST(Continuous, SmoothPathOverloadMatchesPiecewiseLinear) {
  const Model b = builtin_model("benes");
  const TimeGrid g = make_uniform_grid(1.0, 3, {});
  const DiscretePath x = scalar_path({0, 1.0 / 3, 2.0 / 3, 1}, {0.1, 0.5, -0.2, 0.3});
  SmoothPath s{[&](double t) { return x.at(t); },
               [&](double t) {
                 const std::size_t k = g.segment_of(t);
                 return Vector((x.state(k + 1) - x.state(k)) / g.step(k));
               }};
  const auto rule = QuadratureRule::gauss_legendre(3);
  EXPECT_NEAR(continuous_energy(s, g, *b.drift, b.diffusion, rule),
              continuous_energy(x, *b.drift, b.diffusion, rule).value, 1e-14);
}

TEST(Continuous, MapMeritExample) {
  Problem p{zero_model(), {}, 1.0};
  const DiscretePath zero = DiscretePath::constant(make_uniform_grid(1.0, 3, {}), Vector::Zero(1));
  EXPECT_NEAR(map_merit(zero, p).value, -0.5 * kLog2Pi, 1e-15);
  EXPECT_NEAR(energy_merit(zero, p).value, -0.5 * kLog2Pi, 1e-15);
}

TEST(Quadrature, GaussLegendreRules) {
  for (int n : {1, 2, 3, 4, 5, 7}) {
    const auto r = QuadratureRule::gauss_legendre(n);
    ASSERT_EQ(r.nodes.size(), static_cast<std::size_t>(n));
    double sum = 0.0;
    for (double w : r.weights) {
      EXPECT_GT(w, 0.0);
      sum += w;
    }
    EXPECT_NEAR(sum, 1.0, 1e-15);
    // Exact for degree 2n - 1 on [0, 1].
    double integral = 0.0;
    for (int i = 0; i < n; ++i) integral += r.weights[i] * std::pow(r.nodes[i], 2 * n - 1);
    EXPECT_NEAR(integral, 1.0 / (2 * n), 1e-14) << n;
  }
}

TEST(Gradients, AllFunctionalsMatchFiniteDifferences) {
  std::mt19937_64 gen(8);
  const Model vdp = builtin_model("vdp");
  const Model benes = builtin_model("benes");
  for (int trial = 0; trial < 5; ++trial) {
    const TimeGrid g = make_uniform_grid(1.0, 8 + trial, {0.3, 1.0});
    const DiscretePath x2 = random_path(g, 2, gen);
    const DiscretePath x1 = random_path(g, 1, gen);
    EXPECT_LE(check_gradient([&](const DiscretePath& p) { return euler_energy(p, *vdp.drift, vdp.diffusion); }, x2),
              1e-6);
    EXPECT_LE(
        check_gradient([&](const DiscretePath& p) { return trapezoidal_om(p, *vdp.drift, vdp.diffusion); }, x2),
        1e-6);
    EXPECT_LE(
        check_gradient([&](const DiscretePath& p) { return continuous_energy(p, *vdp.drift, vdp.diffusion); }, x2),
        1e-6);
    EXPECT_LE(check_gradient([&](const DiscretePath& p) { return continuous_om(p, *vdp.drift, vdp.diffusion); }, x2),
              1e-6);
    EXPECT_LE(check_gradient([](const DiscretePath& p) { return benes_exact_prior(p); }, x1), 1e-6);
    EXPECT_LE(check_gradient([&](const DiscretePath& p) { return trapezoidal_om(p, *benes.drift, benes.diffusion); },
                             x1),
              1e-6);
  }
}

TEST(Exact, SingleStepValue) {
  const DiscretePath p = scalar_path({0, 1}, {0, 0});
  EXPECT_NEAR(benes_exact_prior(p).value, -0.5 - 0.5 * kLog2Pi, 1e-15);
  EXPECT_NEAR(benes_exact_prior(p).value, -1.418939, 1e-6);
  EXPECT_NEAR(benes_exact_log_transition(0.0, 0.0, 1.0), -1.418939, 1e-6);
}

TEST(Exact, MeritIsSumOfTransitions) {
  const Problem pr = benes_setup();
  const DiscretePath p = scalar_path({0, 1.25, 2.5, 3.75, 5}, {0.1, -0.3, 0.4, 1.0, 1.3});
  double s = -0.5 * std::log(2.0 * M_PI * 0.16) - 0.5 * 0.01 / 0.16;
  s += -0.5 * std::log(2.0 * M_PI * 0.16) - 0.5 * 0.04 / 0.16;
  for (std::size_t k = 0; k < 4; ++k)
    s += benes_exact_log_transition(p.state(k)(0), p.state(k + 1)(0), 1.25);
  EXPECT_NEAR(benes_exact_merit(p, pr).value, s, 1e-13);
}

TEST(MeritKinds, NamesRoundTrip) {
  for (MeritKind k : {MeritKind::euler, MeritKind::trapezoidal, MeritKind::exact, MeritKind::energy,
                      MeritKind::onsager_machlup})
    EXPECT_EQ(parse_merit_kind(to_string(k)), k);
  EXPECT_THROW(parse_merit_kind("simpson"), std::invalid_argument);
}
