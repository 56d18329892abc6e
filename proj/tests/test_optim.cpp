#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "rnnopt/linalg.hpp"
#include "rnnopt/optim.hpp"

using namespace rnnopt;

namespace {

// A parameter vector exposed as a single block.
struct Params {
  std::vector<double> theta;
  std::vector<double> grad;

  explicit Params(std::vector<double> init) : theta(std::move(init)), grad(theta.size(), 0.0) {}

  std::vector<BlockView> view() { return {BlockView{"theta", theta}}; }
  std::vector<ConstBlockView> gview() const { return {ConstBlockView{"theta", grad}}; }
};

// J = 0.5 * theta^T A theta with A = [[a, b], [b, d]].
struct Quadratic {
  double a, b, d;
  void gradient(std::span<const double> t, std::span<double> g) const {
    g[0] = a * t[0] + b * t[1];
    g[1] = b * t[0] + d * t[1];
  }
};

GradFn scalar_quadratic_grad() {
  return [](std::span<const ConstBlockView> theta, std::span<const BlockView> out) {
    out[0].values[0] = theta[0].values[0];  // d/dθ of θ²/2
  };
}

GradFn quadratic_grad(const Quadratic& q) {
  return [q](std::span<const ConstBlockView> theta, std::span<const BlockView> out) {
    q.gradient(theta[0].values, out[0].values);
  };
}

bool bit_equal(double x, double y) { return std::memcmp(&x, &y, sizeof x) == 0; }

}  // namespace

TEST(OptimizerNames, DefaultsAndRejections) {
  const OptimizerHyperparams hp;
  EXPECT_EQ(hp.learning_rate, 0.001);
  EXPECT_EQ(hp.beta1, 0.9);
  EXPECT_EQ(hp.beta2, 0.999);
  EXPECT_EQ(hp.epsilon, 1e-8);
  EXPECT_EQ(hp.momentum, 0.9);
  EXPECT_EQ(make_optimizer("adam", hp)->kind(), OptimizerKind::Adam);
  EXPECT_EQ(make_optimizer("nag", hp)->kind(), OptimizerKind::Nag);
  EXPECT_EQ(make_optimizer("momentum", hp)->kind(), OptimizerKind::Momentum);
  try {
    make_optimizer("sgd", hp);
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    for (const char* name : {"adam", "nag", "momentum"}) EXPECT_NE(msg.find(name), std::string::npos) << msg;
  }
  OptimizerHyperparams bad = hp;
  bad.momentum = 1.0;
  EXPECT_THROW(make_optimizer("nag", bad), std::invalid_argument);
  bad = hp;
  bad.beta2 = 1.0;
  EXPECT_THROW(make_optimizer("adam", bad), std::invalid_argument);
  bad = hp;
  bad.learning_rate = -1e-3;
  EXPECT_THROW(make_optimizer("momentum", bad), std::invalid_argument);
  bad = hp;
  bad.epsilon = 0.0;
  EXPECT_THROW(make_optimizer("adam", bad), std::invalid_argument);
}

TEST(Momentum, HandIteratedQuadratic) {
  Params p({1.0});
  Momentum opt(0.1, 0.9);
  p.grad[0] = p.theta[0];
  opt.step(p.view(), p.gview());
  EXPECT_NEAR(p.theta[0], 0.9, 1e-15);
  p.grad[0] = p.theta[0];
  opt.step(p.view(), p.gview());
  EXPECT_NEAR(p.theta[0], 0.72, 1e-15);
}

TEST(Momentum, ZeroGradientDecaysVelocityGeometrically) {
  Params p({0.0});
  Momentum opt(0.5, 0.8);
  p.grad[0] = 2.0;
  opt.step(p.view(), p.gview());
  double v = opt.velocity()[0][0];
  EXPECT_EQ(v, 1.0);
  p.grad[0] = 0.0;
  for (int i = 0; i < 20; ++i) {
    opt.step(p.view(), p.gview());
    EXPECT_NEAR(opt.velocity()[0][0], 0.8 * v, 1e-15);
    v = opt.velocity()[0][0];
  }
}

TEST(Nesterov, HandIteratedQuadratic) {
  Params p({1.0});
  Nesterov opt(0.1, 0.9);
  const GradFn g = scalar_quadratic_grad();
  opt.step(p.view(), g);
  EXPECT_NEAR(opt.velocity()[0][0], 0.1, 1e-15);
  EXPECT_NEAR(p.theta[0], 0.9, 1e-15);
  opt.step(p.view(), g);
  EXPECT_NEAR(opt.velocity()[0][0], 0.171, 1e-15);
  EXPECT_NEAR(p.theta[0], 0.729, 1e-15);
}

TEST(Nesterov, FirstStepEqualsMomentumFirstStep) {
  Params a({0.3, -1.7}), b({0.3, -1.7});
  const Quadratic q{2.0, 0.5, 1.0};
  Nesterov nag(0.05, 0.9);
  Momentum mom(0.05, 0.9);
  nag.step(a.view(), quadratic_grad(q));
  q.gradient(b.theta, b.grad);
  mom.step(b.view(), b.gview());
  EXPECT_TRUE(bit_equal(a.theta[0], b.theta[0]));
  EXPECT_TRUE(bit_equal(a.theta[1], b.theta[1]));
}

TEST(Nesterov, EvaluatesGradientAtLookAheadPoint) {
  Params p({1.0, 2.0});
  Nesterov opt(0.1, 0.5);
  std::vector<std::vector<double>> seen;
  const GradFn g = [&](std::span<const ConstBlockView> theta, std::span<const BlockView> out) {
    seen.emplace_back(theta[0].values.begin(), theta[0].values.end());
    out[0].values[0] = 1.0;
    out[0].values[1] = -1.0;
  };
  opt.step(p.view(), g);  // v = (0.1, -0.1)
  opt.step(p.view(), g);
  ASSERT_EQ(seen.size(), 2u);
  EXPECT_EQ(seen[0], (std::vector<double>{1.0, 2.0}));
  // theta after step 1 is (0.9, 2.1); look-ahead subtracts 0.5 * v.
  EXPECT_NEAR(seen[1][0], 0.9 - 0.05, 1e-15);
  EXPECT_NEAR(seen[1][1], 2.1 + 0.05, 1e-15);
}

TEST(ZeroMomentum, NagAndMomentumAreBitIdenticalToSgd) {
  Rng rng(17);
  const double lr = 0.03;
  Params nag_p({0.5, -0.25, 1.5}), mom_p = nag_p;
  std::vector<double> sgd = nag_p.theta;
  Nesterov nag(lr, 0.0);
  Momentum mom(lr, 0.0);
  for (int step = 0; step < 200; ++step) {
    // arbitrary gradient sequence that depends on the current point
    std::vector<double> g(3);
    for (double& x : g) x = rng.uniform(-2.0, 2.0);
    auto gfun = [&](std::span<const double> t, std::span<double> out) {
      for (std::size_t k = 0; k < 3; ++k) out[k] = g[k] + 0.1 * t[k];
    };
    std::vector<double> sg(3);
    gfun(sgd, sg);
    for (std::size_t k = 0; k < 3; ++k) sgd[k] = sgd[k] - lr * sg[k];

    gfun(mom_p.theta, mom_p.grad);
    mom.step(mom_p.view(), mom_p.gview());
    nag.step(nag_p.view(), [&](std::span<const ConstBlockView> t, std::span<const BlockView> out) {
      gfun(t[0].values, out[0].values);
    });
    for (std::size_t k = 0; k < 3; ++k) {
      ASSERT_TRUE(bit_equal(sgd[k], mom_p.theta[k])) << "momentum step " << step;
      ASSERT_TRUE(bit_equal(sgd[k], nag_p.theta[k])) << "nag step " << step;
    }
  }
}

TEST(Adam, ZeroGradientLeavesThetaUnchanged) {
  Params p({0.4, -0.2});
  Adam opt;
  opt.step(p.view(), p.gview());
  EXPECT_EQ(p.theta, (std::vector<double>{0.4, -0.2}));
  EXPECT_EQ(opt.first_moment()[0], (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(opt.second_moment()[0], (std::vector<double>{0.0, 0.0}));
}

TEST(Adam, FirstStepHandComputed) {
  Params p({0.0});
  Adam opt(0.001, 0.9, 0.999, 1e-8);
  p.grad[0] = 1.0;
  opt.step(p.view(), p.gview());
  EXPECT_NEAR(opt.first_moment()[0][0], 0.1, 1e-15);
  EXPECT_NEAR(opt.second_moment()[0][0], 0.001, 1e-15);
  EXPECT_NEAR(opt.corrected_first_moment()[0][0], 1.0, 1e-15);
  EXPECT_NEAR(opt.corrected_second_moment()[0][0], 1.0, 1e-15);
  EXPECT_NEAR(p.theta[0], -0.001 / (1.0 + 1e-8), 1e-18);
}

TEST(Adam, ConstantGradientBiasCorrectionIsExact) {
  for (double g : {1.0, -3.5, 0.02, 1234.5}) {
    Params p({0.0});
    Adam opt(0.001, 0.9, 0.999, 1e-8);
    p.grad[0] = g;
    for (int t = 1; t <= 100; ++t) {
      opt.step(p.view(), p.gview());
      EXPECT_NEAR(opt.corrected_first_moment()[0][0], g, 1e-12 * std::max(1.0, std::abs(g))) << "t=" << t;
      EXPECT_NEAR(opt.corrected_second_moment()[0][0], g * g, 1e-12 * std::max(1.0, g * g)) << "t=" << t;
      if (t == 1) EXPECT_NEAR(p.theta[0], -0.001 * (g > 0 ? 1 : -1), 1e-9);
    }
  }
}

TEST(Adam, SecondMomentNeverNegative) {
  Rng rng(4);
  Params p({0.1, 0.2, 0.3});
  Adam opt;
  for (int t = 0; t < 500; ++t) {
    for (double& g : p.grad) g = rng.uniform(-5.0, 5.0);
    opt.step(p.view(), p.gview());
    for (double v : opt.second_moment()[0]) ASSERT_GE(v, 0.0);
  }
}

TEST(Optimizers, DeterministicGivenSameStateAndGradient) {
  for (const char* name : {"adam", "nag", "momentum"}) {
    OptimizerHyperparams hp;
    hp.learning_rate = 0.01;
    auto a = make_optimizer(name, hp), b = make_optimizer(name, hp);
    Params pa({0.7, -0.3}), pb({0.7, -0.3});
    const Quadratic q{3.0, 1.0, 2.0};
    for (int i = 0; i < 50; ++i) {
      q.gradient(pa.theta, pa.grad);
      q.gradient(pb.theta, pb.grad);
      a->step(pa.view(), pa.gview(), quadratic_grad(q));
      b->step(pb.view(), pb.gview(), quadratic_grad(q));
    }
    EXPECT_EQ(pa.theta, pb.theta) << name;
    EXPECT_EQ(a->steps_taken(), 50u);
  }
}

class QuadraticConvergence : public ::testing::TestWithParam<const char*> {};

TEST_P(QuadraticConvergence, ReachesOriginWithinTenThousandSteps) {
  OptimizerHyperparams hp;
  hp.learning_rate = 0.01;
  auto opt = make_optimizer(GetParam(), hp);
  const Quadratic q{3.0, 1.0, 2.0};  // eigenvalues 1.38 and 3.62
  Params p({1.0, -1.0});
  int steps = 0;
  for (; steps < 10000; ++steps) {
    if (std::hypot(p.theta[0], p.theta[1]) < 1e-6) break;
    q.gradient(p.theta, p.grad);
    opt->step(p.view(), p.gview(), quadratic_grad(q));
  }
  EXPECT_LT(std::hypot(p.theta[0], p.theta[1]), 1e-6) << GetParam() << " after " << steps << " steps";
  RecordProperty("steps", steps);
}

INSTANTIATE_TEST_SUITE_P(AllOptimizers, QuadraticConvergence, ::testing::Values("adam", "nag", "momentum"),
                         [](const auto& info) { return std::string(info.param); });

TEST(Optimizers, NonFiniteGradientNamesTheBlock) {
  Params p({1.0});
  p.grad[0] = std::nan("");
  Adam opt;
  try {
    opt.step(p.view(), p.gview());
    FAIL();
  } catch (const OptimizerError& e) {
    EXPECT_NE(std::string(e.what()).find("theta"), std::string::npos);
  }
}

TEST(Optimizers, BlockLayoutChangeIsRejected) {
  Params p({1.0, 2.0});
  Momentum opt(0.1, 0.9);
  opt.step(p.view(), p.gview());
  Params q({1.0});
  EXPECT_ANY_THROW(opt.step(q.view(), q.gview()));
}

TEST(Optimizers, ZeroLearningRateLeavesThetaFixed) {
  for (const char* name : {"adam", "nag", "momentum"}) {
    OptimizerHyperparams hp;
    hp.learning_rate = 0.0;
    auto opt = make_optimizer(name, hp);
    Params p({0.25, -4.0});
    const Quadratic q{1.0, 0.0, 1.0};
    for (int i = 0; i < 10; ++i) {
      q.gradient(p.theta, p.grad);
      opt->step(p.view(), p.gview(), quadratic_grad(q));
    }
    EXPECT_EQ(p.theta, (std::vector<double>{0.25, -4.0})) << name;
  }
}
