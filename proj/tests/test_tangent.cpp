#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"

using namespace chaos;

TEST(ThinQr, FactorsWithPositiveDiagonal) {
  CounterRng rng(1);
  Matrix p(7, 4);
  for (Eigen::Index j = 0; j < 4; ++j)
    for (Eigen::Index i = 0; i < 7; ++i) p(i, j) = rng.normal();
  Matrix q, r;
  thin_qr(p, q, r);
  EXPECT_LT((q.transpose() * q - Matrix::Identity(4, 4)).norm(), 1e-14);
  EXPECT_LT((q * r - p).norm(), 1e-13 * p.norm());
  EXPECT_TRUE((r.diagonal().array() > 0.0).all());
  EXPECT_EQ(r.triangularView<Eigen::StrictlyLower>().toDenseMatrix().norm(), 0.0);
  EXPECT_LT((upper_inverse(r) * r - Matrix::Identity(4, 4)).norm(), 1e-13);
}

TEST(ThinQr, RankLossThrows) {
  Matrix p(3, 2);
  p << 1, 2, 1, 2, 1, 2;
  Matrix q, r;
  EXPECT_THROW(thin_qr(p, q, r), DegenerateTangentError);
  EXPECT_THROW(thin_qr(Matrix(2, 3), q, r), DimensionError);
}

TEST(ThinQr, OrthogonalImageGivesIdentityFactor) {
  CounterRng rng(2);
  const Matrix q0 = random_orthonormal<Matrix>(6, 3, rng);
  const Matrix o = random_orthonormal<Matrix>(6, 6, rng);
  Matrix q, r;
  thin_qr(Matrix(o * q0), q, r);
  EXPECT_LT((r - Matrix::Identity(3, 3)).norm(), 1e-14);
}

TEST(TangentFrame, DoublingMapKeepsUnitBasis) {
  const StepMap map(Sawtooth(1, 0.0, 0.0), Scheme::discrete, 1.0, "s");
  CounterRng rng(3);
  TangentFrame<Eigen::VectorXd> frame(1, 1, rng);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.3);
  for (int k = 0; k < 20; ++k) {
    const auto lin = map.linearize(x);
    push_basis<decltype(map)>(frame, lin);
    EXPECT_DOUBLE_EQ(std::abs(frame.Q(0, 0)), 1.0);
    EXPECT_DOUBLE_EQ(frame.R(0, 0), 2.0);
    x = lin.next();
  }
}

TEST(TangentFrame, SawtoothUncoupledExponentsAreLog2) {
  const StepMap map(Sawtooth(2, 0.0, 0.0), Scheme::discrete, 1.0, "s");
  CounterRng rng(4);
  const auto le = lyapunov_spectrum(map, map.model().initial_state(rng), 2, 1000, 10, rng);
  for (Eigen::Index i = 0; i < 2; ++i) EXPECT_NEAR(le.lambdas[i], std::numbers::ln2, 1e-12);
  EXPECT_EQ(le.positive(), 2);
}

TEST(TangentFrame, Lorenz63TraceIdentity) {
  const StepMap map(Lorenz63{}, Scheme::rk2, 0.005, "rho");
  CounterRng rng(5);
  const auto x0 = warm_up(map, map.model().initial_state(rng), 2000);
  const auto le = lyapunov_spectrum(map, x0, 3, 400000, 2000, rng);
  EXPECT_NEAR(le.sum(), -41.0 / 3.0, 0.01 * 41.0 / 3.0);
  EXPECT_NEAR(le.lambdas[0], 0.9, 0.1);
  EXPECT_NEAR(le.lambdas[1], 0.0, 0.02);
  EXPECT_EQ(le.positive(0.1), 1);
}

TEST(TangentFrame, LeadingDirectionForgetsInitialization) {
  const StepMap map(Lorenz63{}, Scheme::rk2, 0.005, "rho");
  CounterRng rng(6);
  auto x = warm_up(map, map.model().initial_state(rng), 2000);
  CounterRng ra(7), rb(8);
  TangentFrame<Eigen::Vector3d> a(3, 1, ra), b(3, 1, rb);
  for (int k = 0; k < 10000; ++k) {  // 50 time units
    const auto lin = map.linearize(x);
    push_basis<decltype(map)>(a, lin);
    push_basis<decltype(map)>(b, lin);
    x = lin.next();
  }
  const double gap = std::min((a.Q - b.Q).norm(), (a.Q + b.Q).norm());
  EXPECT_LT(gap, 1e-6);
}

TEST(TangentFrame, FullProjectionOrthogonality) {
  // After each step v is orthogonal to span(Q) and to f, the constraint set of the (m+1)-system.
  const StepMap map(Lorenz63{}, Scheme::rk2, 0.005, "rho");
  CounterRng rng(9);
  auto x = warm_up(map, map.model().initial_state(rng), 2000);
  TangentFrame<Eigen::Vector3d> frame(3, 1, rng);
  for (int k = 0; k < 5000; ++k) {
    const auto lin = map.linearize(x);
    push_basis<decltype(map)>(frame, lin);
    const Eigen::Vector3d x_next = lin.next();
    const Eigen::Vector3d f = map.flow(x_next);
    const auto s = schur(frame.Q, f);
    const Eigen::Vector3d r = regularized_step_full(frame, lin.jvp(frame.v), lin.param(), f, s);
    const double scale = r.norm() + 1.0;
    ASSERT_LT(std::abs(frame.Q.col(0).dot(frame.v)), 1e-10 * scale);
    ASSERT_LT(std::abs(f.dot(frame.v)) / f.norm(), 1e-10 * scale);
    ASSERT_LT((frame.v + frame.Q * frame.c + frame.c0 * f - r).norm(), 1e-10 * scale);
    x = x_next;
  }
}

TEST(TangentFrame, ZeroForcingDecaysTangent) {
  const StepMap map(Lorenz63{}, Scheme::rk2, 0.005, "rho");
  CounterRng rng(10);
  auto x = warm_up(map, map.model().initial_state(rng), 2000);
  TangentFrame<Eigen::Vector3d> frame(3, 1, rng);
  frame.v = Eigen::Vector3d(1.0, -2.0, 0.5);
  const Eigen::Vector3d zero = Eigen::Vector3d::Zero();
  for (int k = 0; k < 10000; ++k) {
    const auto lin = map.linearize(x);
    push_basis<decltype(map)>(frame, lin);
    const Eigen::Vector3d x_next = lin.next();
    const Eigen::Vector3d f = map.flow(x_next);
    regularized_step_full(frame, lin.jvp(frame.v), zero, f, schur(frame.Q, f));
    x = x_next;
  }
  EXPECT_LT(frame.v.norm(), 1e-12);
}

TEST(TangentFrame, OrthogonalFlowDecouplesCoefficients) {
  TangentFrame<Eigen::Vector3d> frame;
  frame.Q = Eigen::Matrix<double, 3, Eigen::Dynamic>(3, 1);
  frame.Q.col(0) = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d f(0.0, 2.0, 0.0);
  const Eigen::Vector3d r(1.5, -1.0, 3.0);
  const auto s = schur(frame.Q, f);
  regularized_step_full(frame, r, Eigen::Vector3d(Eigen::Vector3d::Zero()), f, s);
  EXPECT_DOUBLE_EQ(frame.c[0], 1.5);
  EXPECT_DOUBLE_EQ(frame.c0, f.dot(r) / f.dot(f));
  EXPECT_EQ(frame.v, Eigen::Vector3d(0.0, 0.0, 3.0));
}

TEST(TangentFrame, FullDimensionalProjectionZeroesTangent) {
  const StepMap map(Lorenz96(8, 8.0), Scheme::rk4, 0.005, "F");
  CounterRng rng(11);
  auto x = warm_up(map, map.model().initial_state(rng), 1000);
  TangentFrame<Eigen::VectorXd> frame(8, 8, rng);
  for (int k = 0; k < 50; ++k) {
    const auto lin = map.linearize(x);
    push_basis<decltype(map)>(frame, lin);
    regularized_step_reduced(frame, lin.jvp(frame.v), lin.param());
    EXPECT_LT(frame.v.norm(), 1e-13);
    x = lin.next();
  }
}

TEST(TangentFrame, FlowProjectionKeepsVarianceBounded) {
  // Without the f-projection the neutral component of v performs a random
  // walk, so the running spread of DJ·v keeps growing.
  const StepMap map(Lorenz63{}, Scheme::rk2, 0.005, "rho");
  const Objective j = Objective::parse("z");
  auto spread = [&](bool project_flow, long steps) {
    CounterRng rng(12);
    auto x = warm_up(map, map.model().initial_state(rng), 2000);
    TangentFrame<Eigen::Vector3d> frame(3, 1, rng);
    std::vector<double> samples;
    for (long k = 0; k < steps; ++k) {
      const auto lin = map.linearize(x);
      push_basis<decltype(map)>(frame, lin);
      const Eigen::Vector3d x_next = lin.next();
      if (project_flow) {
        const Eigen::Vector3d f = map.flow(x_next);
        regularized_step_full(frame, lin.jvp(frame.v), lin.param(), f, schur(frame.Q, f));
      } else {
        regularized_step_reduced(frame, lin.jvp(frame.v), lin.param());
      }
      x = x_next;
      samples.push_back(j.gradient(x).dot(frame.v));
    }
    auto std_of = [&](std::size_t lo, std::size_t hi) {
      double m = 0, s = 0;
      for (std::size_t i = lo; i < hi; ++i) m += samples[i];
      m /= static_cast<double>(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) s += (samples[i] - m) * (samples[i] - m);
      return std::sqrt(s / static_cast<double>(hi - lo));
    };
    const std::size_t n = samples.size();
    return std_of(n / 2, n) / std_of(0, n / 8);
  };
  const long steps = 160000;  // 800 time units
  EXPECT_LT(spread(true, steps), 1.5);
  EXPECT_GT(spread(false, steps), 3.0);
}

TEST(Schur, HandExamples) {
  Matrix q(3, 1);
  q << 1, 0, 0;
  const auto half = schur(q, Eigen::Vector3d(1, 1, 0));
  EXPECT_DOUBLE_EQ(half.S(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(half.S_inv(0, 0), 2.0);

  const auto identity = schur(q, Eigen::Vector3d(0, 3, -1));
  EXPECT_EQ(identity.S, Matrix::Identity(1, 1));

  Matrix q2(3, 2);
  q2 << 1, 0, 0, 1, 0, 0;
  EXPECT_THROW(schur(q2, Eigen::Vector3d(1, 2, 0)), TangencyError);
  EXPECT_THROW(schur(q, Eigen::Vector3d::Zero()), FixedPointError);
  EXPECT_THROW(schur(Matrix(4, 1), Eigen::Vector3d(1, 1, 1)), DimensionError);
}

TEST(Schur, ProjectionSolvesFullSystem) {
  CounterRng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix q = random_orthonormal<Matrix>(7, 3, rng);
    Eigen::VectorXd f(7), r(7);
    for (int i = 0; i < 7; ++i) {
      f[i] = rng.normal();
      r[i] = rng.normal();
    }
    const auto s = schur(q, f);
    const auto [c, c0] = s.project(q, f, r);
    const Eigen::VectorXd v = r - q * c - c0 * f;
    EXPECT_LT((q.transpose() * v).norm(), 1e-12 * r.norm());
    EXPECT_LT(std::abs(f.dot(v)), 1e-12 * r.norm() * f.norm());
  }
}

TEST(Reduced, Lorenz96TangentStaysBounded) {
  const StepMap map(Lorenz96(40, 8.0), Scheme::rk4, 0.005, "F");
  CounterRng rng(14);
  ReducedS3Options opts{15, 40000, 2000};
  ReducedSpaceSplit solver(map, Objective::parse("energy"), opts,
                           warm_up(map, map.model().initial_state(rng), 2000), rng);
  double first = 0.0, second = 0.0;
  while (solver.step_index() < opts.steps) {
    solver.advance();
    double& slot = solver.step_index() < opts.steps / 2 ? first : second;
    slot = std::max(slot, solver.tangent().v.norm());
  }
  EXPECT_LT(second, 10.0 * first);
  EXPECT_FALSE(solver.breakdown().diverged);
}
