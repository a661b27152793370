// Copyright 2026 The Digplan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include "digplan/model/constraints.hpp"
#include "digplan/model/defaults.hpp"
#include "digplan/model/dynamics.hpp"
#include "gtest/gtest.h"
#include "oracles/model_oracles.hpp"

namespace digplan {
namespace {

using oracle::JointSampler;

constexpr int kSamples = 1000;

JointSampler MakeSampler(unsigned seed) {
  return JointSampler(oracle::DefaultJointLower(), oracle::DefaultJointUpper(),
                      seed);
}

double MaxRelError(const MatX& a, const MatX& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

TEST(LinkageTest, LawOfCosines) {
  const LinkageParams unit{1.0, 1.0, 0.0};
  EXPECT_NEAR(LinkageLength(unit, kPi / 2), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(LinkageAngle(unit, std::sqrt(2.0)), kPi / 2, 1e-15);
  EXPECT_NEAR(LinkageLength(unit, 1e-8), 1e-8, 1e-12);
  EXPECT_THROW(LinkageLength(unit, 0.0), DomainError);
  EXPECT_THROW(LinkageLength(unit, kPi), DomainError);
  EXPECT_THROW(LinkageAngle(unit, 2.0), DomainError);
  EXPECT_THROW(LinkageAngle(unit, 0.0), DomainError);
}

TEST(LinkageTest, FoldedLinkageIsSingular) {
  const LinkageParams unit{1.0, 1.0, 0.0};
  EXPECT_THROW(LinkageAngleRate(unit, 1e-10, 1e-10), SingularityError);
}

TEST(KinematicsTest, RoundTripIsIdentity) {
  const Kinematics kin(DefaultModelParams());
  JointSampler s = MakeSampler(1);
  for (int n = 0; n < kSamples; ++n) {
    const Vec4 q = s.Configuration();
    EXPECT_LT((kin.CylinderToJoint(kin.JointToCylinder(q)) - q).cwiseAbs().maxCoeff(),
              1e-12);
  }
}

TEST(KinematicsTest, StrokeBoundMapsToClosedFormAngle) {
  const ModelParams p = DefaultModelParams();
  const PhysicalLimits lim = DefaultLimits();
  const Kinematics kin(p);
  for (int j = 0; j < 3; ++j) {
    const LinkageParams& lk = p.linkages[j];
    const double len = lim.length_lower[j];
    const double expected =
        std::acos((lk.a_m * lk.a_m + lk.b_m * lk.b_m - len * len) /
                  (2.0 * lk.a_m * lk.b_m)) -
        lk.angle_offset_rad;
    Vec4 q_l = Vec4::Constant(0.0);
    q_l.tail<3>() = lim.length_lower;
    EXPECT_NEAR(kin.CylinderToJoint(q_l)[j + 1], expected, 1e-14);
    EXPECT_NEAR(oracle::CylinderLength(lk.a_m, lk.b_m, lk.angle_offset_rad, expected),
                len, 1e-12);
  }
}

TEST(KinematicsTest, JacobiansMatchFiniteDifferences) {
  const Kinematics kin(DefaultModelParams());
  JointSampler s = MakeSampler(2);
  for (int n = 0; n < kSamples; ++n) {
    const Vec4 q = s.Configuration();
    const Vec4 q_l = kin.JointToCylinder(q);
    const LinkageJacobians jac = kin.Jacobians(q_l, Vec4::Zero());
    const MatX fd = oracle::NumericJacobian(
        [&](const VecX& x) -> VecX { return kin.JointToCylinder(x); }, q);
    ASSERT_LT(MaxRelError(jac.Jtheta, fd), 1e-6);
    ASSERT_LT((jac.JL * jac.Jtheta - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(jac.JL.row(0), Vec4::UnitX().transpose());
    EXPECT_EQ(jac.JL.col(0), Vec4::UnitX());
  }
}

TEST(KinematicsTest, JacobianRateMatchesFiniteDifference) {
  const Kinematics kin(DefaultModelParams());
  JointSampler s = MakeSampler(3);
  for (int n = 0; n < 100; ++n) {
    const Vec4 q_l = kin.JointToCylinder(s.Configuration());
    const Vec4 qd_l = Vec4(0.3, 0.1, -0.1, 0.05).cwiseProduct(s.Rate(1.0));
    const double h = 1e-6;
    const Mat4 fd = (kin.Jacobians(q_l + h * qd_l, qd_l).JL -
                     kin.Jacobians(q_l - h * qd_l, qd_l).JL) /
                    (2.0 * h);
    EXPECT_LT(MaxRelError(kin.Jacobians(q_l, qd_l).JL_dot, fd), 1e-6);
  }
}

TEST(KinematicsTest, TipPoseClosedForms) {
  ModelParams p = DefaultModelParams();
  // Unit linkages keep every joint angle admissible for these checks.
  for (auto& lk : p.linkages) lk = {1.0, 1.0, kPi / 2};
  const Kinematics kin(p);
  const double reach = p.links[0].length_m + p.links[1].length_m + p.links[2].length_m;

  const TipPose flat = kin.TipFromJoint(Vec4::Zero());
  EXPECT_NEAR(flat.x, p.boom_pivot_m.x() + reach, 1e-12);
  EXPECT_NEAR(flat.z, p.boom_pivot_m.y(), 1e-12);
  EXPECT_NEAR(flat.theta, 0.0, 1e-15);

  // A positive boom angle pitches the whole arm straight down.
  const TipPose down = kin.TipFromJoint(Vec4(0.0, kPi / 2, 0.0, 0.0));
  EXPECT_NEAR(down.x, p.boom_pivot_m.x(), 1e-12);
  EXPECT_NEAR(down.z, p.boom_pivot_m.y() - reach, 1e-12);

  const TipPose up = kin.TipFromJoint(Vec4(0.0, -kPi / 2, 0.0, 0.0));
  EXPECT_NEAR(up.z, p.boom_pivot_m.y() + reach, 1e-12);
}

TEST(KinematicsTest, TipPoseMatchesWorldOracleAndJacobian) {
  const ModelParams p = DefaultModelParams();
  const Kinematics kin(p);
  JointSampler s = MakeSampler(4);
  for (int n = 0; n < 200; ++n) {
    const Vec4 q = s.Configuration();
    const TipPose tip = kin.TipFromJoint(q);
    const Vec3 world = oracle::TipWorld(p, q);
    EXPECT_NEAR(tip.x, world.x(), 1e-12);
    EXPECT_NEAR(tip.z, world.z(), 1e-12);
    EXPECT_DOUBLE_EQ(tip.theta, q[1] + q[2] + q[3]);

    const Vec3 lengths = kin.JointToCylinder(q).tail<3>();
    const MatX fd = oracle::NumericJacobian(
        [&](const VecX& l) -> VecX {
          const TipPose t = kin.TipFromLengths(l);
          return Vec3(t.x, t.z, t.theta);
        },
        lengths);
    EXPECT_LT(MaxRelError(kin.TipJacobianLengths(lengths), fd), 1e-6);
  }
}

TEST(KinematicsTest, PlanarInverseRecoversJointAngles) {
  const Kinematics kin(DefaultModelParams());
  JointSampler s = MakeSampler(5);
  for (int n = 0; n < 200; ++n) {
    const Vec4 q = s.Configuration();
    const Vec3 angles = kin.PlanarInverse(kin.TipFromJoint(q));
    EXPECT_LT((angles - q.tail<3>()).cwiseAbs().maxCoeff(), 1e-9);
  }
  EXPECT_THROW(kin.PlanarInverse({30.0, 0.0, 1.0}), DomainError);
}

TEST(DynamicsTest, MassMatrixAndGravityMatchEnergyOracle) {
  const ModelParams p = DefaultModelParams();
  const Dynamics dyn(p);
  JointSampler s = MakeSampler(6);
  for (int n = 0; n < 200; ++n) {
    const Vec4 q = s.Configuration();
    const DynamicsTerms t = dyn.Terms({q, Vec4::Zero()});
    EXPECT_LT(MaxRelError(t.M, oracle::MassMatrix(p, q)), 1e-6);
    EXPECT_LT(MaxRelError(t.G, oracle::Gravity(p, q)), 1e-6);
    EXPECT_NEAR(dyn.PotentialEnergy(q), oracle::PotentialEnergy(p, q), 1e-8);
  }
}

TEST(DynamicsTest, MassMatrixIsSymmetricPositiveDefinite) {
  const Dynamics dyn(DefaultModelParams());
  JointSampler s = MakeSampler(7);
  for (int n = 0; n < kSamples; ++n) {
    const Mat4 m = dyn.MassMatrix(s.Configuration());
    ASSERT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-9);
    ASSERT_GT(Eigen::SelfAdjointEigenSolver<Mat4>(m).eigenvalues().minCoeff(), 0.0);
  }
}

TEST(DynamicsTest, CoriolisSkewSymmetry) {
  const Dynamics dyn(DefaultModelParams());
  JointSampler s = MakeSampler(8);
  for (int n = 0; n < kSamples; ++n) {
    const JointState x{s.Configuration(), s.Rate(0.5)};
    const double h = 1e-3;
    const auto m_at = [&](double s) { return dyn.MassMatrix(x.q + s * h * x.qd); };
    const Mat4 m_dot = (m_at(-2) - 8.0 * m_at(-1) + 8.0 * m_at(1) - m_at(2)) / (12.0 * h);
    const Mat4 c = dyn.Terms(x).C;
    const double scale = x.qd.squaredNorm() * m_dot.norm();
    ASSERT_LT(std::abs(x.qd.dot((m_dot - 2.0 * c) * x.qd)) / std::max(1.0, scale), 1e-8);
    ASSERT_LT((dyn.MassMatrixRate(x) - c - c.transpose()).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(DynamicsTest, RestBiasIsGravityWithNoSwingComponent) {
  const Dynamics dyn(DefaultModelParams());
  JointSampler s = MakeSampler(9);
  for (int n = 0; n < 100; ++n) {
    const JointState x{s.Configuration(), Vec4::Zero()};
    const DynamicsTerms t = dyn.Terms(x);
    EXPECT_EQ(t.h(x.qd), t.G);
    EXPECT_EQ(t.G[kSwing], 0.0);
  }
}

TEST(DynamicsTest, CylinderMassMatrixMatchesIndependentAssembly) {
  const ModelParams p = DefaultModelParams();
  const Dynamics dyn(p);
  const Kinematics& kin = dyn.kinematics();
  JointSampler s = MakeSampler(10);
  for (int n = 0; n < 100; ++n) {
    const Vec4 q_l = kin.JointToCylinder(s.Configuration());
    const MatX jl = oracle::NumericJacobian(
        [&](const VecX& x) -> VecX { return kin.CylinderToJoint(x); }, q_l, 1e-7);
    const Vec4 q = kin.CylinderToJoint(q_l);
    const Mat4 oracle_ml = jl.transpose() * oracle::MassMatrix(p, q) * jl;
    const Mat4 ml = dyn.Cylinder({q_l, Vec4::Zero()}).M;
    EXPECT_LT(MaxRelError(ml, oracle_ml), 1e-6);
    // Exact assembly from the library's own pieces.
    const LinkageJacobians jac = kin.Jacobians(q_l, Vec4::Zero());
    EXPECT_LT(MaxRelError(ml, jac.JL.transpose() * dyn.MassMatrix(q) * jac.JL), 1e-10);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Mat4>(ml).eigenvalues().minCoeff(), 0.0);
  }
}

TEST(DynamicsTest, CylinderDynamicsAgreesWithJointDynamics) {
  const Dynamics dyn(DefaultModelParams());
  const Kinematics& kin = dyn.kinematics();
  JointSampler s = MakeSampler(11);
  for (int n = 0; n < 200; ++n) {
    const CylinderState xl{kin.JointToCylinder(s.Configuration()),
                           Vec4(0.3, 0.1, -0.1, 0.1).cwiseProduct(s.Rate(1.0))};
    const ControlInput u = Vec4(5e4, 3e5, -2e5, 1e5).cwiseProduct(s.Rate(1.0));
    const Vec4 delta = Vec4(1e4, 2e4, -1e4, 5e3).cwiseProduct(s.Rate(1.0));
    const LinkageJacobians jac = kin.Jacobians(xl.q, xl.qd);
    const Vec4 qdd_l = dyn.ForwardCylinder(xl, u, jac.JL.transpose() * delta).tail<4>();

    const JointState xt = kin.ToJoint(xl);
    const Vec4 qdd_t = dyn.ForwardTheta(xt, u, delta).tail<4>();
    const Vec4 mapped = jac.JL * qdd_l + jac.JL_dot * xl.qd;
    EXPECT_LT((mapped - qdd_t).norm() / std::max(1.0, qdd_t.norm()), 1e-8);
  }
}

TEST(DynamicsTest, StaticBalanceGivesZeroAcceleration) {
  const Dynamics dyn(DefaultModelParams());
  const Kinematics& kin = dyn.kinematics();
  JointSampler s = MakeSampler(12);
  for (int n = 0; n < 100; ++n) {
    const CylinderState x{kin.JointToCylinder(s.Configuration()), Vec4::Zero()};
    const CylinderDynamics d = dyn.Cylinder(x);
    EXPECT_LT(dyn.ForwardCylinder(x, d.h, Vec4::Zero()).tail<4>().norm(), 1e-9);
  }
}

TEST(DynamicsTest, FreeMotionConservesKineticEnergy) {
  ModelParams p = DefaultModelParams();
  p.gravity_mps2 = 0.0;
  const Dynamics dyn(p);
  const Kinematics& kin = dyn.kinematics();
  Vec8 x;
  x << kin.JointToCylinder(Vec4(0.0, -0.3, 1.5, 1.0)), 0.05, 0.005, -0.005, 0.005;
  const auto rhs = [&](double, const Vec8& s) {
    return dyn.ForwardCylinder(CylinderState::FromStacked(s), Vec4::Zero(),
                               Vec4::Zero());
  };
  const double e0 = dyn.KineticEnergy(kin.ToJoint(CylinderState::FromStacked(x)));
  const double dt = 1e-3;
  const PhysicalLimits lim = DefaultLimits();
  for (int k = 0; k < 10000; ++k) {
    x = Rk4Step(rhs, k * dt, x, dt);
    ASSERT_TRUE((x.segment<3>(1).array() > lim.length_lower.array()).all());
    ASSERT_TRUE((x.segment<3>(1).array() < lim.length_upper.array()).all());
  }
  const double e1 = dyn.KineticEnergy(kin.ToJoint(CylinderState::FromStacked(x)));
  EXPECT_LT(std::abs(e1 - e0) / e0, 1e-3);
}

// Eq-by-eq rewrite of the limits, kept deliberately naive.
Eigen::VectorXd NaiveResiduals(const Vec4& qd, const Vec3& lengths, const Vec4& u,
                               const PhysicalLimits& lim) {
  Eigen::VectorXd r(17);
  int k = 0;
  for (int j = 0; j < 4; ++j) r[k++] = u[j] - lim.u_lower[j];
  for (int j = 0; j < 4; ++j) r[k++] = lim.u_upper[j] - u[j];
  double p = 0.0;
  for (int j = 0; j < 4; ++j) p += u[j] * qd[j];
  r[k++] = lim.power_max_w - p;
  for (int j = 0; j < 3; ++j) r[k++] = lengths[j] - lim.length_lower[j];
  for (int j = 0; j < 3; ++j) r[k++] = lim.length_upper[j] - lengths[j];
  for (int i = 0; i < 2; ++i) {
    double f = 0.0;
    for (int j = 0; j < 4; ++j) {
      if (qd[j] > 0) f += lim.pumps[i].area_expand[j] * qd[j];
      if (qd[j] < 0) f -= lim.pumps[i].area_contract[j] * qd[j];
    }
    r[k++] = lim.pumps[i].flow_max_m3ps - f;
  }
  return r;
}

TEST(ConstraintTest, ZeroRateGivesFullPowerAndFlowMargin) {
  const PhysicalLimits lim = DefaultLimits();
  const CylinderState x{Vec4(0.0, 2.5, 2.3, 1.8), Vec4::Zero()};
  const ConstraintResiduals r = EvaluateConstraints(x, Vec4(1e4, 2e5, 1e5, 5e4), lim);
  EXPECT_EQ(r.power(), lim.power_max_w);
  EXPECT_EQ(r.flow()[0], lim.pumps[0].flow_max_m3ps);
  EXPECT_EQ(r.flow()[1], lim.pumps[1].flow_max_m3ps);
}

TEST(ConstraintTest, InputAtUpperLimitIsBoundaryFeasible) {
  const PhysicalLimits lim = DefaultLimits();
  const CylinderState x{Vec4(0.0, 2.5, 2.3, 1.8), Vec4::Zero()};
  const ConstraintResiduals r = EvaluateConstraints(x, lim.u_upper, lim);
  EXPECT_EQ(r.force_upper().minCoeff(), 0.0);
  EXPECT_GE(r.Min(), 0.0);
}

TEST(ConstraintTest, AgreesWithNaiveRewrite) {
  const PhysicalLimits lim = DefaultLimits();
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int n = 0; n < 1000; ++n) {
    CylinderState x;
    x.q << unit(rng), 2.7 + 0.8 * unit(rng), 2.4 + 0.7 * unit(rng), 1.8 + 0.6 * unit(rng);
    x.qd << unit(rng), 0.3 * unit(rng), 0.3 * unit(rng), 0.3 * unit(rng);
    const Vec4 u = 1.2 * lim.u_upper.cwiseProduct(Vec4(unit(rng), unit(rng), unit(rng), unit(rng)));
    const ConstraintResiduals r = EvaluateConstraints(x, u, lim);
    const Eigen::VectorXd naive = NaiveResiduals(x.qd, x.lengths(), u, lim);
    for (int k = 0; k < 17; ++k) {
      ASSERT_NEAR(r.values[k], naive[k], 1e-9 * std::max(1.0, std::abs(naive[k])));
      ASSERT_EQ(r.values[k] >= 0.0, naive[k] >= 0.0);
    }
  }
}

}  // namespace
}  // namespace digplan
