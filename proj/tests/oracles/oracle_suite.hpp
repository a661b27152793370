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

#pragma once

// Oracle suite shared by the acceptance binary and `digplan oracle`. Each
// check reduces to one worst-case number compared against a fixed bound.

#include <chrono>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "digplan/estimator/momentum_observer.hpp"
#include "digplan/local/al_ddp.hpp"
#include "digplan/local/mpc.hpp"
#include "digplan/model/defaults.hpp"
#include "digplan/planner/bernstein.hpp"
#include "digplan/planner/global_planner.hpp"
#include "digplan/plant/plant.hpp"
#include "digplan/terrain/dig_geometry.hpp"
#include "oracles/lq_oracles.hpp"
#include "oracles/model_oracles.hpp"

namespace digplan::oracle {

struct OracleCheck {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool passed = false;
  double seconds = 0.0;
};

namespace suite_detail {

inline double MaxRelError(const MatX& a, const MatX& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

inline JointState Posture(const Kinematics& kin) {
  return {kin.CylinderToJoint(Vec4(0.3, 2.7, 2.4, 1.8)), Vec4::Zero()};
}

inline PlantConfig Frictionless() {
  PlantConfig c;
  c.friction_enabled = false;
  c.soil_enabled = false;
  return c;
}

inline ControlInput GravityHold(const Dynamics& dyn, const JointState& x) {
  const Vec4 q_l = dyn.kinematics().JointToCylinder(x.q);
  return dyn.kinematics().Jacobians(q_l, Vec4::Zero()).JL.transpose() * dyn.Terms(x).G;
}

inline ControlInput StiffHold(const Dynamics& dyn, const JointState& x, const Vec4& q0) {
  const DynamicsTerms t = dyn.Terms(x);
  const Vec4 a = -25.0 * (x.q - q0) - 10.0 * x.qd;
  const Vec4 q_l = dyn.kinematics().JointToCylinder(x.q);
  return dyn.kinematics().Jacobians(q_l, Vec4::Zero()).JL.transpose() * (t.h(x.qd) + t.M * a);
}

// Plant and observer at 1 ms with a held disturbance; returns the estimate trace.
inline std::vector<Vec4> ObserverTrace(double gain, double duration,
                                       const std::function<Vec4(double)>& disturbance) {
  const double dt = 1e-3;
  PlantConfig c = Frictionless();
  c.dt = dt;
  Plant plant(DefaultModelParams(), c);
  const JointState x0 = Posture(plant.dynamics().kinematics());
  plant.Reset(x0);
  MomentumObserver obs(plant.dynamics(), Vec4::Constant(gain));
  obs.Init(x0);
  std::vector<Vec4> out;
  const int n = static_cast<int>(std::lround(duration / dt));
  for (int i = 0; i < n; ++i) {
    const JointState x = plant.state().x;
    const ControlInput u = StiffHold(plant.dynamics(), x, x0.q);
    plant.set_injected(disturbance((i + 0.5) * dt));
    plant.Step(u, dt);
    obs.Update(plant.state().x, u, dt);
    out.push_back(obs.estimate());
  }
  return out;
}

inline PhysicalLimits UnboundedLimits() {
  PhysicalLimits l = DefaultLimits();
  l.u_lower = Vec4::Constant(-1e30);
  l.u_upper = Vec4::Constant(1e30);
  l.power_max_w = 1e30;
  l.length_lower = Vec3::Constant(-1e30);
  l.length_upper = Vec3::Constant(1e30);
  for (PumpParams& p : l.pumps) p.flow_max_m3ps = 1e30;
  return l;
}

class InputBox : public ConstraintModel<2, 1> {
 public:
  int StageRows() const override { return 2; }
  int TerminalRows() const override { return 0; }
  VecX Stage(int, const StateVec&, const InputVec& u) const override {
    return Eigen::Vector2d(u[0] + 1.0, 1.0 - u[0]);
  }
  VecX Terminal(const StateVec&) const override { return VecX(); }
};

inline double KinematicsRoundTrip() {
  const Kinematics kin(DefaultModelParams());
  JointSampler s(DefaultJointLower(), DefaultJointUpper(), 1);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const Vec4 q = s.Configuration();
    worst = std::max(worst, (kin.CylinderToJoint(kin.JointToCylinder(q)) - q).cwiseAbs().maxCoeff());
  }
  return worst;
}

inline double JacobianError() {
  const Kinematics kin(DefaultModelParams());
  JointSampler s(DefaultJointLower(), DefaultJointUpper(), 2);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const Vec4 q = s.Configuration();
    const Vec4 q_l = kin.JointToCylinder(q);
    const LinkageJacobians jac = kin.Jacobians(q_l, Vec4::Zero());
    const MatX fd = NumericJacobian([&](const VecX& x) -> VecX { return kin.JointToCylinder(x); }, q);
    worst = std::max(worst, MaxRelError(jac.Jtheta, fd));
  }
  return worst;
}

inline double SkewSymmetry() {
  const Dynamics dyn(DefaultModelParams());
  JointSampler s(DefaultJointLower(), DefaultJointUpper(), 8);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const JointState x{s.Configuration(), s.Rate(0.5)};
    const double h = 1e-3;
    const auto m_at = [&](double k) { return dyn.MassMatrix(x.q + k * h * x.qd); };
    const Mat4 m_dot = (m_at(-2) - 8.0 * m_at(-1) + 8.0 * m_at(1) - m_at(2)) / (12.0 * h);
    const Mat4 c = dyn.Terms(x).C;
    const double scale = std::max(1.0, x.qd.squaredNorm() * m_dot.norm());
    worst = std::max(worst, std::abs(x.qd.dot((m_dot - 2.0 * c) * x.qd)) / scale);
  }
  return worst;
}

// Smallest eigenvalue over 1000 samples, negated so that <= 0 passes.
inline double MassMatrixDefiniteness() {
  const Dynamics dyn(DefaultModelParams());
  JointSampler s(DefaultJointLower(), DefaultJointUpper(), 7);
  double worst = -std::numeric_limits<double>::infinity();
  for (int n = 0; n < 1000; ++n) {
    const Mat4 m = dyn.MassMatrix(s.Configuration());
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff() / m.norm();
    const double lmin = Eigen::SelfAdjointEigenSolver<Mat4>(m).eigenvalues().minCoeff();
    worst = std::max(worst, asym > 1e-12 ? 1.0 : -lmin);
  }
  return worst;
}

inline double CoordinateConsistency() {
  const Dynamics dyn(DefaultModelParams());
  const Kinematics& kin = dyn.kinematics();
  JointSampler s(DefaultJointLower(), DefaultJointUpper(), 11);
  double worst = 0.0;
  for (int n = 0; n < 200; ++n) {
    const CylinderState xl{kin.JointToCylinder(s.Configuration()),
                           Vec4(0.3, 0.1, -0.1, 0.1).cwiseProduct(s.Rate(1.0))};
    const ControlInput u = Vec4(5e4, 3e5, -2e5, 1e5).cwiseProduct(s.Rate(1.0));
    const Vec4 delta = Vec4(1e4, 2e4, -1e4, 5e3).cwiseProduct(s.Rate(1.0));
    const LinkageJacobians jac = kin.Jacobians(xl.q, xl.qd);
    const Vec4 qdd_l = dyn.ForwardCylinder(xl, u, jac.JL.transpose() * delta).tail<4>();
    const Vec4 qdd_t = dyn.ForwardTheta(kin.ToJoint(xl), u, delta).tail<4>();
    const Vec4 mapped = jac.JL * qdd_l + jac.JL_dot * xl.qd;
    worst = std::max(worst, (mapped - qdd_t).norm() / std::max(1.0, qdd_t.norm()));
  }
  return worst;
}

inline double EnergyDrift() {
  ModelParams model = DefaultModelParams();
  model.gravity_mps2 = 0.0;
  Plant plant(model, Frictionless());
  JointState x = Posture(plant.dynamics().kinematics());
  x.qd = Vec4(0.05, 0.005, -0.005, 0.01);
  plant.Reset(x);
  const double e0 = plant.Energy(x);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    plant.Step(Vec4::Zero(), 1e-3);
    worst = std::max(worst, std::abs(plant.Energy(plant.state().x) - e0));
  }
  return worst / e0;
}

inline double Rk4OrderRatio() {
  const ModelParams model = DefaultModelParams();
  auto run = [&](double dt) {
    PlantConfig cfg = Frictionless();
    cfg.dt = dt;
    Plant plant(model, cfg);
    JointState x = Posture(plant.dynamics().kinematics());
    x.qd = Vec4(0.6, 0.05, -0.08, 0.1);
    plant.Reset(x);
    plant.Advance(GravityHold(plant.dynamics(), x), 1.0);
    Vec8 s;
    s << plant.state().x.q, plant.state().x.qd;
    return s;
  };
  const Vec8 a = run(0.01), b = run(0.005), c = run(0.0025);
  return (a - b).norm() / (b - c).norm();
}

inline double FeedbackLinearizationError() {
  const Dynamics dyn(DefaultModelParams());
  const PhysicalLimits lim = DefaultLimits();
  std::mt19937_64 rng(1);
  auto u = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    CylinderState x;
    x.q[0] = u(-1.0, 1.0);
    for (int j = 0; j < 3; ++j) x.q[1 + j] = u(lim.length_lower[j] + 0.1, lim.length_upper[j] - 0.1);
    for (int j = 0; j < 4; ++j) x.qd[j] = u(lim.velocity_lower[j], lim.velocity_upper[j]);
    const Vec4 v = 0.5 * Vec4(u(-1, 1), u(-1, 1), u(-1, 1), u(-1, 1));
    const Vec4 delta = 2e4 * Vec4(u(-1, 1), u(-1, 1), u(-1, 1), u(-1, 1));
    const Vec8 dx = dyn.ForwardCylinder(x, FeedbackLinearize(dyn, x, v, delta), delta);
    worst = std::max(worst, (dx.tail<4>() - v).cwiseAbs().maxCoeff());
  }
  return worst;
}

inline double RiccatiError() {
  MpcConfig cfg;
  MpcSolver mpc(DefaultModelParams(), UnboundedLimits(), cfg);
  Vec8 x0;
  x0 << 0.1, 2.6, 2.4, 1.8, 0.0, 0.01, -0.02, 0.0;
  std::vector<Vec8> ref(cfg.horizon + 1);
  for (int k = 0; k <= cfg.horizon; ++k) {
    const double t = k * cfg.dt;
    ref[k] << 0.1 + 0.2 * t, 2.6 + 0.05 * std::sin(t), 2.4 - 0.03 * t, 1.8 + 0.02 * t * t, 0.2,
        0.05 * std::cos(t), -0.03, 0.04 * t;
  }
  const MpcSolution sol = mpc.Solve(SplitState(x0), ref, Vec4::Zero());
  if (!sol.converged) return std::numeric_limits<double>::infinity();
  const DiscreteDoubleIntegrator d = Discretize(cfg.dt);
  const std::vector<VecX> ref_x(ref.begin(), ref.end());
  const auto u = RiccatiTracking(d.A, d.B, cfg.Q, cfg.P, cfg.R, ref_x, x0);
  double worst = 0.0;
  for (int k = 0; k < cfg.horizon; ++k) worst = std::max(worst, (sol.v[k] - u[k]).cwiseAbs().maxCoeff());
  return worst;
}

inline double DenseQpError() {
  const double dt = 0.1;
  const int n = 5;
  TrackingProblem<2, 1> p;
  p.A << 1, dt, 0, 1;
  p.B << 0.5 * dt * dt, dt;
  p.Q = Eigen::Vector2d(10.0, 1.0).asDiagonal();
  p.P = 10.0 * p.Q;
  p.R << 0.1;
  p.reference.assign(n + 1, Eigen::Vector2d(1.0, 0.0));
  const Eigen::Vector2d x0(0.0, 0.0);
  const AlDdpResult<2, 1> r = AlDdpSolver<2, 1>(AlDdpOptions{}).Solve(p, InputBox{}, x0, {});
  if (!r.converged) return std::numeric_limits<double>::infinity();
  MatX phi = MatX::Zero(2 * (n + 1), 2), gamma = MatX::Zero(2 * (n + 1), n);
  Eigen::Matrix2d ak = Eigen::Matrix2d::Identity();
  for (int k = 0; k <= n; ++k) {
    phi.block(2 * k, 0, 2, 2) = ak;
    ak = p.A * ak;
  }
  for (int k = 1; k <= n; ++k) {
    Eigen::Matrix2d a = Eigen::Matrix2d::Identity();
    for (int j = k - 1; j >= 0; --j) {
      gamma.block(2 * k, j, 2, 1) = a * p.B;
      a = p.A * a;
    }
  }
  MatX qbar = MatX::Zero(2 * (n + 1), 2 * (n + 1));
  VecX rbar(2 * (n + 1));
  for (int k = 0; k <= n; ++k) {
    qbar.block(2 * k, 2 * k, 2, 2) = k < n ? p.Q : p.P;
    rbar.segment(2 * k, 2) = p.reference[k];
  }
  const MatX H = 2.0 * (gamma.transpose() * qbar * gamma + p.R(0, 0) * MatX::Identity(n, n));
  const VecX f = 2.0 * gamma.transpose() * qbar * (phi * x0 - rbar);
  const VecX z = BoxQpByEnumeration(H, f, VecX::Constant(n, -1.0), VecX::Constant(n, 1.0));
  double worst = 0.0;
  for (int k = 0; k < n; ++k) worst = std::max(worst, std::abs(r.u[k][0] - z[k]));
  return worst;
}

inline double ObserverTimeConstantError() {
  const double k = 20.0;
  const Vec4 step(800.0, 2.0e4, 1.2e4, 4.0e3);
  const std::vector<Vec4> tr = ObserverTrace(k, 0.3, [&](double) { return step; });
  double worst = 0.0;
  for (int ch = 0; ch < 4; ++ch) {
    const double target = (1.0 - std::exp(-1.0)) * step[ch];
    double tau = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < tr.size(); ++i) {
      if (tr[i - 1][ch] < target && tr[i][ch] >= target) {
        const double a = (target - tr[i - 1][ch]) / (tr[i][ch] - tr[i - 1][ch]);
        tau = 1e-3 * (static_cast<double>(i) + a);
        break;
      }
    }
    worst = std::max(worst, std::abs(tau * k - 1.0));
  }
  return worst;
}

inline double ObserverSinusoidError() {
  const double k = 20.0, amp = 5.0e3;
  double worst = 0.0;
  for (const double ratio : {0.1, 1.0, 10.0}) {
    const double w = ratio * k;
    const double settle = 10.0 / k;
    const std::vector<Vec4> tr = ObserverTrace(k, settle + 8.0 * kPi / w, [&](double t) {
      Vec4 d = Vec4::Zero();
      d[kArm] = amp * std::sin(w * t);
      return d;
    });
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d atb = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const double t = 1e-3 * static_cast<double>(i + 1);
      if (t < settle) continue;
      const Eigen::Vector3d row(std::sin(w * t), std::cos(w * t), 1.0);
      ata += row * row.transpose();
      atb += row * tr[i][kArm];
    }
    const Eigen::Vector3d c = ata.ldlt().solve(atb);
    const double measured = std::hypot(c[0], c[1]) / amp;
    const double expected = std::abs(k / std::complex<double>(k, w));
    worst = std::max(worst, std::abs(measured / expected - 1.0));
  }
  return worst;
}

inline GroundModel Ground(std::vector<double> surface) {
  GroundModel g;
  g.surface = std::move(surface);
  g.target = {g.surface[0] - 2.0};
  g.x_min = 0.0;
  g.x_max = 12.0;
  return g;
}

template <typename Fn>
TipPath Sampled(double x0, double xn, int n, const Fn& z) {
  TipPath p(n + 1);
  for (int i = 0; i <= n; ++i) {
    p[i].x = x0 + (xn - x0) * i / n;
    p[i].z = z(p[i].x);
    p[i].theta = 1.5;
  }
  return p;
}

// Shoelace area between the dense surface and the dense cut curve.
inline double SweptVolumeError() {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const GroundModel g = Ground({0.3 * u(rng), -0.04 * u(rng), 0.002 * u(rng)});
    const double x0 = 7.5 + u(rng), xn = 4.5 + u(rng);
    const double depth = 0.2 + u(rng), skew = 0.3 * (u(rng) - 0.5);
    const auto cut = [&](double x) {
      const double s = (x0 - x) / (x0 - xn);
      return g.Surface(x) - depth * std::sin(kPi * s) * (1.0 + skew * s);
    };
    constexpr int kDense = 20000;
    std::vector<Vec2> poly;
    for (int k = 0; k <= kDense; ++k) {
      const double x = xn + (x0 - xn) * k / kDense;
      poly.emplace_back(x, g.Surface(x));
    }
    for (int k = kDense; k >= 0; --k) {
      const double x = xn + (x0 - xn) * k / kDense;
      poly.emplace_back(x, cut(x));
    }
    double a = 0.0;
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const Vec2& p = poly[k];
      const Vec2& q = poly[(k + 1) % poly.size()];
      a += p.x() * q.y() - q.x() * p.y();
    }
    const double oracle = std::abs(a) / 2.0;
    worst = std::max(worst, std::abs(SweptVolume(Sampled(x0, xn, 20, cut), g) - oracle) / oracle);
  }
  return worst;
}

inline double OnSurfaceVolume() {
  const GroundModel g = Ground({0.4, -0.05});
  return std::abs(SweptVolume(Sampled(8.0, 5.0, 10, [&](double x) { return g.Surface(x); }), g));
}

inline double ConvexHullExcursion() {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 3.0);
  BernsteinCurve c;
  c.duration = 2.5;
  for (int k = 0; k <= 8; ++k) c.points.push_back(Vec4(u(rng), u(rng), u(rng), u(rng)));
  const std::vector<Vec4> vel = c.VelocityControlPoints();
  Vec4 lo = c.points[0], hi = c.points[0], vlo = vel[0], vhi = vel[0];
  for (const Vec4& b : c.points) {
    lo = lo.cwiseMin(b);
    hi = hi.cwiseMax(b);
  }
  for (const Vec4& b : vel) {
    vlo = vlo.cwiseMin(b);
    vhi = vhi.cwiseMax(b);
  }
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double s = i / 9999.0;
    const Vec4 p = c.Position(s), v = c.Velocity(s);
    worst = std::max({worst, (lo - p).maxCoeff(), (p - hi).maxCoeff(), (vlo - v).maxCoeff(),
                      (v - vhi).maxCoeff()});
  }
  return worst;
}

inline double ConstantCurveDerivative() {
  BernsteinCurve c;
  c.duration = 3.0;
  c.points.assign(9, Vec4(0.3, 2.1, 2.7, 1.9));
  double worst = 0.0;
  for (const Vec4& d : c.VelocityControlPoints()) worst = std::max(worst, d.cwiseAbs().maxCoeff());
  const auto acc = BernsteinCurve::DerivativePoints(c.VelocityControlPoints(), c.duration);
  for (const Vec4& d : acc) worst = std::max(worst, d.cwiseAbs().maxCoeff());
  return worst;
}

inline double JunctionResidual() {
  GlobalPlanRequest r;
  Phase2Problem& p = r.cut;
  p.ground.surface = {0.1, -0.02};
  p.ground.target = {-0.02, -0.02};
  p.ground.x_min = 4.5;
  p.ground.x_max = 9.5;
  p.model = DefaultModelParams();
  p.limits = DefaultLimits();
  p.capacity = {p.model.bucket.theta_empty_rad, p.model.bucket.theta_full_rad, 1.3 / 1.4};
  const Kinematics kin(p.model);
  r.start << 0.6, kin.LengthsForTip({6.0, 1.5, 2.2});
  r.dump << 1.2, kin.LengthsForTip({5.5, 2.0, 2.9});
  const GlobalPlan plan = PlanGlobal(r);
  return std::max(plan.trajectory.junction_residual[0], plan.trajectory.junction_residual[1]);
}

}  // namespace suite_detail

/// Runs every check; exceptions count as failures with an infinite value.
inline std::vector<OracleCheck> RunOracleSuite() {
  using namespace suite_detail;
  struct Item {
    const char* name;
    double bound;
    std::function<double()> fn;
    std::function<bool(double, double)> ok;
  };
  const auto below = [](double v, double b) { return v < b; };
  const auto at_most = [](double v, double b) { return v <= b; };
  const std::vector<Item> items = {
      {"kinematics round trip (abs)", 1e-12, KinematicsRoundTrip, below},
      {"J_theta vs finite differences (rel)", 1e-6, JacobianError, below},
      {"skew symmetry qd'(Mdot - 2C)qd (rel)", 1e-8, SkewSymmetry, below},
      {"mass matrix SPD (-min eigenvalue)", 0.0, MassMatrixDefiniteness, below},
      {"cylinder vs joint dynamics (rel)", 1e-8, CoordinateConsistency, below},
      {"energy drift over 10 s (rel)", 1e-3, EnergyDrift, below},
      {"RK4 order ratio |r - 16| / 16", 0.2, [] { return std::abs(Rk4OrderRatio() - 16.0) / 16.0; },
       at_most},
      {"feedback linearization qdd_L - v (abs)", 1e-10, FeedbackLinearizationError, below},
      {"AL-DDP vs Riccati input (abs)", 1e-6, RiccatiError, below},
      {"AL-DDP vs dense box QP input (abs)", 1e-5, DenseQpError, below},
      {"observer time constant (rel)", 0.1, ObserverTimeConstantError, at_most},
      {"observer sinusoid gain (rel, 3 freqs)", 0.05, ObserverSinusoidError, below},
      {"swept volume vs dense polygon (rel)", 5e-3, SweptVolumeError, below},
      {"on-surface path volume (abs)", 1e-12, OnSurfaceVolume, below},
      {"Bernstein convex hull excursion", 1e-12, ConvexHullExcursion, at_most},
      {"constant curve derivative points", 0.0, ConstantCurveDerivative, at_most},
      {"phase junction C1 residual", 1e-9, JunctionResidual, below},
  };
  std::vector<OracleCheck> out;
  for (const Item& it : items) {
    OracleCheck c;
    c.name = it.name;
    c.bound = it.bound;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.value = it.fn();
    } catch (const std::exception&) {
      c.value = std::numeric_limits<double>::infinity();
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.passed = std::isfinite(c.value) && it.ok(c.value, c.bound);
    out.push_back(c);
  }
  return out;
}

}  // namespace digplan::oracle
