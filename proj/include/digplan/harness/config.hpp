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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "digplan/common.hpp"
#include "digplan/control/fl_pid.hpp"
#include "digplan/local/mpc.hpp"
#include "digplan/model/defaults.hpp"
#include "digplan/planner/global_planner.hpp"
#include "digplan/plant/plant.hpp"
#include "json.hpp"

namespace digplan {

enum class PlantDrive { kController, kMpcInput };

/// Everything one scenario run needs.
struct ScenarioConfig {
  std::string name = "scenario";
  std::string description;
  bool reconstruction = true;
  GlobalPlanRequest plan;
  MpcConfig mpc;
  Vec4 observer_gain = Vec4::Constant(20.0);
  double observer_noise_std = 0.0;
  PidGains controller;
  PlantConfig plant;
  double settle_s = 1.0;
  PlantDrive drive = PlantDrive::kController;
  std::uint64_t seed = 1;

  const ModelParams& model() const { return plan.cut.model; }
  const PhysicalLimits& limits() const { return plan.cut.limits; }
};

/// Reads JSON objects with defaults and reports every error with its dotted
/// key path. Keys that are never read are rejected by Finish().
class JsonReader {
 public:
  JsonReader(const nlohmann::json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(Name(""), "expected an object");
  }

  bool Has(const std::string& key) const { return j_->contains(key); }

  template <typename T>
  void Read(const std::string& key, T* out) {
    used_.insert(key);
    if (!j_->contains(key)) return;
    try {
      *out = j_->at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(Name(key), "wrong type");
    }
  }

  void ReadPositive(const std::string& key, double* out) {
    Read(key, out);
    if (!(*out > 0.0) || !std::isfinite(*out)) throw ConfigError(Name(key), "must be positive");
  }

  template <int N>
  void ReadVector(const std::string& key, Eigen::Matrix<double, N, 1>* out) {
    used_.insert(key);
    if (!j_->contains(key)) return;
    const nlohmann::json& a = j_->at(key);
    if (!a.is_array() || static_cast<int>(a.size()) != N) {
      throw ConfigError(Name(key), "expected an array of " + std::to_string(N) + " numbers");
    }
    for (int i = 0; i < N; ++i) {
      if (!a[i].is_number()) throw ConfigError(Name(key) + "[" + std::to_string(i) + "]", "not a number");
      (*out)[i] = a[i].get<double>();
      if (!std::isfinite((*out)[i])) throw ConfigError(Name(key), "not finite");
    }
  }

  void ReadCoefficients(const std::string& key, std::vector<double>* out) {
    used_.insert(key);
    if (!j_->contains(key)) return;
    const nlohmann::json& a = j_->at(key);
    if (!a.is_array() || a.empty()) throw ConfigError(Name(key), "expected a non-empty array");
    out->clear();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_number()) throw ConfigError(Name(key) + "[" + std::to_string(i) + "]", "not a number");
      out->push_back(a[i].get<double>());
    }
  }

  JsonReader Child(const std::string& key) {
    used_.insert(key);
    static const nlohmann::json kEmpty = nlohmann::json::object();
    return JsonReader(j_->contains(key) ? j_->at(key) : kEmpty, Name(key));
  }

  std::vector<JsonReader> Array(const std::string& key, std::size_t expected) {
    used_.insert(key);
    std::vector<JsonReader> out;
    if (!j_->contains(key)) return out;
    const nlohmann::json& a = j_->at(key);
    if (!a.is_array() || a.size() != expected) {
      throw ConfigError(Name(key), "expected an array of " + std::to_string(expected) + " objects");
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      out.emplace_back(a[i], Name(key) + "[" + std::to_string(i) + "]");
    }
    return out;
  }

  void Ignore(const std::string& key) { used_.insert(key); }

  void Finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(Name(it.key()), "unknown key");
    }
  }

  std::string Name(const std::string& key) const {
    if (key.empty()) return path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const nlohmann::json* j_;
  std::string path_;
  std::set<std::string> used_;
};

inline nlohmann::json LoadJsonFile(const std::filesystem::path& file, const std::string& key) {
  std::ifstream in(file);
  if (!in) throw ConfigError(key, "cannot open " + file.string());
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(key, file.string() + ": " + e.what());
  }
}

namespace config_detail {

inline Mat8 Diagonal8(const Vec8& d) { return d.asDiagonal(); }

inline void ReadModel(JsonReader r, ModelParams* m, PhysicalLimits* lim, double* bucket_width) {
  r.Ignore("schema");
  r.Ignore("note");
  const char* names[3] = {"boom", "arm", "bucket"};
  auto links = r.Array("links", 3);
  for (std::size_t j = 0; j < links.size(); ++j) {
    LinkParams& l = m->links[j];
    std::string name;
    links[j].Read("name", &name);
    if (!name.empty() && name != names[j]) {
      throw ConfigError(links[j].Name("name"), std::string("expected ") + names[j]);
    }
    links[j].ReadPositive("length_m", &l.length_m);
    links[j].ReadPositive("mass_kg", &l.mass_kg);
    links[j].Read("com_along_m", &l.com_along_m);
    links[j].Read("com_normal_m", &l.com_normal_m);
    links[j].ReadPositive("inertia_kgm2", &l.inertia_kgm2);
    links[j].Finish();
  }
  r.ReadPositive("cabin_yaw_inertia_kgm2", &m->cabin_yaw_inertia_kgm2);
  Vec2 pivot = m->boom_pivot_m;
  r.ReadVector<2>("boom_pivot_m", &pivot);
  m->boom_pivot_m = pivot;
  auto linkages = r.Array("linkages", 3);
  for (std::size_t j = 0; j < linkages.size(); ++j) {
    LinkageParams& l = m->linkages[j];
    linkages[j].Ignore("name");
    linkages[j].ReadPositive("a_m", &l.a_m);
    linkages[j].ReadPositive("b_m", &l.b_m);
    linkages[j].Read("angle_offset_rad", &l.angle_offset_rad);
    linkages[j].Finish();
  }
  r.Read("gravity_mps2", &m->gravity_mps2);
  if (!(m->gravity_mps2 >= 0.0)) throw ConfigError(r.Name("gravity_mps2"), "must be non-negative");

  JsonReader b = r.Child("bucket");
  b.ReadPositive("tip_to_heel_m", &m->bucket.tip_to_heel_m);
  b.Read("plate_angle_offset_rad", &m->bucket.plate_angle_offset_rad);
  b.Read("theta_empty_rad", &m->bucket.theta_empty_rad);
  b.Read("theta_full_rad", &m->bucket.theta_full_rad);
  b.ReadPositive("capacity_m3", &m->bucket.capacity_m3);
  b.ReadPositive("width_m", bucket_width);
  b.Finish();

  JsonReader l = r.Child("limits");
  l.ReadVector<4>("u_lower", &lim->u_lower);
  l.ReadVector<4>("u_upper", &lim->u_upper);
  for (int i = 0; i < 4; ++i) {
    if (!(lim->u_lower[i] < lim->u_upper[i])) {
      throw ConfigError(l.Name("u_upper"), "must exceed u_lower");
    }
  }
  l.ReadPositive("power_max_w", &lim->power_max_w);
  l.ReadVector<3>("length_lower_m", &lim->length_lower);
  l.ReadVector<3>("length_upper_m", &lim->length_upper);
  for (int i = 0; i < 3; ++i) {
    if (!(lim->length_lower[i] < lim->length_upper[i])) {
      throw ConfigError(l.Name("length_upper_m"), "must exceed length_lower_m");
    }
  }
  auto pumps = l.Array("pumps", 2);
  for (std::size_t i = 0; i < pumps.size(); ++i) {
    PumpParams& p = lim->pumps[i];
    pumps[i].ReadPositive("flow_max_m3ps", &p.flow_max_m3ps);
    pumps[i].ReadVector<4>("area_expand_m2", &p.area_expand);
    pumps[i].ReadVector<4>("area_contract_m2", &p.area_contract);
    if ((p.area_expand.array() < 0.0).any() || (p.area_contract.array() < 0.0).any()) {
      throw ConfigError(pumps[i].Name("area_expand_m2"), "areas must be non-negative");
    }
    pumps[i].Finish();
  }
  l.Read("swing_lower_rad", &lim->swing_lower_rad);
  l.Read("swing_upper_rad", &lim->swing_upper_rad);
  l.ReadVector<4>("velocity_lower", &lim->velocity_lower);
  l.ReadVector<4>("velocity_upper", &lim->velocity_upper);
  l.Finish();
  r.Finish();
}

// Rest pose from {swing_rad, tip_x_m, tip_z_m, bucket_angle_rad}.
inline Vec4 ReadPose(JsonReader r, const Kinematics& kin) {
  double swing = 0.0;
  TipPose tip;
  r.Read("swing_rad", &swing);
  r.Read("tip_x_m", &tip.x);
  r.Read("tip_z_m", &tip.z);
  r.Read("bucket_angle_rad", &tip.theta);
  r.Finish();
  try {
    Vec4 q;
    q << swing, kin.LengthsForTip(tip);
    return q;
  } catch (const DomainError& e) {
    throw ConfigError(r.Name(""), e.what());
  }
}

}  // namespace config_detail

/// Loads a scenario file. A relative "model" path resolves against the
/// scenario's directory.
inline ScenarioConfig LoadScenario(const std::filesystem::path& file) {
  using config_detail::Diagonal8;
  const nlohmann::json j = LoadJsonFile(file, "scenario");
  JsonReader r(j, "");
  ScenarioConfig c;
  r.Ignore("schema");
  r.Read("name", &c.name);
  r.Read("description", &c.description);
  r.Read("reconstruction", &c.reconstruction);

  Phase2Problem& cut = c.plan.cut;
  cut.model = DefaultModelParams();
  cut.limits = DefaultLimits();
  double width = 1.4;
  std::string model_path;
  r.Read("model", &model_path);
  if (!model_path.empty()) {
    const std::filesystem::path p = file.parent_path() / model_path;
    const nlohmann::json m = LoadJsonFile(p, "model");
    config_detail::ReadModel(JsonReader(m, "model"), &cut.model, &cut.limits, &width);
  }
  cut.capacity = {cut.model.bucket.theta_empty_rad, cut.model.bucket.theta_full_rad,
                  cut.model.bucket.capacity_m3 / width};

  JsonReader g = r.Child("ground");
  g.ReadCoefficients("surface_coeffs", &cut.ground.surface);
  g.ReadCoefficients("target_coeffs", &cut.ground.target);
  g.Read("x_min_m", &cut.ground.x_min);
  g.Read("x_max_m", &cut.ground.x_max);
  g.Finish();

  const Kinematics kin(cut.model);
  c.plan.start = config_detail::ReadPose(r.Child("start"), kin);
  c.plan.dump = config_detail::ReadPose(r.Child("dump"), kin);
  r.Read("dig_swing_rad", &c.plan.dig_swing_rad);

  JsonReader pl = r.Child("planner");
  pl.ReadPositive("w_travel", &cut.w_travel);
  pl.ReadPositive("w_volume", &cut.w_volume);
  Vec3 travel = cut.travel_weight.diagonal();
  pl.ReadVector<3>("travel_weight_diag", &travel);
  cut.travel_weight = travel.asDiagonal();
  pl.ReadVector<4>("effort_weight_diag", &c.plan.free_motion.effort_weight);
  pl.Read("phase2_segments", &cut.segments);
  pl.ReadPositive("utilization", &c.plan.utilization);
  if (c.plan.utilization > 1.0) throw ConfigError("planner.utilization", "must lie in (0, 1]");
  pl.ReadPositive("dt_s", &c.plan.dt);
  pl.Read("bezier_degree", &c.plan.free_motion.degree);
  pl.Read("quadrature_nodes", &c.plan.free_motion.quadrature_nodes);
  pl.ReadPositive("duration_min_s", &c.plan.free_motion.duration_min_s);
  pl.ReadPositive("duration_max_s", &c.plan.free_motion.duration_max_s);
  pl.Finish();
  if ((c.plan.free_motion.effort_weight.array() < 0.0).any()) {
    throw ConfigError("planner.effort_weight_diag", "entries must be non-negative");
  }

  JsonReader m = r.Child("mpc");
  m.Read("horizon", &c.mpc.horizon);
  m.Read("dt_s", &c.mpc.dt);
  Vec8 q = c.mpc.Q.diagonal(), p = c.mpc.P.diagonal();
  Vec4 rr = c.mpc.R.diagonal();
  m.ReadVector<8>("q_diag", &q);
  m.ReadVector<8>("p_diag", &p);
  m.ReadVector<4>("r_diag", &rr);
  c.mpc.Q = Diagonal8(q);
  c.mpc.P = Diagonal8(p);
  c.mpc.R = rr.asDiagonal();
  m.Read("penalty_initial", &c.mpc.al.penalty_initial);
  m.Read("penalty_growth", &c.mpc.al.penalty_growth);
  m.Read("max_outer_iterations", &c.mpc.al.max_outer_iterations);
  m.Read("max_iterations", &c.mpc.al.max_iterations);
  m.Read("violation_tolerance", &c.mpc.al.violation_tolerance);
  m.Read("flow_smoothing_mps", &c.mpc.flow_smoothing_mps);
  m.Read("constraint_margin", &c.mpc.constraint_margin);
  m.Finish();
  c.mpc.Validate();
  if (c.mpc.al.max_outer_iterations < 1) throw ConfigError("mpc.max_outer_iterations", "must be at least 1");
  if (c.mpc.al.max_iterations < 1) throw ConfigError("mpc.max_iterations", "must be at least 1");

  JsonReader o = r.Child("observer");
  o.ReadVector<4>("gain_per_s", &c.observer_gain);
  o.Read("noise_std", &c.observer_noise_std);
  o.Finish();
  if ((c.observer_gain.array() <= 0.0).any()) throw ConfigError("observer.gain_per_s", "must be positive");
  if (!(c.observer_noise_std >= 0.0)) throw ConfigError("observer.noise_std", "must be non-negative");

  JsonReader ct = r.Child("controller");
  ct.ReadVector<4>("kp", &c.controller.kp);
  ct.ReadVector<4>("kd", &c.controller.kd);
  ct.ReadVector<4>("ki", &c.controller.ki);
  ct.ReadVector<4>("integral_clamp", &c.controller.integral_clamp);
  ct.Finish();
  c.controller.Validate();

  JsonReader pt = r.Child("plant");
  pt.Read("dt_s", &c.plant.dt);
  pt.Read("friction_enabled", &c.plant.friction_enabled);
  pt.Read("soil_enabled", &c.plant.soil_enabled);
  JsonReader fr = pt.Child("friction");
  auto cyl = fr.Array("cylinders", 3);
  for (std::size_t i = 0; i < cyl.size(); ++i) {
    FrictionParams& f = c.plant.friction.cylinders[i];
    cyl[i].Ignore("name");
    cyl[i].Read("coulomb_n", &f.coulomb_n);
    cyl[i].Read("static_n", &f.static_n);
    cyl[i].Read("stribeck_mps", &f.stribeck_mps);
    cyl[i].Read("viscous_nspm", &f.viscous_nspm);
    cyl[i].Finish();
  }
  fr.Read("swing_viscous_nmspr", &c.plant.friction.swing_viscous_nmspr);
  fr.Finish();
  JsonReader so = pt.Child("soil");
  so.Read("unit_weight_kgpm3", &c.plant.soil.unit_weight_kgpm3);
  so.Read("cohesion_pa", &c.plant.soil.cohesion_pa);
  so.Read("n_c", &c.plant.soil.n_c);
  so.Read("n_gamma", &c.plant.soil.n_gamma);
  so.Read("normal_ratio", &c.plant.soil.normal_ratio);
  so.Finish();
  pt.Finish();
  c.plant.soil.bucket_width_m = width;
  c.plant.soil.gravity_mps2 = cut.model.gravity_mps2;
  c.plant.ground = cut.ground;
  c.plant.Validate();

  JsonReader run = r.Child("run");
  run.Read("settle_s", &c.settle_s);
  std::string drive = "controller";
  run.Read("drive", &drive);
  if (drive == "controller") {
    c.drive = PlantDrive::kController;
  } else if (drive == "mpc_input") {
    c.drive = PlantDrive::kMpcInput;
  } else {
    throw ConfigError("run.drive", "expected \"controller\" or \"mpc_input\"");
  }
  run.Read("seed", &c.seed);
  run.Finish();
  if (!(c.settle_s >= 0.0)) throw ConfigError("run.settle_s", "must be non-negative");

  r.Finish();
  cut.Validate();
  return c;
}

}  // namespace digplan
