// Copyright 2026 The msmid Authors
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

#include "msm/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <yaml-cpp/yaml.h>

namespace msm {

ArmModel::ArmModel(std::vector<Body> bodies, std::vector<MuscleGeometry> muscles,
                   Vec3d gravity)
    : bodies_(std::move(bodies)), muscles_(std::move(muscles)), gravity_(gravity) {
  for (std::size_t b = 0; b < bodies_.size(); ++b) {
    const Body& body = bodies_[b];
    if (body.parent >= static_cast<int>(b) || body.parent < kGround) {
      throw LogicError("body '" + body.name +
                       "': parent must be ground or an earlier body (cycle in tree)");
    }
    if (body.joint_axes.empty()) {
      throw LogicError("body '" + body.name + "': needs at least one joint axis");
    }
    int parent_link = body.parent == kGround ? -1 : body_link_[body.parent];
    for (std::size_t k = 0; k < body.joint_axes.size(); ++k) {
      const Vec3d& a = body.joint_axes[k];
      const double n = norm(a);
      if (!(n > 1e-12)) throw LogicError("body '" + body.name + "': zero joint axis");
      Link link;
      link.parent = parent_link;
      link.axis = Vec3d{a[0] / n, a[1] / n, a[2] / n};
      link.origin = k == 0 ? body.joint_origin : Vec3d{0.0, 0.0, 0.0};
      link.body = k + 1 == body.joint_axes.size() ? static_cast<int>(b) : -1;
      links_.push_back(link);
      parent_link = static_cast<int>(links_.size()) - 1;
    }
    body_link_.push_back(parent_link);
  }
  damping_.assign(links_.size(), 0.0);
  for (const MuscleGeometry& m : muscles_) {
    if (m.path.size() < 2) {
      throw LogicError("muscle '" + m.name + "': path needs at least two via-points");
    }
    std::set<int> distinct;
    for (const ViaPoint& p : m.path) {
      if (p.body < kGround || p.body >= static_cast<int>(bodies_.size())) {
        throw LogicError("muscle '" + m.name + "': via-point on unknown body");
      }
      distinct.insert(p.body);
    }
    if (distinct.size() < 2) {
      throw LogicError("muscle '" + m.name + "': path must span at least two bodies");
    }
  }
}

void ArmModel::set_joint_damping(std::vector<double> d) {
  if (d.size() != links_.size()) throw LogicError("joint damping needs one value per DoF");
  for (double v : d) {
    if (!(v >= 0.0 && std::isfinite(v))) throw LogicError("joint damping must be finite and >= 0");
  }
  damping_ = std::move(d);
}

int ArmModel::body_index(std::string_view name) const {
  if (name == "ground") return kGround;
  for (std::size_t b = 0; b < bodies_.size(); ++b) {
    if (bodies_[b].name == name) return static_cast<int>(b);
  }
  throw FormatError("unknown body '" + std::string(name) + "'");
}

std::vector<double> flatten(const FullParamsd& p) {
  std::vector<double> out;
  out.reserve(p.size());
  for (const auto& m : p.muscles) {
    out.insert(out.end(), {m.l_opt, m.f_max, m.v_max});
  }
  for (const auto& b : p.bones) {
    out.insert(out.end(), {b.mass, b.com[0], b.com[1], b.com[2]});
    out.insert(out.end(), b.inertia.begin(), b.inertia.end());
  }
  return out;
}

FullParamsd unflatten(std::span<const double> flat, int muscles, int bones) {
  if (flat.size() != static_cast<std::size_t>(kMuscleParamCount * muscles +
                                              kBoneParamCount * bones)) {
    throw LogicError("unflatten: length does not match model");
  }
  FullParamsd p;
  std::size_t i = 0;
  for (int k = 0; k < muscles; ++k, i += 3) {
    p.muscles.push_back({flat[i], flat[i + 1], flat[i + 2]});
  }
  for (int k = 0; k < bones; ++k, i += 10) {
    BoneParams<double> b;
    b.mass = flat[i];
    b.com = {flat[i + 1], flat[i + 2], flat[i + 3]};
    std::copy(flat.begin() + i + 4, flat.begin() + i + 10, b.inertia.begin());
    p.bones.push_back(b);
  }
  return p;
}

std::vector<std::string> param_names(const ArmModel& model) {
  std::vector<std::string> names;
  for (const auto& m : model.muscles()) {
    for (const char* f : {"l_opt", "f_max", "v_max"}) names.push_back(m.name + "." + f);
  }
  for (const auto& b : model.bodies()) {
    for (const char* f : {"m", "cx", "cy", "cz", "Ixx", "Iyy", "Izz", "Ixy", "Ixz", "Iyz"}) {
      names.push_back(b.name + "." + f);
    }
  }
  return names;
}

bool inertia_is_physical(const std::array<double, 6>& inertia, double tol) {
  Eigen::Matrix3d I;
  I << inertia[0], inertia[3], inertia[4], inertia[3], inertia[1], inertia[5],
      inertia[4], inertia[5], inertia[2];
  if (!I.allFinite()) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(I, Eigen::EigenvaluesOnly);
  const Eigen::Vector3d l = es.eigenvalues();
  if (!(l.minCoeff() > 0.0)) return false;
  const double scale = l.maxCoeff();
  for (int i = 0; i < 3; ++i) {
    if (l[(i + 1) % 3] + l[(i + 2) % 3] < l[i] - tol * scale) return false;
  }
  return true;
}

void validate_params(const FullParamsd& p) {
  for (std::size_t i = 0; i < p.muscles.size(); ++i) {
    const auto& m = p.muscles[i];
    if (!(m.l_opt > 0.0) || !(m.f_max > 0.0) || !(m.v_max > 0.0) ||
        !std::isfinite(m.l_opt + m.f_max + m.v_max)) {
      throw LogicError("muscle " + std::to_string(i) + ": parameters must be positive");
    }
  }
  for (std::size_t i = 0; i < p.bones.size(); ++i) {
    const auto& b = p.bones[i];
    if (!(b.mass > 0.0) || !std::isfinite(b.mass)) {
      throw LogicError("bone " + std::to_string(i) + ": mass must be positive");
    }
    if (!std::isfinite(b.com[0] + b.com[1] + b.com[2])) {
      throw LogicError("bone " + std::to_string(i) + ": non-finite centre of mass");
    }
    // Rounding slack for inertias sitting exactly on the triangle boundary.
    if (!inertia_is_physical(b.inertia, 1e-12)) {
      throw LogicError("bone " + std::to_string(i) +
                       ": inertia must be SPD and satisfy the triangle inequality");
    }
  }
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

constexpr std::string_view kModelHeader = "msmmodel v1";

// Splits off the version line; the remainder is a YAML document.
std::string_view strip_header(std::string_view text, std::string_view header) {
  const std::size_t eol = text.find('\n');
  std::string_view first = text.substr(0, eol);
  while (!first.empty() && (first.back() == '\r' || first.back() == ' ')) {
    first.remove_suffix(1);
  }
  if (first != header) {
    throw FormatError("expected header line '" + std::string(header) + "'");
  }
  return eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
}

Vec3d read_vec3(const YAML::Node& n, const std::string& what) {
  if (!n || !n.IsSequence() || n.size() != 3) {
    throw FormatError(what + ": expected a 3-element array");
  }
  return {n[0].as<double>(), n[1].as<double>(), n[2].as<double>()};
}

template <class T>
T require(const YAML::Node& n, const char* key, const std::string& where) {
  if (!n[key]) throw FormatError(where + ": missing '" + key + "'");
  try {
    return n[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw FormatError(where + ": bad '" + key + "': " + e.what());
  }
}

}  // namespace

namespace {

LoadedModel parse_model_yaml(std::string_view text, ModelCheck check) {
  const std::string_view body_text = strip_header(text, kModelHeader);
  YAML::Node root;
  try {
    root = YAML::Load(std::string(body_text));
  } catch (const YAML::Exception& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
  if (!root.IsMap()) throw FormatError("model: top level must be a mapping");

  Vec3d gravity{0.0, 0.0, -9.81};
  if (root["gravity"]) gravity = read_vec3(root["gravity"], "gravity");

  const YAML::Node bodies_node = root["bodies"];
  if (!bodies_node || !bodies_node.IsSequence()) throw FormatError("model: missing 'bodies' list");

  std::vector<Body> bodies;
  std::vector<BoneParams<double>> bones;
  std::vector<std::string> names;
  auto lookup = [&](const std::string& name, const std::string& where) {
    if (name == "ground") return kGround;
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
      throw LogicError(where + ": unknown or later-declared body '" + name + "'");
    }
    return static_cast<int>(it - names.begin());
  };

  for (const YAML::Node& n : bodies_node) {
    Body b;
    b.name = require<std::string>(n, "name", "body");
    const std::string where = "body '" + b.name + "'";
    if (std::find(names.begin(), names.end(), b.name) != names.end() || b.name == "ground") {
      throw FormatError(where + ": duplicate name");
    }
    b.parent = lookup(require<std::string>(n, "parent", where), where);
    const YAML::Node axes = n["joint_axis"];
    if (!axes || !axes.IsSequence() || axes.size() == 0) {
      throw FormatError(where + ": missing 'joint_axis'");
    }
    if (axes[0].IsSequence()) {
      for (const YAML::Node& a : axes) b.joint_axes.push_back(read_vec3(a, where + " joint_axis"));
    } else {
      b.joint_axes.push_back(read_vec3(axes, where + " joint_axis"));
    }
    b.joint_origin = read_vec3(n["joint_origin"], where + " joint_origin");

    BoneParams<double> bp;
    bp.mass = require<double>(n, "mass", where);
    bp.com = read_vec3(n["com"], where + " com");
    const YAML::Node in = n["inertia6"];
    if (!in || !in.IsSequence() || in.size() != 6) {
      throw FormatError(where + ": 'inertia6' must have 6 entries");
    }
    for (int i = 0; i < 6; ++i) bp.inertia[i] = in[i].as<double>();

    names.push_back(b.name);
    bodies.push_back(std::move(b));
    bones.push_back(bp);
  }

  std::vector<MuscleGeometry> muscles;
  if (const YAML::Node ms = root["muscles"]) {
    if (!ms.IsSequence()) throw FormatError("model: 'muscles' must be a list");
    for (const YAML::Node& n : ms) {
      MuscleGeometry m;
      m.name = require<std::string>(n, "name", "muscle");
      const std::string where = "muscle '" + m.name + "'";
      const YAML::Node vp = n["viapoints"];
      if (!vp || !vp.IsSequence()) throw FormatError(where + ": missing 'viapoints'");
      for (const YAML::Node& p : vp) {
        if (!p.IsSequence() || p.size() != 2) {
          throw FormatError(where + ": via-point must be [body, [x, y, z]]");
        }
        m.path.push_back({lookup(p[0].as<std::string>(), where), read_vec3(p[1], where)});
      }
      muscles.push_back(std::move(m));
    }
  }

  std::vector<MuscleParams<double>> muscle_params;
  const YAML::Node gt = root["groundtruth"];
  if (!muscles.empty() && (!gt || !gt.IsMap())) {
    throw FormatError("model: missing 'groundtruth' block");
  }
  for (const MuscleGeometry& m : muscles) {
    const YAML::Node v = gt[m.name];
    if (!v || !v.IsSequence() || v.size() != 3) {
      throw FormatError("groundtruth: '" + m.name + "' needs [l_opt, f_max, v_max]");
    }
    muscle_params.push_back({v[0].as<double>(), v[1].as<double>(), v[2].as<double>()});
  }

  LoadedModel out;
  out.model = ArmModel(std::move(bodies), std::move(muscles), gravity);
  out.ground_truth.muscles = std::move(muscle_params);
  out.ground_truth.bones = std::move(bones);
  out.hash = fnv1a(text);
  out.rest_posture.assign(out.model.dof(), 0.0);
  if (const YAML::Node rp = root["rest_posture"]) {
    if (!rp.IsSequence() || rp.size() != out.rest_posture.size()) {
      throw FormatError("model: 'rest_posture' needs one angle per DoF");
    }
    for (std::size_t i = 0; i < rp.size(); ++i) out.rest_posture[i] = rp[i].as<double>();
  }
  if (const YAML::Node jd = root["joint_damping"]) {
    if (!jd.IsSequence() || jd.size() != static_cast<std::size_t>(out.model.dof())) {
      throw FormatError("model: 'joint_damping' needs one value per DoF");
    }
    std::vector<double> d;
    for (const auto& v : jd) d.push_back(v.as<double>());
    out.model.set_joint_damping(std::move(d));
  }
  validate_params(out.ground_truth);

  if (check == ModelCheck::kArm) {
    const ArmModel& m = out.model;
    if (m.body_count() != 3 || m.dof() != 5 || m.muscle_count() != 8) {
      throw LogicError("arm model needs 3 bodies, 5 DoF and 8 muscles");
    }
    if (m.bodies()[0].joint_axes.size() != 3 || m.bodies()[1].joint_axes.size() != 1 ||
        m.bodies()[2].joint_axes.size() != 1) {
      throw LogicError("arm model needs a 3-axis shoulder followed by two single-axis joints");
    }
  }
  return out;
}

}  // namespace

LoadedModel parse_model(std::string_view text, ModelCheck check) {
  try {
    return parse_model_yaml(text, check);
  } catch (const YAML::Exception& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
}

LoadedModel load_model_file(const std::string& path, ModelCheck check) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str(), check);
}

}  // namespace msm
