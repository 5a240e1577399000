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

#include "msm/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "msm/dynamics.hpp"
#include "msm/muscle.hpp"

namespace msm {

namespace {

constexpr const char* kMagic = "msmdata v1";

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw FormatError("dataset: bad number '" + s + "'");
  return v;
}

std::vector<std::string> column_names(int dof, int muscles) {
  std::vector<std::string> c{"t"};
  for (int i = 0; i < muscles; ++i) c.push_back("a" + std::to_string(i));
  for (int j = 0; j < dof; ++j) c.push_back("q" + std::to_string(j));
  for (int j = 0; j < dof; ++j) c.push_back("qd" + std::to_string(j));
  for (int j = 0; j < dof; ++j) c.push_back("qdd" + std::to_string(j));
  for (int i = 0; i < muscles; ++i) c.push_back("l" + std::to_string(i));
  for (int i = 0; i < muscles; ++i) c.push_back("v" + std::to_string(i));
  for (int i = 0; i < muscles; ++i) {
    for (int j = 0; j < dof; ++j) c.push_back("J" + std::to_string(i) + "_" + std::to_string(j));
  }
  return c;
}

void flatten_record(const TrajectoryRecord& r, std::vector<double>& row) {
  row.clear();
  row.push_back(r.t);
  row.insert(row.end(), r.a.begin(), r.a.end());
  row.insert(row.end(), r.q.begin(), r.q.end());
  row.insert(row.end(), r.qd.begin(), r.qd.end());
  row.insert(row.end(), r.qdd.begin(), r.qdd.end());
  row.insert(row.end(), r.length.begin(), r.length.end());
  row.insert(row.end(), r.velocity.begin(), r.velocity.end());
  row.insert(row.end(), r.moment_arm.data.begin(), r.moment_arm.data.end());
}

TrajectoryRecord unflatten_record(const double* row, int dof, int muscles) {
  TrajectoryRecord r;
  const double* p = row;
  auto take = [&p](std::vector<double>& v, int n) {
    v.assign(p, p + n);
    p += n;
  };
  r.t = *p++;
  take(r.a, muscles);
  take(r.q, dof);
  take(r.qd, dof);
  take(r.qdd, dof);
  take(r.length, muscles);
  take(r.velocity, muscles);
  r.moment_arm.rows = muscles;
  r.moment_arm.cols = dof;
  take(r.moment_arm.data, muscles * dof);
  return r;
}

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
  return v;
}

int dataset_dof(const TrajectoryDataset& d) {
  return d.records.empty() ? 0 : static_cast<int>(d.records.front().q.size());
}

int dataset_muscles(const TrajectoryDataset& d) {
  return d.records.empty() ? static_cast<int>(d.activation.muscles.size())
                           : static_cast<int>(d.records.front().a.size());
}

}  // namespace

const char* split_name(Split s) { return s == Split::kTrain ? "train" : "test"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw FormatError("unknown split '" + s + "' (expected train or test)");
}

ActivationSpec random_activation_spec(int muscles, std::uint64_t seed, Split split) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.2, 0.45);
  std::uniform_real_distribution<double> freq(0.2, 1.0);
  std::uniform_real_distribution<double> off(0.3, 0.5);
  const double base = split == Split::kTrain ? 0.0 : std::numbers::pi;
  std::uniform_real_distribution<double> phase(base, base + std::numbers::pi);
  ActivationSpec spec;
  for (int i = 0; i < muscles; ++i) {
    Sinusoid s;
    s.amplitude = amp(rng);
    s.frequency = freq(rng);
    s.phase = phase(rng);
    s.offset = off(rng);
    spec.muscles.push_back(s);
  }
  return spec;
}

std::vector<double> generate_activations(const ActivationSpec& spec, double t) {
  std::vector<double> a;
  a.reserve(spec.muscles.size());
  for (const Sinusoid& s : spec.muscles) {
    if (!(s.frequency > 0.0)) throw LogicError("activation frequency must be positive");
    const double v =
        s.amplitude * std::sin(2.0 * std::numbers::pi * s.frequency * t + s.phase) + s.offset;
    a.push_back(std::clamp(v, 0.0, 1.0));
  }
  return a;
}

TrajectoryDataset rollout(const ArmModel& model, const FullParamsd& truth,
                          const ActivationSpec& spec, const RolloutOptions& opts) {
  const int n = model.dof();
  const int nm = model.muscle_count();
  if (static_cast<int>(spec.muscles.size()) != nm) {
    throw LogicError("rollout: activation spec does not match the muscle count");
  }
  if (!(opts.dt > 0.0) || opts.steps < 0) throw LogicError("rollout: need dt > 0, steps >= 0");
  validate_params(truth);
  std::vector<double> q = opts.q0.empty() ? std::vector<double>(n, 0.0) : opts.q0;
  std::vector<double> qd = opts.qd0.empty() ? std::vector<double>(n, 0.0) : opts.qd0;
  if (static_cast<int>(q.size()) != n || static_cast<int>(qd.size()) != n) {
    throw LogicError("rollout: initial state has wrong length");
  }

  TrajectoryDataset out;
  out.dt = opts.dt;
  out.activation = spec;
  out.records.reserve(opts.steps);
  for (int k = 0; k < opts.steps; ++k) {
    TrajectoryRecord r;
    r.t = k * opts.dt;
    r.a = generate_activations(spec, r.t);
    MuscleState ms = muscle_state(model, q, qd);
    r.qdd = predict_qddot<double>(model, q, qd, r.a, truth, ms.length, ms.velocity,
                                  ms.moment_arm);
    r.q = q;
    r.qd = qd;
    r.length = std::move(ms.length);
    r.velocity = std::move(ms.velocity);
    r.moment_arm = std::move(ms.moment_arm);
    for (int j = 0; j < n; ++j) {
      qd[j] += opts.dt * r.qdd[j];
      q[j] += opts.dt * qd[j];
      if (!std::isfinite(q[j]) || !std::isfinite(qd[j]) || std::abs(q[j]) > opts.divergence_limit) {
        throw NumericError("rollout diverged at step " + std::to_string(k) + " (joint " +
                           std::to_string(j) + ")");
      }
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

double consistency_error(const ArmModel& model, const FullParamsd& truth,
                         const TrajectoryDataset& data) {
  double worst = 0.0;
  for (const TrajectoryRecord& r : data.records) {
    const MuscleState ms = muscle_state(model, r.q, r.qd);
    const auto qdd = predict_qddot<double>(model, r.q, r.qd, r.a, truth, ms.length, ms.velocity,
                                           ms.moment_arm);
    for (std::size_t j = 0; j < qdd.size(); ++j) {
      worst = std::max(worst, std::abs(qdd[j] - r.qdd[j]));
    }
  }
  return worst;
}

double moment_arm_error(const ArmModel& model, const TrajectoryDataset& data, double h) {
  double worst = 0.0;
  for (const TrajectoryRecord& r : data.records) {
    std::vector<double> qp = r.q, qm = r.q;
    for (std::size_t j = 0; j < r.q.size(); ++j) {
      qp[j] = r.q[j] + h;
      qm[j] = r.q[j] - h;
      const auto lp = muscle_lengths<double>(model, qp);
      const auto lm = muscle_lengths<double>(model, qm);
      qp[j] = qm[j] = r.q[j];
      for (int i = 0; i < r.moment_arm.rows; ++i) {
        const double fd = (lp[i] - lm[i]) / (2.0 * h);
        const double ad = r.moment_arm(i, static_cast<int>(j));
        worst = std::max(worst, std::abs(fd - ad) / std::max(1e-3, std::abs(ad)));
      }
    }
  }
  return worst;
}

double qdd_variance(const TrajectoryDataset& data) {
  const int n = dataset_dof(data);
  if (data.records.empty()) throw LogicError("qdd_variance: empty dataset");
  // Squared deviation from the per-joint mean, summed over joints and
  // averaged over records: a mean predictor then scores exactly 1.
  std::vector<double> mean(n, 0.0);
  for (const auto& r : data.records) {
    for (int j = 0; j < n; ++j) mean[j] += r.qdd[j];
  }
  for (double& m : mean) m /= static_cast<double>(data.size());
  double acc = 0.0;
  for (const auto& r : data.records) {
    for (int j = 0; j < n; ++j) acc += (r.qdd[j] - mean[j]) * (r.qdd[j] - mean[j]);
  }
  return acc / static_cast<double>(data.size());
}

std::vector<std::vector<const TrajectoryRecord*>> make_batches(const TrajectoryDataset& data,
                                                               std::size_t batch_size) {
  if (batch_size == 0) throw LogicError("make_batches: batch size must be positive");
  std::vector<std::vector<const TrajectoryRecord*>> out;
  for (std::size_t i = 0; i < data.size(); i += batch_size) {
    std::vector<const TrajectoryRecord*> b;
    for (std::size_t k = i; k < std::min(data.size(), i + batch_size); ++k) {
      b.push_back(&data.records[k]);
    }
    out.push_back(std::move(b));
  }
  return out;
}

FullParamsd sample_initial_guess(const FullParamsd& truth, std::uint64_t seed,
                                 double cholesky_bias) {
  validate_params(truth);
  for (double v : flatten(truth)) {
    if (v == 0.0) throw LogicError("sample_initial_guess: ground-truth entry is zero");
  }
  std::mt19937_64 rng(seed);
  auto draw = [&rng](double p) {
    std::normal_distribution<double> dist(p, 0.1 * std::abs(p));
    for (;;) {
      const double v = dist(rng);
      const double ratio = v / p;
      if (ratio > kMinMultiplier && ratio < kMaxMultiplier) return v;
    }
  };
  FullParamsd out = truth;
  for (auto& m : out.muscles) {
    m.l_opt = draw(m.l_opt);
    m.f_max = draw(m.f_max);
    m.v_max = draw(m.v_max);
  }
  for (auto& b : out.bones) {
    b.mass = draw(b.mass);
    for (int k = 0; k < 3; ++k) b.com[k] = draw(b.com[k]);
    std::array<double, 6> L = cholesky_from_inertia(b.inertia, cholesky_bias);
    for (double& l : L) l = draw(l);
    b.inertia = inertia_from_cholesky(L, cholesky_bias);
  }
  return out;
}

void save_dataset(const std::string& path, const TrajectoryDataset& data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  const int dof = dataset_dof(data);
  const int nm = dataset_muscles(data);
  const auto cols = column_names(dof, nm);
  f << kMagic << '\n';
  f << "model_hash " << hex64(data.model_hash) << '\n';
  f << "dt " << hexfloat(data.dt) << '\n';
  f << "count " << data.size() << '\n';
  f << "split " << split_name(data.split) << '\n';
  f << "dof " << dof << '\n';
  f << "muscles " << nm << '\n';
  for (std::size_t i = 0; i < data.activation.muscles.size(); ++i) {
    const Sinusoid& s = data.activation.muscles[i];
    f << "sinusoid " << i << ' ' << hexfloat(s.amplitude) << ' ' << hexfloat(s.frequency) << ' '
      << hexfloat(s.phase) << ' ' << hexfloat(s.offset) << '\n';
  }
  f << "columns";
  for (const auto& c : cols) f << ' ' << c;
  f << "\nend_header\n";
  std::vector<double> row;
  std::vector<std::uint64_t> raw;
  for (const auto& r : data.records) {
    flatten_record(r, row);
    if (row.size() != cols.size()) throw LogicError("save_dataset: inconsistent record shape");
    raw.resize(row.size());
    for (std::size_t k = 0; k < row.size(); ++k) {
      raw[k] = to_little_endian(std::bit_cast<std::uint64_t>(row[k]));
    }
    f.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(std::uint64_t)));
  }
  if (!f) throw IoError("write to '" + path + "' failed");
}

void save_dataset_csv(const std::string& path, const TrajectoryDataset& data,
                      std::size_t max_rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  const auto cols = column_names(dataset_dof(data), dataset_muscles(data));
  for (std::size_t k = 0; k < cols.size(); ++k) f << (k ? "," : "") << cols[k];
  f << '\n';
  const std::size_t rows = max_rows == 0 ? data.size() : std::min(max_rows, data.size());
  std::vector<double> row;
  char buf[32];
  for (std::size_t i = 0; i < rows; ++i) {
    flatten_record(data.records[i], row);
    for (std::size_t k = 0; k < row.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", row[k]);
      f << (k ? "," : "") << buf;
    }
    f << '\n';
  }
  if (!f) throw IoError("write to '" + path + "' failed");
}

TrajectoryDataset load_dataset(const std::string& path, std::uint64_t expected_hash,
                               std::vector<std::string>* warnings) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open dataset '" + path + "'");
  std::string line;
  if (!std::getline(f, line) || line != kMagic) {
    throw FormatError("dataset '" + path + "': missing or unsupported header (expected '" +
                      std::string(kMagic) + "')");
  }
  TrajectoryDataset d;
  long long count = -1;
  int dof = -1, nm = -1;
  std::vector<std::string> cols;
  bool done = false;
  while (std::getline(f, line)) {
    if (line == "end_header") {
      done = true;
      break;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    std::string v;
    if (key == "model_hash") {
      ls >> v;
      d.model_hash = std::strtoull(v.c_str(), nullptr, 16);
    } else if (key == "dt") {
      ls >> v;
      d.dt = parse_double(v);
    } else if (key == "count") {
      ls >> count;
    } else if (key == "split") {
      ls >> v;
      try {
        d.split = parse_split(v);
      } catch (const LogicError& e) {
        throw FormatError(std::string("dataset: ") + e.what());
      }
    } else if (key == "dof") {
      ls >> dof;
    } else if (key == "muscles") {
      ls >> nm;
    } else if (key == "sinusoid") {
      std::size_t idx;
      std::string a, fr, ph, of;
      ls >> idx >> a >> fr >> ph >> of;
      if (!ls || idx != d.activation.muscles.size()) throw FormatError("dataset: bad sinusoid line");
      d.activation.muscles.push_back(
          {parse_double(a), parse_double(fr), parse_double(ph), parse_double(of)});
    } else if (key == "columns") {
      while (ls >> v) cols.push_back(v);
    } else {
      throw FormatError("dataset: unknown header key '" + key + "'");
    }
  }
  if (!done) throw FormatError("dataset '" + path + "': header not terminated");
  if (count < 0 || dof < 0 || nm < 0 || !(d.dt > 0.0)) {
    throw FormatError("dataset '" + path + "': incomplete header");
  }
  if (cols != column_names(dof, nm)) {
    throw FormatError("dataset '" + path + "': column manifest does not match dof/muscles");
  }
  if (expected_hash != 0 && d.model_hash != expected_hash && warnings) {
    warnings->push_back("dataset '" + path + "' was generated from a different model (hash " +
                        hex64(d.model_hash) + ", expected " + hex64(expected_hash) + ")");
  }
  const std::size_t width = cols.size();
  std::vector<std::uint64_t> raw(width);
  std::vector<double> row(width);
  d.records.reserve(static_cast<std::size_t>(count));
  for (long long i = 0; i < count; ++i) {
    f.read(reinterpret_cast<char*>(raw.data()),
           static_cast<std::streamsize>(width * sizeof(std::uint64_t)));
    if (f.gcount() != static_cast<std::streamsize>(width * sizeof(std::uint64_t))) {
      throw FormatError("dataset '" + path + "' is truncated: record " + std::to_string(i) +
                        " of " + std::to_string(count) + " incomplete");
    }
    for (std::size_t k = 0; k < width; ++k) {
      row[k] = std::bit_cast<double>(to_little_endian(raw[k]));
    }
    d.records.push_back(unflatten_record(row.data(), dof, nm));
  }
  if (f.peek() != std::char_traits<char>::eof()) {
    throw FormatError("dataset '" + path + "': trailing bytes after the last record");
  }
  return d;
}

}  // namespace msm
