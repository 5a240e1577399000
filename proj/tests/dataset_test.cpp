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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "msm/dynamics.hpp"
#include "test_util.hpp"

namespace msm {
namespace {

namespace fs = std::filesystem;
using testing::fixture;

const TrajectoryDataset& train_set() {
  static const TrajectoryDataset d = [] {
    RolloutOptions o;
    o.q0 = fixture().rest_posture;
    return rollout(fixture().model, fixture().ground_truth,
                   random_activation_spec(8, 11, Split::kTrain), o);
  }();
  return d;
}

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / ("msm_dataset_test_" + name)).string();
}

TEST(Activations, StatedExamples) {
  ActivationSpec spec;
  spec.muscles = {{0.0, 0.7, 1.0, 0.35}, {0.3, 0.5, 0.0, 0.4}, {0.4, 0.5, std::numbers::pi / 2, 0.5}};
  const auto a0 = generate_activations(spec, 0.0);
  EXPECT_EQ(a0[0], 0.35);
  EXPECT_EQ(a0[1], 0.4);
  EXPECT_NEAR(a0[2], 0.9, 1e-15);
  EXPECT_EQ(generate_activations(spec, 3.7)[0], 0.35);
  // 0.4 sin(pi t) + 0.4 at t = 0.5 s
  EXPECT_NEAR(generate_activations(spec, 0.5)[1], 0.7, 1e-15);
}

TEST(Activations, ClampedToUnitInterval) {
  ActivationSpec spec;
  spec.muscles = {{0.45, 1.0, 0.0, 0.9}, {0.45, 1.0, 0.0, 0.1}};
  for (double t = 0.0; t < 2.0; t += 0.01) {
    const auto a = generate_activations(spec, t);
    for (double v : a) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_EQ(generate_activations(spec, 0.25)[0], 1.0);
  EXPECT_EQ(generate_activations(spec, 0.75)[1], 0.0);
  spec.muscles[0].frequency = 0.0;
  EXPECT_THROW(generate_activations(spec, 0.0), LogicError);
}

TEST(Activations, RandomSpecsRespectRangesAndSplitsAreDisjoint) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto train = random_activation_spec(8, seed, Split::kTrain);
    const auto test = random_activation_spec(8, seed, Split::kTest);
    ASSERT_EQ(train.muscles.size(), 8u);
    for (const auto& s : train.muscles) {
      EXPECT_GE(s.amplitude, 0.2);
      EXPECT_LE(s.amplitude, 0.45);
      EXPECT_GE(s.frequency, 0.2);
      EXPECT_LE(s.frequency, 1.0);
      EXPECT_GE(s.offset, 0.3);
      EXPECT_LE(s.offset, 0.5);
      EXPECT_GE(s.phase, 0.0);
      EXPECT_LT(s.phase, std::numbers::pi);
    }
    for (const auto& s : test.muscles) {
      EXPECT_GE(s.phase, std::numbers::pi);
      EXPECT_LT(s.phase, 2.0 * std::numbers::pi);
    }
  }
  EXPECT_EQ(parse_split(split_name(Split::kTest)), Split::kTest);
  EXPECT_THROW(parse_split("validation"), FormatError);
}

TEST(Rollout, EquilibriumWithoutDrive) {
  ArmModel model = fixture().model;
  model.set_gravity({0.0, 0.0, 0.0});
  FullParamsd p = fixture().ground_truth;
  for (auto& m : p.muscles) m.l_opt *= 3.0;  // every path slack: no passive force
  ActivationSpec spec;
  spec.muscles.assign(8, {0.0, 1.0, 0.0, 0.0});
  RolloutOptions o;
  o.steps = 500;
  o.q0 = fixture().rest_posture;
  const auto d = rollout(model, p, spec, o);
  for (const auto& r : d.records) {
    for (int j = 0; j < 5; ++j) {
      EXPECT_NEAR(r.qdd[j], 0.0, 1e-12);
      EXPECT_NEAR(r.q[j], o.q0[j], 1e-12);
    }
  }
}

TEST(Rollout, TenThousandStepsAndDeterministic) {
  const auto& d = train_set();
  ASSERT_EQ(d.size(), 10000u);
  EXPECT_EQ(d.dt, 0.002);
  EXPECT_EQ(d.records.front().t, 0.0);
  EXPECT_NEAR(d.records.back().t + d.dt, 20.0, 1e-9);
  EXPECT_EQ(d.model_hash, 0u);  // the caller stamps the hash
  for (std::size_t k = 1; k < d.size(); ++k) {
    ASSERT_NEAR(d.records[k].t - d.records[k - 1].t, d.dt, 1e-12);
  }

  RolloutOptions o;
  o.q0 = fixture().rest_posture;
  o.steps = 2000;
  const auto spec = random_activation_spec(8, 11, Split::kTrain);
  const auto a = rollout(fixture().model, fixture().ground_truth, spec, o);
  const auto b = rollout(fixture().model, fixture().ground_truth, spec, o);
  for (std::size_t k = 0; k < a.size(); ++k) {
    ASSERT_EQ(a.records[k].q, b.records[k].q);
    ASSERT_EQ(a.records[k].qdd, b.records[k].qdd);
    ASSERT_EQ(a.records[k].q, d.records[k].q);
  }
}

TEST(Rollout, SemiImplicitEulerUpdate) {
  const auto& d = train_set();
  for (std::size_t k = 0; k + 1 < 200; ++k) {
    const auto& r = d.records[k];
    const auto& n = d.records[k + 1];
    for (int j = 0; j < 5; ++j) {
      const double qd = r.qd[j] + d.dt * r.qdd[j];
      EXPECT_EQ(n.qd[j], qd);
      EXPECT_EQ(n.q[j], r.q[j] + d.dt * qd);
    }
  }
}

TEST(Rollout, DivergenceIsAnError) {
  FullParamsd p = fixture().ground_truth;
  for (auto& m : p.muscles) m.f_max *= 1e4;
  RolloutOptions o;
  o.q0 = fixture().rest_posture;
  o.steps = 2000;
  EXPECT_THROW(rollout(fixture().model, p, random_activation_spec(8, 3, Split::kTrain), o),
               NumericError);
  o.divergence_limit = 1e-3;
  EXPECT_THROW(rollout(fixture().model, fixture().ground_truth,
                       random_activation_spec(8, 3, Split::kTrain), o),
               NumericError);
}

TEST(Rollout, RecordsAreConsistentWithTheModel) {
  const auto& d = train_set();
  EXPECT_LT(consistency_error(fixture().model, fixture().ground_truth, d), 1e-9);
  EXPECT_LT(moment_arm_error(fixture().model, d), 1e-6);

  // Independent recheck on a sample of records.
  for (std::size_t k = 0; k < d.size(); k += 997) {
    const auto& r = d.records[k];
    const auto ms = muscle_state(fixture().model, r.q, r.qd);
    EXPECT_EQ(ms.length, r.length);
    EXPECT_EQ(ms.velocity, r.velocity);
    EXPECT_EQ(r.a, generate_activations(d.activation, r.t));
  }

  // A corrupted record is caught.
  TrajectoryDataset bad = d;
  bad.records.resize(50);
  bad.records[17].qdd[2] += 1e-6;
  EXPECT_GT(consistency_error(fixture().model, fixture().ground_truth, bad), 5e-7);
}

TEST(Rollout, VarianceAndBatches) {
  const auto& d = train_set();
  // Oracle: trace of the Eigen sample covariance (population normalisation).
  Eigen::MatrixXd Q(d.size(), 5);
  for (std::size_t k = 0; k < d.size(); ++k) {
    for (int j = 0; j < 5; ++j) Q(k, j) = d.records[k].qdd[j];
  }
  const Eigen::MatrixXd centred = Q.rowwise() - Q.colwise().mean();
  const double oracle = centred.squaredNorm() / static_cast<double>(d.size());
  EXPECT_NEAR(qdd_variance(d), oracle, 1e-12 * oracle);
  EXPECT_GT(oracle, 0.0);

  const auto batches = make_batches(d, 1000);
  ASSERT_EQ(batches.size(), 10u);
  for (std::size_t b = 0; b < 10; ++b) {
    ASSERT_EQ(batches[b].size(), 1000u);
    EXPECT_EQ(batches[b].front(), &d.records[1000 * b]);
  }
  EXPECT_EQ(make_batches(d, 3000).back().size(), 1000u);
  EXPECT_THROW(make_batches(d, 0), LogicError);
}

TEST(InitialGuess, ReproducibleAndPhysical) {
  const auto& gt = fixture().ground_truth;
  EXPECT_EQ(flatten(sample_initial_guess(gt, 5)), flatten(sample_initial_guess(gt, 5)));
  EXPECT_NE(flatten(sample_initial_guess(gt, 5)), flatten(sample_initial_guess(gt, 6)));
  const ReparamConfig cfg = make_reparam(gt);
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const auto p = sample_initial_guess(gt, seed);
    EXPECT_NO_THROW(validate_params(p));
    EXPECT_NO_THROW(encode(p, cfg));
  }
}

TEST(InitialGuess, SampleMomentsMatchTenPercentSpread) {
  const auto& gt = fixture().ground_truth;
  const auto truth = flatten(gt);
  // Muscle 2 f_max and the ulna mass.
  for (std::size_t idx : {std::size_t{7}, bone_offset(8, 1)}) {
    double sum = 0.0, sq = 0.0;
    const int n = 10000;
    for (int s = 0; s < n; ++s) {
      const double v = flatten(sample_initial_guess(gt, 1000 + s))[idx];
      sum += v;
      sq += v * v;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    EXPECT_NEAR(mean, truth[idx], 0.01 * truth[idx]) << idx;
    EXPECT_NEAR(sd, 0.1 * truth[idx], 0.05 * 0.1 * truth[idx]) << idx;
  }
}

TEST(InitialGuess, ZeroGroundTruthEntryIsRejected) {
  FullParamsd gt = fixture().ground_truth;
  gt.bones[0].com[0] = 0.0;
  EXPECT_THROW(sample_initial_guess(gt, 1), LogicError);
}

TEST(DatasetFile, RoundTripIsBitExact) {
  TrajectoryDataset d = train_set();
  d.records.resize(300);
  d.model_hash = fixture().hash;
  const std::string path = temp_path("roundtrip.bin");
  save_dataset(path, d);
  std::vector<std::string> warnings;
  const auto back = load_dataset(path, fixture().hash, &warnings);
  EXPECT_TRUE(warnings.empty());
  ASSERT_EQ(back.size(), d.size());
  EXPECT_EQ(back.dt, d.dt);
  EXPECT_EQ(back.model_hash, d.model_hash);
  EXPECT_EQ(back.split, d.split);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(back.activation.muscles[i].phase, d.activation.muscles[i].phase);
    EXPECT_EQ(back.activation.muscles[i].frequency, d.activation.muscles[i].frequency);
  }
  for (std::size_t k = 0; k < d.size(); ++k) {
    const auto& a = d.records[k];
    const auto& b = back.records[k];
    ASSERT_EQ(std::memcmp(&a.t, &b.t, sizeof(double)), 0);
    ASSERT_EQ(a.a, b.a);
    ASSERT_EQ(a.q, b.q);
    ASSERT_EQ(a.qd, b.qd);
    ASSERT_EQ(a.qdd, b.qdd);
    ASSERT_EQ(a.length, b.length);
    ASSERT_EQ(a.velocity, b.velocity);
    ASSERT_EQ(a.moment_arm.data, b.moment_arm.data);
  }
  EXPECT_LT(consistency_error(fixture().model, fixture().ground_truth, back), 1e-9);
  fs::remove(path);
}

TEST(DatasetFile, HashMismatchWarns) {
  TrajectoryDataset d = train_set();
  d.records.resize(10);
  d.model_hash = 0x1234;
  const std::string path = temp_path("hash.bin");
  save_dataset(path, d);
  std::vector<std::string> warnings;
  EXPECT_NO_THROW(load_dataset(path, fixture().hash, &warnings));
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("hash"), std::string::npos);
  fs::remove(path);
}

TEST(DatasetFile, CorruptFilesAreRejected) {
  TrajectoryDataset d = train_set();
  d.records.resize(10);
  const std::string path = temp_path("corrupt.bin");
  save_dataset(path, d);
  const auto full = fs::file_size(path);

  fs::resize_file(path, full - 8);
  try {
    load_dataset(path);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos) << e.what();
  }

  save_dataset(path, d);
  {
    std::ofstream f(path, std::ios::binary | std::ios::app);
    const double extra = 1.0;
    f.write(reinterpret_cast<const char*>(&extra), sizeof extra);
  }
  EXPECT_THROW(load_dataset(path), FormatError);

  {
    std::ofstream f(path, std::ios::trunc);
    f << "msmdata v2\n";
  }
  EXPECT_THROW(load_dataset(path), FormatError);
  EXPECT_THROW(load_dataset(temp_path("missing.bin")), IoError);
  fs::remove(path);
}

TEST(DatasetFile, CsvExport) {
  TrajectoryDataset d = train_set();
  d.records.resize(20);
  const std::string path = temp_path("preview.csv");
  save_dataset_csv(path, d, 5);
  std::ifstream f(path);
  std::string header, line;
  std::getline(f, header);
  // t, 8 activations, 15 joint columns, 16 muscle kinematics, 40 moment arms
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 1 + 8 + 15 + 16 + 40 - 1);
  EXPECT_EQ(header.substr(0, 2), "t,");
  int rows = 0;
  while (std::getline(f, line)) ++rows;
  EXPECT_EQ(rows, 5);
  fs::remove(path);
}

}  // namespace
}  // namespace msm
