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

#ifndef MSM_DATASET_HPP_
#define MSM_DATASET_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "msm/kinematics.hpp"
#include "msm/model.hpp"
#include "msm/reparam.hpp"

namespace msm {

struct Sinusoid {
  double amplitude = 0.0;
  double frequency = 1.0;  // Hz
  double phase = 0.0;      // rad
  double offset = 0.0;
};

struct ActivationSpec {
  std::vector<Sinusoid> muscles;
};

enum class Split { kTrain, kTest };

const char* split_name(Split s);
Split parse_split(const std::string& s);

// Draws amplitude in [0.2, 0.45], frequency in [0.2, 1] Hz, offset in
// [0.3, 0.5]. Train phases lie in [0, pi) and test phases in [pi, 2 pi), so
// the two splits never share a phase.
ActivationSpec random_activation_spec(int muscles, std::uint64_t seed, Split split);

// a_i(t) = A_i sin(2 pi f_i t + phi_i) + a0_i, clamped to [0, 1].
std::vector<double> generate_activations(const ActivationSpec& spec, double t);

struct TrajectoryRecord {
  double t = 0.0;
  std::vector<double> a;
  std::vector<double> q, qd, qdd;
  std::vector<double> length, velocity;
  MomentArms moment_arm;
};

struct TrajectoryDataset {
  std::vector<TrajectoryRecord> records;
  double dt = 0.0;
  std::uint64_t model_hash = 0;
  Split split = Split::kTrain;
  ActivationSpec activation;

  std::size_t size() const { return records.size(); }
};

struct RolloutOptions {
  double dt = 0.002;
  int steps = 10000;
  std::vector<double> q0;   // empty: zero
  std::vector<double> qd0;  // empty: zero
  double divergence_limit = 12.566370614359172;  // 4 pi
};

// Semi-implicit Euler rollout of the ground-truth model. Throws NumericError
// when the trajectory diverges.
TrajectoryDataset rollout(const ArmModel& model, const FullParamsd& truth,
                          const ActivationSpec& spec, const RolloutOptions& opts);

// Largest |qdd_stored - ABA(q, qd, tau(a))| over the dataset.
double consistency_error(const ArmModel& model, const FullParamsd& truth,
                         const TrajectoryDataset& data);

// Largest relative deviation between stored moment arms and central
// differences of muscle lengths recomputed from q.
double moment_arm_error(const ArmModel& model, const TrajectoryDataset& data, double h = 1e-6);

// Trace of the joint-acceleration covariance: squared deviation from the
// per-joint mean, summed over joints and averaged over records.
double qdd_variance(const TrajectoryDataset& data);

// Contiguous batches of `batch_size` records (last batch may be shorter).
std::vector<std::vector<const TrajectoryRecord*>> make_batches(const TrajectoryDataset& data,
                                                               std::size_t batch_size);

// Scalars ~ N(p, 0.1 |p|) redrawn until the ratio lies in (0.1, 10); inertia
// sampled entrywise on its Cholesky factor with the same relative spread.
// Throws LogicError for any zero ground-truth entry.
FullParamsd sample_initial_guess(const FullParamsd& truth, std::uint64_t seed,
                                 double cholesky_bias = 1e-7);

void save_dataset(const std::string& path, const TrajectoryDataset& data);
void save_dataset_csv(const std::string& path, const TrajectoryDataset& data,
                      std::size_t max_rows = 0);

// Throws FormatError on bad headers or truncated data. A model hash that
// differs from `expected_hash` (when nonzero) appends a warning.
TrajectoryDataset load_dataset(const std::string& path, std::uint64_t expected_hash = 0,
                               std::vector<std::string>* warnings = nullptr);

}  // namespace msm

#endif  // MSM_DATASET_HPP_
