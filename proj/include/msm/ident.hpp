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

// Parameter identification: acceleration loss, Adam, generalized simulated
// annealing and the five method configurations.
//
// Methods:
//   M1  annealing, muscle parameters only, bones frozen at a perturbed guess
//   M2  annealing, muscle and bone parameters
//   M3  Adam on autodiff gradients, muscle parameters only, bones frozen
//   M4  Adam on autodiff gradients, muscle and bone parameters
//   M5  annealing with Adam as the local search, muscle and bone parameters
//
// One iteration is one batch evaluation plus one optimizer update. Batches
// cycle in dataset order.

#ifndef MSM_IDENT_HPP_
#define MSM_IDENT_HPP_

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "msm/autodiff.hpp"
#include "msm/dataset.hpp"
#include "msm/model.hpp"
#include "msm/reparam.hpp"

namespace msm {

using Batch = std::span<const TrajectoryRecord* const>;

// ---------------------------------------------------------------------------
// Loss

struct LossProblem {
  const ArmModel* model = nullptr;
  ReparamConfig reparam;
  double variance = 1.0;    // normalizer, see qdd_variance
  std::vector<char> active;  // per learnable entry; inactive entries stay fixed
};

LossProblem make_problem(const ArmModel& model, const FullParamsd& baseline, double variance,
                         std::vector<char> active = {});

// Sum over records of |qdd_stored - qdd_predicted|^2 / (T * variance), with
// physical parameters given directly.
double nmse(const ArmModel& model, const FullParamsd& params, Batch batch, double variance);
double nmse(const ArmModel& model, const FullParamsd& params, const TrajectoryDataset& data,
            double variance);

// Reference route: the whole batch on the active tape (reset by the caller).
ad::DiffScalar loss_fd(Batch batch, std::span<const ad::DiffScalar> x, const LossProblem& p);

double loss_value(Batch batch, std::span<const double> x, const LossProblem& p);

// Fast route: one short tape per record, then one seeded sweep through the
// decoding. Writes d loss / dx into `grad` (zero for inactive entries) and
// returns the loss. Uses its own tape.
double loss_and_gradient(Batch batch, std::span<const double> x, const LossProblem& p,
                         std::span<double> grad);

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<double> m, v;
};

AdamState make_adam(std::size_t n, double lr = 1e-3);

// Bias-corrected update of `x` in place. Throws NumericError on a
// non-finite gradient and LogicError on a size mismatch.
void adam_step(AdamState& s, std::span<double> x, std::span<const double> g);

// ---------------------------------------------------------------------------
// Generalized simulated annealing

struct AnnealParams {
  double initial_temperature = 0.02;
  double restart_ratio = 2e-15;
  double visit = 1.1;    // visiting distribution exponent q_v
  double accept = -5.0;  // acceptance exponent q_a
};

// Markov chain of generalized annealing. Each outer step runs 2 * dim
// proposals: the first dim move every coordinate, the rest one coordinate
// each. The temperature follows T0 (2^(qv-1) - 1) / ((k+2)^(qv-1) - 1) for
// outer step k and the chain restarts from a uniform point when T / T0 drops
// below the restart ratio.
class Annealer {
 public:
  Annealer(std::vector<double> lower, std::vector<double> upper, AnnealParams params,
           std::uint64_t seed);

  std::size_t dim() const { return lower_.size(); }
  double temperature() const { return temperature_; }
  long outer_step() const { return outer_; }
  int chain_position() const { return chain_; }
  const AnnealParams& params() const { return params_; }

  // Candidate for the current chain position, wrapped into the bounds.
  std::vector<double> propose(std::span<const double> x);
  // Generalized Metropolis test. Always true when e_new < e_cur.
  bool accept(double e_new, double e_cur);
  // Moves to the next chain position. Returns true when the chain restarted,
  // in which case the caller should move to random_point().
  bool advance();
  std::vector<double> random_point();

  // Scale of one visiting draw (the factor multiplying the Gaussian numerator).
  static double visit_scale(double temperature, double qv);

 private:
  double visit_draw();
  void update_temperature();

  std::vector<double> lower_, upper_;
  AnnealParams params_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  long outer_ = 0;
  int chain_ = 0;
  double temperature_ = 0.0;
  double visit_sigma_ = 0.0;
};

// Energies may depend on a slot (a batch); only energies of the same slot are
// compared. Iteration k uses slot k % slots.
struct AnnealHooks {
  std::function<double(std::span<const double> x, int slot)> energy;
  int slots = 1;
  // Called once per iteration after the update.
  std::function<void(long iteration, std::span<const double> best, double best_energy)>
      on_iteration;
  // Local search from x (updated in place) starting at `iteration`. Returns
  // the number of iterations consumed, at most `remaining`.
  std::function<long(std::vector<double>& x, long iteration, long remaining)> local_search;
};

struct AnnealResult {
  std::vector<double> x;
  long energy_evaluations = 0;
  long local_searches = 0;
  long restarts = 0;
};

// Runs `budget` iterations (one proposal or one local-search step each).
// With a local search, it is invoked on every new best point and after dim
// consecutive iterations without improvement.
AnnealResult simulated_annealing(const AnnealHooks& hooks, std::vector<double> x0,
                                 std::vector<double> lower, std::vector<double> upper,
                                 const AnnealParams& params, std::uint64_t seed, long budget);

// ---------------------------------------------------------------------------
// Methods and criteria

enum class Method { kM1 = 1, kM2, kM3, kM4, kM5 };
enum class Subset { kMuscleOnly, kFull, kFullMinusInertia };

std::string method_name(Method m);
Method parse_method(const std::string& s);  // "M1".."M5"; FormatError otherwise
std::string subset_name(Subset s);
Subset parse_subset(const std::string& s);

bool uses_gradients(Method m);
bool uses_annealing(Method m);

struct MethodConfig {
  Method method = Method::kM4;
  Subset subset = Subset::kFull;
  long iterations = 10000;
  std::size_t batch_size = 1000;
  double learning_rate = 1e-3;
  AnnealParams anneal;
  double multiplier_bound = 6.0;  // annealing box for multiplier entries
  double cholesky_bound = 2.0;    // annealing box for inertia offsets
  long local_max_iterations = 100;
  int local_window = 10;
  int c2_every = 10;
};

// Defaults: M1 and M3 learn muscle parameters only; the others learn all.
MethodConfig default_config(Method m, long iterations = 10000);

std::vector<char> active_mask(const ArmModel& model, Subset s);

struct Criteria {
  double c2 = 0.0;   // |p - p_gt| / |p_gt| * 100
  double c3 = 0.0;   // mean_i |p_i - p_gt_i| / |p_gt_i| * 100
  double c3m = 0.0;  // c3 over muscle entries
};

// Throws LogicError for a zero ground-truth entry or a shape mismatch.
Criteria parameter_criteria(const FullParamsd& estimate, const FullParamsd& truth);

struct RunRecord {
  Method method = Method::kM4;
  Subset subset = Subset::kFull;
  std::uint64_t seed = 0;
  long iterations = 0;
  std::size_t batch_size = 0;
  double learning_rate = 0.0;
  AnnealParams anneal;
  bool bones_frozen = false;

  std::vector<double> c1;            // loss on the iteration's batch
  std::vector<long> c2_iteration;
  std::vector<double> c2;
  std::vector<double> iteration_seconds;

  FullParamsd initial;
  FullParamsd final_params;
  double final_c1 = 0.0;  // full training set
  Criteria final_criteria;

  long loss_evaluations = 0;
  long gradient_evaluations = 0;
  long local_searches = 0;
  bool failed = false;
  std::string failure;
  double total_seconds = 0.0;
};

struct RunInputs {
  const ArmModel* model = nullptr;
  const FullParamsd* truth = nullptr;
  const TrajectoryDataset* train = nullptr;
  double variance = 0.0;  // 0: qdd_variance(*train)
  // Starting point; empty: sample_initial_guess(truth, seed).
  const FullParamsd* initial = nullptr;
};

// Deterministic in (cfg, inputs, seed) apart from the timing fields.
RunRecord run_method(const MethodConfig& cfg, const RunInputs& in, std::uint64_t seed);

// Best-so-far envelope of a trace.
std::vector<double> running_min(std::span<const double> v);

}  // namespace msm

#endif  // MSM_IDENT_HPP_
