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

// Multi-run campaigns: run records on disk, parallel execution with resume,
// and quartile statistics per method.

#ifndef MSM_CAMPAIGN_HPP_
#define MSM_CAMPAIGN_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msm/ident.hpp"

namespace msm {

// JSON text. Non-finite numbers are written as null and read back as +inf.
std::string run_record_json(const RunRecord& r);
RunRecord parse_run_record(const std::string& text);  // FormatError on bad input
void save_run_record(const std::string& path, const RunRecord& r);
RunRecord load_run_record(const std::string& path);

// `msmcampaign v1` followed by YAML:
//
//   model: arm5dof.model         # relative to the config file
//   train: train.msmdata         # optional; generated when absent
//   train_seed: 1
//   steps: 10000
//   methods: [M1, M2, M3, M4, M5]
//   runs: 50                     # seeds first_seed .. first_seed + runs - 1
//   first_seed: 1
//   iterations: 10000
//   batch_size: 1000
//   subset: full-minus-inertia   # optional, for the joint methods M2/M4/M5
//   output: out                  # relative to the config file
struct CampaignConfig {
  std::string model_path;
  std::string train_path;
  std::uint64_t train_seed = 1;
  int steps = 10000;
  std::vector<Method> methods;
  std::vector<std::uint64_t> seeds;
  long iterations = 10000;
  std::size_t batch_size = 1000;
  std::optional<Subset> joint_subset;
  std::string output_dir;
};

CampaignConfig parse_campaign(const std::string& text, const std::string& base_dir = ".");
CampaignConfig load_campaign_file(const std::string& path);

MethodConfig method_config(const CampaignConfig& c, Method m);

// MSM_THREADS when set to a positive integer, else the hardware thread count.
int default_threads();

struct CampaignResult {
  std::vector<Method> methods;
  std::map<Method, std::vector<RunRecord>> runs;  // in seed order
  long resumed = 0;                               // records reused from disk
};

// Runs every (method, seed) pair, whole runs per worker. With a non-empty
// output directory, each record is written to <dir>/runs/<M>_seed<k>.json and
// an existing record with the same configuration is reused.
CampaignResult run_campaign(const CampaignConfig& cfg, const RunInputs& inputs, int threads,
                            const std::function<void(const RunRecord&, bool resumed)>& on_done = {});

// Linear-interpolation quantile (numpy default). p in [0, 1].
double quantile(std::vector<double> v, double p);

struct QuartileCurve {
  std::vector<long> iteration;
  std::vector<double> q1, median, q3;
};

// Per-iteration quartiles of C1 across runs; failed runs count as +inf from
// the failure onward.
QuartileCurve c1_curve(const std::vector<RunRecord>& runs);
// Same for the sampled C2 trace.
QuartileCurve c2_curve(const std::vector<RunRecord>& runs);

// Writes curves_<M>.csv per method, final.csv (one row per run) and
// summary.txt into `dir`.
void write_campaign_outputs(const CampaignResult& result, const std::string& dir);
std::string campaign_summary(const CampaignResult& result);

}  // namespace msm

#endif  // MSM_CAMPAIGN_HPP_
