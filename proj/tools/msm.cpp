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

// msm: data generation, identification runs, method comparisons, evaluation
// and base-coefficient reports.
//
// Exit codes: 0 success, 2 usage, 3 numeric failure, 4 I/O or format.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "msm/basecoef.hpp"
#include "msm/campaign.hpp"
#include "msm/dataset.hpp"
#include "msm/dynamics.hpp"
#include "msm/error.hpp"
#include "msm/ident.hpp"

namespace fs = std::filesystem;
using namespace msm;

namespace {

constexpr int kUsage = 2;
constexpr int kNumeric = 3;
constexpr int kIo = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

TrajectoryDataset load_data(const std::string& path, const LoadedModel& lm) {
  std::vector<std::string> warnings;
  TrajectoryDataset d = load_dataset(path, lm.hash, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  if (d.records.empty()) throw FormatError("dataset '" + path + "' is empty");
  if (d.records.front().q.size() != static_cast<std::size_t>(lm.model.dof()) ||
      d.records.front().a.size() != lm.model.muscles().size()) {
    throw FormatError("dataset '" + path + "' does not match the model shape");
  }
  return d;
}

TrajectoryDataset generate(const LoadedModel& lm, int steps, double dt, std::uint64_t seed,
                           Split split) {
  RolloutOptions o;
  o.q0 = lm.rest_posture;
  o.steps = steps;
  o.dt = dt;
  const auto spec =
      random_activation_spec(static_cast<int>(lm.model.muscles().size()), seed, split);
  TrajectoryDataset d = rollout(lm.model, lm.ground_truth, spec, o);
  d.model_hash = lm.hash;
  return d;
}

// "truth" or a run-record JSON file (its final parameters).
FullParamsd load_params(const std::string& spec, const LoadedModel& lm) {
  if (spec == "truth") return lm.ground_truth;
  FullParamsd p = load_run_record(spec).final_params;
  if (p.muscles.size() != lm.ground_truth.muscles.size() ||
      p.bones.size() != lm.ground_truth.bones.size()) {
    throw FormatError("parameters in '" + spec + "' do not match the model shape");
  }
  return p;
}

std::string criteria_table(const FullParamsd& p, const LoadedModel& lm) {
  const Criteria c = parameter_criteria(p, lm.ground_truth);
  std::ostringstream s;
  s << "C2  " << sci(c.c2) << " %\n"
    << "C3  " << sci(c.c3) << " %\n"
    << "C3m " << sci(c.c3m) << " %\n";
  return s.str();
}

std::string param_report(const RunRecord& r, const LoadedModel& lm) {
  const auto names = param_names(lm.model);
  const auto est = flatten(r.final_params);
  const auto ini = flatten(r.initial);
  const auto gt = flatten(lm.ground_truth);
  const std::size_t muscle_entries = bone_offset(static_cast<int>(r.final_params.muscles.size()), 0);
  std::ostringstream s;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-24s %14s %14s %14s %10s  %s\n", "parameter", "truth", "initial",
                "estimate", "error %", "status");
  s << buf;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const bool bone = i >= muscle_entries;
    const char* status = bone && r.bones_frozen ? "frozen (perturbed)" : "learned";
    const double err = gt[i] != 0.0 ? 100.0 * std::abs(est[i] - gt[i]) / std::abs(gt[i]) : 0.0;
    std::snprintf(buf, sizeof buf, "%-24s %14.6e %14.6e %14.6e %10.4f  %s\n", names[i].c_str(),
                  gt[i], ini[i], est[i], err, status);
    s << buf;
  }
  return s.str();
}

int cmd_gen_data(const std::string& model_path, const std::string& out, int steps, double dt,
                 std::uint64_t seed, const std::string& split_text, std::size_t preview) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw UsageError("--dt must be positive");
  if (steps < 1) throw UsageError("--steps must be positive");
  Split split;
  try {
    split = parse_split(split_text);
  } catch (const FormatError&) {
    throw UsageError("--split must be train or test");
  }
  const LoadedModel lm = load_model_file(model_path);
  const TrajectoryDataset d = generate(lm, steps, dt, seed, split);
  save_dataset(out, d);
  save_dataset_csv(out + ".csv", d, preview);
  std::cout << "records        " << d.size() << "\n"
            << "split          " << split_name(split) << "\n"
            << "consistency    " << sci(consistency_error(lm.model, lm.ground_truth, d)) << "\n"
            << "moment arms    " << sci(moment_arm_error(lm.model, d)) << "\n"
            << "qdd variance   " << sci(qdd_variance(d)) << "\n"
            << "wrote          " << out << ", " << out << ".csv\n";
  return 0;
}

int cmd_identify(const std::string& method_text, const std::string& data_path,
                 const std::string& model_path, std::uint64_t seed, long iters,
                 std::size_t batch, const std::string& init, const std::string& out) {
  Method method;
  try {
    method = parse_method(method_text);
  } catch (const FormatError&) {
    throw UsageError("--method must be one of M1..M5");
  }
  if (iters < 1) throw UsageError("--iters must be positive");
  if (batch < 1) throw UsageError("--batch-size must be positive");
  if (init != "sampled" && init != "truth") throw UsageError("--init must be sampled or truth");
  const LoadedModel lm = load_model_file(model_path);
  const TrajectoryDataset train = load_data(data_path, lm);

  MethodConfig cfg = default_config(method, iters);
  cfg.batch_size = batch;
  RunInputs in;
  in.model = &lm.model;
  in.truth = &lm.ground_truth;
  in.train = &train;
  if (init == "truth") in.initial = &lm.ground_truth;
  const RunRecord r = run_method(cfg, in, seed);

  fs::create_directories(out);
  save_run_record(out + "/run.json", r);
  write_file(out + "/params.txt", param_report(r, lm));
  {
    const auto env = running_min(r.c1);
    std::ostringstream s;
    s << "iteration,c1,c1_best\n";
    for (std::size_t i = 0; i < r.c1.size(); ++i) s << i << ',' << sci(r.c1[i]) << ',' << sci(env[i]) << '\n';
    write_file(out + "/c1.csv", s.str());
  }
  {
    std::ostringstream s;
    s << "iteration,c2\n";
    for (std::size_t i = 0; i < r.c2.size(); ++i) s << r.c2_iteration[i] << ',' << sci(r.c2[i]) << '\n';
    write_file(out + "/c2.csv", s.str());
  }

  std::cout << "method         " << method_name(method) << " (" << subset_name(cfg.subset) << ")\n"
            << "bones          " << (r.bones_frozen ? "frozen (perturbed)" : "learned") << "\n"
            << "iterations     " << r.c1.size() << "\n"
            << "final C1       " << sci(r.final_c1) << "\n"
            << criteria_table(r.final_params, lm)
            << "seconds        " << r.total_seconds << "\n"
            << "wrote          " << out << "/{run.json,params.txt,c1.csv,c2.csv}\n";
  if (r.failed) {
    std::cerr << "error: run failed: " << r.failure << "\n";
    return kNumeric;
  }
  return 0;
}

int cmd_compare(const std::string& config_path, int threads) {
  const CampaignConfig cfg = load_campaign_file(config_path);
  const LoadedModel lm = load_model_file(cfg.model_path);
  const TrajectoryDataset train = cfg.train_path.empty()
                                      ? generate(lm, cfg.steps, 0.002, cfg.train_seed, Split::kTrain)
                                      : load_data(cfg.train_path, lm);
  RunInputs in;
  in.model = &lm.model;
  in.truth = &lm.ground_truth;
  in.train = &train;

  const std::size_t total = cfg.methods.size() * cfg.seeds.size();
  std::size_t done = 0;
  const CampaignResult res = run_campaign(
      cfg, in, threads > 0 ? threads : default_threads(), [&](const RunRecord& r, bool resumed) {
        ++done;
        std::cerr << "[" << done << "/" << total << "] " << method_name(r.method) << " seed "
                  << r.seed << (resumed ? " (resumed)" : "") << " final C1 " << sci(r.final_c1)
                  << (r.failed ? " FAILED: " + r.failure : "") << "\n";
      });
  write_campaign_outputs(res, cfg.output_dir);
  std::cout << campaign_summary(res);

  std::size_t failed = 0;
  for (const auto& [m, runs] : res.runs) {
    for (const auto& r : runs) {
      if (!r.failed) continue;
      ++failed;
      std::cout << "failed: " << method_name(m) << " seed " << r.seed << ": " << r.failure << "\n";
    }
  }
  std::cout << "runs " << total << ", failed " << failed << ", resumed " << res.resumed
            << "; outputs in " << cfg.output_dir << "\n";
  return failed == total ? kNumeric : 0;
}

int cmd_eval(const std::string& params, const std::string& data_path,
             const std::string& model_path, const std::string& out) {
  const LoadedModel lm = load_model_file(model_path);
  const FullParamsd p = load_params(params, lm);
  const TrajectoryDataset test = load_data(data_path, lm);
  const double variance = qdd_variance(test);
  const double c1 = nmse(lm.model, p, test, variance);

  const int n = lm.model.dof();
  std::vector<double> sq(n, 0.0);
  std::ostringstream s;
  s << "t";
  for (int j = 0; j < n; ++j) s << ",err_q" << j;
  s << '\n';
  for (const auto& r : test.records) {
    const auto pred = predict_qddot<double>(lm.model, r.q, r.qd, r.a, p, r.length, r.velocity,
                                            r.moment_arm);
    s << sci(r.t);
    for (int j = 0; j < n; ++j) {
      const double e = pred[j] - r.qdd[j];
      sq[j] += e * e;
      s << ',' << sci(e);
    }
    s << '\n';
  }
  if (!out.empty()) write_file(out, s.str());

  std::cout << "records        " << test.size() << "\n"
            << "test C1        " << sci(c1) << "\n"
            << criteria_table(p, lm);
  for (int j = 0; j < n; ++j) {
    std::cout << "rms err q" << j << "     " << sci(std::sqrt(sq[j] / test.size())) << " rad/s^2\n";
  }
  if (!out.empty()) std::cout << "wrote          " << out << "\n";
  return std::isfinite(c1) ? 0 : kNumeric;
}

int cmd_basecoef(const std::string& params, const std::string& model_path, int samples,
                 std::uint64_t seed) {
  if (samples < 200) throw UsageError("--samples must be at least 200");
  const LoadedModel lm = load_model_file(model_path);
  const FullParamsd p = load_params(params, lm);
  const BaseParamMap map = base_parameters(lm.model, samples, seed);
  const auto errs = coefficient_error(p.bones, lm.ground_truth.bones, map);
  std::cout << coefficient_report(map, errs);
  const Criteria c = parameter_criteria(p, lm.ground_truth);
  double worst = 0.0;
  for (const auto& e : errs) {
    if (std::abs(e.truth) > 1e-6) worst = std::max(worst, e.error);
  }
  std::cout << "worst error (|beta| > 1e-6)  " << worst << " %\n"
            << "raw C3 " << sci(c.c3) << " %, C3m " << sci(c.c3m) << " %\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Musculoskeletal parameter identification"};
  app.require_subcommand(1);

  std::string model = std::string(MSM_DATA_DIR) + "/arm5dof.model";

  auto* gen = app.add_subcommand("gen-data", "Roll out the ground-truth model to a dataset");
  std::string gen_out, gen_split = "train";
  int gen_steps = 10000;
  double gen_dt = 0.002;
  std::uint64_t gen_seed = 1;
  std::size_t gen_preview = 200;
  gen->add_option("--model", model, "Model file")->capture_default_str();
  gen->add_option("--out", gen_out, "Dataset path (a CSV preview goes to <out>.csv)")->required();
  gen->add_option("--steps", gen_steps, "Number of records")->capture_default_str();
  gen->add_option("--dt", gen_dt, "Integration step, s")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Activation seed")->capture_default_str();
  gen->add_option("--split", gen_split, "train or test")->capture_default_str();
  gen->add_option("--preview-rows", gen_preview, "CSV preview rows, 0 for all")->capture_default_str();

  auto* ident = app.add_subcommand("identify", "Run one identification method");
  std::string id_method, id_data, id_out = "run", id_init = "sampled";
  std::uint64_t id_seed = 1;
  long id_iters = 10000;
  std::size_t id_batch = 1000;
  ident->add_option("--method", id_method, "M1..M5")->required();
  ident->add_option("--data", id_data, "Training dataset")->required();
  ident->add_option("--model", model, "Model file")->capture_default_str();
  ident->add_option("--seed", id_seed, "Seed for the initial guess and the annealer")->capture_default_str();
  ident->add_option("--iters", id_iters, "Iterations")->capture_default_str();
  ident->add_option("--batch-size", id_batch, "Records per batch")->capture_default_str();
  ident->add_option("--init", id_init, "sampled or truth")->capture_default_str();
  ident->add_option("--out", id_out, "Output directory")->capture_default_str();

  auto* cmp = app.add_subcommand("compare", "Run a multi-method campaign");
  std::string cmp_config;
  int cmp_threads = 0;
  cmp->add_option("--config", cmp_config, "Campaign file (msmcampaign v1)")->required();
  cmp->add_option("--threads", cmp_threads, "Worker threads; 0 uses MSM_THREADS or the CPU count")
      ->capture_default_str();

  auto* ev = app.add_subcommand("eval", "Evaluate parameters on a dataset");
  std::string ev_params, ev_data, ev_out;
  ev->add_option("--params", ev_params, "Run record JSON, or 'truth'")->required();
  ev->add_option("--data-test", ev_data, "Test dataset")->required();
  ev->add_option("--model", model, "Model file")->capture_default_str();
  ev->add_option("--out", ev_out, "Per-joint acceleration error CSV");

  auto* bc = app.add_subcommand("basecoef", "Base-coefficient report");
  std::string bc_params;
  int bc_samples = 500;
  std::uint64_t bc_seed = 1;
  bc->add_option("--params", bc_params, "Run record JSON, or 'truth'")->required();
  bc->add_option("--model", model, "Model file")->capture_default_str();
  bc->add_option("--samples", bc_samples, "Random states in the regressor stack")->capture_default_str();
  bc->add_option("--seed", bc_seed, "Sampling seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (*gen) return cmd_gen_data(model, gen_out, gen_steps, gen_dt, gen_seed, gen_split, gen_preview);
    if (*ident) {
      return cmd_identify(id_method, id_data, model, id_seed, id_iters, id_batch, id_init, id_out);
    }
    if (*cmp) return cmd_compare(cmp_config, cmp_threads);
    if (*ev) return cmd_eval(ev_params, ev_data, model, ev_out);
    if (*bc) return cmd_basecoef(bc_params, model, bc_samples, bc_seed);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kIo;
  } catch (const LogicError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}
