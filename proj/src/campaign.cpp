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

#include "msm/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "msm/error.hpp"

namespace msm {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kInf = std::numeric_limits<double>::infinity();

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double read_number(const json& j) { return j.is_null() ? kInf : j.get<double>(); }

json params_json(const FullParamsd& p) {
  return {{"muscles", p.muscles.size()}, {"bones", p.bones.size()}, {"values", flatten(p)}};
}

FullParamsd params_from(const json& j) {
  const auto values = j.at("values").get<std::vector<double>>();
  return unflatten(values, j.at("muscles").get<int>(), j.at("bones").get<int>());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::string record_path(const std::string& dir, Method m, std::uint64_t seed) {
  return dir + "/runs/" + method_name(m) + "_seed" + std::to_string(seed) + ".json";
}

bool same_setup(const RunRecord& r, const MethodConfig& c, std::uint64_t seed) {
  return r.method == c.method && r.subset == c.subset && r.seed == seed &&
         r.iterations == c.iterations && r.batch_size == c.batch_size &&
         r.learning_rate == c.learning_rate &&
         r.anneal.initial_temperature == c.anneal.initial_temperature &&
         r.anneal.restart_ratio == c.anneal.restart_ratio && r.anneal.visit == c.anneal.visit &&
         r.anneal.accept == c.anneal.accept;
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

std::string fmt(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

QuartileCurve quartiles(const std::vector<std::vector<double>>& columns,
                        const std::vector<long>& iteration) {
  QuartileCurve c;
  c.iteration = iteration;
  for (const auto& col : columns) {
    c.q1.push_back(quantile(col, 0.25));
    c.median.push_back(quantile(col, 0.5));
    c.q3.push_back(quantile(col, 0.75));
  }
  return c;
}

}  // namespace

std::string run_record_json(const RunRecord& r) {
  json j;
  j["format"] = "msmrun v1";
  j["method"] = method_name(r.method);
  j["subset"] = subset_name(r.subset);
  j["seed"] = r.seed;
  j["iterations"] = r.iterations;
  j["batch_size"] = r.batch_size;
  j["learning_rate"] = r.learning_rate;
  j["anneal"] = {{"initial_temperature", r.anneal.initial_temperature},
                 {"restart_ratio", r.anneal.restart_ratio},
                 {"visit", r.anneal.visit},
                 {"accept", r.anneal.accept}};
  j["bones"] = r.bones_frozen ? "frozen (perturbed)" : "learned";
  json c1 = json::array();
  for (double v : r.c1) c1.push_back(number(v));
  j["c1"] = std::move(c1);
  j["c2_iteration"] = r.c2_iteration;
  json c2 = json::array();
  for (double v : r.c2) c2.push_back(number(v));
  j["c2"] = std::move(c2);
  j["iteration_seconds"] = r.iteration_seconds;
  j["initial"] = params_json(r.initial);
  j["final_params"] = params_json(r.final_params);
  j["final_c1"] = number(r.final_c1);
  j["final_criteria"] = {{"c2", number(r.final_criteria.c2)},
                         {"c3", number(r.final_criteria.c3)},
                         {"c3m", number(r.final_criteria.c3m)}};
  j["loss_evaluations"] = r.loss_evaluations;
  j["gradient_evaluations"] = r.gradient_evaluations;
  j["local_searches"] = r.local_searches;
  j["failed"] = r.failed;
  j["failure"] = r.failure;
  j["total_seconds"] = r.total_seconds;
  return j.dump(1) + "\n";
}

RunRecord parse_run_record(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != "msmrun v1") throw FormatError("run record: bad format tag");
    RunRecord r;
    r.method = parse_method(j.at("method").get<std::string>());
    r.subset = parse_subset(j.at("subset").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.iterations = j.at("iterations").get<long>();
    r.batch_size = j.at("batch_size").get<std::size_t>();
    r.learning_rate = j.at("learning_rate").get<double>();
    const json& a = j.at("anneal");
    r.anneal = {a.at("initial_temperature").get<double>(), a.at("restart_ratio").get<double>(),
                a.at("visit").get<double>(), a.at("accept").get<double>()};
    r.bones_frozen = j.at("bones").get<std::string>() != "learned";
    for (const json& v : j.at("c1")) r.c1.push_back(read_number(v));
    r.c2_iteration = j.at("c2_iteration").get<std::vector<long>>();
    for (const json& v : j.at("c2")) r.c2.push_back(read_number(v));
    r.iteration_seconds = j.at("iteration_seconds").get<std::vector<double>>();
    r.initial = params_from(j.at("initial"));
    r.final_params = params_from(j.at("final_params"));
    r.final_c1 = read_number(j.at("final_c1"));
    const json& c = j.at("final_criteria");
    r.final_criteria = {read_number(c.at("c2")), read_number(c.at("c3")), read_number(c.at("c3m"))};
    r.loss_evaluations = j.at("loss_evaluations").get<long>();
    r.gradient_evaluations = j.at("gradient_evaluations").get<long>();
    r.local_searches = j.at("local_searches").get<long>();
    r.failed = j.at("failed").get<bool>();
    r.failure = j.at("failure").get<std::string>();
    r.total_seconds = j.at("total_seconds").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("run record: ") + e.what());
  }
}

void save_run_record(const std::string& path, const RunRecord& r) {
  write_text(path, run_record_json(r));
}

RunRecord load_run_record(const std::string& path) { return parse_run_record(slurp(path)); }

CampaignConfig parse_campaign(const std::string& text, const std::string& base_dir) {
  const std::size_t eol = text.find('\n');
  std::string header = text.substr(0, eol);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (header != "msmcampaign v1") throw FormatError("campaign: expected 'msmcampaign v1' header");
  YAML::Node root;
  try {
    root = YAML::Load(eol == std::string::npos ? "" : text.substr(eol + 1));
  } catch (const YAML::Exception& e) {
    throw FormatError(std::string("campaign: ") + e.what());
  }
  if (!root.IsMap()) throw FormatError("campaign: body must be a mapping");
  try {
    CampaignConfig c;
    if (!root["model"]) throw FormatError("campaign: missing 'model'");
    c.model_path = resolve(base_dir, root["model"].as<std::string>());
    if (root["train"]) c.train_path = resolve(base_dir, root["train"].as<std::string>());
    if (root["train_seed"]) c.train_seed = root["train_seed"].as<std::uint64_t>();
    if (root["steps"]) c.steps = root["steps"].as<int>();
    if (!root["methods"] || !root["methods"].IsSequence()) {
      throw FormatError("campaign: 'methods' must be a list");
    }
    for (const auto& m : root["methods"]) c.methods.push_back(parse_method(m.as<std::string>()));
    const int runs = root["runs"] ? root["runs"].as<int>() : 1;
    const std::uint64_t first = root["first_seed"] ? root["first_seed"].as<std::uint64_t>() : 1;
    if (runs < 1) throw FormatError("campaign: 'runs' must be positive");
    for (int k = 0; k < runs; ++k) c.seeds.push_back(first + k);
    if (root["iterations"]) c.iterations = root["iterations"].as<long>();
    if (root["batch_size"]) c.batch_size = root["batch_size"].as<std::size_t>();
    if (root["subset"]) c.joint_subset = parse_subset(root["subset"].as<std::string>());
    c.output_dir = resolve(base_dir, root["output"] ? root["output"].as<std::string>() : "campaign");
    if (c.iterations < 1 || c.batch_size < 1 || c.steps < 1) {
      throw FormatError("campaign: iterations, batch_size and steps must be positive");
    }
    if (c.methods.empty()) throw FormatError("campaign: no methods");
    return c;
  } catch (const YAML::Exception& e) {
    throw FormatError(std::string("campaign: ") + e.what());
  }
}

CampaignConfig load_campaign_file(const std::string& path) {
  return parse_campaign(slurp(path), fs::path(path).parent_path().string());
}

MethodConfig method_config(const CampaignConfig& c, Method m) {
  MethodConfig mc = default_config(m, c.iterations);
  mc.batch_size = c.batch_size;
  if (c.joint_subset && mc.subset != Subset::kMuscleOnly) mc.subset = *c.joint_subset;
  return mc;
}

int default_threads() {
  if (const char* s = std::getenv("MSM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(s, &end, 10);
    if (end != s && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

CampaignResult run_campaign(const CampaignConfig& cfg, const RunInputs& inputs, int threads,
                            const std::function<void(const RunRecord&, bool)>& on_done) {
  if (cfg.methods.empty() || cfg.seeds.empty()) throw LogicError("run_campaign: nothing to run");
  const bool persist = !cfg.output_dir.empty();
  if (persist) fs::create_directories(cfg.output_dir + "/runs");

  struct Job {
    Method method;
    std::size_t slot;
  };
  std::vector<Job> jobs;
  CampaignResult res;
  res.methods = cfg.methods;
  for (Method m : cfg.methods) {
    res.runs[m].resize(cfg.seeds.size());
    for (std::size_t k = 0; k < cfg.seeds.size(); ++k) jobs.push_back({m, k});
  }

  std::atomic<std::size_t> next{0};
  std::atomic<long> resumed{0};
  std::mutex mu;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        const Job job = jobs[j];
        const std::uint64_t seed = cfg.seeds[job.slot];
        const MethodConfig mc = method_config(cfg, job.method);
        const std::string path = persist ? record_path(cfg.output_dir, job.method, seed) : "";
        RunRecord rec;
        bool reused = false;
        if (persist && fs::exists(path)) {
          try {
            rec = load_run_record(path);
            reused = same_setup(rec, mc, seed);
          } catch (const FormatError&) {
            reused = false;  // partial write from an interrupted campaign
          }
        }
        if (!reused) {
          rec = run_method(mc, inputs, seed);
          if (persist) {
            save_run_record(path + ".tmp", rec);
            fs::rename(path + ".tmp", path);
          }
        } else {
          ++resumed;
        }
        std::lock_guard<std::mutex> lock(mu);
        res.runs[job.method][job.slot] = std::move(rec);
        if (on_done) on_done(res.runs[job.method][job.slot], reused);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
        next = jobs.size();
        return;
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  res.resumed = resumed;
  return res;
}

double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw LogicError("quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw LogicError("quantile: p outside [0, 1]");
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double w = pos - static_cast<double>(lo);
  if (w == 0.0 || v[lo] == v[hi]) return v[lo];
  return v[lo] + w * (v[hi] - v[lo]);
}

QuartileCurve c1_curve(const std::vector<RunRecord>& runs) {
  if (runs.empty()) throw LogicError("c1_curve: no runs");
  long len = 0;
  for (const auto& r : runs) len = std::max(len, r.iterations);
  std::vector<std::vector<double>> cols(len);
  std::vector<long> it(len);
  for (long i = 0; i < len; ++i) {
    it[i] = i;
    for (const auto& r : runs) {
      const bool have = static_cast<std::size_t>(i) < r.c1.size();
      cols[i].push_back(have && std::isfinite(r.c1[i]) ? r.c1[i] : kInf);
    }
  }
  return quartiles(cols, it);
}

QuartileCurve c2_curve(const std::vector<RunRecord>& runs) {
  if (runs.empty()) throw LogicError("c2_curve: no runs");
  const RunRecord* longest = &runs.front();
  for (const auto& r : runs) {
    if (r.c2_iteration.size() > longest->c2_iteration.size()) longest = &r;
  }
  const std::vector<long>& it = longest->c2_iteration;
  std::vector<std::vector<double>> cols(it.size());
  for (std::size_t i = 0; i < it.size(); ++i) {
    for (const auto& r : runs) cols[i].push_back(i < r.c2.size() && std::isfinite(r.c2[i]) ? r.c2[i] : kInf);
  }
  return quartiles(cols, it);
}

void write_campaign_outputs(const CampaignResult& result, const std::string& dir) {
  fs::create_directories(dir);
  for (Method m : result.methods) {
    const auto& runs = result.runs.at(m);
    const QuartileCurve c1 = c1_curve(runs);
    const QuartileCurve c2 = c2_curve(runs);
    std::ostringstream s;
    s << "iteration,c1_q1,c1_median,c1_q3,c2_q1,c2_median,c2_q3\n";
    std::size_t k = 0;
    for (std::size_t i = 0; i < c1.iteration.size(); ++i) {
      s << c1.iteration[i] << ',' << fmt(c1.q1[i]) << ',' << fmt(c1.median[i]) << ','
        << fmt(c1.q3[i]);
      if (k < c2.iteration.size() && c2.iteration[k] == c1.iteration[i]) {
        s << ',' << fmt(c2.q1[k]) << ',' << fmt(c2.median[k]) << ',' << fmt(c2.q3[k]);
        ++k;
      } else {
        s << ",,,";
      }
      s << '\n';
    }
    write_text(dir + "/curves_" + method_name(m) + ".csv", s.str());
  }
  std::ostringstream f;
  f << "method,seed,failed,final_c1,c2,c3,c3m,seconds\n";
  for (Method m : result.methods) {
    for (const auto& r : result.runs.at(m)) {
      f << method_name(m) << ',' << r.seed << ',' << (r.failed ? 1 : 0) << ',' << fmt(r.final_c1)
        << ',' << fmt(r.final_criteria.c2) << ',' << fmt(r.final_criteria.c3) << ','
        << fmt(r.final_criteria.c3m) << ',' << fmt(r.total_seconds) << '\n';
    }
  }
  write_text(dir + "/final.csv", f.str());
  write_text(dir + "/summary.txt", campaign_summary(result));
}

std::string campaign_summary(const CampaignResult& result) {
  std::ostringstream s;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-4s %5s %6s  %-38s  %-38s  %-38s\n", "", "runs", "failed",
                "final C1 (q1 / median / q3)", "C3 % (q1 / median / q3)",
                "C3m % (q1 / median / q3)");
  s << buf;
  for (Method m : result.methods) {
    const auto& runs = result.runs.at(m);
    std::vector<double> c1, c3, c3m;
    int failed = 0;
    for (const auto& r : runs) {
      failed += r.failed ? 1 : 0;
      c1.push_back(r.failed ? kInf : r.final_c1);
      c3.push_back(r.failed ? kInf : r.final_criteria.c3);
      c3m.push_back(r.failed ? kInf : r.final_criteria.c3m);
    }
    auto triple = [](const std::vector<double>& v) {
      return fmt(quantile(v, 0.25)) + " " + fmt(quantile(v, 0.5)) + " " + fmt(quantile(v, 0.75));
    };
    std::snprintf(buf, sizeof buf, "%-4s %5zu %6d  %-38s  %-38s  %-38s\n", method_name(m).c_str(),
                  runs.size(), failed, triple(c1).c_str(), triple(c3).c_str(), triple(c3m).c_str());
    s << buf;
  }
  return s.str();
}

}  // namespace msm
