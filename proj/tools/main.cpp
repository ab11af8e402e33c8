// Copyright 2026 The dpcpsf Authors
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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpcpsf/bench.hpp"
#include "dpcpsf/config.hpp"
#include "dpcpsf/dpc.hpp"
#include "dpcpsf/safeset.hpp"

namespace {

namespace fs = std::filesystem;
using namespace dpcpsf;

// Exit codes.
constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kConstraintViolated = 3;

config::Config load(const std::string& path) {
  return path.empty() ? config::default_config() : config::load_config(path);
}

int cmd_train(const std::string& cfg_path, std::optional<std::uint64_t> seed,
              const std::string& out, bool quiet) {
  config::Config cfg = load(cfg_path);
  if (seed) cfg.train.seed = *seed;
  fs::create_directories(out);
  std::ofstream log(fs::path(out) / "train_log.csv");
  log << "batch,mean_loss,grad_norm,learning_rate,retries\n";
  const auto t0 = std::chrono::steady_clock::now();
  const dpc::TrainResult r = dpc::train(cfg.train, [&](const dpc::BatchStats& s) {
    log << s.batch << ',' << s.mean_loss << ',' << s.grad_norm << ',' << s.learning_rate << ','
        << s.retries << '\n';
    if (!quiet && s.batch % 50 == 0) {
      std::cerr << "batch " << s.batch << " loss " << s.mean_loss << '\n';
    }
  });
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.policy.save_json((fs::path(out) / "policy.json").string());
  r.store.write_csv((fs::path(out) / "rollouts.csv").string());
  const auto& b = r.store.batches;
  std::cout << "batches " << b.size() << "  first loss " << b.front().mean_loss
            << "  final loss " << b.back().mean_loss << "  time " << secs << " s\n"
            << "wrote " << out << "/policy.json and " << out << "/rollouts.csv\n";
  return kOk;
}

int cmd_safeset_build(const std::string& cfg_path, const std::string& store_path,
                      const std::string& out) {
  const config::Config cfg = load(cfg_path);
  const safeset::Constraints c = safeset::constraints_of(cfg.train.loss);
  safeset::FilterResult f;
  {
    const dpc::RolloutStore store = dpc::RolloutStore::read_csv(store_path);
    f = safeset::filter_rollouts(store, c, cfg.eps_conv);
  }
  std::cout << "kept " << f.kept << "/" << f.total << " rollouts, " << f.points.size()
            << " states\n";
  const safeset::SafeSet ss = safeset::build_safe_set(f.points, c, cfg.safeset);
  ss.save(out);
  for (int i = 0; i < ss.num_sets(); ++i) {
    std::cout << "set " << i << ": " << ss.set(i).size() << " points, diameter "
              << ss.set(i).diameter << '\n';
  }
  std::cout << "wrote " << out << '\n';
  return kOk;
}

struct RunArgs {
  std::string task = "nav";
  std::string controller = "dpc";
  std::string config;
  std::uint64_t seed = 1;
  std::string out = "runs";
  std::string policy = "artifacts/policy.json";
  std::string safe_set = "artifacts/safeset";
  double duration = 0.0;
  double alpha = NAN;
  double margin = NAN;
  int horizon_n = 0;
  double horizon_tf = NAN;
};

int cmd_bench_run(const RunArgs& a) {
  config::Config cfg = load(a.config);
  const bench::Task task = bench::parse_task(a.task);
  const bench::ControllerKind kind = bench::parse_controller(a.controller);
  bench::RunConfig& rc = cfg.run;
  if (!std::isnan(a.alpha)) rc.psf.default_alpha = a.alpha;
  if (!std::isnan(a.margin)) rc.psf.default_margin = a.margin;
  if (a.horizon_n > 0 || !std::isnan(a.horizon_tf)) {
    // Applies to the horizon of the selected controller.
    if (kind == bench::ControllerKind::kDpcPsf) {
      const int n = a.horizon_n > 0 ? a.horizon_n : rc.psf.schedule.steps;
      const double tf = std::isnan(a.horizon_tf) ? rc.psf.schedule.horizon : a.horizon_tf;
      rc.psf.schedule = psf::make_schedule(rc.psf.schedule.first_step, tf, n);
    } else {
      mpc::MPCConfig& m = kind == bench::ControllerKind::kNmpc ? rc.nmpc : rc.vtnmpc;
      if (a.horizon_n > 0) m.steps = a.horizon_n;
      if (!std::isnan(a.horizon_tf)) m.horizon = a.horizon_tf;
    }
  }
  bench::Scenario sc = bench::make_scenario(task, rc.model);
  if (a.duration > 0.0) sc.duration = a.duration;

  std::optional<dpc::Policy> policy;
  std::optional<safeset::SafeSet> ss;
  bench::Artifacts art;
  if (kind == bench::ControllerKind::kDpc || kind == bench::ControllerKind::kDpcPsf) {
    policy = dpc::Policy::load_json(a.policy);
    art.policy = &*policy;
  }
  if (kind == bench::ControllerKind::kDpcPsf) {
    ss = safeset::SafeSet::load(a.safe_set);
    art.safe_set = &*ss;
  }

  bench::RunMetrics m = bench::run_scenario(sc, kind, rc, art, a.seed);
  fs::create_directories(a.out);
  const std::string stem =
      std::string(bench::task_name(task)) + "_" + bench::controller_name(kind) + "_" +
      std::to_string(a.seed);
  m.csv_path = stem + ".csv";
  bench::write_run_csv(m, (fs::path(a.out) / m.csv_path).string());
  bench::write_metrics_json(m, (fs::path(a.out) / (stem + ".metrics.json")).string());
  std::cout << bench::format_table({m});
  const bool violated = std::isinf(m.cost) || m.min_clearance < 0.0 || m.diverged;
  if (violated) {
    std::cerr << (m.diverged ? "run diverged" : "cylinder constraint violated") << '\n';
    return kConstraintViolated;
  }
  return kOk;
}

int cmd_bench_table(const std::string& in, const std::string& out) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(in)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > 13 &&
        name.compare(name.size() - 13, 13, ".metrics.json") == 0) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<bench::RunMetrics> runs;
  for (const auto& f : files) {
    bench::RunMetrics m = bench::read_metrics_json(f.string());
    const fs::path csv = f.parent_path() / m.csv_path;
    if (!m.csv_path.empty() && fs::exists(csv)) {
      // Only the plot columns are needed from the per-step log.
      std::ifstream s(csv);
      std::string line;
      std::getline(s, line);
      while (std::getline(s, line)) {
        std::vector<double> v;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) v.push_back(std::stod(cell));
        if (v.size() < 28) break;
        bench::StepLog r;
        r.t = v[0];
        for (int i = 0; i < 3; ++i) r.x[i] = v[1 + i];
        for (int i = 0; i < 3; ++i) r.ref[i] = v[22 + i];
        m.log.push_back(r);
      }
    }
    runs.push_back(std::move(m));
  }
  const std::string dir = out.empty() ? in : out;
  bench::emit_report(runs, dir);
  std::cout << bench::format_table(runs) << "wrote " << dir << "/table.csv and " << dir
            << "/table.txt (" << runs.size() << " runs)\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable predictive control with a predictive safety filter"};
  app.require_subcommand(1);
  int rc = kOk;

  std::string cfg_path;
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", cfg_path, "JSON config (defaults when omitted)")
        ->check(CLI::ExistingFile);
  };

  auto* train = app.add_subcommand("train", "Train the DPC policy on subsystem 1");
  std::string train_out = "artifacts";
  bool quiet = false;
  std::optional<std::uint64_t> train_seed;
  add_config(train);
  train->add_option("--seed", train_seed, "Override the training seed");
  train->add_option("--out", train_out, "Output directory")->capture_default_str();
  train->add_flag("--quiet", quiet, "No progress output");
  train->callback([&] { rc = cmd_train(cfg_path, train_seed, train_out, quiet); });

  auto* safeset_cmd = app.add_subcommand("safeset", "Safe-set construction");
  safeset_cmd->require_subcommand(1);
  auto* build = safeset_cmd->add_subcommand("build", "Filter rollouts and build the safe set");
  std::string store_path = "artifacts/rollouts.csv";
  std::string ss_out = "artifacts/safeset";
  add_config(build);
  build->add_option("--rollouts", store_path, "Rollout CSV written by train")
      ->capture_default_str()
      ->check(CLI::ExistingFile);
  build->add_option("--out", ss_out, "Output directory")->capture_default_str();
  build->callback([&] { rc = cmd_safeset_build(cfg_path, store_path, ss_out); });

  auto* bench_cmd = app.add_subcommand("bench", "Closed-loop benchmark");
  bench_cmd->require_subcommand(1);
  auto* run = bench_cmd->add_subcommand("run", "Run one task with one controller");
  RunArgs ra;
  run->add_option("--task", ra.task, "nav, traj or adv")
      ->capture_default_str()
      ->check(CLI::IsMember({"nav", "traj", "adv"}));
  run->add_option("--controller", ra.controller, "dpc, dpc-psf, vtnmpc or nmpc")
      ->capture_default_str()
      ->check(CLI::IsMember({"dpc", "dpc-psf", "vtnmpc", "nmpc"}));
  run->add_option("--config", ra.config, "JSON config (defaults when omitted)")
      ->check(CLI::ExistingFile);
  run->add_option("--seed", ra.seed, "Plant perturbation seed")->capture_default_str();
  run->add_option("--out", ra.out, "Output directory")->capture_default_str();
  run->add_option("--policy", ra.policy, "Policy JSON")->capture_default_str();
  run->add_option("--safe-set", ra.safe_set, "Safe-set directory")->capture_default_str();
  run->add_option("--duration", ra.duration, "Override the task duration, s");
  run->add_option("--alpha", ra.alpha, "Filter penalty weight");
  run->add_option("--margin", ra.margin, "Filter softplus margin");
  run->add_option("--horizon-N", ra.horizon_n, "Horizon steps of the selected controller")
      ->check(CLI::PositiveNumber);
  run->add_option("--horizon-Tf", ra.horizon_tf, "Horizon length of the selected controller, s")
      ->check(CLI::PositiveNumber);
  run->callback([&] { rc = cmd_bench_run(ra); });

  auto* table = bench_cmd->add_subcommand("table", "Collect run metrics into a table");
  std::string table_in;
  std::string table_out;
  table->add_option("--in", table_in, "Directory searched for *.metrics.json")
      ->required()
      ->check(CLI::ExistingDirectory);
  table->add_option("--out", table_out, "Report directory (defaults to --in)");
  table->callback([&] { rc = cmd_bench_table(table_in, table_out); });

  auto* cfg_cmd = app.add_subcommand("config", "Print the effective config");
  add_config(cfg_cmd);
  cfg_cmd->callback([&] { std::cout << config::dump_config(load(cfg_path)); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
  return rc;
}
