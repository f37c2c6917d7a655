// Copyright 2026 The samarl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "CLI11.hpp"
#include "samarl/check.hpp"
#include "samarl/trainers.hpp"
#include "samarl/trust_region.hpp"
#include "samarl/verify.hpp"

namespace fs = std::filesystem;

namespace {

nlohmann::json ReadJsonFile(const std::string& path) {
  std::ifstream f(path);
  SAMARL_CHECK_MSG(f.good(), "cannot open " << path);
  nlohmann::json j;
  f >> j;
  return j;
}

// Relative output paths land under SAMARL_OUT_ROOT when set, so batch
// scripts can redirect every artifact with one variable.
std::string ResolveOut(const std::string& out) {
  if (out.empty() || fs::path(out).is_absolute()) return out;
  const char* root = std::getenv("SAMARL_OUT_ROOT");
  if (root == nullptr || *root == '\0') return out;
  return (fs::path(root) / out).string();
}

void WriteTextFile(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(path);
  SAMARL_CHECK_MSG(f.good(), "cannot write " << path);
  f << text;
}

// ---------------------------------------------------------------------------
// train

int RunOneTraining(samarl::TrainingConfig config, const std::string& out) {
  const samarl::RunArtifacts art = samarl::RunTraining(config, out);
  nlohmann::json summary = {{"out_dir", art.out_dir},
                            {"manifest", art.manifest_path},
                            {"log", art.log_path},
                            {"status", art.status_path},
                            {"checkpoints", art.checkpoint_paths.size()},
                            {"aborted", art.any_aborted}};
  std::cout << summary.dump(2) << std::endl;
  if (art.any_aborted) {
    std::cerr << "train: run aborted iterations; see " << art.log_path
              << std::endl;
    return 1;
  }
  return 0;
}

// One process per seed, at most `jobs` alive at a time. Children share
// nothing; each writes its own out directory.
int RunSeedFanout(const std::string& config_path,
                  const std::vector<std::uint64_t>& seeds,
                  const std::string& out_base, int jobs) {
  const std::string exe = fs::read_symlink("/proc/self/exe").string();
  const std::string abs_base = fs::absolute(out_base).string();
  std::vector<pid_t> running;
  std::size_t next = 0;
  int failures = 0;
  nlohmann::json runs = nlohmann::json::array();
  while (next < seeds.size() || !running.empty()) {
    while (static_cast<int>(running.size()) < jobs && next < seeds.size()) {
      const std::uint64_t seed = seeds[next];
      const std::string child_out =
          (fs::path(abs_base) / ("seed_" + std::to_string(seed))).string();
      runs.push_back({{"seed", seed}, {"out_dir", child_out}});
      std::vector<std::string> args = {exe,
                                       "train",
                                       "--config",
                                       config_path,
                                       "--seed",
                                       std::to_string(seed),
                                       "--out",
                                       child_out};
      const pid_t pid = fork();
      SAMARL_CHECK_MSG(pid >= 0, "fork failed");
      if (pid == 0) {
        std::vector<char*> argv;
        for (std::string& a : args) argv.push_back(a.data());
        argv.push_back(nullptr);
        execv(exe.c_str(), argv.data());
        _exit(127);
      }
      running.push_back(pid);
      ++next;
    }
    int status = 0;
    const pid_t done = waitpid(-1, &status, 0);
    if (done <= 0) continue;
    running.erase(std::remove(running.begin(), running.end(), done),
                  running.end());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) ++failures;
  }
  std::cout << nlohmann::json({{"runs", runs}, {"failed_runs", failures}})
                   .dump(2)
            << std::endl;
  return failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// plot

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

struct LogTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

LogTable ReadLogCsv(const std::string& path) {
  std::ifstream f(path);
  SAMARL_CHECK_MSG(f.good(), "cannot open " << path);
  LogTable t;
  std::string line;
  SAMARL_CHECK_MSG(static_cast<bool>(std::getline(f, line)),
                   path << ": empty file, expected a CSV header");
  t.header = SplitCsv(line);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = SplitCsv(line);
    SAMARL_CHECK_MSG(cells.size() == t.header.size(),
                     path << ": row with " << cells.size()
                          << " cells under a " << t.header.size()
                          << " column header");
    t.rows.push_back(cells);
  }
  return t;
}

int ColumnIndex(const LogTable& t, const std::string& name) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  return it == t.header.end()
             ? -1
             : static_cast<int>(it - t.header.begin());
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                    "#9467bd", "#ff7f0e", "#8c564b"};

std::string CurveSvg(const std::string& title, const std::string& y_label,
                     const std::vector<Series>& series,
                     std::optional<double> bound) {
  const double width = 860, height = 520;
  const double ml = 80, mr = 200, mt = 46, mb = 56;
  const double pw = width - ml - mr, ph = height - mt - mb;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const Series& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (bound) {
    ymin = std::min(ymin, *bound);
    ymax = std::max(ymax, *bound);
  }
  if (!std::isfinite(xmin)) {
    xmin = 0.0;
    xmax = 1.0;
    ymin = 0.0;
    ymax = 1.0;
  }
  if (xmax - xmin < 1e-12) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  const double ypad = std::max(0.05 * (ymax - ymin), 1e-9);
  ymin -= ypad;
  ymax += ypad;
  auto px = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double v) {
    return mt + ph - (v - ymin) / (ymax - ymin) * ph;
  };
  char buf[256];
  std::string svg;
  auto emit = [&](const char* fmt, auto... args) {
    std::snprintf(buf, sizeof(buf), fmt, args...);
    svg += buf;
  };
  emit("<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 %.0f %.0f\" "
       "font-family=\"sans-serif\" font-size=\"13\">\n",
       width, height);
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  emit("<text x=\"%.0f\" y=\"24\" text-anchor=\"middle\" "
       "font-size=\"17\">%s</text>\n",
       ml + pw / 2, title.c_str());
  // Frame and ticks.
  emit("<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" "
       "fill=\"none\" stroke=\"#444\"/>\n",
       ml, mt, pw, ph);
  for (int i = 0; i <= 5; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 5.0;
    const double yv = ymin + (ymax - ymin) * i / 5.0;
    emit("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
         "stroke=\"#ddd\"/>\n",
         px(xv), mt, px(xv), mt + ph);
    emit("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
         "stroke=\"#ddd\"/>\n",
         ml, py(yv), ml + pw, py(yv));
    emit("<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%g</text>\n",
         px(xv), mt + ph + 18.0, xv);
    emit("<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%g</text>\n",
         ml - 6.0, py(yv) + 4.0, yv);
  }
  emit("<text x=\"%.0f\" y=\"%.0f\" text-anchor=\"middle\">iteration"
       "</text>\n",
       ml + pw / 2, height - 12.0);
  emit("<text x=\"18\" y=\"%.0f\" text-anchor=\"middle\" "
       "transform=\"rotate(-90 18 %.0f)\">%s</text>\n",
       mt + ph / 2, mt + ph / 2, y_label.c_str());
  if (bound) {
    // id lets tooling locate the budget line and check its coordinate.
    emit("<line id=\"bound\" x1=\"%.1f\" y1=\"%.2f\" x2=\"%.1f\" "
         "y2=\"%.2f\" stroke=\"#000\" stroke-dasharray=\"7 4\"/>\n",
         ml, py(*bound), ml + pw, py(*bound));
    emit("<text x=\"%.1f\" y=\"%.2f\" font-size=\"12\">bound=%g</text>\n",
         ml + 4.0, py(*bound) - 4.0, *bound);
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* color = kPalette[k % 6];
    std::string points;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(s.x[i]), py(s.y[i]));
      points += buf;
    }
    if (s.x.size() > 1)
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"1.6\" points=\"" + points + "\"/>\n";
    if (s.x.size() <= 400)
      for (std::size_t i = 0; i < s.x.size(); ++i)
        emit("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.2\" fill=\"%s\"/>\n",
             px(s.x[i]), py(s.y[i]), color);
    const double ly = mt + 16.0 + 20.0 * static_cast<double>(k);
    emit("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
         "stroke=\"%s\" stroke-width=\"2.5\"/>\n",
         ml + pw + 12.0, ly, ml + pw + 34.0, ly, color);
    emit("<text x=\"%.1f\" y=\"%.1f\">%s</text>\n", ml + pw + 40.0,
         ly + 4.0, s.label.c_str());
  }
  svg += "</svg>\n";
  return svg;
}

// Run logs are all named log.csv, so the run directory is the only
// distinguishing name; anything else is labeled by its own stem.
std::string RunLabel(const std::string& path) {
  const fs::path p(path);
  const std::string parent = p.parent_path().filename().string();
  if (p.filename() == "log.csv" && !parent.empty()) return parent;
  return p.stem().string();
}

int CmdPlot(const std::vector<std::string>& inputs, const std::string& out,
            const std::string& prefix, double bound) {
  std::vector<LogTable> tables;
  for (const std::string& p : inputs) tables.push_back(ReadLogCsv(p));
  for (std::size_t i = 1; i < tables.size(); ++i)
    SAMARL_CHECK_MSG(tables[i].header == tables[0].header,
                     inputs[i] << ": schema differs from " << inputs[0]
                               << "; refusing to overlay");
  const int iter_col = ColumnIndex(tables[0], "iteration");
  const int reward_col = ColumnIndex(tables[0], "reward_mean");
  SAMARL_CHECK_MSG(
      iter_col >= 0 && reward_col >= 0,
      inputs[0] << ": missing iteration or reward_mean column");
  std::vector<int> cost_cols;
  for (std::size_t c = 0; c < tables[0].header.size(); ++c)
    if (tables[0].header[c].rfind("cost_", 0) == 0)
      cost_cols.push_back(static_cast<int>(c));
  SAMARL_CHECK_MSG(!cost_cols.empty(),
                   inputs[0] << ": no cost_* columns to plot");

  std::vector<Series> reward, cost;
  for (std::size_t t = 0; t < tables.size(); ++t) {
    Series r, c;
    r.label = c.label = RunLabel(inputs[t]);
    for (const auto& row : tables[t].rows) {
      const double it = std::strtod(row[iter_col].c_str(), nullptr);
      r.x.push_back(it);
      r.y.push_back(std::strtod(row[reward_col].c_str(), nullptr));
      double sum = 0.0;
      for (const int cc : cost_cols)
        sum += std::strtod(row[cc].c_str(), nullptr);
      c.x.push_back(it);
      c.y.push_back(sum / static_cast<double>(cost_cols.size()));
    }
    reward.push_back(std::move(r));
    cost.push_back(std::move(c));
  }
  const fs::path dir(out.empty() ? "." : out);
  const std::string reward_path = (dir / (prefix + "_reward.svg")).string();
  const std::string cost_path = (dir / (prefix + "_cost.svg")).string();
  WriteTextFile(reward_path,
                CurveSvg("Training reward", "mean episode reward", reward,
                         std::nullopt));
  WriteTextFile(cost_path, CurveSvg("Training cost", "mean episode cost",
                                    cost, bound));
  std::cout << nlohmann::json({{"reward", reward_path}, {"cost", cost_path}})
                   .dump(2)
            << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------
// solve-lqclp

int CmdSolveLqclp(const std::string& in_path, const std::string& out_path) {
  const nlohmann::json j = ReadJsonFile(in_path);
  const auto h_rows = j.at("h").get<std::vector<std::vector<double>>>();
  const int n = static_cast<int>(h_rows.size());
  Eigen::MatrixXd h(n, n);
  for (int r = 0; r < n; ++r) {
    SAMARL_CHECK_MSG(static_cast<int>(h_rows[r].size()) == n,
                     "h must be square");
    for (int c = 0; c < n; ++c) h(r, c) = h_rows[r][c];
  }
  const auto g_vec = j.at("g").get<std::vector<double>>();
  SAMARL_CHECK_MSG(static_cast<int>(g_vec.size()) == n,
                   "g length must match h");
  samarl::LqclpProblem p;
  p.g = Eigen::Map<const Eigen::VectorXd>(g_vec.data(), n);
  // Accept a single constraint as a flat vector or several as rows.
  std::vector<std::vector<double>> b_rows;
  if (j.at("b").empty() || j.at("b")[0].is_array())
    b_rows = j.at("b").get<std::vector<std::vector<double>>>();
  else
    b_rows = {j.at("b").get<std::vector<double>>()};
  for (const auto& row : b_rows) {
    SAMARL_CHECK_MSG(static_cast<int>(row.size()) == n,
                     "b row length must match h");
    p.b.push_back(Eigen::Map<const Eigen::VectorXd>(row.data(), n));
  }
  p.d = j.at("d").is_array() ? j.at("d").get<std::vector<double>>()
                             : std::vector<double>{j.at("d").get<double>()};
  SAMARL_CHECK_MSG(p.d.size() == p.b.size(),
                   "d must have one offset per constraint row");
  p.delta = j.value("delta", 0.0065);
  p.cg_iters = j.value("cg_iters", 200);
  p.cg_tol = j.value("cg_tol", 1e-12);
  p.enable_multi = j.value("enable_multi", p.b.size() > 1);
  p.hvp = [&h](const Eigen::VectorXd& v) { return (h * v).eval(); };

  const samarl::LqclpSolution sol = samarl::SolveLqclp(p);
  nlohmann::json out = {
      {"feasible", sol.dual.feasible},
      {"lambda", sol.dual.lambda},
      {"nu", std::vector<double>(sol.dual.nu.data(),
                                 sol.dual.nu.data() + sol.dual.nu.size())},
      {"dual_value", sol.dual.dual_value},
      {"ball_inactive", sol.dual.ball_inactive},
      {"cg_converged", sol.cg_converged}};
  if (sol.dual.feasible) {
    const Eigen::VectorXd x = samarl::PrimalStep(sol);
    out["x"] = std::vector<double>(x.data(), x.data() + x.size());
    out["objective"] = p.g.dot(x);
    out["kl_quadratic"] = 0.5 * x.dot(h * x);
  }
  const std::string text = out.dump(2) + "\n";
  if (out_path.empty())
    std::cout << text;
  else
    WriteTextFile(out_path, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe multi-agent reinforcement learning toolkit"};
  app.set_version_flag("--version", samarl::SamarlVersion());
  app.require_subcommand(1);

  // train
  std::string train_config, train_out = "run";
  std::optional<std::uint64_t> train_seed;
  std::vector<std::uint64_t> train_seeds;
  int train_jobs = 1;
  CLI::App* train = app.add_subcommand(
      "train", "Run a training loop from a JSON config or run manifest");
  train->add_option("--config", train_config,
                    "Config or manifest JSON path")
      ->required();
  train->add_option("--seed", train_seed, "Override the config seed");
  train
      ->add_option("--seeds", train_seeds,
                   "Fan out one process per seed (comma separated)")
      ->delimiter(',');
  train->add_option("--jobs", train_jobs,
                    "Max concurrent seed processes");
  train->add_option("--out", train_out,
                    "Output directory (SAMARL_OUT_ROOT applies)");

  // eval
  std::string eval_config, eval_checkpoint, eval_out;
  std::optional<std::uint64_t> eval_seed;
  std::optional<int> eval_episodes;
  int eval_index = 0;
  CLI::App* eval = app.add_subcommand(
      "eval", "Evaluate a policy (fresh or from a checkpoint)");
  eval->add_option("--config", eval_config,
                   "Config or manifest JSON path")
      ->required();
  eval->add_option("--checkpoint", eval_checkpoint,
                   "Checkpoint JSON to restore before evaluating");
  eval->add_option("--seed", eval_seed, "Override the config seed");
  eval->add_option("--episodes", eval_episodes,
                   "Override eval episode count");
  eval->add_option("--index", eval_index,
                   "Evaluation stream index (default 0)");
  eval->add_option("--out", eval_out, "Write the result JSON here");

  // verify
  std::string verify_suite = "all", verify_out;
  samarl::VerifyOptions vopt;
  bool quick = false;
  CLI::App* verify = app.add_subcommand(
      "verify", "Run the machine-checked property suites");
  verify->add_option("--suite", verify_suite,
                     "all, decomposition, surrogate, iteration, lqclp, "
                     "gradients, or gae");
  verify->add_option("--seed", vopt.seed, "Suite instance seed");
  verify->add_option("--decomposition-games", vopt.decomposition_games,
                     "Games for the decomposition identity");
  verify->add_option("--surrogate-triples", vopt.surrogate_triples,
                     "Policy pairs for the surrogate bound");
  verify->add_option("--iteration-games", vopt.iteration_games,
                     "Games for safe iteration");
  verify->add_option("--iteration-sweeps", vopt.iteration_sweeps,
                     "Iterations per safe-iteration game");
  verify->add_option("--lqclp-instances", vopt.lqclp_instances,
                     "Trust-region subproblem instances");
  verify->add_option("--gradient-networks", vopt.gradient_networks,
                     "Networks for the finite-difference checks");
  verify->add_option("--gae-episodes", vopt.gae_episodes,
                     "Episodes for the estimator comparison");
  verify->add_flag("--inject-fault", vopt.inject_fault,
                   "Corrupt one decomposition check (negative control)");
  verify->add_flag("--quick", quick,
                   "Divide every instance count by ten");
  verify->add_option("--out", verify_out, "Write the report JSON here");

  // plot
  std::vector<std::string> plot_inputs;
  std::string plot_out, plot_prefix = "curves";
  double plot_bound = 1.0;
  CLI::App* plot = app.add_subcommand(
      "plot", "Render log CSVs to reward and cost SVG curves");
  plot->add_option("logs", plot_inputs, "Log CSV paths to overlay")
      ->required()
      ->expected(-1);
  plot->add_option("--out", plot_out, "Output directory");
  plot->add_option("--prefix", plot_prefix, "Output file prefix");
  plot->add_option("--bound", plot_bound,
                   "Cost budget line drawn on the cost plot");

  // solve-lqclp
  std::string lq_in, lq_out;
  CLI::App* lq = app.add_subcommand(
      "solve-lqclp", "Solve one trust-region subproblem from JSON");
  lq->add_option("--in", lq_in, "Instance JSON path")->required();
  lq->add_option("--out", lq_out, "Write the solution JSON here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      samarl::TrainingConfig config;
      try {
        config = samarl::TrainingConfigFromJson(ReadJsonFile(train_config));
      } catch (const std::exception& e) {
        std::cerr << "train: invalid config: " << e.what() << std::endl;
        return 2;
      }
      if (train_seed) config.seed = *train_seed;
      const std::string out = ResolveOut(train_out);
      if (train_seeds.size() > 1)
        return RunSeedFanout(train_config, train_seeds, out,
                             std::max(1, train_jobs));
      if (train_seeds.size() == 1) config.seed = train_seeds[0];
      return RunOneTraining(config, out);
    }
    if (*eval) {
      samarl::TrainingConfig config;
      try {
        config = samarl::TrainingConfigFromJson(ReadJsonFile(eval_config));
      } catch (const std::exception& e) {
        std::cerr << "eval: invalid config: " << e.what() << std::endl;
        return 2;
      }
      if (eval_seed) config.seed = *eval_seed;
      if (eval_episodes) config.eval_episodes = *eval_episodes;
      samarl::Trainer trainer(config);
      if (!eval_checkpoint.empty())
        trainer.LoadCheckpoint(ReadJsonFile(eval_checkpoint));
      const samarl::EvalResult r = trainer.Evaluate(eval_index);
      const nlohmann::json out = {{"reward", r.reward},
                                  {"disc_reward", r.disc_reward},
                                  {"cost", r.cost},
                                  {"disc_cost", r.disc_cost},
                                  {"episodes", config.eval_episodes}};
      const std::string text = out.dump(2) + "\n";
      if (eval_out.empty())
        std::cout << text;
      else
        WriteTextFile(ResolveOut(eval_out), text);
      return 0;
    }
    if (*verify) {
      if (quick) {
        vopt.decomposition_games =
            std::max(1, vopt.decomposition_games / 10);
        vopt.surrogate_triples = std::max(1, vopt.surrogate_triples / 10);
        vopt.iteration_games = std::max(1, vopt.iteration_games / 10);
        vopt.lqclp_instances = std::max(1, vopt.lqclp_instances / 10);
        vopt.gradient_networks = std::max(1, vopt.gradient_networks / 10);
        vopt.gae_episodes = std::max(1, vopt.gae_episodes / 10);
      }
      const std::vector<samarl::SuiteReport> reports =
          samarl::RunVerifySuites(verify_suite, vopt);
      const nlohmann::json report = samarl::VerifyReportJson(vopt, reports);
      if (verify_out.empty()) {
        std::cout << report.dump(2) << std::endl;
      } else {
        WriteTextFile(ResolveOut(verify_out), report.dump(2) + "\n");
        for (const samarl::SuiteReport& r : reports)
          std::cout << r.suite << ": "
                    << (r.Passed() ? "PASS" : "FAIL") << " ("
                    << r.instances << " instances, " << r.checks
                    << " checks)" << std::endl;
      }
      const bool ok = report.at("all_passed").get<bool>();
      if (!ok) std::cerr << "verify: property failures" << std::endl;
      return ok ? 0 : 1;
    }
    if (*plot)
      return CmdPlot(plot_inputs, ResolveOut(plot_out), plot_prefix,
                     plot_bound);
    if (*lq) return CmdSolveLqclp(lq_in, ResolveOut(lq_out));
  } catch (const std::exception& e) {
    std::cerr << app.get_subcommands().front()->get_name() << ": "
              << e.what() << std::endl;
    return 2;
  }
  return 0;
}
