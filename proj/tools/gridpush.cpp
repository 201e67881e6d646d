// Command-line front end: simulate, generate data, identify, check gradients,
// plan, run the full pipeline and compare optimizers.

#include "gridpush/gridpush.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace gp = gridpush;
namespace fs = std::filesystem;
using gp::Real;

namespace {

enum class Level { kError, kWarn, kInfo, kDebug };
Level g_level = Level::kInfo;

void log(Level l, const std::string& msg) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (l <= g_level) std::cerr << "[" << names[static_cast<int>(l)] << "] " << msg << "\n";
}

struct Globals {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string log_level = "info";
};

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / name;
}

std::vector<gp::PushAction> load_actions(const fs::path& path) {
  if (path.extension() == ".jsonl") {
    const auto rec = gp::io::read_trajectory(path);
    return rec.actions;
  }
  std::vector<gp::PushAction> out;
  const auto j = gp::io::read_json(path);
  GRIDPUSH_REQUIRE(j.is_array(), gp::InvalidArgument, path.string() + ": expected an array of actions");
  for (const auto& a : j) out.push_back(gp::io::action_from_json(a));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridpush: grid-based pushing with identified mass and friction"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Directory for outputs")->capture_default_str();
  app.add_option("--log-level", g.log_level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}))
      ->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Roll a body forward under a list of pushes");
  std::string sim_body, sim_actions, sim_start = "0,0,0";
  sim->add_option("--body", sim_body, "Body JSON with parameters")->required()->check(CLI::ExistingFile);
  sim->add_option("--actions", sim_actions, "Actions as a JSON array or a trajectory .jsonl")
      ->required()
      ->check(CLI::ExistingFile);
  sim->add_option("--start", sim_start, "Start pose x,y,theta")->capture_default_str();

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate exploration trajectories from a ground-truth body");
  std::string gen_truth;
  gp::Index gen_k = 10;
  gp::DataOptions gen_opt;
  gen->add_option("--truth", gen_truth, "Body JSON with true parameters")->required()->check(CLI::ExistingFile);
  gen->add_option("-k,--pushes", gen_k, "Number of trajectories")->capture_default_str();
  gen->add_option("--noise", gen_opt.noise_sigma, "Position noise std dev, meters")->capture_default_str();
  gen->add_option("--steps", gen_opt.steps, "Steps per trajectory")->capture_default_str();

  // identify
  auto* idn = app.add_subcommand("identify", "Fit per-cell mass and friction to recorded trajectories");
  std::string idn_body, idn_data;
  gp::IdentConfig idn_cfg;
  idn->add_option("--body", idn_body, "Body JSON (geometry; parameters ignored)")->required()->check(CLI::ExistingFile);
  idn->add_option("--data", idn_data, "Dataset directory of .jsonl files")->required()->check(CLI::ExistingDirectory);
  idn->add_option("--epochs", idn_cfg.epochs)->capture_default_str();
  idn->add_option("--lr", idn_cfg.learning_rate)->capture_default_str();
  idn->add_option("--m-max", idn_cfg.m_max)->capture_default_str();
  idn->add_option("--mu-max", idn_cfg.mu_max)->capture_default_str();
  idn->add_option("--budget", idn_cfg.simulation_budget, "Simulation budget, 0 for none")->capture_default_str();
  idn->add_option("--timeout", idn_cfg.timeout_seconds, "Wall-clock limit, seconds");
  idn->add_flag("--batch", idn_cfg.batch, "One update per epoch");
  std::string idn_out;
  idn->add_option("--out", idn_out, "Model file (default <out-dir>/model.json)");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Compare analytical gradients with central differences");
  std::string gc_body, gc_data;
  Real gc_h = 1e-6, gc_tol = 1e-3;
  gc->add_option("--body", gc_body, "Body JSON with the parameters to check at")->required()->check(CLI::ExistingFile);
  gc->add_option("--data", gc_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  gc->add_option("--step", gc_h, "Finite-difference step")->capture_default_str();
  gc->add_option("--tol", gc_tol, "Largest accepted relative error")->capture_default_str();

  // plan
  auto* pl = app.add_subcommand("plan", "Plan a push sequence toward a goal pose");
  std::string pl_body, pl_env, pl_start = "0,0,0", pl_goal, pl_region, pl_mode = "greedy", pl_out;
  gp::PlannerConfig pl_cfg;
  pl->add_option("--model,--body", pl_body, "Body or model JSON with parameters")->required()->check(CLI::ExistingFile);
  pl->add_option("--env", pl_env, "Environment JSON")->required()->check(CLI::ExistingFile);
  pl->add_option("--start", pl_start, "Start pose x,y,theta")->capture_default_str();
  auto* goal_opt = pl->add_option("--goal", pl_goal, "Goal pose x,y,theta");
  pl->add_option("--goal-region", pl_region, "JSON polygon; a stable goal is sampled inside it")
      ->check(CLI::ExistingFile)
      ->excludes(goal_opt);
  pl->add_option("--mode", pl_mode, "greedy or exhaustive")
      ->check(CLI::IsMember({"greedy", "exhaustive"}))
      ->capture_default_str();
  pl->add_option("--out", pl_out, "Plan file (default <out-dir>/plan.json)");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Explore, identify, sample a goal, plan and execute");
  std::string pipe_exp;
  bool pipe_timings = true;
  pipe->add_option("--experiment", pipe_exp, "Experiment JSON")->required()->check(CLI::ExistingFile);
  pipe->add_flag("!--no-timings", pipe_timings, "Leave wall-clock timings out of the report");

  // compare
  auto* cmp = app.add_subcommand("compare", "Held-out error against simulations for several optimizers");
  std::string cmp_truth;
  gp::Index cmp_k = 10;
  gp::CompareOptions cmp_opt;
  std::vector<std::string> cmp_methods{"analytical", "finite-diff", "random-search", "weighted-sampling"};
  cmp->add_option("--truth", cmp_truth, "Body JSON with true parameters")->required()->check(CLI::ExistingFile);
  cmp->add_option("-k,--pushes", cmp_k, "Trajectories, split half and half")->capture_default_str();
  cmp->add_option("--budget", cmp_opt.budget)->capture_default_str();
  cmp->add_option("--methods", cmp_methods)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  static const std::map<std::string, Level> levels{
      {"error", Level::kError}, {"warn", Level::kWarn}, {"info", Level::kInfo}, {"debug", Level::kDebug}};
  g_level = levels.at(g.log_level);

  try {
    if (*sim) {
      const auto body = gp::io::load_body(sim_body);
      const auto actions = load_actions(sim_actions);
      const auto rec = gp::record_trajectory(body, gp::rest_state(body, gp::io::parse_pose(sim_start)), actions);
      const auto path = out_path(g, "trajectory.jsonl");
      gp::io::write_text(path, gp::io::trajectory_jsonl(rec));
      log(Level::kInfo, "wrote " + std::to_string(rec.state_count()) + " states to " + path.string());
    } else if (*gen) {
      const auto truth = gp::io::load_body(gen_truth);
      const auto data = gp::generate_dataset(truth, gen_k, g.seed, gen_opt);
      const auto dir = out_path(g, "dataset");
      gp::io::write_dataset(dir, data);
      log(Level::kInfo, "wrote " + std::to_string(data.size()) + " trajectories to " + dir.string());
    } else if (*idn) {
      const auto geometry = gp::io::load_body(idn_body);
      const auto data = gp::io::load_dataset(idn_data);
      idn_cfg.seed = g.seed;
      const auto res = gp::identify(geometry, data, idn_cfg, [](int epoch, Real loss, const gp::GridBody&) {
        log(Level::kDebug, "epoch " + std::to_string(epoch) + " loss " + std::to_string(loss));
      });
      gp::io::write_json(idn_out.empty() ? out_path(g, "model.json") : fs::path(idn_out), gp::io::model_to_json(res));
      gp::io::write_text(out_path(g, "heatmap.csv"), gp::io::heatmap_csv(res.body));
      log(Level::kInfo, "best loss " + std::to_string(res.best_loss) + " after " + std::to_string(res.epochs_run) +
                            " epochs, " + std::to_string(res.simulations) + " simulations");
      if (res.skipped_steps > 0) log(Level::kWarn, std::to_string(res.skipped_steps) + " updates skipped on solver failure");
    } else if (*gc) {
      const auto body = gp::io::load_body(gc_body);
      const auto data = gp::io::load_dataset(gc_data);
      const auto grad = gp::gradient(body, data);
      const auto fd = gp::finite_diff_gradient(body, data, gc_h);
      const Real em = gp::max_relative_error(grad.d_mass, fd.gradient.d_mass, fd.mass_regime_change);
      const Real ef = gp::max_relative_error(grad.d_friction, fd.gradient.d_friction, fd.friction_regime_change);
      gp::io::json j{{"max_rel_error_mass", em},
                     {"max_rel_error_friction", ef},
                     {"analytic_mass", gp::io::to_json(grad.d_mass)},
                     {"analytic_friction", gp::io::to_json(grad.d_friction)},
                     {"fd_mass", gp::io::to_json(fd.gradient.d_mass)},
                     {"fd_friction", gp::io::to_json(fd.gradient.d_friction)},
                     {"mass_regime_change", fd.mass_regime_change},
                     {"friction_regime_change", fd.friction_regime_change}};
      gp::io::write_json(out_path(g, "gradcheck.json"), j);
      std::cout << "max relative error: mass " << em << ", friction " << ef << "\n";
      if (!(std::max(em, ef) <= gc_tol)) {
        log(Level::kError, "gradient check above tolerance");
        return 1;
      }
    } else if (*pl) {
      const auto body = gp::io::load_body(pl_body);
      const auto env = gp::io::env_from_json(gp::io::read_json(pl_env));
      pl_cfg.seed = g.seed;
      const auto start = gp::rest_state(body, gp::io::parse_pose(pl_start));
      GRIDPUSH_REQUIRE(!pl_goal.empty() || !pl_region.empty(), gp::InvalidArgument, "plan needs --goal or --goal-region");
      gp::GoalSpec goal;
      if (!pl_goal.empty()) {
        goal.target = gp::io::parse_pose(pl_goal);
      } else {
        goal.region = gp::io::polygon_from_json(gp::io::read_json(pl_region));
        goal.target = gp::sample_stable_goal(body, env, *goal.region, gp::derive_seed(g.seed, 0x60a1));
        log(Level::kInfo, "sampled goal " + gp::io::pose_to_json(goal.target).dump());
      }
      const auto plan = pl_mode == "exhaustive" ? gp::exhaustive_contact_search(body, env, start, goal, pl_cfg)
                                                : gp::plan_push_sequence(body, env, start, goal, pl_cfg);
      gp::io::write_json(pl_out.empty() ? out_path(g, "plan.json") : fs::path(pl_out), gp::io::plan_to_json(body, plan));
      log(Level::kInfo, std::string(plan.reached ? "reached" : "did not reach") + " the goal with " +
                            std::to_string(plan.actions.size()) + " pushes, " + std::to_string(plan.simulator_calls) +
                            " simulator calls");
    } else if (*pipe) {
      auto spec = gp::io::load_experiment(pipe_exp);
      if (app.get_option("--seed")->count() > 0) spec.seed = g.seed;
      const auto rep = gp::run_pipeline(spec);
      gp::io::write_json(out_path(g, "report.json"), gp::io::report_to_json(spec.truth, rep, pipe_timings));
      if (rep.mass.size() == spec.truth.size())
        gp::io::write_text(out_path(g, "heatmap.csv"),
                           gp::io::heatmap_csv(spec.truth.with_parameters(rep.mass, rep.friction)));
      if (!rep.failed_stage.empty()) log(Level::kWarn, "stage " + rep.failed_stage + " failed: " + rep.failure);
      log(Level::kInfo, std::string(rep.success ? "success" : "failure") + ", " + std::to_string(rep.pushes) +
                            " pushes, " + std::to_string(rep.total_simulations) + " simulations");
    } else if (*cmp) {
      const auto truth = gp::io::load_body(cmp_truth);
      const auto [train, test] = gp::split_dataset(gp::generate_dataset(truth, cmp_k, g.seed));
      std::vector<gp::Optimizer> methods;
      for (const auto& m : cmp_methods) methods.push_back(gp::optimizer_from_string(m));
      gp::IdentConfig base;
      base.seed = g.seed;
      base.m_max = truth.bounds().m_max;
      base.mu_max = truth.bounds().mu_max;
      const auto curves = gp::compare_optimizers(truth, train, test, methods, base, cmp_opt);
      gp::io::write_text(out_path(g, "comparison.csv"), gp::io::comparison_csv(curves));
      for (const auto& c : curves)
        std::cout << gp::to_string(c.method) << ": final held-out error " << c.final_error() << "\n";
    }
  } catch (const gp::Error& e) {
    log(Level::kError, e.what());
    return 2;
  }
  return 0;
}
