#pragma once

// File formats: body and model JSON, trajectory JSON lines, environment,
// plan and report JSON, heatmap and comparison CSV.
//
// Cell indices in every array follow the row-major order of the sorted
// occupancy coordinates.

#include "gridpush/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace gridpush::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json to_json(const Vector& v) { return json(std::vector<Real>(v.data(), v.data() + v.size())); }

inline Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw InvalidArgument(what + " must be an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw InvalidArgument(what + "[" + std::to_string(k) + "] is not a number");
    v[static_cast<Index>(k)] = j[k].get<Real>();
  }
  return v;
}

//------------------------------------------------------------------------------
// Bodies and models
//------------------------------------------------------------------------------

inline json body_to_json(const GridBody& body) {
  json occ = json::array();
  for (const auto& c : body.cells()) occ.push_back({c.row, c.col});
  return {{"cell_width", body.cell_width()},
          {"occupancy", occ},
          {"mass", to_json(body.mass())},
          {"friction", to_json(body.friction())},
          {"m_max", body.bounds().m_max},
          {"mu_max", body.bounds().mu_max}};
}

// Missing parameters default to half their bounds.
inline GridBody body_from_json(const json& j) {
  if (!j.contains("cell_width") || !j.contains("occupancy")) throw InvalidArgument("body needs cell_width and occupancy");
  std::vector<GridCoord> occ;
  for (const auto& c : j.at("occupancy")) {
    if (!c.is_array() || c.size() != 2) throw InvalidArgument("occupancy entries must be [row, col]");
    occ.push_back({c[0].get<int>(), c[1].get<int>()});
  }
  const ParameterBounds bounds{j.value("m_max", 1.0), j.value("mu_max", 1.0)};
  GridBody body = build_from_occupancy(occ, j.at("cell_width").get<Real>(), 0.5 * bounds.m_max, 0.5 * bounds.mu_max,
                                       bounds);
  Vector mass = body.mass(), friction = body.friction();
  if (j.contains("mass")) mass = vector_from_json(j.at("mass"), "mass");
  if (j.contains("friction")) friction = vector_from_json(j.at("friction"), "friction");
  body.set_parameters(mass, friction);
  return body;
}

inline GridBody load_body(const fs::path& path) {
  try {
    return body_from_json(read_json(path));
  } catch (const json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

inline json model_to_json(const IdentResult& res) {
  json j = body_to_json(res.body);
  j["loss_history"] = res.loss_history;
  j["best_epoch"] = res.best_epoch;
  j["epochs_run"] = res.epochs_run;
  j["simulations"] = res.simulations;
  return j;
}

inline std::string heatmap_csv(const GridBody& body) {
  std::ostringstream os;
  os.precision(17);
  os << "row,col,mass,friction\n";
  for (Index i = 0; i < body.size(); ++i)
    os << body.cells()[i].row << ',' << body.cells()[i].col << ',' << body.mass()[i] << ',' << body.friction()[i]
       << '\n';
  return os.str();
}

//------------------------------------------------------------------------------
// Trajectories
//------------------------------------------------------------------------------

inline json action_to_json(const PushAction& a) {
  return {{"cell", a.contact_cell}, {"fx", a.force.x()}, {"fy", a.force.y()}, {"tau", a.torque}, {"dt", a.duration}};
}

inline PushAction action_from_json(const json& j) {
  PushAction a;
  a.contact_cell = j.at("cell").get<Index>();
  a.force = {j.at("fx").get<Real>(), j.at("fy").get<Real>()};
  a.torque = j.value("tau", 0.0);
  a.duration = j.value("dt", 0.05);
  return a;
}

// One line per state; the last state has a null action.
inline std::string trajectory_jsonl(const TrajectoryRecord& rec) {
  std::ostringstream os;
  Real t = 0.0;
  for (std::size_t k = 0; k < rec.state_count(); ++k) {
    json line{{"t", t}, {"pose", to_json(rec.poses[k])}, {"velocity", to_json(rec.velocities[k])}};
    line["action"] = k < rec.actions.size() ? action_to_json(rec.actions[k]) : json(nullptr);
    if (k < rec.actions.size()) t += rec.actions[k].duration;
    os << line.dump() << '\n';
  }
  return os.str();
}

inline TrajectoryRecord read_trajectory(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  TrajectoryRecord rec;
  rec.provenance = Provenance::kExternal;
  rec.name = path.stem().string();
  std::string line;
  std::size_t lineno = 0;
  bool ended = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (ended) throw InvalidArgument(where + ": state after the final null action");
    try {
      const json j = json::parse(line);
      rec.poses.push_back(vector_from_json(j.at("pose"), where + " pose"));
      rec.velocities.push_back(vector_from_json(j.at("velocity"), where + " velocity"));
      if (j.contains("action") && !j.at("action").is_null()) {
        rec.actions.push_back(action_from_json(j.at("action")));
      } else {
        ended = true;
      }
    } catch (const json::exception& e) {
      throw InvalidArgument(where + ": " + e.what());
    }
  }
  if (rec.poses.empty()) throw InvalidArgument(path.string() + ": no states");
  if (!ended) throw InvalidArgument(path.string() + ": last state must have a null action");
  return rec;
}

inline void write_dataset(const fs::path& dir, const Dataset& data) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < data.size(); ++k) {
    std::ostringstream name;
    name << "traj_" << std::setw(3) << std::setfill('0') << k << ".jsonl";
    write_text(dir / name.str(), trajectory_jsonl(data[k]));
  }
}

// Every *.jsonl file in the directory, in file-name order.
inline Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidArgument(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InvalidArgument(dir.string() + " holds no .jsonl trajectories");
  Dataset data;
  for (const auto& f : files) data.push_back(read_trajectory(f));
  return data;
}

//------------------------------------------------------------------------------
// Environments, poses and plans
//------------------------------------------------------------------------------

inline json polygon_to_json(const Polygon& p) {
  json j = json::array();
  for (const auto& v : p) j.push_back({v.x(), v.y()});
  return j;
}

inline Polygon polygon_from_json(const json& j) {
  Polygon p;
  for (const auto& v : j) {
    if (!v.is_array() || v.size() != 2) throw InvalidArgument("polygon vertices must be [x, y]");
    p.push_back({v[0].get<Real>(), v[1].get<Real>()});
  }
  return p;
}

inline json env_to_json(const Environment& env) {
  json obs = json::array();
  for (const auto& o : env.obstacles) obs.push_back(polygon_to_json(o));
  return {{"table", polygon_to_json(env.table)}, {"obstacles", obs}};
}

inline Environment env_from_json(const json& j) {
  Environment env;
  env.table = polygon_from_json(j.at("table"));
  if (j.contains("obstacles"))
    for (const auto& o : j.at("obstacles")) env.obstacles.push_back(polygon_from_json(o));
  env.validate();
  return env;
}

inline json pose_to_json(const PlanarPose& p) { return json::array({p.x, p.y, p.theta}); }

inline PlanarPose pose_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw InvalidArgument("pose must be [x, y, theta]");
  return {j[0].get<Real>(), j[1].get<Real>(), j[2].get<Real>()};
}

// "x,y,theta"
inline PlanarPose parse_pose(const std::string& text) {
  std::stringstream ss(text);
  PlanarPose p;
  char c1 = 0, c2 = 0;
  if (!(ss >> p.x >> c1 >> p.y >> c2 >> p.theta) || c1 != ',' || c2 != ',' || !(ss >> std::ws).eof())
    throw InvalidArgument("pose '" + text + "' must read x,y,theta");
  return p;
}

inline json plan_to_json(const GridBody& body, const Plan& plan) {
  json actions = json::array(), states = json::array(), waypoints = json::array(), decisions = json::array();
  for (const auto& a : plan.actions) actions.push_back(action_to_json(a));
  for (const auto& s : plan.predicted_states)
    states.push_back({{"t", s.time}, {"pose", to_json(s.pose)}, {"planar", pose_to_json(planar_pose(body, s.pose))}});
  for (const auto& w : plan.waypoints) waypoints.push_back(pose_to_json(w));
  for (const auto& d : plan.decisions)
    decisions.push_back({{"face", d.face}, {"gap", d.gap}, {"left_gap", d.left_gap}, {"right_gap", d.right_gap},
                         {"dt", d.duration}});
  return {{"actions", actions},
          {"predicted_states", states},
          {"waypoints", waypoints},
          {"popped", plan.popped},
          {"decisions", decisions},
          {"simulator_calls", plan.simulator_calls},
          {"reached", plan.reached},
          {"final_gap", plan.final_gap}};
}

//------------------------------------------------------------------------------
// Experiments and reports
//------------------------------------------------------------------------------

// Paths inside the experiment file are relative to the file.
inline ExperimentSpec experiment_from_json(const json& j, const fs::path& base = {}) {
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  ExperimentSpec spec;
  try {
    GridBody geometry = load_body(resolve(j.at("body").get<std::string>()));
    if (j.contains("truth")) {
      const json t = read_json(resolve(j.at("truth").get<std::string>()));
      json merged = body_to_json(geometry);
      for (const char* key : {"mass", "friction", "m_max", "mu_max"})
        if (t.contains(key)) merged[key] = t.at(key);
      geometry = body_from_json(merged);
    }
    spec.truth = geometry;
    spec.env = j.contains("env") ? env_from_json(read_json(resolve(j.at("env").get<std::string>())))
                                 : env_from_json(j.at("environment"));
    spec.exploration_pushes = j.value("exploration_pushes", Index{10});
    GRIDPUSH_REQUIRE(spec.exploration_pushes >= 1, InvalidArgument, "exploration_pushes must be at least 1");
    spec.data.noise_sigma = j.value("noise_sigma", 0.0);
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.skip_identification = j.value("skip_identification", false);
    if (j.contains("identification")) {
      const json& c = j.at("identification");
      spec.ident.epochs = c.value("epochs", spec.ident.epochs);
      spec.ident.learning_rate = c.value("learning_rate", spec.ident.learning_rate);
      spec.ident.m_max = c.value("m_max", spec.ident.m_max);
      spec.ident.mu_max = c.value("mu_max", spec.ident.mu_max);
      spec.ident.simulation_budget = c.value("simulation_budget", spec.ident.simulation_budget);
    }
    spec.start = j.contains("start") ? pose_from_json(j.at("start")) : PlanarPose{};
    if (j.contains("goal")) spec.goal = pose_from_json(j.at("goal"));
    if (j.contains("goal_region")) spec.goal_region = polygon_from_json(j.at("goal_region"));
    GRIDPUSH_REQUIRE(spec.goal || spec.goal_region.size() >= 3, InvalidArgument,
                     "experiment needs a goal or a goal_region");
    spec.tolerance = j.value("tolerance", 0.0);
    spec.goal_sampling.min_overhang = j.value("min_overhang", spec.goal_sampling.min_overhang);
    spec.goal_sampling.heading = j.value("goal_heading", spec.goal_sampling.heading);
    spec.goal_sampling.heading_spread = j.value("goal_heading_spread", spec.goal_sampling.heading_spread);
    spec.output_dir = j.value("output_dir", std::string{});
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("experiment: ") + e.what());
  }
  return spec;
}

inline ExperimentSpec load_experiment(const fs::path& path) {
  return experiment_from_json(read_json(path), path.parent_path());
}

// Wall-clock timings sit under "timings" so they can be dropped before
// comparing reports.
inline json report_to_json(const GridBody& truth, const RunReport& rep, bool with_timings = true) {
  json j{{"success", rep.success},
         {"reached", rep.reached},
         {"stable", rep.stable},
         {"failed_stage", rep.failed_stage},
         {"failure", rep.failure},
         {"heldout_error", rep.heldout_error},
         {"heldout_error_fraction_of_diagonal", rep.heldout_error / rep.bbox_diagonal},
         {"loss_history", rep.loss_history},
         {"mass", to_json(rep.mass)},
         {"friction", to_json(rep.friction)},
         {"goal", rep.goal ? pose_to_json(*rep.goal) : json(nullptr)},
         {"final_gap", rep.final_gap},
         {"pushes", rep.pushes},
         {"simulations",
          {{"data", rep.data_simulations},
           {"identification", rep.identification_simulations},
           {"planner", rep.planner_simulations},
           {"execution", rep.execution_simulations},
           {"total", rep.total_simulations}}},
         {"plan", plan_to_json(truth, rep.plan)}};
  if (with_timings)
    j["timings"] = {{"data", rep.timings.data},
                    {"identification", rep.timings.identification},
                    {"goal", rep.timings.goal},
                    {"planning", rep.timings.planning},
                    {"execution", rep.timings.execution}};
  return j;
}

inline std::string comparison_csv(const std::vector<OptimizerCurve>& curves) {
  std::ostringstream os;
  os.precision(17);
  os << "method,simulations,heldout_error\n";
  for (const auto& c : curves)
    for (const auto& p : c.points) os << to_string(c.method) << ',' << p.simulations << ',' << p.heldout_error << '\n';
  return os.str();
}

}  // namespace gridpush::io
