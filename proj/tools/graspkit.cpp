#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "graspkit/bvh.hpp"
#include "graspkit/cloud_io.hpp"
#include "graspkit/error.hpp"
#include "graspkit/hull.hpp"
#include "graspkit/kinematics.hpp"
#include "graspkit/pipeline.hpp"
#include "graspkit/planner.hpp"

namespace fs = std::filesystem;
using namespace graspkit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitGraspFailed = 3;
constexpr int kExitIkFailed = 4;

constexpr const char* kSchemaFooter =
    "Config files are JSON with \"schema_version\": 1 (optional; any other value is rejected).\n"
    "Exit codes: 0 success, 2 config/validation, 3 grasp failure, 4 IK non-convergence.";

#ifndef GRASPKIT_DATA_DIR
#define GRASPKIT_DATA_DIR "data"
#endif

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  bool verbose = false;
};

void add_common(CLI::App* sub, Common& c, bool config_required, bool with_out) {
  auto* cfg = sub->add_option("--config", c.config, "JSON config file");
  if (config_required) cfg->required();
  cfg->check(CLI::ExistingFile);
  if (with_out) sub->add_option("--out", c.out, "Output directory (created if missing)")->required();
  sub->add_option("--seed", c.seed, "Override the RNG seed");
  auto* q = sub->add_flag("--quiet,-q", c.quiet, "Print nothing on success");
  auto* v = sub->add_flag("--verbose,-v", c.verbose, "Print per-stage detail");
  q->excludes(v);
  sub->footer(kSchemaFooter);
}

// Machine outputs are rendered in memory first so a failing run leaves no
// partial files behind.
struct Outputs {
  std::vector<std::pair<std::string, std::string>> files;
  void add(std::string name, std::string body) { files.emplace_back(std::move(name), std::move(body)); }
  void write(const fs::path& dir) const {
    fs::create_directories(dir);
    for (const auto& [name, body] : files) {
      std::ofstream f(dir / name, std::ios::binary);
      if (!f) throw Error(Errc::kParseError, "cannot write " + (dir / name).string());
      f << body;
    }
  }
};

template <typename F>
std::string render(F&& f) {
  std::ostringstream s;
  f(s);
  return s.str();
}

std::string mm(double m) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f mm", m * 1e3);
  return buf;
}

std::string ms(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f ms", v);
  return buf;
}

// --- gen-scene ----------------------------------------------------------------

int cmd_gen_scene(const Common& c) {
  SceneConfig cfg = load_scene_config(c.config);
  if (c.seed) cfg.rng_seed = *c.seed;
  const Scene scene = synthesize_scene(cfg);
  Outputs out;
  out.add("cloud.ply", render([&](std::ostream& s) { write_ply(s, scene.cloud); }));
  out.add("truth.json", render([&](std::ostream& s) { write_truth_json(s, scene.truth, scene); }));
  out.add("scene.json", render([&](std::ostream& s) { write_scene_config(s, cfg); }));
  out.write(c.out);
  if (!c.quiet) {
    std::size_t n[3] = {0, 0, 0};
    for (auto l : scene.cloud.labels) {
      if (l >= 0 && l < 3) ++n[l];
    }
    std::cout << "points: " << scene.cloud.size() << " (object " << n[0] << ", plane " << n[1]
              << ", outlier " << n[2] << ")\n";
    if (c.verbose) std::cout << "wrote cloud.ply, truth.json, scene.json to " << c.out << "\n";
  }
  return kExitOk;
}

// --- run ---------------------------------------------------------------------

std::vector<FingerTrajectory> fingertip_paths(const PipelineResult& r, const HandModel& hand) {
  std::vector<FingerTrajectory> out;
  for (const auto& tr : r.trajectories) {
    FingerTrajectory ft;
    ft.finger_id = tr.finger_id;
    const auto& chain = hand.fingers[static_cast<std::size_t>(tr.finger_id)];
    for (const auto& s : tr.samples) {
      const Point3 p = forward_kinematics(chain, s.q).translation;
      if (!ft.waypoints.empty()) ft.cost += (p - ft.waypoints.back()).norm();
      ft.waypoints.push_back(p);
    }
    out.push_back(std::move(ft));
  }
  return out;
}

int cmd_run(const Common& c, const std::string& scene_path, const std::string& hand_path) {
  SceneConfig scene_cfg = load_scene_config(scene_path);
  if (c.seed) scene_cfg.rng_seed = *c.seed;
  const PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : load_pipeline_config(c.config);
  cfg.validate();
  const HandModel hand = load_hand_model(hand_path);
  const Scene scene = synthesize_scene(scene_cfg);
  const PipelineResult r = run_pipeline(scene, cfg, hand);

  const auto paths = fingertip_paths(r, hand);
  Outputs out;
  out.add("result.json", render([&](std::ostream& s) { write_result_json(s, r, true); }));
  out.add("joint_trajectories.csv", render([&](std::ostream& s) { write_joint_trajectories_csv(s, r.trajectories); }));
  out.add("trajectories.csv", render([&](std::ostream& s) { write_trajectories_csv(s, paths); }));
  out.add("trajectories.ply", render([&](std::ostream& s) { write_trajectories_ply(s, paths); }));
  out.write(c.out);

  if (!c.quiet || !r.grasp_success) {
    std::cout << "segmentation accuracy: " << r.segmentation_accuracy << " %\n"
              << "grasp success: " << (r.grasp_success ? "yes" : "no") << "\n";
    if (r.failure_reason) std::cout << "failure: " << *r.failure_reason << "\n";
    std::cout << "pose error: " << mm(r.pose_estimation_error) << ", eta_empty: " << r.eta_empty << "\n";
    for (std::size_t f = 0; f < r.contact_gaps.size(); ++f) {
      std::cout << "  finger " << f << ": gap " << mm(r.contact_gaps[f])
                << (f < r.tactile_confirmed.size() && r.tactile_confirmed[f] ? ", tactile ok" : "") << "\n";
    }
    std::cout << "planning " << ms(r.times.planning_ms) << ", ik " << ms(r.times.ik_ms) << ", end to end "
              << ms(r.times.end_to_end_ms) << "\n";
    if (c.verbose) {
      std::cout << "preprocess " << ms(r.times.preprocess_ms) << ", segmentation " << ms(r.times.segmentation_ms)
                << ", perception " << ms(r.times.perception_ms) << ", trajectory " << ms(r.times.trajectory_ms)
                << "\npoints: cloud " << r.cloud_points << ", kept " << r.kept_points << ", object "
                << r.object_points << "\n";
      for (const auto& rel : r.relaxations) std::cout << "relaxed: " << rel << "\n";
    }
  }
  if (r.grasp_success) return kExitOk;
  // A scene that could not be synthesized is a configuration problem.
  if (r.failure_reason && r.failure_reason->rfind("scene: ", 0) == 0) return kExitConfig;
  return kExitGraspFailed;
}

// --- bench -------------------------------------------------------------------

int cmd_bench(const Common& c, std::optional<int> trials, std::optional<int> workers, const std::string& hand_path) {
  BenchConfig b = c.config.empty() ? BenchConfig{} : load_bench_config(c.config);
  if (trials) b.trials = *trials;
  if (workers) b.workers = *workers;
  if (c.seed) {
    for (auto& s : b.scenes) s.rng_seed = *c.seed;
  }
  if (b.trials < 1) throw Error(Errc::kValidationError, "trials must be >= 1");
  const HandModel hand = load_hand_model(hand_path);
  const BatchResult res = batch_evaluate(b.scenes, b.trials, b.pipeline, hand, b.workers);
  Outputs out;
  out.add("trials.csv", render([&](std::ostream& s) { write_trials_csv(s, res.trials); }));
  out.add("aggregate.csv", render([&](std::ostream& s) { write_aggregate_csv(s, res.rows); }));
  out.add("bench.json", render([&](std::ostream& s) { write_bench_config(s, b); }));
  out.write(c.out);
  if (!c.quiet) {
    std::printf("%-9s %-13s %6s %7s %7s %10s %10s %8s %9s\n", "object", "camera", "trials", "SA %", "GSR %",
                "plan ms", "max ms", "ik ms", "pose mm");
    for (const auto& r : res.rows) {
      std::printf("%-9s %-13s %6d %7.2f %7.1f %10.1f %10.1f %8.1f %9.2f\n", r.object.c_str(), r.camera.c_str(),
                  r.trials, r.mean_sa, r.gsr, r.mean_planning_ms, r.max_planning_ms, r.mean_ik_ms,
                  r.mean_pose_error_mm);
    }
    if (c.verbose) {
      for (const auto& t : res.trials) {
        if (t.result.failure_reason) {
          std::cout << t.object << "/" << t.camera << " seed " << t.seed << ": " << *t.result.failure_reason << "\n";
        }
      }
    }
  }
  return kExitOk;
}

// --- query -------------------------------------------------------------------

int cmd_query(const std::string& cloud_path, const std::string& op, const std::vector<double>& args, bool json) {
  const PointCloud cloud = read_cloud(cloud_path);
  if (cloud.empty()) throw Error(Errc::kEmptyInput, "cloud has no points");
  nlohmann::json j;
  auto need = [&](std::size_t n) {
    if (args.size() != n) {
      throw Error(Errc::kInvalidArgument, op + " takes " + std::to_string(n) + " numbers, got " +
                                              std::to_string(args.size()));
    }
  };
  if (op == "nearest") {
    need(3);
    const Bvh bvh = Bvh::build(cloud);
    const auto hit = bvh.nearest(Point3(args[0], args[1], args[2]));
    j = {{"index", hit.index}, {"distance", hit.distance}};
    if (!json) std::cout << "index " << hit.index << " distance " << format_double(hit.distance) << "\n";
  } else if (op == "ray") {
    need(6);
    const Vec3 d(args[3], args[4], args[5]);
    if (d.squaredNorm() == 0.0) throw Error(Errc::kInvalidArgument, "ray direction must be non-zero");
    const Aabb box = aabb_from_points(cloud);
    const auto hit = ray_aabb(Ray{Point3(args[0], args[1], args[2]), d}, box);
    if (hit) {
      j = {{"hit", true}, {"t_enter", hit->t_enter}, {"t_exit", hit->t_exit}};
      if (!json) {
        std::cout << "hit t_enter " << format_double(hit->t_enter) << " t_exit " << format_double(hit->t_exit) << "\n";
      }
    } else {
      j = {{"hit", false}};
      if (!json) std::cout << "miss\n";
    }
  } else if (op == "stats") {
    need(0);
    const Aabb box = aabb_from_points(cloud);
    const auto eta = empty_space_ratio(cloud, box);
    j = {{"points", cloud.size()},
         {"min", {box.min.x(), box.min.y(), box.min.z()}},
         {"max", {box.max.x(), box.max.y(), box.max.z()}},
         {"volume", volume(box)},
         {"surface_area", surface_area(box)},
         {"hull_volume", eta.hull_volume},
         {"eta_empty", eta.eta},
         {"degenerate", eta.degenerate}};
    if (!json) {
      auto v3 = [](const Point3& p) {
        return format_double(p.x()) + " " + format_double(p.y()) + " " + format_double(p.z());
      };
      std::cout << "points " << cloud.size() << "\nmin " << v3(box.min) << "\nmax " << v3(box.max) << "\nvolume "
                << format_double(volume(box)) << "\nsurface_area " << format_double(surface_area(box))
                << "\nhull_volume " << format_double(eta.hull_volume) << "\neta_empty " << format_double(eta.eta)
                << (eta.degenerate ? " (degenerate box)" : "") << "\n";
    }
  } else {
    throw Error(Errc::kInvalidArgument, "unknown query '" + op + "' (nearest, ray, stats)");
  }
  if (json) std::cout << j.dump(2) << "\n";
  return kExitOk;
}

// --- ik-solve -----------------------------------------------------------------

int cmd_ik_solve(const Common& c, const std::string& hand_path, int finger, const std::vector<double>& pose,
                 const std::vector<double>& position, const std::vector<double>& approach,
                 const std::vector<double>& q0_in) {
  const HandModel hand = load_hand_model(hand_path);
  if (finger < 0 || static_cast<std::size_t>(finger) >= hand.fingers.size()) {
    throw Error(Errc::kIndexOutOfRange, "finger must be in [0, " + std::to_string(hand.fingers.size()) + ")");
  }
  const FingerChain& chain = hand.fingers[static_cast<std::size_t>(finger)];
  IkSettings settings = c.config.empty() ? IkSettings{} : load_ik_settings(c.config);

  RigidTransform target;
  if (!pose.empty()) {
    if (pose.size() != 12) throw Error(Errc::kParseError, "pose needs 12 numbers (row-major R, then t)");
    std::array<double, 12> a{};
    std::copy(pose.begin(), pose.end(), a.begin());
    target = RigidTransform::from_row_major(a);
  } else {
    if (position.size() != 3) throw Error(Errc::kParseError, "give --pose or --position x y z");
    target.translation = Point3(position[0], position[1], position[2]);
    const Vec3 a = approach.empty() ? -Vec3::UnitZ() : Vec3(approach[0], approach[1], approach[2]);
    if (a.norm() < 1e-12) throw Error(Errc::kParseError, "approach must be non-zero");
    target.rotation = approach_frame(a.normalized());
  }
  if (!target.is_valid(1e-6)) throw Error(Errc::kValidationError, "pose rotation is not orthonormal");

  JointConfig q0 = mid_configuration(chain);
  if (!q0_in.empty()) {
    if (q0_in.size() != chain.dof()) {
      throw Error(Errc::kDimensionError, "q0 needs " + std::to_string(chain.dof()) + " values");
    }
    for (std::size_t k = 0; k < q0_in.size(); ++k) q0[static_cast<Eigen::Index>(k)] = q0_in[k];
  }
  const IkResult r = dls_ik(chain, target, settings, q0);

  if (!c.quiet || !r.converged) {
    std::cout << "q*";
    for (Eigen::Index k = 0; k < r.q.size(); ++k) std::cout << " " << format_double(r.q[k]);
    std::cout << "\nposition residual " << format_double(r.residual.pos) << " m\nangular residual "
              << format_double(r.residual.ang) << " rad\nconverged " << (r.converged ? "yes" : "no")
              << "\niterations " << r.iterations << "\n";
  }
  if (!c.out.empty()) {
    nlohmann::json j{{"schema_version", 1},
                     {"finger", finger},
                     {"q", std::vector<double>(r.q.data(), r.q.data() + r.q.size())},
                     {"residual", {{"pos", r.residual.pos}, {"ang", r.residual.ang}}},
                     {"converged", r.converged},
                     {"iterations", r.iterations}};
    Outputs out;
    out.add("ik.json", j.dump(2) + "\n");
    out.write(c.out);
  }
  return r.converged ? kExitOk : kExitIkFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graspkit: point-cloud grasp planning for a multi-fingered hand"};
  app.require_subcommand(1);
  app.footer(kSchemaFooter);
  const std::string default_hand = std::string(GRASPKIT_DATA_DIR) + "/hand_synthetic.json";

  Common gen;
  auto* gen_cmd = app.add_subcommand("gen-scene", "Synthesize a labelled scene cloud (cloud.ply, truth.json, scene.json)");
  add_common(gen_cmd, gen, true, true);

  Common run;
  std::string run_scene, run_hand = default_hand;
  auto* run_cmd = app.add_subcommand("run", "Run the full pipeline on one synthesized scene");
  add_common(run_cmd, run, false, true);
  run_cmd->get_option("--config")->description("Pipeline config JSON (defaults when omitted)");
  run_cmd->add_option("--scene", run_scene, "Scene config JSON")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--hand", run_hand, "Hand model JSON")->capture_default_str();

  Common bench;
  std::optional<int> bench_trials, bench_workers;
  std::string bench_hand = default_hand;
  auto* bench_cmd = app.add_subcommand("bench", "Batch evaluation (trials.csv, aggregate.csv)");
  add_common(bench_cmd, bench, false, true);
  bench_cmd->get_option("--config")->description("Bench config JSON (acceptance scenes, 5 trials when omitted)");
  bench_cmd->get_option("--seed")->description("Set every scene's base seed");
  bench_cmd->add_option("--trials", bench_trials, "Trials per scene");
  bench_cmd->add_option("--workers", bench_workers, "Concurrent scenes (0: hardware)");
  bench_cmd->add_option("--hand", bench_hand, "Hand model JSON")->capture_default_str();

  std::string query_cloud, query_op;
  std::vector<double> query_args;
  bool query_json = false;
  auto* query_cmd = app.add_subcommand("query", "Inspect a cloud: nearest X Y Z | ray OX OY OZ DX DY DZ | stats");
  query_cmd->add_option("cloud", query_cloud, "Cloud file (.ply or .csv)")->required()->check(CLI::ExistingFile);
  query_cmd->add_option("op", query_op, "nearest, ray or stats")->required();
  query_cmd->add_option("args", query_args, "Numbers for the query (use -- before negative values)");
  query_cmd->add_flag("--json", query_json, "Print JSON instead of text");
  query_cmd->footer(kSchemaFooter);

  Common ik;
  std::string ik_hand = default_hand;
  int ik_finger = -1;
  std::vector<double> ik_pose, ik_position, ik_approach, ik_q0;
  auto* ik_cmd = app.add_subcommand("ik-solve", "Damped least-squares IK for one finger");
  ik_cmd->add_option("--config", ik.config, "IK settings JSON")->check(CLI::ExistingFile);
  ik_cmd->add_option("--out", ik.out, "Directory for ik.json");
  ik_cmd->add_flag("--quiet,-q", ik.quiet, "Print nothing on convergence");
  ik_cmd->add_option("--hand", ik_hand, "Hand model JSON")->capture_default_str();
  ik_cmd->add_option("--finger", ik_finger, "Finger index")->required();
  auto* pose_opt = ik_cmd->add_option("--pose", ik_pose, "Target pose: 12 numbers, row-major R then t")->expected(12);
  auto* pos_opt = ik_cmd->add_option("--position", ik_position, "Target position x y z")->expected(3);
  ik_cmd->add_option("--approach", ik_approach, "Approach direction (default 0 0 -1)")->expected(3)->needs(pos_opt);
  ik_cmd->add_option("--q0", ik_q0, "Initial joints (default: mid-range)");
  pose_opt->excludes(pos_opt);
  ik_cmd->footer(kSchemaFooter);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen_cmd) return cmd_gen_scene(gen);
    if (*run_cmd) return cmd_run(run, run_scene, run_hand);
    if (*bench_cmd) return cmd_bench(bench, bench_trials, bench_workers, bench_hand);
    if (*query_cmd) return cmd_query(query_cloud, query_op, query_args, query_json);
    if (*ik_cmd) return cmd_ik_solve(ik, ik_hand, ik_finger, ik_pose, ik_position, ik_approach, ik_q0);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
