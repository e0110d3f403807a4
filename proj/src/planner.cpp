#include "graspkit/planner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

namespace graspkit {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void require(bool ok, const char* msg) {
  if (!ok) throw Error(Errc::kValidationError, msg);
}

struct Node {
  Point3 p;
  int parent = -1;
  double cost = 0.0;
  std::vector<int> children;
};

class Tree {
 public:
  explicit Tree(const Point3& root) { nodes_.push_back({root, -1, 0.0, {}}); }

  int add(const Point3& p, int parent) {
    const int id = static_cast<int>(nodes_.size());
    const double c = nodes_[parent].cost + (p - nodes_[parent].p).norm();
    nodes_.push_back({p, parent, c, {}});
    nodes_[parent].children.push_back(id);
    return id;
  }

  int nearest(const Point3& q) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < size(); ++i) {
      const double d = (nodes_[i].p - q).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }

  std::vector<int> near(const Point3& q, double radius) const {
    std::vector<int> out;
    const double r2 = radius * radius;
    for (int i = 0; i < size(); ++i) {
      if ((nodes_[i].p - q).squaredNorm() <= r2) out.push_back(i);
    }
    return out;
  }

  void reparent(int id, int new_parent) {
    Node& n = nodes_[id];
    auto& siblings = nodes_[n.parent].children;
    siblings.erase(std::find(siblings.begin(), siblings.end(), id));
    n.parent = new_parent;
    nodes_[new_parent].children.push_back(id);
    const double c = nodes_[new_parent].cost + (n.p - nodes_[new_parent].p).norm();
    const double delta = c - n.cost;
    n.cost = c;
    // Shift the whole subtree by the same amount.
    std::vector<int> stack(n.children.begin(), n.children.end());
    while (!stack.empty()) {
      const int k = stack.back();
      stack.pop_back();
      nodes_[k].cost += delta;
      stack.insert(stack.end(), nodes_[k].children.begin(), nodes_[k].children.end());
    }
  }

  std::vector<Point3> path_to(int id) const {
    std::vector<Point3> out;
    for (int k = id; k >= 0; k = nodes_[k].parent) out.push_back(nodes_[k].p);
    std::reverse(out.begin(), out.end());
    return out;
  }

  const Node& operator[](int i) const { return nodes_[i]; }
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  std::vector<Node> nodes_;
};

std::vector<Point3> densify(const std::vector<Point3>& path, double step) {
  std::vector<Point3> out{path.front()};
  for (std::size_t i = 1; i < path.size(); ++i) {
    const Point3& a = path[i - 1];
    const Point3& b = path[i];
    const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / step)));
    for (int k = 1; k < n; ++k) out.push_back(a + (b - a) * (static_cast<double>(k) / n));
    out.push_back(b);
  }
  return out;
}

double path_length(const std::vector<Point3>& w) {
  double s = 0.0;
  for (std::size_t i = 1; i < w.size(); ++i) s += (w[i] - w[i - 1]).norm();
  return s;
}

Point3 uniform_in_box(std::mt19937_64& rng, const Aabb& box) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return box.min + (box.max - box.min).cwiseProduct(Vec3(u(rng), u(rng), u(rng)));
}

Point3 uniform_in_ball(std::mt19937_64& rng, const Point3& c, double radius) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    const Vec3 v(u(rng), u(rng), u(rng));
    if (v.squaredNorm() <= 1.0) return c + radius * v;
  }
}

Aabb fingertip_box(const Point3& p, double r) {
  return Aabb::from_center_half_extents(p, Vec3::Constant(r));
}

}  // namespace

// --- validation ------------------------------------------------------------

void GraspSeed::validate() const {
  if (!t.allFinite()) throw Error(Errc::kValidationError, "seed position must be finite");
  if (!approach.allFinite() || std::abs(approach.norm() - 1.0) > kExactTol) {
    throw Error(Errc::kValidationError, "seed approach must be unit length");
  }
}

void RrtConfig::validate() const {
  require(step > 0, "step must be > 0");
  require(goal_bias >= 0 && goal_bias <= 1, "goal_bias must be in [0, 1]");
  require(rewire_radius > 0, "rewire_radius must be > 0");
  require(max_samples > 0, "max_samples must be > 0");
  require(time_budget_ms > 0, "time_budget_ms must be > 0");
  require(goal_tolerance > 0, "goal_tolerance must be > 0");
  require(collision_check_resolution > 0, "collision_check_resolution must be > 0");
  require(fingertip_radius > 0, "fingertip_radius must be > 0");
  require(clearance > 0, "clearance must be > 0");
  require(workspace.valid(), "workspace must satisfy min <= max");
  require(max_trajectories > 0, "max_trajectories must be > 0");
}

void PlannerWeights::validate() const {
  require(alpha >= 0 && beta >= 0 && gamma >= 0, "weights must be >= 0");
  require(alpha + beta + gamma > 0, "weights must not all be zero");
}

// --- collision -------------------------------------------------------------

FingertipCollision::FingertipCollision(const Bvh& cloud, std::vector<Aabb> obstacles,
                                       double radius)
    : cloud_(&cloud), obstacles_(std::move(obstacles)), radius_(radius) {}

bool FingertipCollision::point_free(const Point3& p) const {
  for (const auto& box : obstacles_) {
    if (box.contains(p)) return false;
  }
  return !cloud_->any_within(p, radius_);
}

bool FingertipCollision::segment_free(const Point3& a, const Point3& b, double resolution) const {
  const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / resolution)));
  for (int k = 0; k <= n; ++k) {
    if (!point_free(a + (b - a) * (static_cast<double>(k) / n))) return false;
  }
  return true;
}

// --- RRT* -------------------------------------------------------------------

Point3 standoff_point(const GraspSeed& seed, double clearance) {
  return seed.t - clearance * seed.approach;
}

std::vector<FingerTrajectory> rrt_star(const Point3& start, const GraspSeed& seed,
                                       const Bvh& object, const std::vector<Aabb>& obstacles,
                                       const RrtConfig& cfg, int finger_id, RrtStats* stats) {
  const auto t0 = Clock::now();
  cfg.validate();
  seed.validate();
  const FingertipCollision col(object, obstacles, cfg.fingertip_radius);
  if (!col.point_free(start)) {
    throw Error(Errc::kPreconditionViolation, "start is inside the inflated object or an obstacle");
  }
  const Point3 goal = standoff_point(seed, cfg.clearance);
  const double res = cfg.collision_check_resolution;
  auto in_goal = [&](const Point3& p) { return (p - goal).norm() <= cfg.goal_tolerance; };

  Tree tree(start);
  std::vector<int> goal_nodes;
  if (in_goal(start)) goal_nodes.push_back(0);

  // Initial branches: a chain of nodes `step` apart along a free polyline.
  auto add_chain = [&](const std::vector<Point3>& poly) {
    const auto pts = densify(poly, cfg.step);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (!col.segment_free(pts[i - 1], pts[i], res)) return;
    }
    int parent = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      parent = tree.add(pts[i], parent);
      if (in_goal(pts[i])) goal_nodes.push_back(parent);
    }
  };
  add_chain({start, goal});
  {
    const Vec3 chord = goal - start;
    Vec3 side = chord.cross(Vec3::UnitZ());
    if (side.norm() < 1e-9 * std::max(1.0, chord.norm())) side = chord.cross(Vec3::UnitX());
    if (side.norm() > 0 && chord.norm() > 0) {
      const Point3 ctrl = 0.5 * (start + goal) + 0.25 * chord.norm() * side.normalized();
      std::vector<Point3> arc;
      const int n = 8;
      for (int k = 0; k <= n; ++k) {
        const double s = static_cast<double>(k) / n;
        arc.push_back((1 - s) * (1 - s) * start + 2 * s * (1 - s) * ctrl + s * s * goal);
      }
      add_chain(arc);
    }
  }

  std::mt19937_64 rng(cfg.rng_seed + static_cast<std::uint64_t>(finger_id));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  RrtStats local;
  RrtStats& st = stats ? *stats : local;
  std::vector<double> prev_costs;

  int s = 0;
  for (; s < cfg.max_samples; ++s) {
    if (ms_since(t0) > cfg.time_budget_ms) {
      st.budget_exhausted = true;
      break;
    }
    const Point3 sample = coin(rng) < cfg.goal_bias ? uniform_in_ball(rng, goal, cfg.goal_tolerance)
                                                   : uniform_in_box(rng, cfg.workspace);
    const int nn = tree.nearest(sample);
    Vec3 dir = sample - tree[nn].p;
    const double len = dir.norm();
    if (len == 0.0) continue;
    const Point3 p = len <= cfg.step ? sample : Point3(tree[nn].p + dir * (cfg.step / len));
    if (!col.point_free(p)) continue;

    // Choose the cheapest free parent among the neighbours (nn included).
    auto near = tree.near(p, cfg.rewire_radius);
    if (std::find(near.begin(), near.end(), nn) == near.end()) near.push_back(nn);
    std::vector<std::pair<double, int>> by_cost;
    for (int k : near) by_cost.emplace_back(tree[k].cost + (p - tree[k].p).norm(), k);
    std::sort(by_cost.begin(), by_cost.end());
    int parent = -1;
    for (const auto& [c, k] : by_cost) {
      if (col.segment_free(tree[k].p, p, res)) {
        parent = k;
        break;
      }
    }
    if (parent < 0) continue;
    const int id = tree.add(p, parent);

    if (st.audit_costs) {
      prev_costs.resize(static_cast<std::size_t>(tree.size()));
      for (int k = 0; k < tree.size(); ++k) prev_costs[k] = tree[k].cost;
    }
    for (int k : near) {
      if (k == parent) continue;
      const double c = tree[id].cost + (tree[k].p - p).norm();
      // c < cost(k) also rules out k being an ancestor of the new node.
      if (c < tree[k].cost && col.segment_free(p, tree[k].p, res)) {
        tree.reparent(k, id);
        ++st.rewires;
      }
    }
    if (st.audit_costs) {
      for (int k = 0; k < tree.size(); ++k) {
        if (tree[k].cost > prev_costs[k]) ++st.cost_increases;
      }
    }
    if (in_goal(p)) goal_nodes.push_back(id);
  }
  st.samples = s;
  st.nodes = static_cast<std::size_t>(tree.size());
  st.goal_nodes = goal_nodes.size();
  st.elapsed_ms = ms_since(t0);

  if (goal_nodes.empty()) {
    throw Error(Errc::kNoTrajectoryFound, "no path to the standoff of finger " +
                                              std::to_string(finger_id) + " after " +
                                              std::to_string(s) + " samples");
  }
  std::sort(goal_nodes.begin(), goal_nodes.end(), [&](int a, int b) {
    return tree[a].cost != tree[b].cost ? tree[a].cost < tree[b].cost : a < b;
  });
  std::vector<FingerTrajectory> out;
  for (int g : goal_nodes) {
    if (static_cast<int>(out.size()) >= cfg.max_trajectories) break;
    FingerTrajectory traj;
    traj.finger_id = finger_id;
    auto path = tree.path_to(g);
    // Finish exactly on the standoff when that last hop is free.
    if (path.back() != goal && col.segment_free(path.back(), goal, res)) path.push_back(goal);
    traj.waypoints = densify(path, cfg.step);
    traj.cost = path_length(traj.waypoints);
    out.push_back(std::move(traj));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const FingerTrajectory& a, const FingerTrajectory& b) { return a.cost < b.cost; });
  return out;
}

// --- scoring ------------------------------------------------------------------

Mat3 approach_frame(const Vec3& approach) {
  const Vec3 z = -approach.normalized();
  Vec3 x = Vec3::UnitZ() - Vec3::UnitZ().dot(z) * z;
  if (x.norm() < 1e-9) x = Vec3::UnitX() - Vec3::UnitX().dot(z) * z;
  x.normalize();
  Mat3 r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  return r;
}

double endpoint_score(double d_min, double phi, double kappa, const PlannerWeights& w) {
  return -w.alpha * d_min + w.beta * phi - w.gamma * kappa;
}

CandidateEndpoint score_endpoint(const Point3& t, const Vec3& approach, const Bvh& bvh,
                                 const NormalField& normals, const PlannerWeights& weights,
                                 double clearance, double fingertip_radius) {
  if (normals.normals.size() != bvh.size()) {
    throw Error(Errc::kDimensionError, "normal field and BVH cover different clouds");
  }
  CandidateEndpoint e;
  e.approach = approach;
  e.pose = {approach_frame(approach), t};
  const auto hit = bvh.nearest(t);
  e.nearest = hit.index;
  e.d_min = hit.distance;
  e.phi = std::abs(normals.normals[hit.index].dot(approach));
  const Point3 anchor = bvh.point(hit.index);
  const double patch_sq = 4.0 * fingertip_radius * fingertip_radius;
  const auto other = bvh.nearest_if(
      t, [&](std::size_t i) { return (bvh.point(i) - anchor).squaredNorm() > patch_sq; });
  if (std::isfinite(other.distance)) e.kappa = std::max(0.0, 1.0 - other.distance / clearance);
  e.score = endpoint_score(e.d_min, e.phi, e.kappa, weights);
  return e;
}

bool visibility_check(const Point3& camera, const Point3& t, const std::vector<Aabb>& occluders) {
  const Vec3 d = t - camera;
  const double dist = d.norm();
  if (dist == 0.0) throw Error(Errc::kInvalidArgument, "camera coincides with the target");
  const Ray ray{camera, d / dist};
  for (const auto& box : occluders) {
    const auto hit = ray_aabb(ray, box);
    if (hit && hit->t_enter < dist) return false;
  }
  return true;
}

EndpointSelection select_endpoint(const std::vector<FingerTrajectory>& trajectories,
                                  const Bvh& bvh) {
  std::optional<EndpointSelection> best;
  for (std::size_t ti = 0; ti < trajectories.size(); ++ti) {
    const auto& tr = trajectories[ti];
    for (std::size_t wi = 0; wi < tr.waypoints.size(); ++wi) {
      const double d = bvh.nearest(tr.waypoints[wi]).distance;
      bool better = !best || d < best->distance;
      if (best && d == best->distance) {
        const double cb = trajectories[best->trajectory].cost;
        better = tr.cost < cb ||
                 (tr.cost == cb && (wi < best->waypoint ||
                                    (wi == best->waypoint && ti < best->trajectory)));
      }
      if (better) best = EndpointSelection{ti, wi, d};
    }
  }
  if (!best) throw Error(Errc::kNoCandidates, "no trajectory waypoints to select from");
  return *best;
}

Point3 contact_position(const GraspSeed& seed, double fingertip_radius) {
  return seed.t - fingertip_radius * seed.approach;
}

// --- multi-finger -------------------------------------------------------------

std::string_view to_string(FingerStatus s) {
  switch (s) {
    case FingerStatus::kPlanned: return "planned";
    case FingerStatus::kNoTrajectory: return "no_trajectory";
    case FingerStatus::kIkFailed: return "ik_failed";
    case FingerStatus::kNoSeeds: return "no_seeds";
  }
  return "unknown";
}

namespace {

struct FingerTiming {
  double plan_ms = 0.0;
  double ik_ms = 0.0;
};

FingerPlan plan_finger(const HandPlanProblem& pb, int f, std::size_t first_rank,
                       FingerTiming& timing) {
  const FingerChain& chain = pb.hand->fingers[static_cast<std::size_t>(f)];
  const auto& seeds = pb.seeds[static_cast<std::size_t>(f)];
  const JointConfig& q0 = pb.q_start[static_cast<std::size_t>(f)];
  const double r = pb.rrt.fingertip_radius;
  const Point3 start = forward_kinematics(chain, q0).translation;

  FingerPlan plan;
  plan.finger_id = f;
  plan.status = FingerStatus::kNoSeeds;
  plan.detail = "no seeds left";
  int attempts = 0;
  for (std::size_t rank = first_rank; rank < seeds.size() && attempts < pb.max_seed_attempts;
       ++rank, ++attempts) {
    const GraspSeed& seed = seeds[rank];
    const auto tp = Clock::now();
    std::vector<FingerTrajectory> trajs;
    try {
      trajs = rrt_star(start, seed, *pb.bvh, pb.obstacles, pb.rrt, f);
    } catch (const Error& e) {
      timing.plan_ms += ms_since(tp);
      plan.status = FingerStatus::kNoTrajectory;
      plan.detail = e.detail();
      if (e.code() == Errc::kPreconditionViolation) break;
      continue;
    }
    const auto sel = select_endpoint(trajs, *pb.bvh);
    timing.plan_ms += ms_since(tp);

    const auto ti = Clock::now();
    const auto& wps = trajs[sel.trajectory].waypoints;
    const Point3 contact = contact_position(seed, r);
    const RigidTransform target{approach_frame(seed.approach), contact};
    // Follow the waypoints position-only, then solve the full contact pose.
    IkSettings follow = pb.ik;
    follow.w_theta = 0.0;
    std::vector<JointConfig> path{q0};
    for (std::size_t w = 1; w <= sel.waypoint; ++w) {
      path.push_back(dls_ik(chain, RigidTransform::from_translation(wps[w]), follow, path.back()).q);
    }
    // Warm start from the path; fall back to the start and mid-range postures.
    IkResult ik = dls_ik(chain, target, pb.ik, path.back());
    for (const JointConfig& alt : {q0, mid_configuration(chain)}) {
      if (ik.converged) break;
      IkResult retry = dls_ik(chain, target, pb.ik, alt);
      if (retry.converged) ik = std::move(retry);
    }
    timing.ik_ms += ms_since(ti);
    if (!ik.converged) {
      plan.status = FingerStatus::kIkFailed;
      plan.detail = "contact pose (" + std::to_string(contact.x()) + ", " +
                    std::to_string(contact.y()) + ", " + std::to_string(contact.z()) +
                    ") not reached, residual " + std::to_string(ik.residual.pos) + " m";
      continue;
    }
    path.push_back(ik.q);
    plan.status = FingerStatus::kPlanned;
    plan.detail.clear();
    plan.seed_rank = rank;
    plan.seed = seed;
    plan.trajectories = std::move(trajs);
    plan.selection = sel;
    plan.contact = contact;
    plan.endpoint = score_endpoint(contact, seed.approach, *pb.bvh, *pb.normals, pb.weights,
                                   pb.rrt.clearance, r);
    plan.ik = std::move(ik);
    plan.path_q = std::move(path);
    plan.converged = true;
    return plan;
  }
  return plan;
}

// First conflict as (finger to demote, stage), or nullopt.
std::optional<std::pair<int, std::string>> find_conflict(const HandPlanProblem& pb,
                                                         const std::vector<FingerPlan>& plans) {
  const double r = pb.rrt.fingertip_radius;
  auto weaker = [&](int i, int j) {
    return plans[i].endpoint.score < plans[j].endpoint.score ? i : j;
  };
  const int n = static_cast<int>(plans.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if ((plans[i].contact - plans[j].contact).norm() < pb.min_sep) {
        return std::make_pair(weaker(j, i), std::string("separation"));
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    const auto& tr = plans[i].trajectories[plans[i].selection.trajectory];
    const Point3& pre = tr.waypoints[plans[i].selection.waypoint];
    if (pb.bvh->collides(fingertip_box(pre, r)) && pb.bvh->any_within(pre, r)) {
      return std::make_pair(i, std::string("consistency"));
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (aabb_overlap(fingertip_box(plans[i].contact, r), fingertip_box(plans[j].contact, r))) {
        return std::make_pair(weaker(j, i), std::string("consistency"));
      }
    }
  }
  return std::nullopt;
}

}  // namespace

GraspHypothesis plan_hand(const HandPlanProblem& pb) {
  if (!pb.bvh || !pb.normals || !pb.hand) {
    throw Error(Errc::kInvalidArgument, "plan_hand needs a BVH, normals and a hand model");
  }
  const std::size_t nf = pb.hand->fingers.size();
  if (pb.seeds.size() != nf || pb.q_start.size() != nf) {
    throw Error(Errc::kDimensionError, "need one seed list and one start per finger");
  }
  pb.rrt.validate();
  pb.weights.validate();
  pb.ik.validate();

  const auto t0 = Clock::now();
  GraspHypothesis hyp;
  std::vector<FingerPlan> plans(nf);
  std::vector<FingerTiming> timing(nf);

  // One planning task per finger; each result depends only on its inputs.
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(nf, pb.threads > 0 ? static_cast<unsigned>(pb.threads) : hw));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t f; (f = next.fetch_add(1)) < nf;) {
      plans[f] = plan_finger(pb, static_cast<int>(f), 0, timing[f]);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  for (;;) {
    const auto failed = std::find_if(plans.begin(), plans.end(),
                                     [](const FingerPlan& p) { return p.status != FingerStatus::kPlanned; });
    if (failed != plans.end()) {
      hyp.failure_stage = "finger " + std::to_string(failed->finger_id) + ": " +
                          std::string(to_string(failed->status)) + " (" + failed->detail + ")";
      // IK failures carry no error code; the stage text says what failed.
      if (failed->status != FingerStatus::kIkFailed) hyp.failure_code = Errc::kNoTrajectoryFound;
      break;
    }
    const auto conflict = find_conflict(pb, plans);
    if (!conflict) {
      hyp.feasible = true;
      break;
    }
    if (hyp.resample_rounds >= pb.max_resample) {
      hyp.failure_stage = conflict->second + " conflict unresolved after " +
                          std::to_string(hyp.resample_rounds) + " re-sampling rounds";
      break;
    }
    ++hyp.resample_rounds;
    const int f = conflict->first;
    plans[f] = plan_finger(pb, f, plans[f].seed_rank + 1, timing[f]);
  }

  for (const auto& t : timing) hyp.ik_ms += t.ik_ms;
  double score = 0.0;
  for (const auto& p : plans) score += p.endpoint.score;
  hyp.aggregate_score = nf ? score / static_cast<double>(nf) : 0.0;
  hyp.fingers = std::move(plans);
  hyp.planning_ms = ms_since(t0);
  return hyp;
}

GraspHypothesis replan_relaxed(const GraspHypothesis& previous, const HandPlanProblem& problem) {
  if (previous.feasible) {
    throw Error(Errc::kPreconditionViolation, "replan_relaxed needs an infeasible hypothesis");
  }
  HandPlanProblem relaxed = problem;
  relaxed.rrt.goal_tolerance *= 2.0;
  relaxed.rrt.time_budget_ms *= 2.0;
  relaxed.weights.gamma = 0.0;
  if (relaxed.weights.alpha + relaxed.weights.beta == 0.0) relaxed.weights.beta = 1.0;
  GraspHypothesis out = plan_hand(relaxed);
  out.relaxations = previous.relaxations;
  for (const char* r : {"goal_tolerance", "time_budget", "kappa"}) out.relaxations.emplace_back(r);
  return out;
}

}  // namespace graspkit
