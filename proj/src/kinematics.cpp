#include "graspkit/kinematics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "graspkit/error.hpp"

namespace graspkit {
namespace {

void require_dim(const FingerChain& chain, const JointConfig& q) {
  if (static_cast<std::size_t>(q.size()) != chain.dof()) {
    throw Error(Errc::kDimensionError, "chain '" + chain.name + "' has " +
                                           std::to_string(chain.dof()) + " joints, q has " +
                                           std::to_string(q.size()));
  }
}

// World frames of every joint (after its parent offset, before its own
// rotation), and the tip frame last.
std::vector<RigidTransform> joint_frames(const FingerChain& chain, const JointConfig& q) {
  std::vector<RigidTransform> frames;
  frames.reserve(chain.dof() + 1);
  RigidTransform t;
  for (std::size_t j = 0; j < chain.dof(); ++j) {
    const Joint& jt = chain.joints[j];
    t = t * jt.parent_offset;
    frames.push_back(t);
    t = t * RigidTransform{rotation_about(jt.axis, q[static_cast<Eigen::Index>(j)]), Vec3::Zero()};
  }
  frames.push_back(t * chain.tip_offset);
  return frames;
}

Eigen::Matrix<double, 6, 1> pose_error(const RigidTransform& current,
                                       const RigidTransform& target, double w_theta) {
  Eigen::Matrix<double, 6, 1> e;
  e.head<3>() = target.translation - current.translation;
  e.tail<3>() = w_theta * rotation_log(target.rotation * current.rotation.transpose());
  return e;
}

IkResidual residual_of(const RigidTransform& current, const RigidTransform& target) {
  return {(target.translation - current.translation).norm(),
          rotation_geodesic_angle(current.rotation, target.rotation)};
}

}  // namespace

void FingerChain::validate() const {
  auto bad = [&](const std::string& what) {
    throw Error(Errc::kValidationError, "finger '" + name + "': " + what);
  };
  if (joints.empty()) bad("needs at least one joint");
  for (std::size_t j = 0; j < joints.size(); ++j) {
    const Joint& jt = joints[j];
    const std::string at = "joint " + std::to_string(j) + ": ";
    if (!jt.parent_offset.is_valid()) bad(at + "offset is not a rigid transform");
    if (!jt.axis.allFinite() || std::abs(jt.axis.norm() - 1.0) > kExactTol) {
      bad(at + "axis must be unit length");
    }
    if (!(jt.q_lo < jt.q_hi)) bad(at + "limits must satisfy lo < hi");
    if (!(jt.velocity_limit > 0)) bad(at + "vel_limit must be > 0");
  }
  if (!tip_offset.is_valid()) bad("tip_offset is not a rigid transform");
}

void HandModel::validate() const {
  if (fingers.empty()) throw Error(Errc::kValidationError, "hand model has no fingers");
  for (const auto& f : fingers) f.validate();
}

void IkSettings::validate() const {
  if (!(w_theta >= 0)) throw Error(Errc::kValidationError, "w_theta must be >= 0");
  if (!(lambda > 0)) throw Error(Errc::kValidationError, "lambda must be > 0");
  if (max_iters < 0) throw Error(Errc::kValidationError, "max_iters must be >= 0");
  if (!(pos_tol > 0) || !(ang_tol > 0)) {
    throw Error(Errc::kValidationError, "tolerances must be > 0");
  }
  if (!(max_step > 0)) throw Error(Errc::kValidationError, "max_step must be > 0");
  if (!(step_scale > 0 && step_scale <= 1)) {
    throw Error(Errc::kValidationError, "step_scale must be in (0, 1]");
  }
}

RigidTransform forward_kinematics(const FingerChain& chain, const JointConfig& q) {
  require_dim(chain, q);
  return joint_frames(chain, q).back();
}

Jacobian jacobian(const FingerChain& chain, const JointConfig& q) {
  require_dim(chain, q);
  const auto frames = joint_frames(chain, q);
  const Vec3 tip = frames.back().translation;
  Jacobian jac(6, static_cast<Eigen::Index>(chain.dof()));
  for (std::size_t j = 0; j < chain.dof(); ++j) {
    const Vec3 w = frames[j].rotation * chain.joints[j].axis;
    const auto c = static_cast<Eigen::Index>(j);
    jac.block<3, 1>(0, c) = w.cross(tip - frames[j].translation);
    jac.block<3, 1>(3, c) = w;
  }
  return jac;
}

double rotation_geodesic_angle(const Mat3& r1, const Mat3& r2) {
  const double c = ((r1.transpose() * r2).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

double ik_cost(const FingerChain& chain, const JointConfig& q, const RigidTransform& target,
               double w_theta) {
  const RigidTransform t = forward_kinematics(chain, q);
  const double ang = rotation_geodesic_angle(t.rotation, target.rotation);
  return (t.translation - target.translation).squaredNorm() + w_theta * ang * ang;
}

JointConfig clamp_to_limits(const FingerChain& chain, const JointConfig& q) {
  require_dim(chain, q);
  JointConfig out = q;
  for (std::size_t j = 0; j < chain.dof(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    out[i] = std::clamp(out[i], chain.joints[j].q_lo, chain.joints[j].q_hi);
  }
  return out;
}

bool within_limits(const FingerChain& chain, const JointConfig& q) {
  require_dim(chain, q);
  for (std::size_t j = 0; j < chain.dof(); ++j) {
    const double v = q[static_cast<Eigen::Index>(j)];
    if (v < chain.joints[j].q_lo || v > chain.joints[j].q_hi) return false;
  }
  return true;
}

JointConfig mid_configuration(const FingerChain& chain) {
  JointConfig q(static_cast<Eigen::Index>(chain.dof()));
  for (std::size_t j = 0; j < chain.dof(); ++j) {
    q[static_cast<Eigen::Index>(j)] = 0.5 * (chain.joints[j].q_lo + chain.joints[j].q_hi);
  }
  return q;
}

IkResult dls_ik(const FingerChain& chain, const RigidTransform& target,
                const IkSettings& settings, const JointConfig& q0) {
  require_dim(chain, q0);
  settings.validate();
  IkResult res;
  res.q = clamp_to_limits(chain, q0);
  double cost = ik_cost(chain, res.q, target, settings.w_theta);
  res.cost_history.push_back(cost);
  const double lambda_sq = settings.lambda * settings.lambda;

  for (;;) {
    const RigidTransform current = forward_kinematics(chain, res.q);
    res.residual = residual_of(current, target);
    if (res.residual.pos < settings.pos_tol && res.residual.ang < settings.ang_tol) {
      res.converged = true;
      break;
    }
    if (res.iterations >= settings.max_iters) break;

    const auto e = pose_error(current, target, settings.w_theta);
    // The angular error is scaled by w_theta, so the angular rows are too.
    Jacobian jac = jacobian(chain, res.q);
    jac.bottomRows<3>() *= settings.w_theta;
    Eigen::Matrix<double, 6, 6> jjt = jac * jac.transpose();
    jjt.diagonal().array() += lambda_sq;
    JointConfig dq = settings.step_scale * (jac.transpose() * jjt.ldlt().solve(e));
    const double largest = dq.cwiseAbs().maxCoeff();
    if (largest > settings.max_step) dq *= settings.max_step / largest;

    bool accepted = false;
    double alpha = 1.0;
    for (int halving = 0; halving <= 8; ++halving, alpha *= 0.5) {
      const JointConfig trial = clamp_to_limits(chain, res.q + alpha * dq);
      const double c = ik_cost(chain, trial, target, settings.w_theta);
      if (c <= cost) {
        res.q = trial;
        cost = c;
        accepted = true;
        break;
      }
    }
    ++res.iterations;
    if (!accepted) {
      res.residual = residual_of(forward_kinematics(chain, res.q), target);
      break;
    }
    res.cost_history.push_back(cost);
  }
  return res;
}

}  // namespace graspkit
