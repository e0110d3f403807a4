#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "graspkit/geometry.hpp"

namespace graspkit {

struct Joint {
  RigidTransform parent_offset;  // fixed transform from the previous frame
  Vec3 axis = Vec3::UnitZ();     // revolute axis in the local frame
  double q_lo = -1.0;
  double q_hi = 1.0;
  double velocity_limit = 2.0;   // rad/s
};

struct FingerChain {
  std::string name;
  std::vector<Joint> joints;
  RigidTransform tip_offset;

  std::size_t dof() const { return joints.size(); }
  /// Throws kValidationError on an empty chain, non-unit axis, q_lo >= q_hi,
  /// non-positive velocity limit, or an invalid rigid transform.
  void validate() const;
};

struct HandModel {
  std::string name;
  std::vector<FingerChain> fingers;
  int actuated_dof = 0;  // descriptive only
  void validate() const;
};

using JointConfig = Eigen::VectorXd;
using Jacobian = Eigen::Matrix<double, 6, Eigen::Dynamic>;

struct IkSettings {
  double w_theta = 0.5;
  double lambda = 0.05;
  int max_iters = 200;
  double pos_tol = 1e-4;  // m
  double ang_tol = 1e-3;  // rad
  double step_scale = 1.0;
  double max_step = 0.5;  // rad, largest single-joint change per iteration
  void validate() const;
};

struct IkResidual {
  double pos = 0.0;
  double ang = 0.0;
};

struct IkResult {
  JointConfig q;
  IkResidual residual;
  bool converged = false;
  int iterations = 0;
  // Cost at q0 followed by the cost after every accepted step.
  std::vector<double> cost_history;
};

RigidTransform forward_kinematics(const FingerChain& chain, const JointConfig& q);

/// Rows 0-2: linear tip velocity, rows 3-5: angular velocity, both in the
/// chain's base (palm) frame.
Jacobian jacobian(const FingerChain& chain, const JointConfig& q);

/// arccos((trace(R1^T R2) - 1) / 2) with the argument clamped to [-1, 1].
double rotation_geodesic_angle(const Mat3& r1, const Mat3& r2);

/// |p(q) - p*|^2 + w_theta * angle(R(q), R*)^2.
double ik_cost(const FingerChain& chain, const JointConfig& q, const RigidTransform& target,
               double w_theta);

JointConfig clamp_to_limits(const FingerChain& chain, const JointConfig& q);
bool within_limits(const FingerChain& chain, const JointConfig& q);
JointConfig mid_configuration(const FingerChain& chain);

/// Damped least squares with backtracking on the cost above. Deterministic.
/// Throws kDimensionError when q0 has the wrong size.
IkResult dls_ik(const FingerChain& chain, const RigidTransform& target,
                const IkSettings& settings, const JointConfig& q0);

// --- hand model files ----------------------------------------------------

HandModel read_hand_model(std::istream& in);
HandModel load_hand_model(const std::filesystem::path& path);
void write_hand_model(std::ostream& out, const HandModel& hand);

/// {"schema_version": 1, "w_theta": ..., "lambda": ..., ...}; missing fields
/// keep the IkSettings defaults.
IkSettings read_ik_settings(std::istream& in);
IkSettings load_ik_settings(const std::filesystem::path& path);
void write_ik_settings(std::ostream& out, const IkSettings& s);

}  // namespace graspkit
