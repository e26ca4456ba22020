#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace adp::kin {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// One 7-DoF action step: body-frame translation (m), roll/pitch/yaw
// increments (rad), and the gripper command. The gripper value is carried
// through ingestion and reporting only; kinematics never reads it.
struct ActionIncrement {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
  double droll = 0.0;
  double dpitch = 0.0;
  double dyaw = 0.0;
  double gripper = 0.0;

  static ActionIncrement from_array(const std::array<double, 7>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
  }
  std::array<double, 7> to_array() const { return {dx, dy, dz, droll, dpitch, dyaw, gripper}; }

  Vec3 translation() const { return {dx, dy, dz}; }
  bool is_finite() const;
};

struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  Mat4 homogeneous() const;
};

// Multiplication order of the three elementary rotations. kXYZ is
// R_x(roll) * R_y(pitch) * R_z(yaw).
enum class EulerOrder { kXYZ, kXZY, kYXZ, kYZX, kZXY, kZYX };

// Body: T' = T * dT (increments expressed in the end-effector frame).
// World: T' = dT * T.
enum class CompositionFrame { kBody, kWorld };

struct KinematicsConfig {
  EulerOrder order = EulerOrder::kXYZ;
  CompositionFrame frame = CompositionFrame::kBody;
};

// A chunk of consecutive increments executed between two forwards.
struct ActionWindow {
  std::size_t index = 1;  // 1-based window ordinal
  std::vector<ActionIncrement> increments;
  Pose start_pose;
};

Mat3 euler_to_rotation(double droll, double dpitch, double dyaw,
                       EulerOrder order = EulerOrder::kXYZ);

Pose compose_step(const Pose& pose, const ActionIncrement& inc, const KinematicsConfig& config = {});

// Positions p_0..p_w of the window: p_0 is the start translation, p_u the
// translation after u compositions. Output has increments.size() + 1 entries.
std::vector<Vec3> fk_window(const ActionWindow& window, const KinematicsConfig& config = {});

// Cumulative arc length of the window's end-effector positions.
double window_distance(const ActionWindow& window, const KinematicsConfig& config = {});

// Arc length of an arbitrary polyline.
double polyline_length(std::span<const Vec3> points);

bool is_valid_pose(const Pose& pose, double tolerance = 1e-9);

// Projects the rotation back onto SO(3) (nearest orthonormal matrix, det +1).
Pose reorthonormalize(const Pose& pose);

}  // namespace adp::kin
