#include "adp/se3_kinematics.hpp"

#include <cmath>
#include <string>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "adp/errors.hpp"

namespace adp::kin {

namespace {

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return r;
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, 0, s,
       0, 1, 0,
       -s, 0, c;
  return r;
}

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return r;
}

void require_finite_pose(const Pose& pose) {
  if (!pose.rotation.allFinite() || !pose.translation.allFinite()) {
    throw InvalidArgument("pose contains non-finite entries");
  }
}

}  // namespace

bool ActionIncrement::is_finite() const {
  for (double v : to_array()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Mat4 Pose::homogeneous() const {
  Mat4 t = Mat4::Identity();
  t.topLeftCorner<3, 3>() = rotation;
  t.topRightCorner<3, 1>() = translation;
  return t;
}

Mat3 euler_to_rotation(double droll, double dpitch, double dyaw, EulerOrder order) {
  if (!std::isfinite(droll) || !std::isfinite(dpitch) || !std::isfinite(dyaw)) {
    throw InvalidArgument("euler_to_rotation: non-finite angle");
  }
  const Mat3 x = rot_x(droll), y = rot_y(dpitch), z = rot_z(dyaw);
  switch (order) {
    case EulerOrder::kXYZ: return x * y * z;
    case EulerOrder::kXZY: return x * z * y;
    case EulerOrder::kYXZ: return y * x * z;
    case EulerOrder::kYZX: return y * z * x;
    case EulerOrder::kZXY: return z * x * y;
    case EulerOrder::kZYX: return z * y * x;
  }
  throw InvalidArgument("euler_to_rotation: unknown order");
}

Pose compose_step(const Pose& pose, const ActionIncrement& inc, const KinematicsConfig& config) {
  if (!inc.is_finite()) {
    throw InvalidArgument("compose_step: non-finite action increment");
  }
  require_finite_pose(pose);
  const Mat3 r = euler_to_rotation(inc.droll, inc.dpitch, inc.dyaw, config.order);
  const Vec3 v = inc.translation();
  Pose out;
  if (config.frame == CompositionFrame::kBody) {
    out.translation = pose.translation + pose.rotation * v;
    out.rotation = pose.rotation * r;
  } else {
    out.translation = r * pose.translation + v;
    out.rotation = r * pose.rotation;
  }
  return out;
}

std::vector<Vec3> fk_window(const ActionWindow& window, const KinematicsConfig& config) {
  if (!is_valid_pose(window.start_pose, 1e-6)) {
    throw InvalidArgument("fk_window: start pose is not a rigid transform");
  }
  std::vector<Vec3> positions;
  positions.reserve(window.increments.size() + 1);
  Pose pose = window.start_pose;
  positions.push_back(pose.translation);
  for (const auto& inc : window.increments) {
    pose = compose_step(pose, inc, config);
    positions.push_back(pose.translation);
  }
  return positions;
}

double polyline_length(std::span<const Vec3> points) {
  double total = 0.0;
  for (std::size_t t = 1; t < points.size(); ++t) {
    total += (points[t] - points[t - 1]).norm();
  }
  return total;
}

double window_distance(const ActionWindow& window, const KinematicsConfig& config) {
  const auto positions = fk_window(window, config);
  return polyline_length(positions);
}

bool is_valid_pose(const Pose& pose, double tolerance) {
  if (!pose.rotation.allFinite() || !pose.translation.allFinite()) return false;
  const Mat3 gram = pose.rotation.transpose() * pose.rotation;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tolerance) return false;
  return std::abs(pose.rotation.determinant() - 1.0) <= tolerance;
}

Pose reorthonormalize(const Pose& pose) {
  require_finite_pose(pose);
  Eigen::JacobiSVD<Mat3> svd(pose.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) {
    u.col(2) *= -1.0;
  }
  return {u * v.transpose(), pose.translation};
}

}  // namespace adp::kin
