#include "endotrack/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "endotrack/error.hpp"

namespace endotrack::geom {

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(a, two_pi);
  if (w <= -std::numbers::pi) w += two_pi;
  if (w > std::numbers::pi) w -= two_pi;
  return w;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  return {rotation * rhs.rotation, rotation * rhs.translation + translation};
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = rotation.transpose();
  return {rt, -rt * translation};
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

CameraIntrinsics CameraIntrinsics::from_fov(int width, int height, double fov, double baseline) {
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  k.fx = k.fy = 0.5 * height / std::tan(0.5 * fov);
  k.cx = 0.5 * (width - 1);
  k.cy = 0.5 * (height - 1);
  k.baseline = baseline;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0 && fy > 0 && baseline > 0))
    throw Error(Errc::ConfigInvalid, "intrinsics: fx, fy and baseline must be positive");
  if (width <= 0 || height <= 0 || cx < 0 || cy < 0 || cx >= width || cy >= height)
    throw Error(Errc::ConfigInvalid, "intrinsics: principal point outside the image");
}

EndoscopeModel EndoscopeModel::make(double alpha, const Vec3& tip_offset, double fov, int width,
                                    int height, double baseline) {
  EndoscopeModel m;
  m.alpha = alpha;
  m.tip_offset = tip_offset;
  m.fov = fov;
  m.intrinsics = CameraIntrinsics::from_fov(width, height, fov, baseline);
  return m;
}

void EndoscopeModel::validate() const {
  if (!(fov > 0 && fov < std::numbers::pi))
    throw Error(Errc::ConfigInvalid, "endoscope: fov must lie in (0, pi)");
  if (!(alpha >= 0 && alpha < 0.5 * std::numbers::pi))
    throw Error(Errc::ConfigInvalid, "endoscope: alpha must lie in [0, pi/2)");
  intrinsics.validate();
}

EndoscopePose pose_from_joints(const JointState& j) {
  return {rot_y(j.theta1) * rot_x(j.theta2), j.l};
}

JointState joints_from_pose(const EndoscopePose& pose) {
  const Vec3 d = pose.rotation.col(2);
  JointState j;
  j.theta2 = -std::asin(std::clamp(d.y(), -1.0, 1.0));
  j.theta1 = std::atan2(d.x(), d.z());
  j.l = pose.l;
  return j;
}

double roll_deviation(const EndoscopePose& pose) {
  const JointState j = joints_from_pose(pose);
  const Mat3 rel = (rot_y(j.theta1) * rot_x(j.theta2)).transpose() * pose.rotation;
  return std::atan2(rel(1, 0), rel(0, 0));
}

KinematicFrames frames_from_pose(const EndoscopePose& pose, const EndoscopeModel& model) {
  KinematicFrames f;
  f.tip = {pose.rotation, pose.tip_position()};
  f.camera = f.tip * model.tip_to_camera();
  return f;
}

KinematicFrames forward_kinematics(const JointState& joints, const EndoscopeModel& model) {
  return frames_from_pose(pose_from_joints(joints), model);
}

RigidTransform right_camera(const RigidTransform& left, double baseline) {
  return left * RigidTransform::from_translation(Vec3(baseline, 0, 0));
}

// ---------------------------------------------------------------------------
// Inverse kinematics
//
// With q = R_x(alpha) s* + p^t_c the closure equation reads
//   R_y(t1) R_x(t2) (q + l e3) = p
// Component-wise:
//   f_x = qx c1 + (qy s2 + (qz + l) c2) s1 - px
//   f_y = qy c2 - (qz + l) s2 - py
//   f_z = -qx s1 + (qy s2 + (qz + l) c2) c1 - pz

namespace {

Vec3 closure_residual(const Vec3& p, const Vec3& q, double t1, double t2, double l) {
  const double c1 = std::cos(t1), s1 = std::sin(t1), c2 = std::cos(t2), s2 = std::sin(t2);
  const double m = q.y() * s2 + (q.z() + l) * c2;
  return {q.x() * c1 + m * s1 - p.x(), q.y() * c2 - (q.z() + l) * s2 - p.y(),
          -q.x() * s1 + m * c1 - p.z()};
}

LengthEquation pick_length_equation(double t1, double t2) {
  if (std::abs(std::sin(t2)) > 0.5) return LengthEquation::Fy;
  if (std::abs(std::sin(t1)) > 0.5) return LengthEquation::Fx;
  return LengthEquation::Fz;
}

double length_from(LengthEquation eq, const Vec3& p, const Vec3& q, double t1, double t2) {
  const double c1 = std::cos(t1), s1 = std::sin(t1), c2 = std::cos(t2), s2 = std::sin(t2);
  switch (eq) {
    case LengthEquation::Fx: return ((p.x() - q.x() * c1) / s1 - q.y() * s2) / c2 - q.z();
    case LengthEquation::Fy: return (q.y() * c2 - p.y()) / s2 - q.z();
    case LengthEquation::Fz: return ((p.z() + q.x() * s1) / c1 - q.y() * s2) / c2 - q.z();
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// The two equations not used for the length; zero for the right sign of theta2.
double unused_residual(LengthEquation eq, const Vec3& r) {
  switch (eq) {
    case LengthEquation::Fx: return std::hypot(r.y(), r.z());
    case LengthEquation::Fy: return std::hypot(r.x(), r.z());
    case LengthEquation::Fz: return std::hypot(r.x(), r.y());
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace

std::vector<IkCandidate> enumerate_ik_candidates(const Vec3& p, const Vec3& s_star,
                                                 const EndoscopeModel& model) {
  const double scale = std::max(1.0, p.norm());
  if (p.norm() < 1e-12) throw Error(Errc::Degenerate, "target coincides with the incision point");

  const Vec3 q = model.camera_rotation_in_tip() * s_star + model.tip_offset;

  // theta1 from a1 sin + b1 cos = c1, obtained by equating l from f_x and f_z.
  const double a1 = -p.z(), b1 = p.x(), c1 = q.x();
  const double r1sq = a1 * a1 + b1 * b1;
  if (r1sq < 1e-24 || c1 * c1 > r1sq * (1.0 + 1e-12))
    throw Error(Errc::Unreachable, "no theta1 satisfies a1 sin + b1 cos = c1");
  const double phi = std::atan2(a1, b1);
  const double spread = std::atan2(std::sqrt(std::max(0.0, r1sq - c1 * c1)), c1);
  const std::array<double, 2> theta1{wrap_angle(phi + spread), wrap_angle(phi - spread)};

  // Quadratic in cos(theta2) from f_x^2 + f_z^2 with l taken from f_y.
  const double k = p.x() * p.x() + p.z() * p.z() - q.x() * q.x();
  const double a2 = p.y() * p.y() + k;
  const double b2 = -2.0 * q.y() * p.y();
  const double c2 = q.y() * q.y() - k;
  const double disc = b2 * b2 - 4.0 * a2 * c2;
  if (a2 <= 1e-24 || disc < -1e-18 * scale)
    throw Error(Errc::Unreachable, "quadratic in cos(theta2) has no real root");
  const double sq = std::sqrt(std::max(0.0, disc));
  // Numerically stable pair of roots.
  const double qq = -0.5 * (b2 + std::copysign(sq, b2 == 0.0 ? 1.0 : b2));
  std::array<double, 2> cos_roots;
  if (std::abs(qq) > 1e-300) {
    cos_roots = {qq / a2, c2 / qq};
  } else {
    cos_roots = {0.0, 0.0};
  }
  if (cos_roots[0] < cos_roots[1]) std::swap(cos_roots[0], cos_roots[1]);

  const double tol = 1e-9 * scale;
  std::vector<IkCandidate> out;
  out.reserve(4);
  for (int b = 0; b < 2; ++b) {
    for (int r = 0; r < 2; ++r) {
      IkCandidate cand;
      cand.theta1_branch = b;
      cand.cos_root = r;
      const double t1 = theta1[b];
      const double c = cos_roots[r];
      if (!(c >= -1.0 - 1e-12 && c <= 1.0 + 1e-12)) {
        cand.joints = {t1, std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN()};
        cand.residual = std::numeric_limits<double>::infinity();
        out.push_back(cand);
        continue;
      }
      const double t2abs = std::acos(std::clamp(c, -1.0, 1.0));
      const LengthEquation eq = pick_length_equation(t1, t2abs);
      cand.length_equation = eq;

      // Try the positive root first; confirm with the two unused equations.
      double t2 = t2abs;
      double l = length_from(eq, p, q, t1, t2);
      double res = unused_residual(eq, closure_residual(p, q, t1, t2, l));
      if (!(res <= tol) && t2abs > 0.0) {
        const double l_neg = length_from(eq, p, q, t1, -t2abs);
        const double res_neg = unused_residual(eq, closure_residual(p, q, t1, -t2abs, l_neg));
        if (res_neg < res || !std::isfinite(res)) {
          t2 = -t2abs;
          l = l_neg;
          res = res_neg;
          cand.sign_flipped = true;
        }
      }
      cand.joints = {wrap_angle(t1), wrap_angle(t2), l};
      cand.residual = closure_residual(p, q, t1, t2, l).norm();
      cand.valid = std::isfinite(l) && l > 0.0 && cand.residual <= 1e-6 * scale;
      out.push_back(cand);
    }
  }
  return out;
}

JointState inverse_kinematics(const Vec3& target_i, const Vec3& s_star, const EndoscopeModel& model) {
  if (!(target_i.z() > 0.0)) throw Error(Errc::Unreachable, "target must lie inside the body wall (z > 0)");
  if (!(s_star.z() > 0.0)) throw Error(Errc::Unreachable, "desired feature must lie in front of the camera");
  const auto candidates = enumerate_ik_candidates(target_i, s_star, model);

  const IkCandidate* best = nullptr;
  for (const auto& c : candidates) {
    if (!c.valid) continue;
    if (best == nullptr) {
      best = &c;
      continue;
    }
    const double d1 = std::abs(c.joints.theta1) - std::abs(best->joints.theta1);
    if (d1 < -1e-12 || (std::abs(d1) <= 1e-12 && std::abs(c.joints.theta2) < std::abs(best->joints.theta2)))
      best = &c;
  }
  if (best == nullptr) throw Error(Errc::Unreachable, "no candidate with positive insertion length");
  return best->joints;
}

Mat63 incision_jacobian(double l) {
  if (!(l > 0.0)) throw Error(Errc::DegenerateLength, "inserted length must be positive");
  Mat63 j = Mat63::Zero();
  j.topRows<3>().setIdentity();
  j(3, 1) = -1.0 / l;
  j(4, 0) = 1.0 / l;
  return j;
}

Mat6 twist_transform(const EndoscopeModel& model) {
  const Mat3 r_c_t = model.camera_rotation_in_tip().transpose();
  Mat6 j = Mat6::Zero();
  j.topLeftCorner<3, 3>() = r_c_t;
  j.topRightCorner<3, 3>() = -r_c_t * skew(model.tip_offset);
  j.bottomRightCorner<3, 3>() = r_c_t;
  return j;
}

EndoscopePose integrate_tip_velocity(const EndoscopePose& pose, const Vec3& v_tip, double dt) {
  const Vec3 p = pose.tip_position();
  const Vec3 p_next = p + pose.rotation * v_tip * dt;
  const double l_next = p_next.norm();
  if (!(l_next > 1e-9)) throw Error(Errc::DegenerateLength, "tip driven onto the incision point");
  const Vec3 d = pose.rotation.col(2);
  const Vec3 d_next = p_next / l_next;
  const Mat3 step = Eigen::Quaterniond::FromTwoVectors(d, d_next).toRotationMatrix();
  EndoscopePose next;
  next.rotation = step * pose.rotation;
  // Re-orthonormalize to keep accumulated round-off bounded.
  next.rotation = Eigen::Quaterniond(next.rotation).normalized().toRotationMatrix();
  next.l = l_next;
  return next;
}

Vec6 relative_twist(const RigidTransform& from, const RigidTransform& to, double dt) {
  const RigidTransform rel = from.inverse() * to;
  const Eigen::AngleAxisd aa(rel.rotation);
  Vec6 t;
  t.head<3>() = rel.translation / dt;
  t.tail<3>() = aa.axis() * aa.angle() / dt;
  return t;
}

}  // namespace endotrack::geom
