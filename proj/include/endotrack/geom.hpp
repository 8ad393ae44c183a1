#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace endotrack {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;

}  // namespace endotrack

namespace endotrack::geom {

Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);
Mat3 skew(const Vec3& v);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

/// Rotation plus translation mapping coordinates of frame {j} into frame {i}.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_rotation(const Mat3& r) { return {r, Vec3::Zero()}; }
  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }

  RigidTransform operator*(const RigidTransform& rhs) const;
  Vec3 operator*(const Vec3& point) const { return rotation * point + translation; }
  RigidTransform inverse() const;
  Eigen::Matrix4d matrix() const;
};

/// Endoscope joints about the incision point.
struct JointState {
  double theta1 = 0.0;  ///< rotation of {t} about the incision y-axis
  double theta2 = 0.0;  ///< subsequent rotation about x
  double l = 0.05;      ///< inserted length along the shaft (m)
};

struct CameraIntrinsics {
  double fx = 270.0;
  double fy = 270.0;
  double cx = 479.5;
  double cy = 269.5;
  double baseline = 0.0016;  ///< stereo baseline b_c (m)
  int width = 960;
  int height = 540;

  /// Square pixels, principal point at the image centre, and a focal length
  /// such that `fov` spans the content circle (whose diameter is the image height).
  static CameraIntrinsics from_fov(int width, int height, double fov, double baseline);

  Vec2 content_center() const { return {0.5 * (width - 1), 0.5 * (height - 1)}; }
  double content_radius() const { return 0.5 * height; }
  Vec2 project(const Vec3& p) const { return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy}; }
  void validate() const;
};

struct EndoscopeModel {
  double alpha = 0.0;               ///< oblique viewing angle, R^t_c = R_x(alpha)
  Vec3 tip_offset = Vec3::Zero();   ///< p^t_c
  double fov = 1.5707963267948966;  ///< angular diameter of the content circle
  CameraIntrinsics intrinsics;

  static EndoscopeModel make(double alpha, const Vec3& tip_offset, double fov, int width, int height,
                             double baseline = 0.0016);

  Mat3 camera_rotation_in_tip() const { return rot_x(alpha); }
  RigidTransform tip_to_camera() const { return {rot_x(alpha), tip_offset}; }
  void validate() const;
};

/// Full scope orientation. The joint triple fixes roll implicitly; the
/// simulator integrates with zero roll rate and keeps the whole rotation.
struct EndoscopePose {
  Mat3 rotation = Mat3::Identity();  ///< R^i_t
  double l = 0.05;

  Vec3 tip_position() const { return l * rotation.col(2); }
};

EndoscopePose pose_from_joints(const JointState& joints);
/// Shaft direction to (theta1, theta2, l); drops the roll component.
JointState joints_from_pose(const EndoscopePose& pose);
/// Roll of `pose` relative to the zero-roll convention of its own joints (rad).
double roll_deviation(const EndoscopePose& pose);

struct KinematicFrames {
  RigidTransform tip;     ///< T^i_t
  RigidTransform camera;  ///< T^i_c (left camera)
};

KinematicFrames forward_kinematics(const JointState& joints, const EndoscopeModel& model);
KinematicFrames frames_from_pose(const EndoscopePose& pose, const EndoscopeModel& model);
/// Right camera of a rectified pair: offset by the baseline along the left camera x-axis.
RigidTransform right_camera(const RigidTransform& left_camera, double baseline);

/// Equation used to recover the inserted length of an IK candidate.
enum class LengthEquation { Fx, Fy, Fz };

struct IkCandidate {
  JointState joints;
  int theta1_branch = 0;  ///< which root of a1 sin + b1 cos = c1
  int cos_root = 0;       ///< which root of the quadratic in cos(theta2)
  LengthEquation length_equation = LengthEquation::Fz;
  bool sign_flipped = false;  ///< theta2 had to be made negative
  double residual = 0.0;      ///< |T^i_c* s* - target| (m)
  bool valid = false;
};

/// All four analytic candidates, in (theta1 branch, cos root) order.
/// Throws Unreachable or Degenerate as inverse_kinematics does.
std::vector<IkCandidate> enumerate_ik_candidates(const Vec3& target_i, const Vec3& s_star,
                                                 const EndoscopeModel& model);

/// Joints that place `target_i` (incision frame) at `s_star` in the camera frame.
/// Keeps the theta1 root of smallest magnitude, then the theta2 of smallest magnitude.
JointState inverse_kinematics(const Vec3& target_i, const Vec3& s_star, const EndoscopeModel& model);

/// Incision constraint: tip linear velocity to tip twist (throws DegenerateLength for l <= 0).
Mat63 incision_jacobian(double l);
/// Twist transformation J^c_t from the tip frame to the camera frame.
Mat6 twist_transform(const EndoscopeModel& model);

/// One explicit Euler step of the tip under linear velocity `v_tip` (frame {t}).
/// The shaft is re-aimed through the incision point with a minimal rotation,
/// so no roll is introduced and the incision constraint holds exactly.
EndoscopePose integrate_tip_velocity(const EndoscopePose& pose, const Vec3& v_tip, double dt);

/// Camera twist (v, w) in the frame of `from`, that moves `from` to `to` in `dt`.
Vec6 relative_twist(const RigidTransform& from, const RigidTransform& to, double dt);

}  // namespace endotrack::geom
