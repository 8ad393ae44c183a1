#pragma once

#include <string>

#include <Eigen/Core>

#include "endotrack/geom.hpp"

namespace endotrack::servo {

enum class Method { IBVS, IBVS_DC, IBVS3D, PBVS, HYBRID };

const char* to_string(Method m);
Method method_from_string(const std::string& name);

enum class InteractionKind { TwoD, Depth, ThreeD };

/// Feature point in the camera frame.
struct Feature3D {
  Vec3 s = Vec3(0, 0, 0.08);

  Vec2 normalized() const { return {s.x() / s.z(), s.y() / s.z()}; }
};

struct ServoConfig {
  Vec3 lambda = Vec3::Ones();  ///< per-axis gain (1/s)
  Method method = Method::HYBRID;
  double hybrid_hi = 0.6;  ///< |e_n| at or above which the hybrid law is pure PBVS
  double hybrid_lo = 0.3;  ///< |e_n| at or below which it is pure 3D IBVS
  double v_max = 0.02;     ///< tip speed limit (m/s)
  Vec3 s_star = Vec3(0, 0, 0.08);
  double damping = 1e-6;        ///< damped least-squares regularization
  double max_condition = 1e8;   ///< above this L' is declared singular

  void validate() const;
};

/// L_2D (2x6), L_z (1x6) or L_3D (3x6). Throws FeatureBehindCamera for z <= 0.
Eigen::MatrixXd interaction_matrix(InteractionKind kind, const Feature3D& f);

/// L' = L J^c_t J_i, mapping the tip linear velocity to the feature rate.
Eigen::MatrixXd constrain(const Eigen::MatrixXd& L, const geom::EndoscopeModel& model, double l);

/// Damped least-squares pseudo-inverse. Throws SingularInteraction when the
/// condition number of `m` exceeds `max_condition`.
Eigen::MatrixXd damped_pinv(const Eigen::MatrixXd& m, double damping, double max_condition);

/// Piecewise-linear PBVS weight of the hybrid law.
double hybrid_weight(double e_n_norm, double lo, double hi);

struct ServoCommand {
  Vec3 v_tip = Vec3::Zero();  ///< frame {t}, before speed limiting
  double weight = 0.0;        ///< PBVS share (HYBRID), 1 for PBVS, 0 otherwise
  double e_n_norm = 0.0;
};

/// Tip velocity that drives `f` towards `cfg.s_star` under the chosen law.
/// `target_i` is the tracked point in {i}; PBVS and HYBRID solve the inverse
/// kinematics for it (may throw Unreachable).
ServoCommand servo_command(const ServoConfig& cfg, const Feature3D& f, const geom::EndoscopeModel& model,
                           const geom::EndoscopePose& pose, const Vec3& target_i);

/// Same, with `target_i` recovered from `f` through the current pose.
ServoCommand servo_command(const ServoConfig& cfg, const Feature3D& f, const geom::EndoscopeModel& model,
                           const geom::EndoscopePose& pose);

/// Uniform scaling to at most `v_max`, direction preserved.
Vec3 limit_velocity(const Vec3& v, double v_max);

}  // namespace endotrack::servo
