#include "endotrack/servo.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "endotrack/error.hpp"

namespace endotrack::servo {

const char* to_string(Method m) {
  switch (m) {
    case Method::IBVS: return "IBVS";
    case Method::IBVS_DC: return "IBVS_DC";
    case Method::IBVS3D: return "IBVS3D";
    case Method::PBVS: return "PBVS";
    case Method::HYBRID: return "HYBRID";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  for (Method m : {Method::IBVS, Method::IBVS_DC, Method::IBVS3D, Method::PBVS, Method::HYBRID})
    if (name == to_string(m)) return m;
  throw Error(Errc::ConfigInvalid, "unknown servo method '" + name + "'");
}

void ServoConfig::validate() const {
  if (!(lambda.minCoeff() > 0)) throw Error(Errc::ConfigInvalid, "servo.lambda must be positive");
  if (!(hybrid_lo >= 0 && hybrid_lo < hybrid_hi))
    throw Error(Errc::ConfigInvalid, "servo.hybrid_lo must satisfy 0 <= lo < hi");
  if (!(v_max > 0)) throw Error(Errc::ConfigInvalid, "servo.v_max must be positive");
  if (!(s_star.z() > 0)) throw Error(Errc::ConfigInvalid, "servo.s_star must lie in front of the camera");
}

Eigen::MatrixXd interaction_matrix(InteractionKind kind, const Feature3D& f) {
  const double x = f.s.x(), y = f.s.y(), z = f.s.z();
  if (!(z > 0)) throw Error(Errc::FeatureBehindCamera, "feature depth must be positive");
  switch (kind) {
    case InteractionKind::TwoD: {
      const double xn = x / z, yn = y / z;
      Eigen::MatrixXd l(2, 6);
      l << -1 / z, 0, xn / z, xn * yn, -(1 + xn * xn), yn,  //
          0, -1 / z, yn / z, 1 + yn * yn, -xn * yn, -xn;
      return l;
    }
    case InteractionKind::Depth: {
      Eigen::MatrixXd l(1, 6);
      l << 0, 0, -1, -y, x, 0;
      return l;
    }
    case InteractionKind::ThreeD: {
      Eigen::MatrixXd l(3, 6);
      l.leftCols<3>() = -Mat3::Identity();
      l.rightCols<3>() = geom::skew(f.s);
      return l;
    }
  }
  return {};
}

Eigen::MatrixXd constrain(const Eigen::MatrixXd& L, const geom::EndoscopeModel& model, double l) {
  return L * geom::twist_transform(model) * geom::incision_jacobian(l);
}

Eigen::MatrixXd damped_pinv(const Eigen::MatrixXd& m, double damping, double max_condition) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  const double smax = sv(0), smin = sv(sv.size() - 1);
  if (!(smin > 0) || smax / smin > max_condition)
    throw Error(Errc::SingularInteraction, "constrained interaction matrix is ill-conditioned");
  const double mu2 = damping * damping;
  if (m.rows() <= m.cols()) {
    const Eigen::MatrixXd g = m * m.transpose() + mu2 * Eigen::MatrixXd::Identity(m.rows(), m.rows());
    return m.transpose() * g.ldlt().solve(Eigen::MatrixXd::Identity(m.rows(), m.rows()));
  }
  const Eigen::MatrixXd g = m.transpose() * m + mu2 * Eigen::MatrixXd::Identity(m.cols(), m.cols());
  return g.ldlt().solve(m.transpose());
}

double hybrid_weight(double e, double lo, double hi) {
  if (e >= hi) return 1.0;
  if (e <= lo) return 0.0;
  return (e - lo) / (hi - lo);
}

namespace {

Vec3 ibvs(const ServoConfig& cfg, const Feature3D& f, const geom::EndoscopeModel& model, double l) {
  const Vec2 e = f.normalized() - Feature3D{cfg.s_star}.normalized();
  const Eigen::MatrixXd lp = constrain(interaction_matrix(InteractionKind::TwoD, f), model, l);
  const Vec2 rate = -cfg.lambda.head<2>().cwiseProduct(e);
  return damped_pinv(lp, cfg.damping, cfg.max_condition) * rate;
}

Vec3 ibvs_dc(const ServoConfig& cfg, const Feature3D& f, const geom::EndoscopeModel& model, double l) {
  Eigen::MatrixXd stacked(3, 6);
  stacked.topRows<2>() = interaction_matrix(InteractionKind::TwoD, f);
  stacked.bottomRows<1>() = interaction_matrix(InteractionKind::Depth, f);
  const Eigen::MatrixXd lp = constrain(stacked, model, l);
  Vec3 e;
  e.head<2>() = f.normalized() - Feature3D{cfg.s_star}.normalized();
  e(2) = f.s.z() - cfg.s_star.z();
  return damped_pinv(lp, cfg.damping, cfg.max_condition) * (-cfg.lambda.cwiseProduct(e));
}

Vec3 ibvs3d(const ServoConfig& cfg, const Feature3D& f, const geom::EndoscopeModel& model, double l) {
  const Eigen::MatrixXd lp = constrain(interaction_matrix(InteractionKind::ThreeD, f), model, l);
  const Vec3 e = f.s - cfg.s_star;
  return damped_pinv(lp, cfg.damping, cfg.max_condition) * (-cfg.lambda.cwiseProduct(e));
}

Vec3 pbvs(const ServoConfig& cfg, const geom::EndoscopeModel& model, const geom::EndoscopePose& pose,
          const Vec3& target_i) {
  const geom::JointState goal = geom::inverse_kinematics(target_i, cfg.s_star, model);
  const Vec3 tip_goal = geom::pose_from_joints(goal).tip_position();
  const Vec3 e_i = pose.tip_position() - tip_goal;
  return -(pose.rotation.transpose() * cfg.lambda.cwiseProduct(e_i));
}

}  // namespace

ServoCommand servo_command(const ServoConfig& cfg, const Feature3D& f, const geom::EndoscopeModel& model,
                           const geom::EndoscopePose& pose, const Vec3& target_i) {
  if (!(f.s.z() > 0)) throw Error(Errc::FeatureBehindCamera, "feature depth must be positive");
  ServoCommand out;
  out.e_n_norm = (f.normalized() - Feature3D{cfg.s_star}.normalized()).norm();
  switch (cfg.method) {
    case Method::IBVS: out.v_tip = ibvs(cfg, f, model, pose.l); break;
    case Method::IBVS_DC: out.v_tip = ibvs_dc(cfg, f, model, pose.l); break;
    case Method::IBVS3D: out.v_tip = ibvs3d(cfg, f, model, pose.l); break;
    case Method::PBVS:
      out.v_tip = pbvs(cfg, model, pose, target_i);
      out.weight = 1.0;
      break;
    case Method::HYBRID: {
      const double w = hybrid_weight(out.e_n_norm, cfg.hybrid_lo, cfg.hybrid_hi);
      Vec3 v = Vec3::Zero();
      if (w > 0.0) v += w * pbvs(cfg, model, pose, target_i);
      if (w < 1.0) v += (1.0 - w) * ibvs3d(cfg, f, model, pose.l);
      out.v_tip = v;
      out.weight = w;
      break;
    }
  }
  return out;
}

ServoCommand servo_command(const ServoConfig& cfg, const Feature3D& f, const geom::EndoscopeModel& model,
                           const geom::EndoscopePose& pose) {
  return servo_command(cfg, f, model, pose, geom::frames_from_pose(pose, model).camera * f.s);
}

Vec3 limit_velocity(const Vec3& v, double v_max) {
  const double n = v.norm();
  if (n <= v_max) return v;
  return v * (v_max / n);
}

}  // namespace endotrack::servo
