#include "endotrack/tipfilter.hpp"

#include <Eigen/Dense>

#include "endotrack/error.hpp"

namespace endotrack::tipfilter {

Mat6 EkfConfig::default_process_noise() {
  Vec6 sd;
  sd << 1e-3, 1e-3, 1e-3, 5e-3, 5e-3, 5e-3;
  return sd.cwiseAbs2().asDiagonal();
}

Mat3 EkfConfig::default_observation_noise() { return Vec3(2, 2, 1).cwiseAbs2().asDiagonal(); }

namespace {

bool psd(const Eigen::MatrixXd& m) {
  if ((m - m.transpose()).norm() > 1e-12 * std::max(1.0, m.norm())) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  return es.eigenvalues().minCoeff() >= -1e-15 * std::max(1.0, m.norm());
}

}  // namespace

void EkfConfig::validate() const {
  if (!(lambda_s > 0 && lambda_s < 1)) throw Error(Errc::ConfigInvalid, "ekf.lambda_s must lie in (0, 1)");
  if (!psd(process_noise)) throw Error(Errc::ConfigInvalid, "ekf.process_noise must be positive-semidefinite");
  if (!psd(observation_noise)) throw Error(Errc::ConfigInvalid, "ekf.observation_noise must be positive-semidefinite");
  if (!(gap_limit > 0)) throw Error(Errc::ConfigInvalid, "ekf.gap_limit must be positive");
}

Mat6 transition_jacobian(const Vec6& twist, const Mat3& r_c_i, double dt, double lambda_s) {
  Mat6 f = Mat6::Zero();
  f.topLeftCorner<3, 3>() = Mat3::Identity() - dt * geom::skew(twist.tail<3>());
  f.topRightCorner<3, 3>() = dt * r_c_i;
  f.bottomRightCorner<3, 3>() = lambda_s * Mat3::Identity();
  return f;
}

EkfState predict(const EkfState& x, const Vec6& twist, const Mat3& r_c_i, double dt, const EkfConfig& cfg) {
  EkfState out;
  const Vec3 camera_term = -twist.head<3>() + x.s_c.cross(twist.tail<3>());
  out.s_c = x.s_c + dt * (r_c_i * x.s_dot_i + camera_term);
  out.s_dot_i = cfg.lambda_s * x.s_dot_i;
  const Mat6 f = transition_jacobian(twist, r_c_i, dt, cfg.lambda_s);
  out.covariance = f * x.covariance * f.transpose() + cfg.process_noise;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

Vec3 observe(const Vec3& s, const geom::CameraIntrinsics& in) {
  return {in.fx * s.x() / s.z() + in.cx, in.fy * s.y() / s.z() + in.cy, in.baseline * in.fx / s.z()};
}

Mat3x6 observation_jacobian(const Vec3& s, const geom::CameraIntrinsics& in) {
  const double iz = 1.0 / s.z(), iz2 = iz * iz;
  Mat3x6 h = Mat3x6::Zero();
  h(0, 0) = in.fx * iz;
  h(0, 2) = -in.fx * s.x() * iz2;
  h(1, 1) = in.fy * iz;
  h(1, 2) = -in.fy * s.y() * iz2;
  h(2, 2) = -in.baseline * in.fx * iz2;
  return h;
}

EkfState update(const EkfState& x, const TipObservation& z, const geom::CameraIntrinsics& in, const EkfConfig& cfg) {
  if (!(x.s_c.z() > 0)) throw Error(Errc::FeatureBehindCamera, "filter state lies behind the camera");
  const Mat3x6 h = observation_jacobian(x.s_c, in);
  Mat3 s = h * x.covariance * h.transpose() + cfg.observation_noise;
  s = 0.5 * (s + s.transpose()).eval();
  const Vec3 ev = Eigen::SelfAdjointEigenSolver<Mat3>(s, Eigen::EigenvaluesOnly).eigenvalues();
  if (!(ev(0) > 1e-280) || ev(2) / ev(0) > cfg.max_condition)
    throw Error(Errc::NumericallySingularInnovation, "innovation covariance is numerically singular");
  const Eigen::Matrix<double, 6, 3> k = s.ldlt().solve(h * x.covariance).transpose();
  const Vec3 innovation = z.vector() - observe(x.s_c, in);
  Vec6 mean;
  mean << x.s_c, x.s_dot_i;
  mean += k * innovation;

  EkfState out;
  out.s_c = mean.head<3>();
  out.s_dot_i = mean.tail<3>();
  const Mat6 a = Mat6::Identity() - k * h;
  out.covariance = a * x.covariance * a.transpose() + k * cfg.observation_noise * k.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

Vec3 triangulate(const TipObservation& z, const geom::CameraIntrinsics& in) {
  if (!(z.d_x > 0)) throw Error(Errc::ZeroDisparity, "disparity must be positive");
  const double depth = in.baseline * in.fx / z.d_x;
  return {(z.u_l - in.cx) * depth / in.fx, (z.v_l - in.cy) * depth / in.fy, depth};
}

TipFilter::TipFilter(EkfConfig cfg, geom::CameraIntrinsics intr) : cfg_(std::move(cfg)), intr_(intr) {
  cfg_.validate();
}

void TipFilter::predict(double t, const Vec6& twist, const Mat3& r_c_i) {
  const double dt = t - time_;
  time_ = t;
  if (!state_) return;
  if (t - last_update_ > cfg_.gap_limit) {
    state_.reset();
    return;
  }
  if (dt > 0) state_ = tipfilter::predict(*state_, twist, r_c_i, dt, cfg_);
}

void TipFilter::update(const TipObservation& z) {
  if (!state_) {
    EkfState init;
    init.s_c = triangulate(z, intr_);
    // Position covariance mapped back from pixel noise through the local inverse of h.
    const Mat3 hinv = observation_jacobian(init.s_c, intr_).leftCols<3>().inverse();
    init.covariance = Mat6::Zero();
    init.covariance.topLeftCorner<3, 3>() =
        hinv * cfg_.observation_noise * hinv.transpose() + Mat3::Identity() * 1e-8;
    init.covariance.bottomRightCorner<3, 3>() = Mat3::Identity() * 1e-4;
    state_ = init;
  } else {
    state_ = tipfilter::update(*state_, z, intr_, cfg_);
  }
  last_update_ = time_;
}

void TipFilter::reset() { state_.reset(); }

}  // namespace endotrack::tipfilter
