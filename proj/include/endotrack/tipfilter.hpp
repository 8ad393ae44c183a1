#pragma once

#include <optional>

#include "endotrack/geom.hpp"

namespace endotrack::tipfilter {

using Mat3x6 = Eigen::Matrix<double, 3, 6>;

struct EkfState {
  Vec3 s_c = Vec3(0, 0, 0.08);  ///< tip position, camera frame (m)
  Vec3 s_dot_i = Vec3::Zero();  ///< tip velocity, incision frame (m/s)
  Mat6 covariance = Mat6::Identity() * 1e-4;
};

struct TipObservation {
  double u_l = 0, v_l = 0;  ///< left-image tip pixel
  double d_x = 0;           ///< horizontal disparity (px)
  double timestamp = 0;     ///< capture time (s)

  Vec3 vector() const { return {u_l, v_l, d_x}; }
};

struct EkfConfig {
  double lambda_s = 0.9;
  Mat6 process_noise = default_process_noise();
  Mat3 observation_noise = default_observation_noise();
  double gap_limit = 1.0;
  double max_condition = 1e12;

  static Mat6 default_process_noise();
  static Mat3 default_observation_noise();
  void validate() const;
};

/// Transition Jacobian of `predict` with respect to (s_c, s_dot_i).
Mat6 transition_jacobian(const Vec6& camera_twist, const Mat3& r_c_i, double dt, double lambda_s);

/// Propagates the state through the constant-decay motion model while the
/// camera moves with `camera_twist` (v, w) expressed in {c}.
EkfState predict(const EkfState& state, const Vec6& camera_twist, const Mat3& r_c_i, double dt, const EkfConfig& cfg);

/// Pinhole stereo observation h(x) = (u, v, d).
Vec3 observe(const Vec3& s_c, const geom::CameraIntrinsics& intr);
Mat3x6 observation_jacobian(const Vec3& s_c, const geom::CameraIntrinsics& intr);

EkfState update(const EkfState& state, const TipObservation& z, const geom::CameraIntrinsics& intr,
                const EkfConfig& cfg);

/// Inverse of the observation model. Throws ZeroDisparity for d_x <= 0.
Vec3 triangulate(const TipObservation& z, const geom::CameraIntrinsics& intr);

/// Filter for one tracked point, bridging measurement gaps up to `gap_limit`.
class TipFilter {
 public:
  TipFilter(EkfConfig cfg, geom::CameraIntrinsics intr);

  /// Advances the clock to `t`. The estimate expires when no observation has
  /// been fused for longer than `gap_limit`.
  void predict(double t, const Vec6& camera_twist, const Mat3& r_c_i);
  /// Fuses `z` at the current filter time (measurements are applied when they
  /// arrive). The first observation after a reset initializes by triangulation.
  void update(const TipObservation& z);
  void reset();

  bool has_estimate() const { return state_.has_value(); }
  const std::optional<EkfState>& state() const { return state_; }
  double time() const { return time_; }
  double last_update() const { return last_update_; }

 private:
  EkfConfig cfg_;
  geom::CameraIntrinsics intr_;
  std::optional<EkfState> state_;
  double time_ = 0.0;
  double last_update_ = 0.0;
};

}  // namespace endotrack::tipfilter
