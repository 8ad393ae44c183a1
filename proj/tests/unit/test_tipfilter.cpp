#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "endotrack/error.hpp"
#include "endotrack/tipfilter.hpp"

using namespace endotrack;
using namespace endotrack::tipfilter;
using geom::CameraIntrinsics;

namespace {

CameraIntrinsics rig() {
  CameraIntrinsics in;
  in.fx = in.fy = 1000;
  in.cx = 479.5;
  in.cy = 269.5;
  in.baseline = 0.0016;
  return in;
}

TipObservation observation_of(const Vec3& s, const CameraIntrinsics& in, double t = 0) {
  const double z = s.z();
  return {in.fx * s.x() / z + in.cx, in.fy * s.y() / z + in.cy, in.baseline * in.fx / z, t};
}

bool spd(const Mat6& p) {
  if ((p - p.transpose()).norm() > 1e-12) return false;
  return Eigen::SelfAdjointEigenSolver<Mat6>(p).eigenvalues().minCoeff() > 0;
}

}  // namespace

TEST_CASE("triangulation inverts the observation model") {
  const auto in = rig();
  const Vec3 p = triangulate({in.cx, in.cy, 20, 0}, in);
  CHECK((p - Vec3(0, 0, 0.08)).norm() < 1e-15);
  const Vec3 q = triangulate({in.cx + in.fx * 0.1, in.cy, 20, 0}, in);
  CHECK(q.x() == doctest::Approx(0.008));
  CHECK(triangulate({in.cx, in.cy, 40, 0}, in).z() == doctest::Approx(0.04));
  try {
    triangulate({0, 0, 0, 0}, in);
    FAIL("expected ZeroDisparity");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ZeroDisparity);
  }
  CHECK_THROWS_AS(triangulate({0, 0, -1, 0}, in), Error);

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0, 960), v(0, 540), d(0.05, 200);
  for (int i = 0; i < 10000; ++i) {
    const TipObservation z{u(rng), v(rng), d(rng), 0};
    CHECK((observe(triangulate(z, in), in) - z.vector()).norm() < 1e-9);
  }
}

TEST_CASE("prediction follows the transition model") {
  EkfConfig cfg;
  EkfState x;
  x.s_c = Vec3(0.01, 0.0, 0.08);
  const auto p0 = predict(x, Vec6::Zero(), Mat3::Identity(), 0.1, cfg);
  CHECK((p0.s_c - x.s_c).norm() == 0.0);
  const Mat6 f = transition_jacobian(Vec6::Zero(), Mat3::Identity(), 0.1, cfg.lambda_s);
  CHECK((p0.covariance - (f * x.covariance * f.transpose() + cfg.process_noise)).norm() < 1e-18);
  CHECK(p0.covariance.topLeftCorner<3, 3>().trace() >
        x.covariance.topLeftCorner<3, 3>().trace() + cfg.process_noise.topLeftCorner<3, 3>().trace() - 1e-18);

  x.s_dot_i = Vec3(0.01, 0, 0);
  const auto p1 = predict(x, Vec6::Zero(), Mat3::Identity(), 0.1, cfg);
  CHECK((p1.s_c - x.s_c - Vec3(0.001, 0, 0)).norm() < 1e-15);
  CHECK((p1.s_dot_i - Vec3(0.009, 0, 0)).norm() < 1e-15);

  // Static world point, camera backing away along its optical axis.
  x.s_dot_i.setZero();
  Vec6 twist = Vec6::Zero();
  twist(2) = -0.01;
  const auto p2 = predict(x, twist, Mat3::Identity(), 0.05, cfg);
  CHECK((p2.s_c - (x.s_c + Vec3(0, 0, 0.0005))).norm() < 1e-15);

  // Rotating camera: exact re-expression agrees to second order in dt.
  twist << 0.002, -0.001, 0.003, 0.2, -0.1, 0.3;
  double prev = 0;
  for (double dt : {0.02, 0.01}) {
    const Vec3 w = twist.tail<3>();
    const Mat3 r = Eigen::AngleAxisd(w.norm() * dt, w.normalized()).toRotationMatrix();
    const Vec3 exact = r.transpose() * (x.s_c - twist.head<3>() * dt);
    const double err = (predict(x, twist, Mat3::Identity(), dt, cfg).s_c - exact).norm();
    CHECK(err < 10 * dt * dt * x.s_c.norm());
    if (prev > 0) CHECK(err < 0.35 * prev);
    prev = err;
  }
}

TEST_CASE("analytic Jacobians agree with finite differences") {
  const auto in = rig();
  EkfConfig cfg;
  Vec6 twist;
  twist << 0.01, -0.02, 0.005, 0.3, 0.1, -0.2;
  const Mat3 r = geom::rot_y(0.3) * geom::rot_x(-0.2);
  Vec6 x0;
  x0 << 0.01, -0.005, 0.09, 0.002, 0.01, -0.003;
  const double dt = 0.11;
  const Mat6 f = transition_jacobian(twist, r, dt, cfg.lambda_s);
  const Mat3x6 h = observation_jacobian(x0.head<3>(), in);
  auto step = [&](const Vec6& x) {
    EkfState s;
    s.s_c = x.head<3>();
    s.s_dot_i = x.tail<3>();
    const auto o = predict(s, twist, r, dt, cfg);
    Vec6 out;
    out << o.s_c, o.s_dot_i;
    return out;
  };
  for (int k = 0; k < 6; ++k) {
    Vec6 e = Vec6::Zero();
    e(k) = 1e-6;
    const Vec6 fd = (step(x0 + e) - step(x0 - e)) / 2e-6;
    CHECK((fd - f.col(k)).norm() < 1e-8);
    const Vec3 hd = (observe((x0 + e).head<3>(), in) - observe((x0 - e).head<3>(), in)) / 2e-6;
    CHECK((hd - h.col(k)).norm() < 1e-4 * std::max(1.0, h.col(k).norm()));
  }
}

TEST_CASE("zero innovation keeps the mean and shrinks the covariance") {
  const auto in = rig();
  EkfConfig cfg;
  EkfState x;
  x.s_c = Vec3(0.004, -0.002, 0.07);
  const auto post = update(x, observation_of(x.s_c, in), in, cfg);
  CHECK((post.s_c - x.s_c).norm() < 1e-15);
  CHECK(post.covariance.trace() < x.covariance.trace());
  const Mat3x6 h = observation_jacobian(x.s_c, in);
  const Mat3 before = h * x.covariance * h.transpose(), after = h * post.covariance * h.transpose();
  CHECK(Eigen::SelfAdjointEigenSolver<Mat3>(before - after).eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("noiseless static tip converges to the triangulated point") {
  const auto in = rig();
  EkfConfig cfg;
  const Vec3 truth(0.012, -0.007, 0.085);
  const Vec3 oracle = triangulate(observation_of(truth, in), in);
  EkfState x;
  x.s_c = truth + Vec3(0.004, -0.003, 0.005);
  for (int i = 0; i < 50; ++i) {
    x = predict(x, Vec6::Zero(), Mat3::Identity(), 0.11, cfg);
    x = update(x, observation_of(truth, in), in, cfg);
  }
  CHECK((x.s_c - oracle).norm() < 1e-4);
}

TEST_CASE("biased start: error decreases after burn-in") {
  const auto in = rig();
  EkfConfig cfg;
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 truth(0.01 * (corner % 3 - 1), 0.005, 0.08);
    const Vec3 bias(corner & 1 ? 0.005 : -0.005, corner & 2 ? 0.005 : -0.005, corner & 4 ? 0.005 : -0.005);
    EkfState x;
    x.s_c = truth + bias;
    double prev_v = 1e300;
    double peak_after_burn_in = 0;
    for (int i = 0; i < 60; ++i) {
      x = predict(x, Vec6::Zero(), Mat3::Identity(), 0.11, cfg);
      x = update(x, observation_of(truth, in), in, cfg);
      Vec6 e;
      e << x.s_c - truth, x.s_dot_i;
      // Error measured in the metric of the filter's own covariance.
      const double v = e.dot(x.covariance.ldlt().solve(e));
      if (i >= 5) {
        CHECK(v <= prev_v * (1 + 1e-9));
        peak_after_burn_in = std::max(peak_after_burn_in, (x.s_c - truth).norm());
      }
      prev_v = v;
    }
    CHECK(peak_after_burn_in < 0.02 * bias.norm());
    CHECK((x.s_c - truth).norm() < 1e-7);
  }
}

TEST_CASE("zero noise with consistent data is exact for a static tip") {
  const auto in = rig();
  EkfConfig cfg;
  cfg.process_noise.setZero();
  cfg.observation_noise.setZero();
  const Vec3 truth(-0.01, 0.003, 0.09);
  EkfState x;
  x.s_c = truth;
  x.covariance = Mat6::Identity() * 1e-6;
  // Without noise the covariance collapses; cycles run until the innovation
  // becomes singular, and every completed one is exact.
  int cycles = 0;
  try {
    for (; cycles < 10; ++cycles) {
      x = predict(x, Vec6::Zero(), Mat3::Identity(), 0.11, cfg);
      x = update(x, observation_of(truth, in), in, cfg);
      CHECK((x.s_c - truth).norm() < 1e-15);
      CHECK(x.s_dot_i.norm() < 1e-15);
    }
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NumericallySingularInnovation);
  }
  CHECK(cycles >= 2);
}

TEST_CASE("covariance stays symmetric positive-definite") {
  const auto in = rig();
  EkfConfig cfg;
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  std::normal_distribution<double> n(0, 1);
  EkfState x;
  x.s_c = Vec3(0, 0, 0.08);
  Vec3 truth = x.s_c;
  bool ok = true;
  for (int i = 0; i < 100000; ++i) {
    Vec6 twist;
    twist << 0.01 * u(rng), 0.01 * u(rng), 0.01 * u(rng), 0.2 * u(rng), 0.2 * u(rng), 0.2 * u(rng);
    const Mat3 r = geom::rot_y(u(rng)) * geom::rot_x(u(rng));
    x = predict(x, twist, r, 0.11, cfg);
    truth = Vec3(0.02 * u(rng), 0.02 * u(rng), 0.08 + 0.02 * u(rng));
    TipObservation z = observation_of(truth, in);
    z.u_l += 2 * n(rng);
    z.v_l += 2 * n(rng);
    z.d_x += n(rng);
    if (z.d_x <= 1) z.d_x = 1;
    if (!(x.s_c.z() > 0.01)) x.s_c.z() = 0.08;
    x = update(x, z, in, cfg);
    ok = ok && spd(x.covariance) && ((x.covariance - x.covariance.transpose()).norm() < 1e-12);
  }
  CHECK(ok);
}

TEST_CASE("singular innovation is reported") {
  const auto in = rig();
  EkfConfig cfg;
  cfg.observation_noise.setZero();
  EkfState x;
  x.covariance.setZero();
  try {
    update(x, observation_of(x.s_c, in), in, cfg);
    FAIL("expected NumericallySingularInnovation");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NumericallySingularInnovation);
  }
}

TEST_CASE("gap bridging decays the velocity and expires after the limit") {
  const auto in = rig();
  EkfConfig cfg;
  TipFilter f(cfg, in);
  CHECK_FALSE(f.has_estimate());
  f.update(observation_of(Vec3(0, 0, 0.08), in, 0.0));
  REQUIRE(f.has_estimate());
  EkfState seeded = *f.state();
  CHECK((seeded.s_c - Vec3(0, 0, 0.08)).norm() < 1e-12);

  // Inject a velocity directly and bridge a gap.
  TipFilter g(cfg, in);
  g.update(observation_of(Vec3(0, 0, 0.08), in, 0.0));
  EkfState x = *g.state();
  x.s_dot_i = Vec3(0.01, -0.02, 0.005);
  const double v0 = x.s_dot_i.norm();
  for (int n = 1; n <= 9; ++n) {
    x = predict(x, Vec6::Zero(), Mat3::Identity(), 0.11, cfg);
    CHECK(x.s_dot_i.norm() == doctest::Approx(std::pow(cfg.lambda_s, n) * v0).epsilon(1e-12));
  }

  double t = 0;
  for (int n = 1; n <= 9; ++n) {
    t = n * 0.11;
    f.predict(t, Vec6::Zero(), Mat3::Identity());
    CHECK(f.has_estimate());
  }
  f.predict(1.05, Vec6::Zero(), Mat3::Identity());
  CHECK_FALSE(f.has_estimate());
  f.update(observation_of(Vec3(0.01, 0, 0.07), in, 1.05));
  CHECK(f.has_estimate());
  CHECK(f.last_update() == doctest::Approx(1.05));
}

TEST_CASE("configuration invariants") {
  EkfConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lambda_s = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.gap_limit = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.observation_noise(0, 0) = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
