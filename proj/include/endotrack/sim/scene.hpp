#pragma once

#include <optional>
#include <vector>

#include "endotrack/exec.hpp"
#include "endotrack/geom.hpp"
#include "endotrack/tiplocate/image.hpp"
#include "endotrack/tiplocate/pipeline.hpp"

namespace endotrack::sim {

using tiplocate::Side;

struct Capsule {
  Vec3 a = Vec3::Zero(), b = Vec3::Zero();
  double radius = 0.0025;
  int instrument = 0;
};

/// Nearest ray parameter t > 0 with origin + t dir on the capsule surface
/// (`dir` need not be normalized), or nullopt.
std::optional<double> intersect(const Capsule& c, const Vec3& origin, const Vec3& dir);

struct Waypoint {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
};

/// Piecewise-linear tip trajectory. Holds the first point before its time.
struct TipScript {
  std::vector<Waypoint> points;

  /// Throws ScriptExhausted past the last waypoint.
  Vec3 at(double t) const;
  double end() const { return points.empty() ? 0.0 : points.back().t; }
  void validate() const;
};

/// Straight rigid instrument through its trocar `pivot`, optionally with two jaws.
struct Instrument {
  Side side = Side::Left;
  Vec3 pivot = Vec3::Zero();  ///< trocar point, incision frame
  Vec3 tip = Vec3::Zero();    ///< end of the shaft, or jaw hinge for graspers
  double radius = 0.0025;
  double jaw_length = 0.0;    ///< 0 for single-tip tools
  double jaw_opening = 0.0;   ///< half-angle between the jaws (rad)
  double jaw_radius = 0.0012;
  TipScript script;

  Vec3 axis() const { return (tip - pivot).normalized(); }
  std::vector<Capsule> capsules(int index) const;
  /// Distal ends: one for a plain shaft, two jaw ends for graspers.
  std::vector<Vec3> tip_points() const;
  /// Mean of the distal ends, the point the supervisor tracks.
  Vec3 tracked_point() const;
};

struct Scene {
  std::vector<Instrument> instruments;
  unsigned texture_seed = 1;
  double tissue_depth = 0.25;  ///< background plane z = tissue_depth in the incision frame

  void validate() const;
};

/// Moves every scripted tip to time `t`. Throws ScriptExhausted when a
/// script has ended.
void step_scene(Scene& scene, double t);

struct TipTruth {
  Side side = Side::Left;
  int instrument = 0;
  Vec3 p_c = Vec3::Zero();   ///< left camera frame
  Vec2 pixel = Vec2::Zero(); ///< left image, full resolution
  bool visible = false;
};

struct RenderOptions {
  bool mask = true;
  bool intensity = true;
  bool right_mask = false;
  int proc_size = 256;
  /// When non-empty, intensity is rendered only inside these rectangles (both views); the rest stays 0.
  std::vector<tiplocate::PixelRect> regions;
};

struct StereoFrame {
  tiplocate::BinaryMask mask_left, mask_right;  ///< processing raster
  tiplocate::GrayImage left, right;             ///< full resolution
  std::vector<TipTruth> tips;
};

/// Capsules of the scene expressed in the frame of `camera`.
std::vector<Capsule> camera_capsules(const Scene& scene, const geom::RigidTransform& camera);

/// Perspective rendering of the scene through the calibrated stereo pair.
StereoFrame render_stereo(const Scene& scene, const geom::RigidTransform& camera_left,
                          const geom::CameraIntrinsics& intr, const RenderOptions& opt = {},
                          Exec exec = Exec::Parallel);

/// Ground-truth distal ends with visibility (in view, in front, not hidden by another instrument).
std::vector<TipTruth> tip_truth(const Scene& scene, const geom::RigidTransform& camera_left,
                                const geom::CameraIntrinsics& intr);

}  // namespace endotrack::sim
