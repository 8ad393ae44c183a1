#pragma once

#include <string>
#include <vector>

#include "endotrack/exec.hpp"
#include "endotrack/tipfilter.hpp"
#include "endotrack/tiplocate/assign.hpp"
#include "endotrack/tiplocate/graph.hpp"
#include "endotrack/tiplocate/image.hpp"
#include "endotrack/tiplocate/stereo.hpp"

namespace endotrack::tiplocate {

enum class Side { Left, Right };
const char* to_string(Side s);

/// Maps between the square processing raster and the full-resolution image.
/// The content circle is cropped as a square of side `crop_size` at
/// (`crop_x0`, `crop_y0`) and resampled to `proc_size`.
struct ProcessingGeometry {
  int full_width = 1920, full_height = 1080;
  double crop_x0 = 420, crop_y0 = 0, crop_size = 1080;
  int proc_size = 256;

  /// Content circle inscribed in the image height, centred horizontally.
  static ProcessingGeometry for_image(int width, int height, int proc_size = 256);

  double scale() const { return crop_size / proc_size; }
  Vec2 to_full(const Vec2& p) const;
  Vec2 to_proc(const Vec2& p) const;
};

struct LocalizerConfig {
  double band_inner = 0.96;     ///< inner radius of the entry band, fraction of the content radius
  double entry_spur_px = 8.0;   ///< leaves this close to their entry node are skeleton noise
  GraphOptions graph;
  StereoConfig stereo;

  void validate() const;
};

struct InstrumentDetection {
  Side side = Side::Left;
  Vec2 entry = Vec2::Zero();  ///< full resolution
  std::vector<Vec2> tips;     ///< full resolution, at most two
  std::vector<int> subgraph;  ///< node indices in the frame graph
  double chain_length = 0.0;  ///< processing-raster pixels
};

/// Assigns LEFT/RIGHT from the entry points. Throws AmbiguousSides when two
/// entries share the same x.
void classify_left_right(std::vector<InstrumentDetection>& detections, int image_width);

struct TipMeasurement {
  Side side = Side::Left;
  tipfilter::TipObservation observation;
  double score = 0.0;  ///< peak NCC
};

struct FrameResult {
  std::vector<InstrumentDetection> detections;
  std::vector<TipMeasurement> measurements;
  int rejected = 0;  ///< tips whose stereo match was not confident
  std::vector<std::string> warnings;
};

/// Skeleton graph of one mask with entry nodes extracted and noise pruned.
ToolGraph mask_graph(const BinaryMask& mask, const LocalizerConfig& cfg, Exec exec = Exec::Parallel);

/// 2D stage: instruments and tips from the processing-resolution mask.
std::vector<InstrumentDetection> detect_instruments(const BinaryMask& mask, const ProcessingGeometry& geo,
                                                    const LocalizerConfig& cfg, Exec exec = Exec::Parallel);

/// 2D stage of a frame. AmbiguousSides becomes a warning and an empty result.
FrameResult detect_frame(const BinaryMask& mask, const ProcessingGeometry& geo, const LocalizerConfig& cfg,
                         Exec exec = Exec::Parallel);
/// Stereo matching of every detected tip; unconfident matches are counted in `rejected`.
void measure_tips(FrameResult& r, const GrayImage& left, const GrayImage& right, const LocalizerConfig& cfg,
                  double timestamp, Exec exec = Exec::Parallel);

/// Full frame: detection on the left mask, then stereo matching of each tip
/// on the full-resolution pair. Frames without instruments give empty results.
FrameResult localize_frame(const BinaryMask& mask, const GrayImage& left, const GrayImage& right,
                           const ProcessingGeometry& geo, const LocalizerConfig& cfg, double timestamp = 0.0,
                           Exec exec = Exec::Parallel);

}  // namespace endotrack::tiplocate
