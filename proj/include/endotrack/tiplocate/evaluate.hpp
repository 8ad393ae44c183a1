#pragma once

#include <string>
#include <vector>

#include "endotrack/exec.hpp"
#include "endotrack/geom.hpp"
#include "endotrack/tiplocate/pipeline.hpp"

namespace endotrack::tiplocate {

/// Axis-aligned square box centred on a tip.
struct Box {
  Vec2 center = Vec2::Zero();
  double side = 200.0;
};

double iou(const Box& a, const Box& b);

/// Minimum-cost assignment of rows to columns of a (possibly rectangular)
/// cost matrix. Returns, for each row, its column or -1.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost);

struct MatchCounts {
  int tp = 0, fp = 0, fn = 0;
};

/// Boxes of side `box_side` around every tip, matched one-to-one by the
/// Hungarian method on 1 - IoU; a matched pair counts when IoU >= `min_iou`.
MatchCounts match_tips(const std::vector<Vec2>& truth, const std::vector<Vec2>& predicted, double box_side,
                       double min_iou = 0.5);

struct DetectionMetrics {
  int tp = 0, fp = 0, fn = 0;
  int frames = 0;
  int frames_with_tips = 0;  ///< frames with at least one visible ground-truth tip
  int frames_hit = 0;        ///< of those, frames with at least one true positive
  double precision = 0, recall = 0, at_least_one_rate = 0;
  double seconds = 0;

  void add(const MatchCounts& c, bool has_truth);
  void finish();
};

struct GroundTruthTip {
  Vec2 p = Vec2::Zero();  ///< full resolution
  Side side = Side::Left;
  bool visible = true;
};

struct CorpusFrame {
  std::string mask;               ///< processing-resolution mask (PGM)
  std::string left, right;        ///< optional full-resolution intensity images
  std::vector<GroundTruthTip> tips;
  std::vector<std::string> tags;  ///< e.g. "crossing", "hidden_leaf"
};

struct CorpusManifest {
  std::string base_dir;
  int image_width = 1920, image_height = 1080;
  double box_side = 200.0;
  std::vector<CorpusFrame> frames;
};

/// Reads a JSON manifest; relative paths resolve against its directory.
/// Throws ManifestInvalid with the offending key.
CorpusManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const CorpusManifest& m);

/// Runs the 2D detector on every frame (frames in parallel) and scores it.
DetectionMetrics evaluate_corpus(const CorpusManifest& m, const LocalizerConfig& cfg, Exec exec = Exec::Parallel);

}  // namespace endotrack::tiplocate
