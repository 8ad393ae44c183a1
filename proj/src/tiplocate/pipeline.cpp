#include "endotrack/tiplocate/pipeline.hpp"

#include <algorithm>

#include "endotrack/error.hpp"
#include "endotrack/tiplocate/skeleton.hpp"

namespace endotrack::tiplocate {

const char* to_string(Side s) { return s == Side::Left ? "LEFT" : "RIGHT"; }

ProcessingGeometry ProcessingGeometry::for_image(int width, int height, int proc_size) {
  ProcessingGeometry g;
  g.full_width = width;
  g.full_height = height;
  g.crop_size = std::min(width, height);
  g.crop_x0 = 0.5 * (width - g.crop_size);
  g.crop_y0 = 0.5 * (height - g.crop_size);
  g.proc_size = proc_size;
  return g;
}

Vec2 ProcessingGeometry::to_full(const Vec2& p) const {
  return Vec2(crop_x0, crop_y0) + (p + Vec2::Constant(0.5)) * scale() - Vec2::Constant(0.5);
}

Vec2 ProcessingGeometry::to_proc(const Vec2& p) const {
  return (p + Vec2::Constant(0.5) - Vec2(crop_x0, crop_y0)) / scale() - Vec2::Constant(0.5);
}

void LocalizerConfig::validate() const {
  if (!(band_inner > 0 && band_inner < 1)) throw Error(Errc::ConfigInvalid, "localizer.band_inner must lie in (0, 1)");
  if (stereo.window < 4 || stereo.max_disparity < 1)
    throw Error(Errc::ConfigInvalid, "localizer.stereo window/max_disparity too small");
  if (!(stereo.min_ncc > -1 && stereo.min_ncc < 1)) throw Error(Errc::ConfigInvalid, "localizer.stereo.min_ncc out of range");
}

void classify_left_right(std::vector<InstrumentDetection>& dets, int image_width) {
  if (dets.size() == 1) {
    dets[0].side = dets[0].entry.x() < 0.5 * (image_width - 1) ? Side::Left : Side::Right;
    return;
  }
  if (dets.size() != 2) return;
  if (dets[0].entry.x() == dets[1].entry.x())
    throw Error(Errc::AmbiguousSides, "both entry points lie on the same vertical line");
  const double mid = 0.5 * (dets[0].entry.x() + dets[1].entry.x());
  for (auto& d : dets) d.side = d.entry.x() < mid ? Side::Left : Side::Right;
  if (dets[0].side == Side::Right) std::swap(dets[0], dets[1]);
}

ToolGraph mask_graph(const BinaryMask& mask, const LocalizerConfig& cfg, Exec exec) {
  ToolGraph g = build_graph(skeletonize(mask, exec), cfg.graph);
  extract_entry_nodes(g, mask, EntryBand::for_content(mask.width, cfg.band_inner));
  for (int leaf : g.leaves()) {
    const auto inc = g.incident(leaf);
    const auto& e = g.edges[inc[0]];
    if (g.nodes[e.other(leaf)].entry && e.length < cfg.entry_spur_px && g.degree(e.other(leaf)) > 1)
      g.remove_node(leaf);
  }
  return g;
}

std::vector<InstrumentDetection> detect_instruments(const BinaryMask& mask, const ProcessingGeometry& geo,
                                                    const LocalizerConfig& cfg, Exec exec) {
  ToolGraph g = mask_graph(mask, cfg, exec);
  const auto candidates = assign_tips(g);
  std::vector<InstrumentDetection> out;
  for (const auto& c : candidates) {
    InstrumentDetection d;
    d.entry = geo.to_full(g.nodes[c.entry].p);
    for (int t : c.tips) d.tips.push_back(geo.to_full(g.nodes[t].p));
    d.subgraph = c.nodes;
    d.chain_length = c.chain_length;
    out.push_back(std::move(d));
  }
  classify_left_right(out, geo.full_width);
  return out;
}

FrameResult detect_frame(const BinaryMask& mask, const ProcessingGeometry& geo, const LocalizerConfig& cfg, Exec exec) {
  FrameResult r;
  try {
    r.detections = detect_instruments(mask, geo, cfg, exec);
  } catch (const Error& e) {
    if (e.code() != Errc::AmbiguousSides) throw;
    r.warnings.emplace_back(e.what());
  }
  return r;
}

void measure_tips(FrameResult& r, const GrayImage& left, const GrayImage& right, const LocalizerConfig& cfg,
                  double timestamp, Exec exec) {
  for (const auto& d : r.detections)
    for (const Vec2& tip : d.tips) {
      try {
        const StereoMatch m = stereo_match(left, right, tip, cfg.stereo, exec);
        r.measurements.push_back({d.side, {tip.x(), tip.y(), m.disparity, timestamp}, m.score});
      } catch (const Error& e) {
        if (e.code() != Errc::LowConfidence) throw;
        ++r.rejected;
        r.warnings.emplace_back(e.what());
      }
    }
}

FrameResult localize_frame(const BinaryMask& mask, const GrayImage& left, const GrayImage& right,
                           const ProcessingGeometry& geo, const LocalizerConfig& cfg, double timestamp, Exec exec) {
  FrameResult r = detect_frame(mask, geo, cfg, exec);
  measure_tips(r, left, right, cfg, timestamp, exec);
  return r;
}

}  // namespace endotrack::tiplocate
