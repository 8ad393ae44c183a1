#pragma once

#include <string>

#include "endotrack/exec.hpp"
#include "endotrack/tiplocate/evaluate.hpp"

namespace endotrack::sim {

struct CorpusOptions {
  int frames = 300;
  int width = 1920, height = 1080;
  double fov = 1.3962634015954636;  ///< 80 deg
  double baseline = 0.0016;
  int proc_size = 256;
  unsigned seed = 7;
  bool intensity = false;  ///< also write the full-resolution stereo pair
};

/// Renders a labelled synthetic corpus into `dir` (masks/, manifest.json).
/// Every tenth frame is a forced crossing and every tenth a forced hidden leaf.
tiplocate::CorpusManifest make_corpus(const std::string& dir, const CorpusOptions& opt = {},
                                      Exec exec = Exec::Parallel);

}  // namespace endotrack::sim
