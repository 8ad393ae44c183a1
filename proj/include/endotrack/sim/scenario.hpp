#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "endotrack/ait.hpp"
#include "endotrack/geom.hpp"
#include "endotrack/servo.hpp"
#include "endotrack/sim/scene.hpp"
#include "endotrack/tipfilter.hpp"
#include "endotrack/tiplocate/pipeline.hpp"

namespace endotrack::sim {

enum class Perception { Pipeline, Truth };

struct SensorModel {
  double rate = 9.0;         ///< Hz
  double delay = 0.34;       ///< s
  double pixel_noise = 0.0;  ///< sigma added to u, v and disparity (px)
  double dropout = 0.0;      ///< probability that a frame yields nothing
  Perception perception = Perception::Pipeline;

  void validate() const;
};

struct TimedInstruction {
  double t = 0.0;
  ait::InstructionRecord instruction;
};

struct ScenarioConfig {
  std::string name = "scenario";
  uint64_t seed = 1;
  double duration = 10.0;
  double control_rate = 100.0;
  geom::EndoscopeModel model;
  geom::JointState joints;
  SensorModel sensor;
  servo::ServoConfig servo;
  ait::AitConfig ait;
  tipfilter::EkfConfig ekf;
  tiplocate::LocalizerConfig localizer;
  Scene scene;  ///< incision frame
  std::vector<TimedInstruction> instructions;

  void validate() const;
};

/// Parses a scenario document. Unknown keys and invalid values throw
/// ConfigInvalid naming the key path (e.g. `joints.l`).
ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig load_scenario(const std::string& path);

}  // namespace endotrack::sim
