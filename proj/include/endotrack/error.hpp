#pragma once

#include <stdexcept>
#include <string>

namespace endotrack {

enum class Errc {
  Unreachable,
  Degenerate,
  DegenerateLength,
  FeatureBehindCamera,
  SingularInteraction,
  ZeroDisparity,
  NumericallySingularInnovation,
  LowConfidence,
  AmbiguousSides,
  NoTips,
  InvalidWeight,
  ScriptExhausted,
  DivergedSimulation,
  ConfigInvalid,
  ManifestInvalid,
  PortUnavailable,
  ProtocolViolation,
  VersionMismatch,
  Io,
};

const char* to_string(Errc code);

// Single exception type for the library; the code identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace endotrack
