#include "endotrack/error.hpp"

namespace endotrack {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::Unreachable: return "Unreachable";
    case Errc::Degenerate: return "Degenerate";
    case Errc::DegenerateLength: return "DegenerateLength";
    case Errc::FeatureBehindCamera: return "FeatureBehindCamera";
    case Errc::SingularInteraction: return "SingularInteraction";
    case Errc::ZeroDisparity: return "ZeroDisparity";
    case Errc::NumericallySingularInnovation: return "NumericallySingularInnovation";
    case Errc::LowConfidence: return "LowConfidence";
    case Errc::AmbiguousSides: return "AmbiguousSides";
    case Errc::NoTips: return "NoTips";
    case Errc::InvalidWeight: return "InvalidWeight";
    case Errc::ScriptExhausted: return "ScriptExhausted";
    case Errc::DivergedSimulation: return "DivergedSimulation";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::ManifestInvalid: return "ManifestInvalid";
    case Errc::PortUnavailable: return "PortUnavailable";
    case Errc::ProtocolViolation: return "ProtocolViolation";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace endotrack
