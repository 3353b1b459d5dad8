#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace preftrans {

enum class Errc {
  DegenerateInput,
  FrameUndefined,
  OutsideOmega,
  NegativeDiscriminant,
  BeyondP1,
  SingularJacobian,
  NoConvergence,
  YPHatZero,
  GammaOutOfRange,
  Infeasible,
  InvalidScene,
  InterpolationError,
  DegenerateMesh,
  MeshTooCoarse,
  IoError,
  ConfigError,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::FrameUndefined: return "FrameUndefined";
    case Errc::OutsideOmega: return "OutsideOmega";
    case Errc::NegativeDiscriminant: return "NegativeDiscriminant";
    case Errc::BeyondP1: return "BeyondP1";
    case Errc::SingularJacobian: return "SingularJacobian";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::YPHatZero: return "YPHatZero";
    case Errc::GammaOutOfRange: return "GammaOutOfRange";
    case Errc::Infeasible: return "Infeasible";
    case Errc::InvalidScene: return "InvalidScene";
    case Errc::InterpolationError: return "InterpolationError";
    case Errc::DegenerateMesh: return "DegenerateMesh";
    case Errc::MeshTooCoarse: return "MeshTooCoarse";
    case Errc::IoError: return "IoError";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace preftrans
