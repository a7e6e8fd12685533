#include "costroute/error.hpp"

namespace costroute {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::DuplicateName: return "DuplicateName";
    case Errc::NegativePrice: return "NegativePrice";
    case Errc::LocalWithNonzeroPrice: return "LocalWithNonzeroPrice";
    case Errc::InvalidPrice: return "InvalidPrice";
    case Errc::PoolTooSmall: return "PoolTooSmall";
    case Errc::EmptyGroup: return "EmptyGroup";
    case Errc::InvalidModel: return "InvalidModel";
    case Errc::InvalidWeights: return "InvalidWeights";
    case Errc::MissingTokenCounts: return "MissingTokenCounts";
    case Errc::MissingCoherence: return "MissingCoherence";
    case Errc::JudgeUnavailable: return "JudgeUnavailable";
    case Errc::ExecutorFailure: return "ExecutorFailure";
    case Errc::EmptySampleSet: return "EmptySampleSet";
    case Errc::Unscored: return "Unscored";
    case Errc::GeneratorFailure: return "GeneratorFailure";
    case Errc::EmptyProbSequence: return "EmptyProbSequence";
    case Errc::InvalidProbability: return "InvalidProbability";
    case Errc::InvalidAlpha: return "InvalidAlpha";
    case Errc::InvalidThresholds: return "InvalidThresholds";
    case Errc::LimitZero: return "LimitZero";
    case Errc::LimitTooLarge: return "LimitTooLarge";
    case Errc::GroupTooSmall: return "GroupTooSmall";
    case Errc::NonpositiveRatio: return "NonpositiveRatio";
    case Errc::SupportMismatch: return "SupportMismatch";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::NonfiniteGradient: return "NonfiniteGradient";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::EnvFailure: return "EnvFailure";
    case Errc::StepFailure: return "StepFailure";
    case Errc::StrongModelFailure: return "StrongModelFailure";
    case Errc::EmptyTraces: return "EmptyTraces";
    case Errc::LabelMismatch: return "LabelMismatch";
    case Errc::InstanceTooLarge: return "InstanceTooLarge";
    case Errc::AuthError: return "AuthError";
    case Errc::RateLimited: return "RateLimited";
    case Errc::MalformedResponse: return "MalformedResponse";
    case Errc::TimeoutExhausted: return "TimeoutExhausted";
    case Errc::TransportError: return "TransportError";
    case Errc::CassetteMiss: return "CassetteMiss";
    case Errc::CorruptCassette: return "CorruptCassette";
    case Errc::Parse: return "Parse";
    case Errc::Io: return "Io";
    case Errc::Usage: return "Usage";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace costroute
