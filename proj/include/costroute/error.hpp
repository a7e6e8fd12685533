#pragma once

#include <stdexcept>
#include <string>

namespace costroute {

enum class Errc {
  // model pool
  DuplicateName,
  NegativePrice,
  LocalWithNonzeroPrice,
  InvalidPrice,
  PoolTooSmall,
  EmptyGroup,
  InvalidModel,
  // decomposition
  InvalidWeights,
  MissingTokenCounts,
  MissingCoherence,
  JudgeUnavailable,
  ExecutorFailure,
  EmptySampleSet,
  Unscored,
  GeneratorFailure,
  // allocation search
  EmptyProbSequence,
  InvalidProbability,
  InvalidAlpha,
  InvalidThresholds,
  LimitZero,
  LimitTooLarge,
  // grpo
  GroupTooSmall,
  NonpositiveRatio,
  SupportMismatch,
  EmptyBatch,
  NonfiniteGradient,
  ShapeMismatch,
  InvalidConfig,
  EnvFailure,
  // orchestrator
  StepFailure,
  StrongModelFailure,
  EmptyTraces,
  LabelMismatch,
  // simulator
  InstanceTooLarge,
  // backend
  AuthError,
  RateLimited,
  MalformedResponse,
  TimeoutExhausted,
  TransportError,
  CassetteMiss,
  CorruptCassette,
  // generic
  Parse,
  Io,
  Usage,
  InvalidArgument,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

}  // namespace costroute
