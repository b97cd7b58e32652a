#pragma once

#include <stdexcept>
#include <string>

namespace egomind {

// Base of every error raised by the library. Each subclass names one failure
// family so callers (and the CLI's exit-code mapping) can dispatch on type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input structure (frame gaps, transition count mismatch, ...).
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Unknown object id or key.
class LookupError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class TargetNotFoundError : public Error {
 public:
  using Error::Error;
};

class AmbiguousTargetError : public Error {
 public:
  using Error::Error;
};

// Metric questions cannot be answered from a qualitative graph alone.
class UnsupportedWithoutAnnotationsError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class RenderError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class TrajectoryError : public Error {
 public:
  using Error::Error;
};

class ClassificationError : public Error {
 public:
  using Error::Error;
};

// Question does not belong to the scene it is being answered against.
class ProvenanceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Transport-level failure of a chat-completion call; retried by the pipeline.
class BackendError : public Error {
 public:
  using Error::Error;
};

// A corrupt persistence record; the message names the file and line.
class JournalError : public Error {
 public:
  using Error::Error;
};

// A quality-check reply that does not follow the verdict format.
class VerdictParseError : public Error {
 public:
  using Error::Error;
};

// SFT/RL sample refused (failed verdicts, missing truth, unparsable target).
class AssemblyError : public Error {
 public:
  using Error::Error;
};

}  // namespace egomind
