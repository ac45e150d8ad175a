#pragma once

#include <stdexcept>
#include <string>

namespace dreamlab {

// Invalid family, layout, or experiment configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A policy or caller broke the trial protocol (e.g. out-of-range action).
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed numeric input: shape mismatch, unnormalized table, bad file.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The instance is outside what an exact computation supports.
class UnsupportedInstance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure during learning (non-finite gradients and the like).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when the problem ID is read while it must stay hidden (meta-test).
class InformationLeak : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A trajectory no problem in the family could have produced.
class InconsistentTrajectory : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dreamlab
