#pragma once

#include <stdexcept>
#include <string>

namespace mitodet {

/// Coarse failure category. The command-line tool maps each category to a
/// distinct process exit code.
enum class ErrorKind {
  kInvalidArgument,  // bad configuration or violated precondition
  kInput,            // unreadable or malformed input files
  kBackend,          // detector backend failures (model load, inference)
  kFrame,            // geometry outside its declared frame
  kStain,            // stain estimation failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::kInvalidArgument, what) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::kInput, what) {}
};

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what)
      : Error(ErrorKind::kBackend, what) {}
};

/// A box that lies (partly or fully) outside the frame it claims to be in.
class FrameError : public Error {
 public:
  explicit FrameError(const std::string& what) : Error(ErrorKind::kFrame, what) {}
};

}  // namespace mitodet
