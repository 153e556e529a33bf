#pragma once

#include <stdexcept>
#include <string>

namespace b3d {

enum class ErrorKind {
  kInvalidArgument,
  kPrecondition,
  kMissingFile,
  kMalformed,
  kUnsupported,
  kIo,
  kBackend,
  kTimeout,
  kNetwork,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers switch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Backend (HTTP) failure carrying the response status, 0 when no response.
class BackendError : public Error {
 public:
  BackendError(ErrorKind kind, int status, const std::string& what)
      : Error(kind, what), status_(status) {}

  int status() const { return status_; }

 private:
  int status_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace b3d
