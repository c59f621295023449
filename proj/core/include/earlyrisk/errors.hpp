#pragma once

#include <stdexcept>
#include <string>

namespace earlyrisk {

// Base for every failure raised by the library. Callers that only need to
// report a diagnostic can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller violated an operation's documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Input data (corpus, gold labels, model or run files) failed validation.
class DataError : public Error {
 public:
  using Error::Error;
};

// The evaluation server answered with an error or an unexpected payload.
class ProtocolError : public Error {
 public:
  ProtocolError(int status, const std::string& what)
      : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

// A probability estimator failed. `retriable` marks transport timeouts; the
// rest (length mismatch, out-of-range probability) are never retried.
class ClassifierError : public Error {
 public:
  ClassifierError(const std::string& what, bool retriable)
      : Error(what), retriable_(retriable) {}
  bool retriable() const noexcept { return retriable_; }

 private:
  bool retriable_;
};

}  // namespace earlyrisk
