#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gbi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A node-id, session id or other key does not resolve.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// A configuration is outside its legal range or is infeasible.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A file or document could not be parsed. `locus` names the line and/or field.
class ParseError : public Error {
 public:
  ParseError(std::string locus, const std::string& what)
      : Error(locus.empty() ? what : locus + ": " + what), locus_(std::move(locus)) {}

  const std::string& locus() const noexcept { return locus_; }

 private:
  std::string locus_;
};

/// Input data is well formed but violates a domain invariant.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::vector<std::string> offenders = {})
      : Error(compose(what, offenders)), offenders_(std::move(offenders)) {}

  const std::vector<std::string>& offenders() const noexcept { return offenders_; }

 private:
  static std::string compose(const std::string& what, const std::vector<std::string>& offenders) {
    if (offenders.empty()) return what;
    std::string msg = what + " [";
    for (size_t i = 0; i < offenders.size(); ++i) {
      if (i) msg += ", ";
      msg += offenders[i];
    }
    return msg + "]";
  }

  std::vector<std::string> offenders_;
};

/// Model shapes are inconsistent with their inputs.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Training diverged. `epoch` is the epoch in which it happened.
class TrainingError : public Error {
 public:
  TrainingError(int epoch, const std::string& what)
      : Error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace gbi
