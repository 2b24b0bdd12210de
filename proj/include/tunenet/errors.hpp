#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tunenet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A physical parameter outside its admissible domain (negative height, mass, ...).
class ParameterDomainError : public Error {
 public:
  using Error::Error;
};

/// A requested end-effector path leaves the arm's reachable, non-singular workspace.
class TrajectoryInfeasibleError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, const std::string& what)
      : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

/// Failure inside an indexed loop (tuning iteration, dataset pair, ...).
class IndexedError : public Error {
 public:
  IndexedError(std::size_t index, const std::string& what)
      : Error(what + " (index " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Corrupt or version-mismatched file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace tunenet
