#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mnarppca {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// Observation mask: 1 = observed, 0 = missing.
using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;
using IndexList = std::vector<Index>;

enum class ErrorKind {
  InvalidArgument,
  OutOfRange,
  SingularSubmatrix,
  InsufficientRows,
  RankDeficientDesign,
  TooFewObservations,
  DenominatorNearZero,
  SingularSystem,
  KNearZero,
  SingularConditioningBlock,
  NonSymmetric,
  ZeroMatrix,
  NoMissingCells,
  EmptyColumn,
  NonConvergence,
  ParseError,
  NotImplemented,
};

const char* to_string(ErrorKind kind);

/// Every failure in the library surfaces as this exception; `kind()` lets
/// callers branch on the failure class without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Relative condition-number ceiling shared by every linear solve.
inline constexpr double kConditionThreshold = 1e8;

}  // namespace mnarppca
