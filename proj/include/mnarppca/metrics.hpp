#pragma once

#include "mnarppca/types.hpp"

namespace mnarppca {

/// trace(A^T A B^T B) / sqrt(trace((A^T A)^2) trace((B^T B)^2)).
double rv_coefficient(const Matrix& a, const Matrix& b);

/// ||(y_hat - y_true) o (1 - omega)||_F^2 / ||y_true o (1 - omega)||_F^2.
double prediction_error(const Matrix& y_hat, const Matrix& y_true, const Mask& omega);

}  // namespace mnarppca
