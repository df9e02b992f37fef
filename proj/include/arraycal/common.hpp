// SPDX-License-Identifier: Apache-2.0
//
// arraycal: simulation toolkit for phased-array calibration with
// Kronecker-structured Gaussian-process regression.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace arraycal {

inline constexpr const char* kToolVersion = "0.1.0";

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// Linear-algebra or factorization failure that survived jitter escalation.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Iterative solver did not reach the requested tolerance.
struct ConvergenceError : std::runtime_error {
    double residual;
    ConvergenceError(const std::string& msg, double r)
        : std::runtime_error(msg), residual(r) {}
};

}  // namespace arraycal
