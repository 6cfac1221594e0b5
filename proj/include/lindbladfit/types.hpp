// Copyright 2026 The lindbladfit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <complex>

#include <Eigen/Dense>

namespace lindbladfit {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kImag{0.0, 1.0};

// Units used throughout: time in microseconds, Hamiltonian coefficients in
// rad/us, dissipation rates in 1/us, hbar = 1. Any I/O given in ordinary
// frequency units must be converted by 2*pi at the boundary.
inline constexpr const char* kUnitsNote = "time:us, ham:rad/us, diss:1/us";

inline constexpr const char* kVersion = "0.1.0";

}  // namespace lindbladfit
