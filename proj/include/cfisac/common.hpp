// SPDX-License-Identifier: Apache-2.0
//
// cfisac — Cell-Free massive MIMO ISAC simulator and transmit-design toolkit
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace cfisac {

using cdouble = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr cdouble kJ{0.0, 1.0};

/// Power-like dB quantity to linear scale.
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Hermitian part of a square matrix.
inline CMat hermitian_part(const CMat& a) { return 0.5 * (a + a.adjoint()); }

inline double frobenius(const CMat& a) { return a.norm(); }

/// Relative Frobenius distance with an explicit reference scale.
inline double rel_frobenius(const CMat& a, const CMat& b, double ref) {
    return (a - b).norm() / std::max(ref, 1e-300);
}

}  // namespace cfisac
