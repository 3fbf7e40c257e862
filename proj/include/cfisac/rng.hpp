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

#include <cstdint>
#include <random>

#include "cfisac/common.hpp"

namespace cfisac {

/// SplitMix64 mixing step; used to derive independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Deterministic random stream.  Gaussian variates are produced by an
/// explicit Box-Muller transform over mt19937_64 output so that every
/// sequence is pinned by the standard, independent of the C++ library's
/// distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Substream `index` of a master seed.  Counter-based: adding trials
    /// never perturbs the streams of earlier trials.
    static Rng substream(std::uint64_t master, std::uint64_t index) {
        std::uint64_t s = master;
        (void)splitmix64(s);
        s ^= 0xD1B54A32D192ED03ull * (index + 1);
        std::uint64_t seed = splitmix64(s);
        return Rng(seed);
    }

    std::uint64_t bits() { return gen_(); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal N(0, 1).
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double phi = 2.0 * kPi * u2;
        spare_ = r * std::sin(phi);
        have_spare_ = true;
        return r * std::cos(phi);
    }

    /// Circularly-symmetric complex normal CN(0, 1) (unit total variance).
    cdouble cgaussian() {
        double re = gaussian();
        double im = gaussian();
        return cdouble(re, im) * (1.0 / std::sqrt(2.0));
    }

    /// Vector with i.i.d. CN(0, 1) entries.
    CVec cn_vector(Eigen::Index n) {
        CVec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = cgaussian();
        return v;
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace cfisac
