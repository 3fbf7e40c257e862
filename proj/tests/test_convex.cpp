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

#include <catch2/catch_amalgamated.hpp>

#include "cfisac/convex.hpp"
#include "cfisac/rng.hpp"

using namespace cfisac;

namespace {

CMat random_hermitian(Rng& rng, int n, double scale = 1.0) {
    CMat a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = scale * rng.cgaussian();
    return hermitian_part(a);
}

CMat random_psd(Rng& rng, int n, double scale = 1.0) {
    CMat a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = scale * rng.cgaussian();
    return a * a.adjoint();
}

CVec random_cvec(Rng& rng, int n, double scale = 1.0) {
    CVec v(n);
    for (int i = 0; i < n; ++i) v(i) = scale * rng.cgaussian();
    return v;
}

double min_eigenvalue(const CMat& a) {
    Eigen::SelfAdjointEigenSolver<CMat> eig(hermitian_part(a));
    return eig.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("PSD projection hand cases") {
    CMat d = CMat::Zero(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = -1.0;
    const CMat p = project_psd(d);
    CHECK(std::abs(p(0, 0).real() - 1.0) < 1e-14);
    CHECK(std::abs(p(1, 1)) < 1e-14);

    Rng rng(1);
    const CMat psd = random_psd(rng, 4);
    CHECK((project_psd(psd) - psd).norm() < 1e-10 * psd.norm());

    CMat bad = psd;
    bad(0, 0) = cdouble(std::numeric_limits<double>::quiet_NaN(), 0);
    CHECK_THROWS_AS(project_psd(bad), std::invalid_argument);
}

TEST_CASE("PSD projection is the Frobenius-nearest PSD point") {
    Rng rng(2);
    const CMat a = random_hermitian(rng, 3);
    const CMat p = project_psd(a);
    const double base = (a - p).norm();
    for (int i = 0; i < 1000; ++i) {
        const CMat candidate = random_psd(rng, 3, rng.uniform(0.1, 2.0));
        CHECK((a - candidate).norm() >= base - 1e-10);
    }
}

TEST_CASE("spectrahedron projection hand cases") {
    CMat d = CMat::Zero(2, 2);
    d(0, 0) = 2.0;
    const CMat p = project_spectrahedron(d);
    CHECK(std::abs(p(0, 0).real() - 1.0) < 1e-14);
    CHECK(std::abs(p(1, 1)) < 1e-14);

    const CMat uniform = CMat::Identity(3, 3) / 3.0;
    CHECK((project_spectrahedron(uniform) - uniform).norm() < 1e-14);

    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const CMat z = project_spectrahedron(random_hermitian(rng, 4, 2.0));
        CHECK(std::abs(z.trace().real() - 1.0) < 1e-12);
        CHECK(min_eigenvalue(z) >= -1e-12);
    }
}

TEST_CASE("simplex projection matches the eigenvalue route") {
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        Vec v(5);
        for (int j = 0; j < 5; ++j) v(j) = rng.uniform(-2.0, 2.0);
        const Vec p = project_simplex(v);
        CHECK(std::abs(p.sum() - 1.0) < 1e-12);
        CHECK(p.minCoeff() >= 0.0);
        // Nearest point on the simplex among random candidates.
        const double base = (v - p).squaredNorm();
        for (int c = 0; c < 100; ++c) {
            Vec q(5);
            double s = 0.0;
            for (int j = 0; j < 5; ++j) {
                q(j) = rng.uniform();
                s += q(j);
            }
            q /= s;
            CHECK((v - q).squaredNorm() >= base - 1e-10);
        }
    }
}

TEST_CASE("projections are idempotent and non-expansive") {
    Rng rng(5);
    for (int i = 0; i < 30; ++i) {
        const CMat a = random_hermitian(rng, 4, 1.5);
        const CMat b = random_hermitian(rng, 4, 1.5);
        for (auto* proj : {&project_psd, &project_spectrahedron}) {
            const CMat pa = (*proj)(a);
            const CMat pb = (*proj)(b);
            CHECK(((*proj)(pa) - pa).norm() < 1e-10 * std::max(1.0, pa.norm()));
            CHECK((pa - pb).norm() <= (a - b).norm() + 1e-10);
        }
    }
}

TEST_CASE("ball-constrained quadratic maximization hand cases") {
    const CMat eye = CMat::Identity(2, 2);
    CVec b(2);
    b << cdouble(2, 0), cdouble(0, 0);
    const auto boundary = max_quadratic_over_ball(eye, b, 1.0);
    CHECK(std::abs(boundary.x(0) - cdouble(1, 0)) < 1e-9);
    CHECK(std::abs(boundary.x(1)) < 1e-12);
    CHECK(boundary.mu > 0.0);

    b << cdouble(0.3, 0), cdouble(0, 0);
    const auto interior = max_quadratic_over_ball(eye, b, 1.0);
    CHECK(std::abs(interior.x(0) - cdouble(0.3, 0)) < 1e-12);
    CHECK(interior.mu == 0.0);

    CHECK_THROWS_AS(max_quadratic_over_ball(eye, b, 0.0), std::invalid_argument);
}

TEST_CASE("ball quadratic solver matches a projected-gradient oracle") {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform() * 5);
        const CMat a = random_psd(rng, n);
        const CVec b = random_cvec(rng, n, 1.5);
        const double radius = rng.uniform(0.2, 2.0);
        const auto sol = max_quadratic_over_ball(a, b, radius);

        // Independent oracle: projected gradient ascent on the same problem.
        Eigen::SelfAdjointEigenSolver<CMat> eig(a);
        const double step = 1.0 / (2.0 * eig.eigenvalues().maxCoeff() + 1.0);
        CVec x = CVec::Zero(n);
        for (int it = 0; it < 5000; ++it) {
            x += step * 2.0 * (b - a * x);
            const double norm = x.norm();
            if (norm > radius) x *= radius / norm;
        }
        const double oracle = 2.0 * std::real(b.dot(x)) - std::real(x.dot(a * x));
        CHECK(sol.objective >= oracle - 1e-6);
        CHECK(std::abs(sol.objective - oracle) < 1e-5 * std::max(1.0, std::abs(oracle)));

        // KKT certificates.
        CHECK(sol.kkt_slackness <= 1e-8);
        CHECK(sol.kkt_stationarity <= 1e-8 * std::max(1.0, b.norm()));
        CHECK(sol.x.norm() <= radius + 1e-9);
    }
}

TEST_CASE("block ball solver agrees with the dense formulation") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 3, j = 4;
        const CMat q = random_psd(rng, n);
        CMat b(n, j);
        for (int c = 0; c < j; ++c) b.col(c) = random_cvec(rng, n);
        const double radius = rng.uniform(0.3, 1.5);

        const CMat x_blocks = max_quadratic_over_ball_blocks(q, b, radius);

        CMat a_dense = CMat::Zero(n * j, n * j);
        CVec b_dense(n * j);
        for (int c = 0; c < j; ++c) {
            a_dense.block(c * n, c * n, n, n) = q;
            b_dense.segment(c * n, n) = b.col(c);
        }
        const auto dense = max_quadratic_over_ball(a_dense, b_dense, radius);
        double block_obj = 0.0;
        for (int c = 0; c < j; ++c) {
            const CVec xc = x_blocks.col(c);
            block_obj += 2.0 * std::real(b.col(c).dot(xc)) - std::real(xc.dot(q * xc));
        }
        CHECK(std::abs(block_obj - dense.objective) < 1e-8 * std::max(1.0, std::abs(dense.objective)));
    }
}

TEST_CASE("solve_conic projects onto a ball") {
    // minimize ||x - c||^2 with ||x|| <= 1 and ||c|| > 1 gives c/||c||.
    Rng rng(8);
    CVec c = random_cvec(rng, 4);
    c *= 2.0 / c.norm();

    ConicProblem prob;
    prob.shape.vec_dims = {4};
    prob.objective = [&](const VarPack& p, VarPack* grad) {
        const CVec diff = p.vectors[0] - c;
        if (grad) grad->vectors[0] += -2.0 * diff;
        return -diff.squaredNorm();
    };
    prob.project = [](VarPack& p) {
        const double n = p.vectors[0].norm();
        if (n > 1.0) p.vectors[0] /= n;
    };
    VarPack x = VarPack::zero(prob.shape);
    const SolveReport rep = solve_conic(prob, {}, x);
    CHECK(rep.status == SolveStatus::optimal);
    CHECK((x.vectors[0] - c / c.norm()).norm() < 1e-5);

    // First-order path keeps the maximized objective history monotone.
    for (size_t i = 1; i < rep.objective_history.size(); ++i)
        CHECK(rep.objective_history[i] >= rep.objective_history[i - 1] - 1e-12);
}

TEST_CASE("solve_conic reduces to the spectrahedron projection") {
    Rng rng(9);
    const CMat target = random_hermitian(rng, 3, 1.2);
    ConicProblem prob;
    prob.shape.mat_dims = {3};
    prob.objective = [&](const VarPack& p, VarPack* grad) {
        const CMat diff = p.matrices[0] - target;
        if (grad) grad->matrices[0] += -2.0 * diff;
        return -diff.squaredNorm();
    };
    prob.project = [](VarPack& p) { p.matrices[0] = project_spectrahedron(p.matrices[0]); };
    VarPack x = VarPack::zero(prob.shape);
    x.matrices[0] = CMat::Identity(3, 3) / 3.0;
    const SolveReport rep = solve_conic(prob, {}, x);
    CHECK(rep.status == SolveStatus::optimal);
    CHECK((x.matrices[0] - project_spectrahedron(target)).norm() < 1e-5);
}

TEST_CASE("solve_conic honors dualized constraints") {
    // maximize 2 x0 subject to x0 <= 0.25 with the box |x0| <= 1 as the
    // simple set; the active constraint is handled by the multiplier loop.
    ConicProblem prob;
    prob.shape.n_reals = 1;
    prob.objective = [](const VarPack& p, VarPack* grad) {
        if (grad) grad->reals(0) += 2.0;
        return 2.0 * p.reals(0);
    };
    prob.project = [](VarPack& p) { p.reals(0) = std::clamp(p.reals(0), -1.0, 1.0); };
    prob.constraints.push_back([](const VarPack& p, VarPack* grad, double w) {
        if (grad) grad->reals(0) += w;
        return p.reals(0) - 0.25;
    });
    VarPack x = VarPack::zero(prob.shape);
    const SolveReport rep = solve_conic(prob, {}, x);
    CHECK(rep.status == SolveStatus::optimal);
    CHECK(std::abs(x.reals(0) - 0.25) < 1e-5);
    CHECK(rep.primal_feas <= 1e-6);
}

TEST_CASE("power-capped projection") {
    Rng rng(10);
    for (int trial = 0; trial < 30; ++trial) {
        CVec w0 = random_cvec(rng, 3);
        CMat z0 = random_hermitian(rng, 3);
        const double cap = rng.uniform(0.3, 1.5);

        CVec w = w0;
        CMat z = z0;
        project_power_capped({&w}, &z, cap);

        CHECK(w.squaredNorm() + z.trace().real() <= cap + 1e-9);
        CHECK(min_eigenvalue(z) >= -1e-10);

        // Nearest feasible point among random candidates.
        const double base = (w - w0).squaredNorm() + (z - z0).squaredNorm();
        for (int c = 0; c < 200; ++c) {
            CVec wc = random_cvec(rng, 3);
            CMat zc = random_psd(rng, 3, 0.5);
            const double total = wc.squaredNorm() + zc.trace().real();
            if (total > cap) {
                const double shrink = 0.999 * cap / total;
                wc *= std::sqrt(shrink);
                zc *= shrink;
            }
            const double dist = (wc - w0).squaredNorm() + (zc - z0).squaredNorm();
            CHECK(dist >= base - 1e-9);
        }

        // Feasible inputs are fixed points.
        CVec wf = w;
        CMat zf = z;
        project_power_capped({&wf}, &zf, cap);
        CHECK((wf - w).norm() < 1e-9);
        CHECK((zf - z).norm() < 1e-9);
    }
}
