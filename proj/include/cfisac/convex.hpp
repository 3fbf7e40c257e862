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

#include <functional>
#include <vector>

#include "cfisac/common.hpp"

namespace cfisac {

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

/// Frobenius-nearest PSD matrix: negative eigenvalues clipped to zero.
inline CMat project_psd(const CMat& a) {
    if (!a.allFinite()) throw std::invalid_argument("project_psd: non-finite entries");
    Eigen::SelfAdjointEigenSolver<CMat> eig(hermitian_part(a));
    const Vec ev = eig.eigenvalues().cwiseMax(0.0);
    return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().adjoint();
}

/// Euclidean projection of a real vector onto the probability simplex.
inline Vec project_simplex(const Vec& v) {
    const Eigen::Index n = v.size();
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cumsum = 0.0, tau = 0.0;
    int support = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        cumsum += u[i];
        const double candidate = (cumsum - 1.0) / static_cast<double>(i + 1);
        if (u[i] - candidate > 0.0) {
            tau = candidate;
            support = static_cast<int>(i + 1);
        }
    }
    (void)support;
    return (v.array() - tau).cwiseMax(0.0);
}

/// Frobenius-nearest Hermitian PSD matrix with unit trace: eigenvalues are
/// projected onto the simplex, eigenvectors preserved.
inline CMat project_spectrahedron(const CMat& a) {
    if (!a.allFinite()) throw std::invalid_argument("project_spectrahedron: non-finite entries");
    Eigen::SelfAdjointEigenSolver<CMat> eig(hermitian_part(a));
    const Vec ev = project_simplex(eig.eigenvalues());
    return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().adjoint();
}

// ---------------------------------------------------------------------------
// Exact ball-constrained concave-quadratic maximization
// ---------------------------------------------------------------------------

struct BallQuadraticSolution {
    CVec x;
    double mu = 0.0;           ///< multiplier of the norm constraint
    double objective = 0.0;    ///< 2 Re{b^H x} - x^H A x
    double kkt_stationarity = 0.0;  ///< ||(A + mu I) x - b||
    double kkt_slackness = 0.0;     ///< mu * (radius^2 - ||x||^2)
};

/// Maximize 2 Re{b^H x} - x^H A x over ||x||^2 <= radius^2 for PSD A.
/// Solved exactly through the eigendecomposition of A and a monotone
/// bisection on the norm of x(mu) = (A + mu I)^{-1} b.
inline BallQuadraticSolution max_quadratic_over_ball(const CMat& a, const CVec& b,
                                                     double radius) {
    if (radius <= 0.0) throw std::invalid_argument("max_quadratic_over_ball: radius must be > 0");
    const Eigen::Index n = b.size();
    Eigen::SelfAdjointEigenSolver<CMat> eig(hermitian_part(a));
    const Vec lam = eig.eigenvalues().cwiseMax(0.0);
    const CVec bt = eig.eigenvectors().adjoint() * b;

    const double lam_max = lam.size() ? lam.maxCoeff() : 0.0;
    const double null_tol = 1e-12 * std::max(lam_max, 1.0);
    const double bnorm = bt.norm();

    auto x_of_mu = [&](double mu) {
        CVec xt(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = lam(i) + mu;
            xt(i) = d > 0.0 ? bt(i) / d : cdouble(0.0, 0.0);
        }
        return xt;
    };

    // Interior optimum: pseudo-inverse solution when b has no null-space
    // component and the resulting norm fits in the ball.
    bool null_component = false;
    double interior_norm2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (lam(i) <= null_tol) {
            if (std::abs(bt(i)) > 1e-10 * std::max(bnorm, 1.0)) null_component = true;
        } else {
            interior_norm2 += std::norm(bt(i)) / (lam(i) * lam(i));
        }
    }

    double mu = 0.0;
    CVec xt;
    if (!null_component && interior_norm2 <= radius * radius) {
        xt.resize(n);
        for (Eigen::Index i = 0; i < n; ++i)
            xt(i) = lam(i) > null_tol ? bt(i) / lam(i) : cdouble(0.0, 0.0);
    } else {
        double lo = 0.0, hi = std::max(bnorm / radius, 1e-300);
        while (x_of_mu(hi).norm() > radius) hi *= 2.0;
        for (int it = 0; it < 300; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (x_of_mu(mid).norm() > radius)
                lo = mid;
            else
                hi = mid;
            if (hi - lo <= 1e-16 * std::max(1.0, hi)) break;
        }
        mu = hi;
        xt = x_of_mu(mu);
    }

    BallQuadraticSolution sol;
    sol.x = eig.eigenvectors() * xt;
    sol.mu = mu;
    sol.objective = 2.0 * std::real(b.dot(sol.x)) - std::real(sol.x.dot(a * sol.x));
    sol.kkt_stationarity = ((a + mu * CMat::Identity(n, n)) * sol.x - b).norm();
    sol.kkt_slackness = mu * std::abs(radius * radius - sol.x.squaredNorm());
    return sol;
}

/// Block variant: maximize sum_j (2 Re{B_j^H X_j} - X_j^H Q X_j) subject to
/// sum_j ||X_j||^2 <= radius^2, with one shared PSD block Q.  Columns of B
/// are the linear terms of the blocks.
inline CMat max_quadratic_over_ball_blocks(const CMat& q, const CMat& b, double radius) {
    if (radius <= 0.0)
        throw std::invalid_argument("max_quadratic_over_ball_blocks: radius must be > 0");
    Eigen::SelfAdjointEigenSolver<CMat> eig(hermitian_part(q));
    const Vec lam = eig.eigenvalues().cwiseMax(0.0);
    const CMat bt = eig.eigenvectors().adjoint() * b;

    const double lam_max = lam.size() ? lam.maxCoeff() : 0.0;
    const double null_tol = 1e-12 * std::max(lam_max, 1.0);
    const double bnorm = bt.norm();

    auto norm_of_mu = [&](double mu) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < bt.rows(); ++i) {
            const double d = lam(i) + mu;
            if (d > 0.0) s += bt.row(i).squaredNorm() / (d * d);
        }
        return std::sqrt(s);
    };

    bool null_component = false;
    double interior_norm = 0.0;
    {
        double s = 0.0;
        for (Eigen::Index i = 0; i < bt.rows(); ++i) {
            if (lam(i) <= null_tol) {
                if (bt.row(i).norm() > 1e-10 * std::max(bnorm, 1.0)) null_component = true;
            } else {
                s += bt.row(i).squaredNorm() / (lam(i) * lam(i));
            }
        }
        interior_norm = std::sqrt(s);
    }

    double mu = 0.0;
    if (null_component || interior_norm > radius) {
        double lo = 0.0, hi = std::max(bnorm / radius, 1e-300);
        while (norm_of_mu(hi) > radius) hi *= 2.0;
        for (int it = 0; it < 300; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (norm_of_mu(mid) > radius)
                lo = mid;
            else
                hi = mid;
            if (hi - lo <= 1e-16 * std::max(1.0, hi)) break;
        }
        mu = hi;
    }

    CMat xt = CMat::Zero(bt.rows(), bt.cols());
    for (Eigen::Index i = 0; i < bt.rows(); ++i) {
        const double d = lam(i) + mu;
        if (d > null_tol) xt.row(i) = bt.row(i) / d;
    }
    return eig.eigenvectors() * xt;
}

// ---------------------------------------------------------------------------
// Variable packs: real scalars, complex vectors, Hermitian matrices as one
// point in a real inner-product space.
// ---------------------------------------------------------------------------

struct VarPackShape {
    Eigen::Index n_reals = 0;
    std::vector<Eigen::Index> vec_dims;
    std::vector<Eigen::Index> mat_dims;
};

struct VarPack {
    Vec reals;
    std::vector<CVec> vectors;
    std::vector<CMat> matrices;

    static VarPack zero(const VarPackShape& shape) {
        VarPack p;
        p.reals = Vec::Zero(shape.n_reals);
        p.vectors.reserve(shape.vec_dims.size());
        for (auto d : shape.vec_dims) p.vectors.push_back(CVec::Zero(d));
        p.matrices.reserve(shape.mat_dims.size());
        for (auto d : shape.mat_dims) p.matrices.push_back(CMat::Zero(d, d));
        return p;
    }

    void set_zero() {
        reals.setZero();
        for (auto& v : vectors) v.setZero();
        for (auto& m : matrices) m.setZero();
    }

    VarPack& axpy(double a, const VarPack& x) {
        reals += a * x.reals;
        for (size_t i = 0; i < vectors.size(); ++i) vectors[i] += a * x.vectors[i];
        for (size_t i = 0; i < matrices.size(); ++i) matrices[i] += a * x.matrices[i];
        return *this;
    }

    void scale(double a) {
        reals *= a;
        for (auto& v : vectors) v *= a;
        for (auto& m : matrices) m *= a;
    }

    double dot(const VarPack& o) const {
        double s = reals.dot(o.reals);
        for (size_t i = 0; i < vectors.size(); ++i) s += std::real(vectors[i].dot(o.vectors[i]));
        for (size_t i = 0; i < matrices.size(); ++i)
            s += std::real((matrices[i].adjoint() * o.matrices[i]).trace());
        return s;
    }

    double squared_norm() const { return dot(*this); }

    double distance2(const VarPack& o) const {
        double s = (reals - o.reals).squaredNorm();
        for (size_t i = 0; i < vectors.size(); ++i) s += (vectors[i] - o.vectors[i]).squaredNorm();
        for (size_t i = 0; i < matrices.size(); ++i)
            s += (matrices[i] - o.matrices[i]).squaredNorm();
        return s;
    }
};

// ---------------------------------------------------------------------------
// Structured convex programs: concave objective, projectable simple set,
// smooth convex inequalities handled by an augmented Lagrangian.
// ---------------------------------------------------------------------------

enum class SolveStatus { optimal, max_iter, infeasible };

struct SolveReport {
    double objective = 0.0;          ///< achieved value of the maximized objective
    int iterations = 0;              ///< total inner (projected-gradient) iterations
    double primal_feas = 0.0;        ///< max violation of the dualized constraints
    double rel_gap_or_decrease = 0.0;  ///< last relative objective decrease window
    SolveStatus status = SolveStatus::max_iter;
    std::vector<double> objective_history;  ///< per accepted outer stage
};

struct ConicProblem {
    VarPackShape shape;
    /// Value of the concave objective to maximize; adds the gradient into
    /// *grad when non-null.
    std::function<double(const VarPack&, VarPack* grad)> objective;
    /// Exact Euclidean projection onto the simple set.
    std::function<void(VarPack&)> project;
    /// Smooth convex constraints g(x) <= 0; each returns its value and, when
    /// grad is non-null, adds weight * (dg/dx) into *grad.
    std::vector<std::function<double(const VarPack&, VarPack* grad, double weight)>> constraints;
};

struct ConicOptions {
    double feas_tol = 1e-6;
    double opt_tol = 1e-6;
    int max_iter = 5000;
    double initial_penalty = 10.0;
};

namespace detail {

/// Monotone FISTA with backtracking and function-value restarts; minimizes
/// a smooth convex function over a projectable set.
struct FistaOutcome {
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
    double last_window_decrease = 0.0;
};

inline FistaOutcome fista_minimize(
    const std::function<double(const VarPack&, VarPack* grad)>& f,
    const std::function<void(VarPack&)>& project, VarPack& x, double opt_tol, int max_iter,
    double* lipschitz_guess = nullptr) {
    FistaOutcome out;
    project(x);
    VarPack grad = x;
    grad.set_zero();
    double fx = f(x, nullptr);

    VarPack y = x, x_prev = x, z = x;
    double t_prev = 1.0;
    double L = lipschitz_guess && *lipschitz_guess > 0 ? *lipschitz_guess : 1.0;

    std::vector<double> window;
    window.push_back(fx);

    int it = 0;
    for (; it < max_iter; ++it) {
        grad.set_zero();
        const double fy = f(y, &grad);

        // Backtracking projected step from y.
        double fz = 0.0;
        for (int bt = 0; bt < 60; ++bt) {
            z = y;
            z.axpy(-1.0 / L, grad);
            project(z);
            fz = f(z, nullptr);
            VarPack diff = z;
            diff.axpy(-1.0, y);
            const double quad = fy + grad.dot(diff) + 0.5 * L * diff.squared_norm();
            if (fz <= quad + 1e-12 * std::max(1.0, std::abs(quad))) break;
            L *= 2.0;
        }

        if (fz > fx + 1e-12 * std::max(1.0, std::abs(fx))) {
            // Momentum overshoot: restart from the incumbent.
            t_prev = 1.0;
            y = x;
            grad.set_zero();
            const double fx2 = f(y, &grad);
            for (int bt = 0; bt < 60; ++bt) {
                z = y;
                z.axpy(-1.0 / L, grad);
                project(z);
                fz = f(z, nullptr);
                VarPack diff = z;
                diff.axpy(-1.0, y);
                const double quad = fx2 + grad.dot(diff) + 0.5 * L * diff.squared_norm();
                if (fz <= quad + 1e-12 * std::max(1.0, std::abs(quad))) break;
                L *= 2.0;
            }
        }

        const double t = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_prev * t_prev));
        y = z;
        VarPack momentum = z;
        momentum.axpy(-1.0, x_prev);
        y.axpy((t_prev - 1.0) / t, momentum);
        x_prev = z;
        t_prev = t;
        if (fz <= fx) {
            x = z;
            fx = fz;
        }

        window.push_back(fx);
        const size_t w = 10;
        if (window.size() > w + 1) {
            const double drop = window[window.size() - w - 1] - window.back();
            out.last_window_decrease = drop / std::max(1.0, std::abs(window.back()));
            if (out.last_window_decrease <= opt_tol) {
                ++it;
                out.converged = true;
                break;
            }
        }
        L *= 0.97;  // allow the step size to recover
    }
    out.value = fx;
    out.iterations = it;
    if (lipschitz_guess) *lipschitz_guess = L;
    return out;
}

}  // namespace detail

/// Augmented-Lagrangian solver for ConicProblem.  Returns an eps-feasible,
/// eps-optimal point; with no dualized constraints this reduces to a single
/// projected accelerated-gradient solve.
inline SolveReport solve_conic(const ConicProblem& problem, const ConicOptions& options,
                               VarPack& x) {
    const size_t J = problem.constraints.size();
    Vec lambda = Vec::Zero(static_cast<Eigen::Index>(J));
    double rho = options.initial_penalty;

    SolveReport report;
    double lipschitz = 0.0;
    VarPack scratch = VarPack::zero(problem.shape);

    auto violations = [&](const VarPack& p) {
        Vec g(static_cast<Eigen::Index>(J));
        for (size_t j = 0; j < J; ++j) g(j) = problem.constraints[j](p, nullptr, 0.0);
        return g;
    };

    auto negated_objective = [&](const VarPack& p, VarPack* grad) {
        if (!grad) return -problem.objective(p, nullptr);
        scratch.set_zero();
        const double v = problem.objective(p, &scratch);
        grad->axpy(-1.0, scratch);
        return -v;
    };

    auto al_function = [&](const VarPack& p, VarPack* grad) {
        double val = negated_objective(p, grad);
        for (size_t j = 0; j < J; ++j) {
            const double gj = problem.constraints[j](p, nullptr, 0.0);
            const double active = std::max(0.0, lambda(j) + rho * gj);
            val += (active * active - lambda(j) * lambda(j)) / (2.0 * rho);
            if (grad && active > 0.0) (void)problem.constraints[j](p, grad, active);
        }
        return val;
    };

    if (J == 0) {
        const auto outcome = detail::fista_minimize(negated_objective, problem.project, x,
                                                    options.opt_tol, options.max_iter, &lipschitz);
        report.objective = -outcome.value;
        report.iterations = outcome.iterations;
        report.primal_feas = 0.0;
        report.rel_gap_or_decrease = outcome.last_window_decrease;
        report.status = outcome.converged ? SolveStatus::optimal : SolveStatus::max_iter;
        report.objective_history.push_back(report.objective);
        return report;
    }

    double prev_viol = std::numeric_limits<double>::infinity();
    int stagnant = 0;
    int budget = options.max_iter;
    double inner_tol = std::max(options.opt_tol, 1e-3);
    for (int outer = 0; outer < 60 && budget > 0; ++outer) {
        const auto outcome =
            detail::fista_minimize(al_function, problem.project, x, inner_tol, budget, &lipschitz);
        report.iterations += outcome.iterations;
        budget -= outcome.iterations;
        report.rel_gap_or_decrease = outcome.last_window_decrease;

        const Vec g = violations(x);
        const double viol = J ? std::max(0.0, g.maxCoeff()) : 0.0;
        report.primal_feas = viol;
        report.objective = problem.objective(x, nullptr);
        report.objective_history.push_back(report.objective);

        if (viol <= options.feas_tol && inner_tol <= options.opt_tol && outcome.converged) {
            report.status = SolveStatus::optimal;
            return report;
        }

        for (size_t j = 0; j < J; ++j) lambda(j) = std::max(0.0, lambda(j) + rho * g(j));
        if (viol > 0.25 * prev_viol) {
            rho = std::min(rho * 4.0, 1e12);
            ++stagnant;
        } else {
            stagnant = 0;
        }
        prev_viol = std::min(prev_viol, std::max(viol, options.feas_tol));
        inner_tol = std::max(options.opt_tol, inner_tol * 0.2);

        if (rho >= 1e12 && viol > 100.0 * options.feas_tol && stagnant >= 3) {
            report.status = SolveStatus::infeasible;
            return report;
        }
    }
    report.status = budget <= 0 ? SolveStatus::max_iter : SolveStatus::infeasible;
    if (report.primal_feas <= options.feas_tol && report.rel_gap_or_decrease <= options.opt_tol)
        report.status = SolveStatus::optimal;
    return report;
}

/// Projection onto {(w, Z): ||w||^2 + tr(Z) <= cap, Z PSD} applied jointly
/// to a list of vector blocks and one matrix block.  One eigendecomposition
/// suffices: the multiplier shifts eigenvalues and shrinks the vectors.
inline void project_power_capped(std::vector<CVec*> ws, CMat* z, double cap) {
    Eigen::SelfAdjointEigenSolver<CMat> eig(hermitian_part(*z));
    Vec lam = eig.eigenvalues();
    double wnorm2 = 0.0;
    for (const CVec* w : ws) wnorm2 += w->squaredNorm();

    const auto value = [&](double mu) {
        double s = wnorm2 / ((1.0 + mu) * (1.0 + mu));
        for (Eigen::Index i = 0; i < lam.size(); ++i) s += std::max(lam(i) - mu / 2.0, 0.0);
        return s;
    };

    if (value(0.0) <= cap) {
        *z = eig.eigenvectors() * lam.cwiseMax(0.0).asDiagonal() * eig.eigenvectors().adjoint();
        return;
    }
    double lo = 0.0, hi = 1.0;
    while (value(hi) > cap) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (value(mid) > cap)
            lo = mid;
        else
            hi = mid;
    }
    const double mu = hi;
    for (CVec* w : ws) *w /= (1.0 + mu);
    *z = eig.eigenvectors() * (lam.array() - mu / 2.0).max(0.0).matrix().asDiagonal() *
         eig.eigenvectors().adjoint();
}

}  // namespace cfisac
