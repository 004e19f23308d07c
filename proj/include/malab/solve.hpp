#pragma once

#include <Eigen/Sparse>
#include <chrono>
#include <cmath>
#include <vector>

#include "malab/metric.hpp"
#include "malab/potential.hpp"

namespace malab {

/// Dirichlet data for det D^2 u = 1 on the grid box. Only the boundary trace
/// of boundary_values is read; the right-hand side is the constant 1.
template <int N>
struct DirichletProblem {
    GridSpec<N> grid;
    ScalarField<N> boundary_values;
};

template <int N>
DirichletProblem<N> make_problem(const AnalyticPtr<N>& datum, const GridSpec<N>& grid) {
    DirichletProblem<N> prob{grid, ScalarField<N>(grid)};
    for_each_node(grid, [&](std::size_t k, const Index<N>& ix) {
        if (grid.depth(ix) == 0) prob.boundary_values[k] = datum->value(grid.coord(ix));
    });
    return prob;
}

struct SolverConfig {
    double newton_tol = 1e-10;     // residual sup-norm target
    int max_newton_iters = 50;
    double damping = 0.5;          // line-search backtracking factor
    double eig_floor = 1e-8;       // Hessian eigenvalue clamp
    long fallback_sweeps = 100000; // total Gauss-Seidel sweep-pair budget
    int warmup_sweeps = 0;         // sweeps run before the first Newton step
    bool use_fallback = true;

    void validate() const {
        if (!(newton_tol > 0) || newton_tol >= 1) throw ParameterError("newton_tol in (0,1) required");
        if (max_newton_iters <= 0 || damping <= 0 || damping >= 1 || eig_floor <= 0 ||
            fallback_sweeps < 0 || warmup_sweeps < 0)
            throw ParameterError("solver configuration values must be positive");
    }
};

struct SolveReport {
    bool converged = false;
    int iterations = 0;
    double final_residual = std::numeric_limits<double>::infinity();  // sup |ln det D2u|
    double min_hessian_eigenvalue = 0.0;
    double certificate_residual = std::numeric_limits<double>::infinity();
    long fallback_sweeps_used = 0;
    double wall_time = 0.0;
};

/// Gauss-Seidel fallback diagnostics: convexity modulus per sweep-pair.
struct GaussSeidelReport {
    long sweeps = 0;
    std::vector<double> modulus_trajectory;
    bool modulus_monotone = true;
};

namespace detail {

/// Necessary boundary-convexity check: the trace restricted to every box
/// edge (and face in 3d) must be convex along it.
template <int N>
void check_boundary_convexity(const DirichletProblem<N>& prob) {
    const auto& g = prob.grid;
    const auto& b = prob.boundary_values;
    double scale = 0.0;
    double worst = 0.0;
    // 1d second differences along every boundary line of every axis
    for (int axis = 0; axis < N; ++axis) {
        for_each_node(g, [&](std::size_t, const Index<N>& ix) {
            if (g.depth(ix) != 0) return;
            if (ix[axis] == 0 || ix[axis] == g.counts[axis] - 1) return;
            // the whole line must lie on the boundary
            bool on_boundary_line = false;
            for (int a = 0; a < N; ++a)
                if (a != axis && (ix[a] == 0 || ix[a] == g.counts[a] - 1)) on_boundary_line = true;
            if (!on_boundary_line) return;
            Index<N> m = ix, p = ix;
            m[axis] -= 1;
            p[axis] += 1;
            const double h = g.spacing(axis);
            const double d2 = (b.at(p) - 2.0 * b.at(ix) + b.at(m)) / (h * h);
            scale = std::max(scale, std::abs(d2));
            worst = std::min(worst, d2);
        });
    }
    if constexpr (N == 3) {
        // tangential mixed terms on face interiors
        for (int face_axis = 0; face_axis < 3; ++face_axis) {
            const int t0 = (face_axis + 1) % 3, t1 = (face_axis + 2) % 3;
            for_each_node(g, [&](std::size_t, const Index<3>& ix) {
                if (ix[face_axis] != 0 && ix[face_axis] != g.counts[face_axis] - 1) return;
                if (ix[t0] == 0 || ix[t0] == g.counts[t0] - 1) return;
                if (ix[t1] == 0 || ix[t1] == g.counts[t1] - 1) return;
                SymMat<2> ht;
                auto at = [&](int d0, int d1) {
                    Index<3> j = ix;
                    j[t0] += d0;
                    j[t1] += d1;
                    return b.at(j);
                };
                const double h0 = g.spacing(t0), h1 = g.spacing(t1);
                ht.at(0, 0) = (at(1, 0) - 2 * at(0, 0) + at(-1, 0)) / (h0 * h0);
                ht.at(1, 1) = (at(0, 1) - 2 * at(0, 0) + at(0, -1)) / (h1 * h1);
                ht.at(0, 1) = (at(1, 1) + at(-1, -1) - at(1, -1) - at(-1, 1)) / (4 * h0 * h1);
                const double mineig = ht.min_eigenvalue();
                scale = std::max(scale, ht.spectral_norm());
                worst = std::min(worst, mineig);
            });
        }
    }
    const double tol = 1e-8 * std::max(1.0, scale);
    if (worst < -tol)
        throw InputError("boundary data fails the face-convexity check (defect " +
                         std::to_string(worst) + ")");
}

/// Initial iterate: nodewise max over boundary tangent planes. Each boundary
/// node contributes the affine function through its value with the in-face
/// tangential slope and zero normal slope. Convex and cheap.
template <int N>
ScalarField<N> tangent_plane_start(const DirichletProblem<N>& prob) {
    const auto& g = prob.grid;
    const auto& b = prob.boundary_values;
    struct Plane {
        Point<N> y;
        Point<N> slope;
        double val;
    };
    std::vector<Plane> planes;
    for_each_node(g, [&](std::size_t, const Index<N>& ix) {
        if (g.depth(ix) != 0) return;
        Plane pl;
        pl.y = g.coord(ix);
        pl.val = b.at(ix);
        for (int a = 0; a < N; ++a) {
            // tangential slope along axis a if the whole stencil stays on the boundary
            pl.slope[a] = 0.0;
            if (ix[a] == 0 || ix[a] == g.counts[a] - 1) continue;  // normal-ish axis
            bool tangential = false;
            for (int o = 0; o < N; ++o)
                if (o != a && (ix[o] == 0 || ix[o] == g.counts[o] - 1)) tangential = true;
            if (!tangential) continue;
            Index<N> m = ix, p = ix;
            m[a] -= 1;
            p[a] += 1;
            pl.slope[a] = (b.at(p) - b.at(m)) / (2.0 * g.spacing(a));
        }
        planes.push_back(pl);
    });
    ScalarField<N> u(g);
    parallel_for(g.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k) {
            const Index<N> ix = g.unflat(k);
            const Point<N> x = g.coord(ix);
            if (g.depth(ix) == 0) {
                u[k] = b.at(ix);
                continue;
            }
            double best = -std::numeric_limits<double>::infinity();
            for (const auto& pl : planes) {
                double v = pl.val;
                for (int a = 0; a < N; ++a) v += pl.slope[a] * (x[a] - pl.y[a]);
                best = std::max(best, v);
            }
            u[k] = best;
        }
    });
    return u;
}

/// One exact linear solve lifting the iterate onto Delta u = n with the same
/// boundary values. The tangent-plane surrogate alone leaves deep creases
/// that the clamped Newton linearization cannot repair; the Poisson lift
/// lands inside its basin.
template <int N>
void poisson_lift(ScalarField<N>& u) {
    const auto& g = u.grid;
    std::vector<int> eq(g.size(), -1);
    int neq = 0;
    for_each_node(g, [&](std::size_t k, const Index<N>& ix) {
        if (g.depth(ix) >= 1) eq[k] = neq++;
    });
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(neq) * (2 * N + 1));
    Eigen::VectorXd rhs(neq);
    for_each_node(g, [&](std::size_t k, const Index<N>& ix) {
        if (eq[k] < 0) return;
        double lap = 0;
        for (int a = 0; a < N; ++a) lap += fd::d2_at(u, ix, a);
        rhs(eq[k]) = N - lap;
        for (int a = 0; a < N; ++a) {
            const double w = 1.0 / (g.spacing(a) * g.spacing(a));
            Index<N> j = ix;
            const auto add = [&](double ww) {
                const std::size_t kj = g.flat(j);
                if (eq[kj] >= 0) trips.emplace_back(eq[k], eq[kj], ww);
            };
            add(-2.0 * w);
            j[a] = ix[a] - 1;
            add(w);
            j[a] = ix[a] + 1;
            add(w);
        }
    });
    Eigen::SparseMatrix<double> A(neq, neq);
    A.setFromTriplets(trips.begin(), trips.end());
    const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol(-A);  // make it SPD
    const Eigen::VectorXd v = chol.solve(-rhs);
    for_each_node(g, [&](std::size_t k, const Index<N>&) {
        if (eq[k] >= 0) u[k] += v(eq[k]);
    });
}

/// Clamped log-det residual of the current iterate at interior nodes:
/// r = ln prod max(lambda_i(D^2 u), floor). Zero at boundary slots.
template <int N>
struct Residual {
    ScalarField<N> r;
    double sup = 0.0;
    double rms = 0.0;
    double min_eig = std::numeric_limits<double>::infinity();
};

template <int N>
Residual<N> clamped_residual(const ScalarField<N>& u, double floor) {
    Residual<N> res{ScalarField<N>(u.grid), 0.0, 0.0, std::numeric_limits<double>::infinity()};
    const std::size_t n = u.grid.size();
    std::vector<double> mineig(n, std::numeric_limits<double>::infinity());
    parallel_for(n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k) {
            const Index<N> ix = u.grid.unflat(k);
            if (u.grid.depth(ix) < 1) continue;
            const SymMat<N> H = fd::hessian_at(u, ix);
            const auto ev = H.eigenvalues();
            mineig[k] = ev(0);
            double logdet = 0;
            for (int i = 0; i < N; ++i) logdet += std::log(std::max(ev(i), floor));
            res.r[k] = logdet;
        }
    });
    KahanSum sq;
    std::size_t cnt = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(mineig[k])) continue;
        res.min_eig = std::min(res.min_eig, mineig[k]);
        res.sup = std::max(res.sup, std::abs(res.r[k]));
        sq.add(res.r[k] * res.r[k]);
        ++cnt;
    }
    res.rms = cnt ? std::sqrt(sq.sum / cnt) : 0.0;
    return res;
}

}  // namespace detail

/// One Newton step for ln det D^2 u = 0: solves sum_ij g^{ij} d_ij v = -r
/// with zero boundary data, g^{ij} the inverse of the eigenvalue-clamped
/// discrete Hessian. Returns the update and whether the solve succeeded.
template <int N>
struct NewtonStep {
    ScalarField<N> update;
    detail::Residual<N> residual;
    bool linear_solve_ok = false;
};

template <int N>
NewtonStep<N> newton_step(const ScalarField<N>& u, const SolverConfig& cfg) {
    const auto& g = u.grid;
    NewtonStep<N> step{ScalarField<N>(g), detail::clamped_residual(u, cfg.eig_floor), false};

    // interior unknown numbering in canonical node order
    const std::size_t n = g.size();
    std::vector<int> eq(n, -1);
    int neq = 0;
    for_each_node(g, [&](std::size_t k, const Index<N>& ix) {
        if (g.depth(ix) >= 1) eq[k] = neq++;
    });

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(neq) * (N == 2 ? 9 : 19));
    Eigen::VectorXd rhs(neq);

    for_each_node(g, [&](std::size_t k, const Index<N>& ix) {
        if (eq[k] < 0) return;
        const SymMat<N> H = fd::hessian_at(u, ix);
        const SymMat<N> Ginv = H.clamped_inverse(cfg.eig_floor);
        rhs(eq[k]) = -step.residual.r[k];
        auto add = [&](const Index<N>& j, double w) {
            if (w == 0.0) return;
            const std::size_t kj = g.flat(j);
            if (eq[kj] >= 0) trips.emplace_back(eq[k], eq[kj], w);
            // boundary columns carry v = 0 and drop out
        };
        for (int a = 0; a < N; ++a) {
            const double w = Ginv(a, a) / (g.spacing(a) * g.spacing(a));
            Index<N> j = ix;
            add(j, -2.0 * w);
            j[a] = ix[a] - 1;
            add(j, w);
            j[a] = ix[a] + 1;
            add(j, w);
        }
        for (int a = 0; a < N; ++a)
            for (int b = a + 1; b < N; ++b) {
                const double w = 2.0 * Ginv(a, b) / (4.0 * g.spacing(a) * g.spacing(b));
                for (int sa = -1; sa <= 1; sa += 2)
                    for (int sb = -1; sb <= 1; sb += 2) {
                        Index<N> j = ix;
                        j[a] += sa;
                        j[b] += sb;
                        add(j, w * sa * sb);
                    }
            }
    });

    Eigen::SparseMatrix<double> A(neq, neq);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success) return step;  // singular after clamping: fallback signal
    const Eigen::VectorXd v = lu.solve(rhs);
    if (lu.info() != Eigen::Success) return step;
    step.linear_solve_ok = true;
    for_each_node(g, [&](std::size_t k, const Index<N>&) {
        if (eq[k] >= 0) step.update[k] = v(eq[k]);
    });
    return step;
}

/// Oberman-style nodal relaxation: at each interior node pick the value whose
/// convexified local operator matches the right-hand side, i.e. the product
/// of clamped eigenvalues of the local second-difference matrix equals 1.
/// Sweeps run lexicographically then reverse-lexicographically; boundary
/// values stay fixed. Decreasing the nodal value only raises eigenvalues, so
/// the scalar problem is monotone and solved by bisection.
template <int N>
GaussSeidelReport gauss_seidel_fallback(ScalarField<N>& u, long sweep_pairs, double eig_floor) {
    const auto& g = u.grid;
    GaussSeidelReport rep;

    std::vector<std::size_t> interior;
    interior.reserve(g.size());
    for_each_node(g, [&](std::size_t k, const Index<N>& ix) {
        if (g.depth(ix) >= 1) interior.push_back(k);
    });

    auto local_solve = [&](std::size_t k) {
        const Index<N> ix = g.unflat(k);
        SymMat<N> H;
        Point<N> cc;  // cc[a] = 2 / h_a^2
        Point<N> ss;  // neighbor averages along each axis
        for (int a = 0; a < N; ++a) {
            Index<N> m = ix, p = ix;
            m[a] -= 1;
            p[a] += 1;
            const double h = g.spacing(a);
            cc[a] = 2.0 / (h * h);
            ss[a] = 0.5 * (u.at(m) + u.at(p));
        }
        for (int a = 0; a < N; ++a)
            for (int b = a + 1; b < N; ++b) H.at(a, b) = fd::dmixed_at(u, ix, a, b);
        auto phi = [&](double t) {
            SymMat<N> Ht = H;
            for (int a = 0; a < N; ++a) Ht.at(a, a) = cc[a] * (ss[a] - t);
            return Ht.clamped_det(eig_floor) - 1.0;
        };
        // bracket: phi decreases in t; above all neighbor averages it is < 0
        double t_hi = ss[0];
        for (int a = 1; a < N; ++a) t_hi = std::max(t_hi, ss[a]);
        double span = std::max(1.0, std::abs(t_hi));
        int guard = 0;
        while (phi(t_hi) > 0 && guard++ < 200) t_hi += span, span *= 2;
        double step = g.max_spacing() * g.max_spacing();
        double t_lo = t_hi - step;
        guard = 0;
        while (phi(t_lo) < 0 && guard++ < 200) {
            t_hi = t_lo;
            step *= 2;
            t_lo = t_hi - step;
        }
        for (int it = 0; it < 80 && t_hi - t_lo > 1e-15 * std::max(1.0, std::abs(t_lo)); ++it) {
            const double mid = 0.5 * (t_lo + t_hi);
            (phi(mid) >= 0 ? t_lo : t_hi) = mid;
        }
        u[k] = 0.5 * (t_lo + t_hi);
    };

    auto modulus = [&]() {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t k : interior) m = std::min(m, fd::hessian_at(u, g.unflat(k)).min_eigenvalue());
        return m;
    };

    double prev = modulus();
    rep.modulus_trajectory.push_back(prev);
    for (long s = 0; s < sweep_pairs; ++s) {
        for (auto it = interior.begin(); it != interior.end(); ++it) local_solve(*it);
        for (auto it = interior.rbegin(); it != interior.rend(); ++it) local_solve(*it);
        const double cur = modulus();
        rep.modulus_trajectory.push_back(cur);
        if (cur < prev - 1e-12 * std::max(1.0, std::abs(prev))) rep.modulus_monotone = false;
        prev = cur;
        ++rep.sweeps;
    }
    return rep;
}

/// Dirichlet solve for det D^2 u = 1: tangent-plane start, damped Newton on
/// the log-determinant form, Gauss-Seidel fallback on stalls or singular
/// linearizations. Converged results carry the independent residual
/// certificate.
template <int N>
std::pair<PotentialField<N>, SolveReport> solve_dirichlet(const DirichletProblem<N>& prob,
                                                          const SolverConfig& cfg = {}) {
    cfg.validate();
    detail::check_boundary_convexity(prob);
    const auto t0 = std::chrono::steady_clock::now();

    ScalarField<N> u = detail::tangent_plane_start(prob);
    detail::poisson_lift(u);
    SolveReport rep;
    if (cfg.warmup_sweeps > 0 && cfg.use_fallback) {
        const auto gs = gauss_seidel_fallback(u, cfg.warmup_sweeps, cfg.eig_floor);
        rep.fallback_sweeps_used += gs.sweeps;
    }

    ScalarField<N> best = u;
    double best_sup = std::numeric_limits<double>::infinity();
    int stalls = 0;
    const long batch = 50;

    for (rep.iterations = 0; rep.iterations < cfg.max_newton_iters; ++rep.iterations) {
        auto step = newton_step(u, cfg);
        if (step.residual.sup < best_sup) {
            best_sup = step.residual.sup;
            best = u;
        }
        if (step.residual.sup <= cfg.newton_tol && step.residual.min_eig > 0) {
            rep.converged = true;
            break;
        }
        bool need_fallback = !step.linear_solve_ok;
        if (step.linear_solve_ok) {
            // backtracking on the rms of the clamped residual
            double t = 1.0;
            double new_rms = step.residual.rms;
            bool accepted = false;
            ScalarField<N> cand(u.grid);
            for (int ls = 0; ls < 40; ++ls) {
                for (std::size_t k = 0; k < u.values.size(); ++k)
                    cand[k] = u[k] + t * step.update[k];
                const auto res = detail::clamped_residual(cand, cfg.eig_floor);
                if (res.rms < step.residual.rms) {
                    accepted = true;
                    new_rms = res.rms;
                    u = cand;
                    break;
                }
                t *= cfg.damping;
            }
            // relative progress test: tiny rms nibbles at a plateau count as stalls
            if (!accepted || step.residual.rms - new_rms < 1e-4 * step.residual.rms) {
                ++stalls;
                need_fallback = stalls >= 2;
            } else {
                stalls = 0;
            }
        }
        if (need_fallback) {
            if (!cfg.use_fallback || rep.fallback_sweeps_used >= cfg.fallback_sweeps) break;
            const long todo = std::min(batch, cfg.fallback_sweeps - rep.fallback_sweeps_used);
            const auto gs = gauss_seidel_fallback(u, todo, cfg.eig_floor);
            rep.fallback_sweeps_used += gs.sweeps;
            stalls = 0;
        }
    }

    if (!rep.converged) {
        const auto res = detail::clamped_residual(u, cfg.eig_floor);
        if (res.sup > best_sup) u = best;
    }

    const auto res = detail::clamped_residual(u, cfg.eig_floor);
    rep.final_residual = res.sup;
    rep.converged = res.sup <= cfg.newton_tol && res.min_eig > 0;

    PotentialField<N> out = make_potential(std::move(u),
                                           rep.converged ? Certificate::solver : Certificate::none);
    const auto cert = residual_certificate(out);
    rep.certificate_residual = cert.sup_abs_log_det;
    rep.min_hessian_eigenvalue = cert.min_eigenvalue;
    out.residual = cert.sup_abs_log_det;
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(out), rep};
}

}  // namespace malab
