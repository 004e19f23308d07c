#pragma once

#include <cmath>
#include <limits>
#include <memory>

#include "malab/analytic.hpp"
#include "malab/fd.hpp"
#include "malab/field.hpp"

namespace malab {

/// Where a potential came from; the inequality checks only accept inputs
/// whose solution status is certified.
enum class Certificate {
    none,         // arbitrary convex sample, diagnostics only
    exact_family, // sampled from an exact solution family
    solver,       // converged Dirichlet solve with residual certificate
};

inline const char* to_string(Certificate c) {
    switch (c) {
        case Certificate::exact_family: return "exact_family";
        case Certificate::solver: return "solver";
        default: return "none";
    }
}

/// Discrete convex potential on a grid. Boundary values are the trace of u
/// on boundary nodes. convexity_modulus caches the smallest discrete Hessian
/// eigenvalue over interior nodes; degenerate inputs are admitted for the
/// geometry operations but flagged through it.
template <int N>
struct PotentialField {
    ScalarField<N> u;
    Certificate certificate = Certificate::none;
    double residual = std::numeric_limits<double>::quiet_NaN();
    double convexity_modulus = std::numeric_limits<double>::quiet_NaN();
    AnalyticPtr<N> source;  // set for sampled analytic families

    const GridSpec<N>& grid() const { return u.grid; }

    bool certified() const {
        return certificate == Certificate::exact_family || certificate == Certificate::solver;
    }

    double convexity_tolerance() const {
        return 1e-8 * std::max(1.0, hessian_scale_);
    }

    double hessian_scale_ = 1.0;
};

/// Smallest discrete Hessian eigenvalue over interior nodes, and the Hessian
/// sup norm used to scale the convexity tolerance.
template <int N>
inline void refresh_convexity(PotentialField<N>& p) {
    const auto H = hessian_field(p.u);
    double min_eig = std::numeric_limits<double>::infinity();
    double scale = 0.0;
    for_each_node(p.grid(), [&](std::size_t k, const Index<N>& ix) {
        if (p.grid().depth(ix) < 1) return;
        min_eig = std::min(min_eig, H[k].min_eigenvalue());
        scale = std::max(scale, H[k].spectral_norm());
    });
    p.convexity_modulus = min_eig;
    p.hessian_scale_ = std::max(1.0, scale);
}

template <int N>
PotentialField<N> make_potential(ScalarField<N> u, Certificate cert = Certificate::none,
                                 AnalyticPtr<N> source = nullptr) {
    PotentialField<N> p;
    p.u = std::move(u);
    p.certificate = cert;
    p.source = std::move(source);
    if (!p.u.all_finite()) throw InputError("potential field contains non-finite values");
    refresh_convexity(p);
    return p;
}

/// Sample an analytic family onto a grid; the result carries the
/// exact-family certificate and keeps the analytic source for
/// formula-exact gradient/Hessian paths.
template <int N>
PotentialField<N> sample_potential(const AnalyticPtr<N>& f, const GridSpec<N>& g) {
    ScalarField<N> u(g);
    for_each_node(g, [&](std::size_t k, const Index<N>& ix) { u[k] = f->value(g.coord(ix)); });
    return make_potential(std::move(u), Certificate::exact_family, f);
}

}  // namespace malab
