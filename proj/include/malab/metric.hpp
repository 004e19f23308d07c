#pragma once

#include <cmath>

#include "malab/potential.hpp"

namespace malab {

/// Which Hessian/gradient backs the graph calculus: the discrete stencils,
/// or the sampled analytic formulas when the potential carries them.
enum class HessianSource { discrete, analytic };

template <int N>
SymMatField<N> potential_hessian(const PotentialField<N>& p, HessianSource src) {
    if (src == HessianSource::analytic) {
        if (!p.source || !p.source->has_hessian())
            throw ParameterError("analytic hessian requested but not available");
        SymMatField<N> H(p.grid());
        for_each_node(p.grid(), [&](std::size_t k, const Index<N>& ix) {
            H[k] = p.source->hessian(p.grid().coord(ix));
        });
        return H;
    }
    return hessian_field(p.u);
}

template <int N>
VecField<N> potential_gradient(const PotentialField<N>& p, HessianSource src) {
    if (src == HessianSource::analytic) {
        if (!p.source) throw ParameterError("analytic gradient requested but not available");
        VecField<N> G(p.grid());
        for_each_node(p.grid(), [&](std::size_t k, const Index<N>& ix) {
            G[k] = p.source->gradient(p.grid().coord(ix));
        });
        return G;
    }
    return gradient_field(p.u);
}

/// Induced metric g = D^2 u of the gradient graph, its nodewise inverse, and
/// the mask of nodes where g is safely invertible. On solutions det g = 1 up
/// to solver tolerance and O(h^2).
template <int N>
struct MetricData {
    SymMatField<N> g;
    SymMatField<N> g_inv;
    ScalarField<N> det_g;
    NodeMask<N> valid;
    double eig_floor = 1e-8;

    const GridSpec<N>& grid() const { return g.grid; }
};

template <int N>
MetricData<N> build_metric(const PotentialField<N>& p, double eig_floor = 1e-8,
                           HessianSource src = HessianSource::discrete) {
    MetricData<N> m;
    m.g = potential_hessian(p, src);
    m.g_inv = SymMatField<N>(p.grid());
    m.det_g = ScalarField<N>(p.grid());
    m.valid = NodeMask<N>(p.grid());
    m.eig_floor = eig_floor;
    const std::size_t n = p.grid().size();
    parallel_for(n, [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            m.det_g[k] = m.g[k].det();
            if (m.g[k].min_eigenvalue() >= eig_floor) {
                m.valid.in[k] = 1;
                m.g_inv[k] = m.g[k].inverse();
            }
        }
    });
    return m;
}

/// Laplace-Beltrami in non-divergence form, sum_ij g^{ij} d_ij f. Only nodes
/// on valid interior carry meaning; boundary nodes use one-sided stencils and
/// never enter inequality minima.
template <int N>
ScalarField<N> laplace_beltrami(const ScalarField<N>& f, const MetricData<N>& m) {
    if (!f.grid.same_layout(m.grid())) throw ParameterError("field/metric grid mismatch");
    ScalarField<N> out(f.grid);
    out.masked = true;
    parallel_for(f.grid.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            if (!m.valid.in[k]) continue;
            const Index<N> ix = f.grid.unflat(k);
            const SymMat<N> hf = fd::hessian_at(f, ix);
            double s = 0;
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) s += m.g_inv[k](i, j) * hf(i, j);
            out[k] = s;
        }
    });
    return out;
}

/// |grad_g f|^2 = sum_ij g^{ij} d_i f d_j f; nonnegative on the valid mask.
template <int N>
ScalarField<N> metric_gradient_sq(const ScalarField<N>& f, const MetricData<N>& m) {
    if (!f.grid.same_layout(m.grid())) throw ParameterError("field/metric grid mismatch");
    ScalarField<N> out(f.grid);
    out.masked = true;
    parallel_for(f.grid.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            if (!m.valid.in[k]) continue;
            const Index<N> ix = f.grid.unflat(k);
            const Point<N> df = fd::gradient_at(f, ix);
            double s = 0;
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) s += m.g_inv[k](i, j) * df[i] * df[j];
            out[k] = s;
        }
    });
    return out;
}

/// a = det(I + D^2 u)^{1/2n} and b = ln det(I + D^2 u) = 2n ln a.
template <int N>
struct HessianQuantity {
    ScalarField<N> a;
    ScalarField<N> b;
    NodeMask<N> valid;  // det(I + D^2 u) > 0 (always true for convex inputs)
};

template <int N>
HessianQuantity<N> hessian_quantity_a(const PotentialField<N>& p,
                                      HessianSource src = HessianSource::discrete) {
    const auto H = potential_hessian(p, src);
    HessianQuantity<N> q{ScalarField<N>(p.grid()), ScalarField<N>(p.grid()), NodeMask<N>(p.grid())};
    const double expo = 1.0 / (2.0 * N);
    parallel_for(p.grid().size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            const double d = H[k].plus_identity().det();
            if (d > 0) {
                q.valid.in[k] = 1;
                q.a[k] = std::pow(d, expo);
                q.b[k] = std::log(d);
            } else {
                q.a.masked = q.b.masked = true;
            }
        }
    });
    return q;
}

/// z(x) = <x - p, Du(x) - Du(p)>: squared extrinsic distance on the graph to
/// the point over p. Du(p) is the multilinearly interpolated gradient when p
/// is off-node. min_value records the worst monotonicity defect.
template <int N>
struct ExtrinsicDistanceField {
    Point<N> center{};
    Point<N> center_gradient{};
    ScalarField<N> z;
    double min_value = 0.0;
};

template <int N>
ExtrinsicDistanceField<N> extrinsic_distance(const PotentialField<N>& p, const NoDeduce<Point<N>>& center,
                                             HessianSource src = HessianSource::discrete) {
    if (!p.grid().contains(center, 1e-9 * p.grid().max_spacing()))
        throw DomainError("extrinsic distance center outside grid box");
    const VecField<N> grad = potential_gradient(p, src);
    ExtrinsicDistanceField<N> out;
    out.center = center;
    out.center_gradient = (src == HessianSource::analytic) ? p.source->gradient(center)
                                                           : interpolate(grad, center);
    out.z = ScalarField<N>(p.grid());
    double mn = std::numeric_limits<double>::infinity();
    for_each_node(p.grid(), [&](std::size_t k, const Index<N>& ix) {
        const Point<N> x = p.grid().coord(ix);
        double s = 0;
        for (int a = 0; a < N; ++a)
            s += (x[a] - center[a]) * (grad[k][a] - out.center_gradient[a]);
        out.z[k] = s;
        mn = std::min(mn, s);
    });
    out.min_value = mn;
    return out;
}

/// Nodes at physical distance >= margin from the box boundary; reduction
/// regions for the inequality checks, with a margin that refinement studies
/// can hold fixed across resolutions.
template <int N>
bool in_core(const GridSpec<N>& g, const NoDeduce<Index<N>>& ix, double margin) {
    const Point<N> x = g.coord(ix);
    for (int a = 0; a < N; ++a) {
        const double eps = 1e-9 * g.spacing(a);
        if (x[a] < g.lo[a] + margin - eps || x[a] > g.hi[a] - margin + eps) return false;
    }
    return true;
}

template <int N>
double default_core_margin(const GridSpec<N>& g) {
    return 2.0 * g.max_spacing();
}

/// sup |Delta_g z - 2n| and min(|grad_g z|^2 - 4z) over valid core nodes.
template <int N>
struct IdentityReport {
    double sup_laplace_defect = 0.0;   // sup |Delta_g z - 2n|
    double min_gradient_margin = 0.0;  // min (|grad_g z|^2 - 4 z)
    double min_z = 0.0;
    std::size_t nodes_checked = 0;
};

template <int N>
IdentityReport<N> check_z_identities(const PotentialField<N>& p, const MetricData<N>& m,
                                     const NoDeduce<Point<N>>& center, double margin,
                                     HessianSource src = HessianSource::discrete) {
    const auto zf = extrinsic_distance(p, center, src);
    const auto lap = laplace_beltrami(zf.z, m);
    const auto gsq = metric_gradient_sq(zf.z, m);
    IdentityReport<N> rep;
    rep.min_gradient_margin = std::numeric_limits<double>::infinity();
    rep.min_z = zf.min_value;
    for_each_node(p.grid(), [&](std::size_t k, const Index<N>& ix) {
        if (!m.valid.in[k] || !in_core(p.grid(), ix, margin)) return;
        rep.sup_laplace_defect = std::max(rep.sup_laplace_defect, std::abs(lap[k] - 2.0 * N));
        rep.min_gradient_margin = std::min(rep.min_gradient_margin, gsq[k] - 4.0 * zf.z[k]);
        ++rep.nodes_checked;
    });
    return rep;
}

/// Independent residual certificate: sup |ln det D^2 u| over interior nodes
/// plus the positivity of the discrete Hessian. Kept apart from the solver's
/// own assembly so converged results are re-checked through different code.
template <int N>
struct ResidualCertificate {
    double sup_abs_log_det = std::numeric_limits<double>::infinity();
    double min_eigenvalue = -std::numeric_limits<double>::infinity();
    bool positive_definite = false;
};

template <int N>
ResidualCertificate<N> residual_certificate(const PotentialField<N>& p) {
    const auto H = hessian_field(p.u);
    ResidualCertificate<N> cert;
    cert.sup_abs_log_det = 0.0;
    cert.min_eigenvalue = std::numeric_limits<double>::infinity();
    for_each_node(p.grid(), [&](std::size_t k, const Index<N>& ix) {
        if (p.grid().depth(ix) < 1) return;
        const auto ev = H[k].eigenvalues();
        cert.min_eigenvalue = std::min(cert.min_eigenvalue, ev(0));
        double logdet = 0.0;
        bool pos = true;
        for (int i = 0; i < N; ++i) {
            if (ev(i) <= 0) pos = false;
            else logdet += std::log(ev(i));
        }
        if (!pos)
            cert.sup_abs_log_det = std::numeric_limits<double>::infinity();
        else
            cert.sup_abs_log_det = std::max(cert.sup_abs_log_det, std::abs(logdet));
    });
    cert.positive_definite = cert.min_eigenvalue > 0;
    return cert;
}

}  // namespace malab
