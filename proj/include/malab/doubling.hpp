#pragma once

#include <random>

#include "malab/sections.hpp"

namespace malab {

namespace detail {

/// log(e^s - 1), stable for all s > 0.
inline double log_expm1(double s) {
    if (s <= 0) return -std::numeric_limits<double>::infinity();
    if (s > 0.7) return s + std::log1p(-std::exp(-s));
    return std::log(std::expm1(s));
}

}  // namespace detail

/// h = 2 r1^2/n and the doubling constant (e^{r3^2/h}-1)/(e^{(r3^2-r2^2)/h}-1).
/// For r3^2/h > 700 the asymptotic form C ~ e^{r2^2/h} is used and flagged;
/// log_C stays finite either way.
struct DoublingConstant {
    double h = 0;
    double C = 0;
    double log_C = 0;
    bool asymptotic = false;
};

inline DoublingConstant doubling_constant(int n, double r1, double r2, double r3) {
    if (!(0 < r1 && r1 < r2 && r2 < r3))
        throw ParameterError("doubling constant needs 0 < r1 < r2 < r3");
    DoublingConstant dc;
    dc.h = 2.0 * r1 * r1 / n;
    const double e_full = r3 * r3 / dc.h;
    const double e_gap = (r3 * r3 - r2 * r2) / dc.h;
    dc.log_C = detail::log_expm1(e_full) - detail::log_expm1(e_gap);
    if (e_full > 700.0) {
        dc.asymptotic = true;
        dc.C = std::exp(r2 * r2 / dc.h);  // may overflow to inf; log_C is the usable value
    } else {
        dc.C = std::expm1(e_full) / std::expm1(e_gap);
    }
    return dc;
}

/// Center, radii r1 < r2 < r3 < r4, and the derived h and C.
template <int N>
struct DoublingSpec {
    Point<N> center{};
    double r1 = 0, r2 = 0, r3 = 0, r4 = 0;
    DoublingConstant constant;

    static DoublingSpec make(const NoDeduce<Point<N>>& center, double r1, double r2, double r3,
                             double r4) {
        if (!(0 < r1 && r1 < r2 && r2 < r3 && r3 < r4))
            throw ParameterError("doubling spec needs 0 < r1 < r2 < r3 < r4");
        DoublingSpec s;
        s.center = center;
        s.r1 = r1;
        s.r2 = r2;
        s.r3 = r3;
        s.r4 = r4;
        s.constant = doubling_constant(N, r1, r2, r3);
        return s;
    }
};

template <int N>
struct DoublingReport {
    double sup_inner = 0;   // sup of a over D_{r1}
    double sup_outer = 0;   // sup of a over D_{r2}
    double bound = 0;       // C * sup_inner
    double margin = 0;      // bound - sup_outer
    double margin_dilated = 0;  // with the outer mask dilated one layer
    double tol = 0;             // one-cell variation of a near the masks
    bool containment_ok = false;
    bool pass = false;
    std::size_t inner_nodes = 0, outer_nodes = 0;
};

namespace detail {

template <int N>
void require_solution_input(const PotentialField<N>& u, bool diagnostic, const char* what) {
    if (!u.certified() && !diagnostic)
        throw InputError(std::string(what) +
                         " only applies to certified solutions; pass diagnostic to override");
}

template <int N>
double masked_sup(const ScalarField<N>& f, const NodeMask<N>& m) {
    double s = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < f.values.size(); ++k)
        if (m.in[k]) s = std::max(s, f[k]);
    return s;
}

/// Largest Euclidean gradient norm of f over a mask; scales the one-cell
/// quantization tolerances.
template <int N>
double masked_gradient_scale(const ScalarField<N>& f, const NodeMask<N>& m) {
    const auto grad = gradient_field(f);
    double s = 0;
    for (std::size_t k = 0; k < f.values.size(); ++k) {
        if (!m.in[k]) continue;
        double g2 = 0;
        for (int a = 0; a < N; ++a) g2 += grad[k][a] * grad[k][a];
        s = std::max(s, g2);
    }
    return std::sqrt(s);
}

}  // namespace detail

/// Doubling check: sup_{D_{r2}} a <= C sup_{D_{r1}} a + tol, with the outer
/// mask additionally dilated one layer as a quantization sensitivity pass.
/// The precondition D_{r4} strictly inside the interior is enforced.
template <int N>
DoublingReport<N> check_doubling(const PotentialField<N>& u, const DoublingSpec<N>& spec,
                                 HessianSource src = HessianSource::discrete,
                                 bool diagnostic = false) {
    detail::require_solution_input(u, diagnostic, "doubling check");
    const auto zf = extrinsic_distance(u, spec.center, src);
    const auto& g = u.grid();

    NodeMask<N> inner(g), outer(g), widest(g);
    for_each_node(g, [&](std::size_t k, const Index<N>&) {
        const double z = zf.z[k];
        if (z < spec.r1 * spec.r1) inner.insert(k);
        if (z < spec.r2 * spec.r2) outer.insert(k);
        if (z < spec.r4 * spec.r4) widest.insert(k);
    });

    DoublingReport<N> rep;
    rep.containment_ok = true;
    for_each_node(g, [&](std::size_t k, const Index<N>& ix) {
        if (widest.in[k] && g.depth(ix) < 2) rep.containment_ok = false;
    });
    if (!rep.containment_ok)
        throw InputError("doubling spec invalid: D_{r4} not strictly inside the interior");
    if (inner.count() == 0)
        throw InputError("doubling spec invalid: inner extrinsic ball contains no nodes");

    const auto q = hessian_quantity_a(u, src);
    rep.sup_inner = detail::masked_sup(q.a, inner);
    rep.sup_outer = detail::masked_sup(q.a, outer);
    rep.bound = spec.constant.C * rep.sup_inner;
    rep.margin = rep.bound - rep.sup_outer;
    const double a_grad = detail::masked_gradient_scale(q.a, widest);
    rep.tol = a_grad * g.max_spacing() * std::sqrt(double(N));
    const double sup_outer_dilated = detail::masked_sup(q.a, dilate(outer));
    rep.margin_dilated = rep.bound - sup_outer_dilated;
    rep.pass = rep.margin >= -rep.tol && rep.margin_dilated >= -rep.tol;
    rep.inner_nodes = inner.count();
    rep.outer_nodes = outer.count();
    return rep;
}

/// Korevaar test function w = eta a with eta = [exp((r3^2-z)/h)-1]_+ on
/// D_{r3}. The argmax is located in log space (no overflow); ties break to
/// the lowest node index. The proof mechanism asserts z(x_*) <= r1^2 up to
/// one cell of z-variation.
template <int N>
struct KorevaarProbe {
    ScalarField<N> eta;
    ScalarField<N> w;
    std::size_t argmax = 0;
    double z_at_max = 0;
    double tol = 0;
    bool pass = false;
    bool eta_overflow = false;
};

template <int N>
KorevaarProbe<N> korevaar_probe(const PotentialField<N>& u, const DoublingSpec<N>& spec,
                                HessianSource src = HessianSource::discrete,
                                bool diagnostic = false) {
    detail::require_solution_input(u, diagnostic, "korevaar probe");
    const auto zf = extrinsic_distance(u, spec.center, src);
    const auto& g = u.grid();
    NodeMask<N> widest(g);
    bool containment_ok = true;
    for_each_node(g, [&](std::size_t k, const Index<N>& ix) {
        if (zf.z[k] < spec.r4 * spec.r4) {
            widest.insert(k);
            if (g.depth(ix) < 2) containment_ok = false;
        }
    });
    if (!containment_ok)
        throw InputError("korevaar probe invalid: D_{r4} not strictly inside the interior");

    const auto q = hessian_quantity_a(u, src);
    KorevaarProbe<N> probe{ScalarField<N>(g), ScalarField<N>(g), 0, 0, 0, false, false};
    const double h = spec.constant.h;
    double best_logw = -std::numeric_limits<double>::infinity();
    std::size_t best_k = 0;
    bool found = false;
    for_each_node(g, [&](std::size_t k, const Index<N>&) {
        const double s = (spec.r3 * spec.r3 - zf.z[k]) / h;
        if (s <= 0) return;  // outside D_{r3}: w = 0
        if (s > 700.0) probe.eta_overflow = true;
        probe.eta[k] = std::expm1(std::min(s, 700.0));
        probe.w[k] = probe.eta[k] * q.a[k];
        const double logw = detail::log_expm1(s) + std::log(q.a[k]);
        if (!found || logw > best_logw) {
            found = true;
            best_logw = logw;
            best_k = k;
        }
    });
    if (!found) throw InputError("korevaar probe invalid: D_{r3} contains no nodes");
    probe.argmax = best_k;
    probe.z_at_max = zf.z[best_k];
    NodeMask<N> r3mask(g);
    for (std::size_t k = 0; k < zf.z.values.size(); ++k)
        if (zf.z[k] < spec.r3 * spec.r3) r3mask.insert(k);
    probe.tol = detail::masked_gradient_scale(zf.z, r3mask) * g.max_spacing() * std::sqrt(double(N));
    probe.pass = probe.z_at_max <= spec.r1 * spec.r1 + probe.tol;
    return probe;
}

/// Jacobi check: defect d = Delta_g a - 2 |grad_g a|^2 / a over the valid
/// core, plus the equivalent b-form and the exact algebraic relation
/// defect_b = (2n/a) defect_a used as a cross-route consistency measure.
template <int N>
struct JacobiReport {
    double min_defect = 0;
    Index<N> argmin{};
    double min_defect_b = 0;
    double consistency = 0;  // max |defect_b - (2n/a) defect_a|
    std::size_t nodes_checked = 0;
    bool diagnostic = false;  // set when the input is not a certified solution
};

template <int N>
JacobiReport<N> check_jacobi(const PotentialField<N>& u, double margin = -1.0,
                             HessianSource src = HessianSource::discrete,
                             bool diagnostic = false, double eig_floor = 1e-8) {
    detail::require_solution_input(u, diagnostic, "jacobi check");
    const auto& g = u.grid();
    if (margin < 0) margin = default_core_margin(g);
    const auto m = build_metric(u, eig_floor, src);
    const auto q = hessian_quantity_a(u, src);
    const auto lap_a = laplace_beltrami(q.a, m);
    const auto gsq_a = metric_gradient_sq(q.a, m);
    const auto lap_b = laplace_beltrami(q.b, m);
    const auto gsq_b = metric_gradient_sq(q.b, m);

    JacobiReport<N> rep;
    rep.diagnostic = !u.certified();
    rep.min_defect = std::numeric_limits<double>::infinity();
    rep.min_defect_b = std::numeric_limits<double>::infinity();
    for_each_node(g, [&](std::size_t k, const Index<N>& ix) {
        if (!m.valid.in[k] || !q.valid.in[k] || !in_core(g, ix, margin)) return;
        const double da = lap_a[k] - 2.0 * gsq_a[k] / q.a[k];
        const double db = lap_b[k] - gsq_b[k] / (2.0 * N);
        if (da < rep.min_defect) {
            rep.min_defect = da;
            rep.argmin = ix;
        }
        rep.min_defect_b = std::min(rep.min_defect_b, db);
        rep.consistency = std::max(rep.consistency, std::abs(db - (2.0 * N / q.a[k]) * da));
        ++rep.nodes_checked;
    });
    return rep;
}

/// Extrinsic-vs-Euclidean contrast on the degenerate family: an on-axis
/// extrinsic ball of any radius contains the whole axis, so its Hessian and
/// a sups already carry the blow-up, while a Euclidean ball of comparable
/// size centered off-axis misses it. Qualitative, reported side by side.
template <int N>
struct ContrastReport {
    bool extrinsic_contains_axis = true;
    double extrinsic_inner_sup_a = 0;
    double extrinsic_outer_sup_a = 0;
    double extrinsic_ratio = 0;  // stays bounded (both sups see the axis)
    double euclidean_inner_sup_a = 0;
    double euclidean_outer_sup_a = 0;
    double euclidean_ratio = 0;  // blows up once the outer ball reaches the axis
    double extrinsic_hessian_sup = 0;
    double euclidean_hessian_sup = 0;
};

template <int N>
ContrastReport<N> pogorelov_contrast(const PotentialField<N>& u, double off_axis = 0.35) {
    const auto& g = u.grid();
    ContrastReport<N> rep;
    Point<N> axis_center{};  // origin, on the degenerate axis
    const auto inner = build_extrinsic_ball(u, axis_center, 0.05);
    const auto outer = build_extrinsic_ball(u, axis_center, 0.2);
    for_each_node(g, [&](std::size_t k, const Index<N>& ix) {
        const auto x = g.coord(ix);
        double prime = 0;
        for (int a = 0; a < N - 1; ++a) prime += x[a] * x[a];
        if (prime < 1e-28 && !inner.mask.contains(k)) rep.extrinsic_contains_axis = false;
    });
    const auto q = hessian_quantity_a(u);
    const auto H = hessian_field(u.u);
    ScalarField<N> hnorm(g);
    for (std::size_t k = 0; k < g.size(); ++k) hnorm[k] = H[k].spectral_norm();

    rep.extrinsic_inner_sup_a = detail::masked_sup(q.a, inner.mask);
    rep.extrinsic_outer_sup_a = detail::masked_sup(q.a, outer.mask);
    rep.extrinsic_ratio = rep.extrinsic_outer_sup_a / rep.extrinsic_inner_sup_a;
    rep.extrinsic_hessian_sup = detail::masked_sup(hnorm, inner.mask);

    Point<N> qc{};
    qc[0] = off_axis;
    const auto euc_inner = euclidean_ball_mask(g, qc, 0.45 * off_axis);
    const auto euc_outer = euclidean_ball_mask(g, qc, 2.0 * off_axis);
    rep.euclidean_inner_sup_a = detail::masked_sup(q.a, euc_inner);
    rep.euclidean_outer_sup_a = detail::masked_sup(q.a, euc_outer);
    rep.euclidean_ratio = rep.euclidean_outer_sup_a / rep.euclidean_inner_sup_a;
    rep.euclidean_hessian_sup = detail::masked_sup(hnorm, euc_inner);
    return rep;
}

/// Draw a doubling spec with valid containment on the given potential:
/// center in the middle half-box, r4 capped by the distance (in z) to the
/// near-boundary band, inner radius kept node-populated.
template <int N>
DoublingSpec<N> random_valid_spec(const PotentialField<N>& u, std::mt19937_64& rng,
                                  HessianSource src = HessianSource::discrete) {
    const auto& g = u.grid();
    std::uniform_real_distribution<double> frac(0.3, 0.7);
    std::uniform_real_distribution<double> zeta(0.35, 0.8);
    std::uniform_real_distribution<double> f1(0.30, 0.50), f2(0.55, 0.75), f3(0.80, 0.95);
    for (int attempt = 0; attempt < 64; ++attempt) {
        Point<N> p;
        for (int a = 0; a < N; ++a)
            p[a] = g.lo[a] + (g.hi[a] - g.lo[a]) * frac(rng);
        const auto zf = extrinsic_distance(u, p, src);
        double z_limit = std::numeric_limits<double>::infinity();
        for_each_node(g, [&](std::size_t k, const Index<N>& ix) {
            if (g.depth(ix) < 2) z_limit = std::min(z_limit, zf.z[k]);
        });
        if (!(z_limit > 0)) continue;
        const double r4 = std::sqrt(zeta(rng) * z_limit);
        const double r1 = f1(rng) * r4, r2 = f2(rng) * r4, r3 = f3(rng) * r4;
        const double z_near = zf.z[g.flat(detail::nearest_node(g, p))];
        if (z_near >= r1 * r1) continue;  // inner ball must hold at least one node
        return DoublingSpec<N>::make(p, r1, r2, r3, r4);
    }
    throw InputError("could not draw a valid doubling spec on this field");
}

}  // namespace malab
