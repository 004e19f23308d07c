#pragma once

#include <algorithm>
#include <vector>

#include "malab/metric.hpp"

namespace malab {

/// Finite slope set approximating the subdifferential at p: the vertices of
/// a polytope spanned by one-sided difference-quotient gradients, every one
/// of which passes the global supporting-plane test.
template <int N>
struct SubdifferentialApprox {
    Point<N> point{};
    std::vector<Point<N>> slopes;
    bool smooth = false;  // singleton path: interpolated gradient

    double sup_pairing(const NoDeduce<Point<N>>& d) const {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& y : slopes) {
            double s = 0;
            for (int a = 0; a < N; ++a) s += d[a] * y[a];
            best = std::max(best, s);
        }
        return best;
    }
};

namespace detail {

/// Keep only extreme points of a small candidate set.
template <int N>
std::vector<Point<N>> hull_vertices(NoDeduce<std::vector<Point<N>>> pts) {
    // dedupe first
    std::vector<Point<N>> uniq;
    for (const auto& p : pts) {
        bool dup = false;
        for (const auto& q : uniq) {
            double d = 0;
            for (int a = 0; a < N; ++a) d = std::max(d, std::abs(p[a] - q[a]));
            if (d <= 1e-12) dup = true;
        }
        if (!dup) uniq.push_back(p);
    }
    if (uniq.size() <= 2) return uniq;
    // directional extremity over a fixed fan; exact enough for these tiny sets
    std::vector<Point<N>> dirs;
    if constexpr (N == 2) {
        for (int j = 0; j < 64; ++j) {
            const double th = 2.0 * 3.14159265358979323846 * j / 64.0;
            dirs.push_back({std::cos(th), std::sin(th)});
        }
    } else {
        for (int i = -2; i <= 2; ++i)
            for (int j = -2; j <= 2; ++j)
                for (int k = -2; k <= 2; ++k) {
                    if (!i && !j && !k) continue;
                    const double n0 = std::sqrt(double(i * i + j * j + k * k));
                    dirs.push_back({i / n0, j / n0, k / n0});
                }
    }
    std::vector<char> keep(uniq.size(), 0);
    for (const auto& d : dirs) {
        std::size_t arg = 0;
        double best = -1e300;
        for (std::size_t q = 0; q < uniq.size(); ++q) {
            double s = 0;
            for (int a = 0; a < N; ++a) s += uniq[q][a] * d[a];
            if (s > best) {
                best = s;
                arg = q;
            }
        }
        keep[arg] = 1;
    }
    std::vector<Point<N>> out;
    for (std::size_t q = 0; q < uniq.size(); ++q)
        if (keep[q]) out.push_back(uniq[q]);
    return out;
}

template <int N>
Index<N> nearest_node(const GridSpec<N>& g, const NoDeduce<Point<N>>& p) {
    Index<N> ix;
    for (int a = 0; a < N; ++a) {
        const int i = static_cast<int>(std::lround((p[a] - g.lo[a]) / g.spacing(a)));
        ix[a] = std::max(0, std::min(i, g.counts[a] - 1));
    }
    return ix;
}

}  // namespace detail

/// Subdifferential approximation at an interior point. Smoothness at the
/// nearest node is decided by a two-span test on the one-sided quotient gap:
/// kinks keep the gap under refinement, smooth curvature halves it. Smooth
/// points return the interpolated gradient; kinked ones return supporting-
/// plane-filtered hull vertices of one-sided quotients along the 2n axis and
/// 2n(n-1) diagonal directions.
template <int N>
SubdifferentialApprox<N> subdifferential(const PotentialField<N>& u,
                                         const NoDeduce<Point<N>>& p) {
    const auto& g = u.grid();
    if (!g.contains(p, 0.0)) throw DomainError("subdifferential point outside grid box");
    const Index<N> q = detail::nearest_node(g, p);
    if (g.depth(q) < 1) throw DomainError("subdifferential point must be interior");

    SubdifferentialApprox<N> out;
    out.point = p;

    bool kink = false;
    if (g.depth(q) >= 2) {
        for (int a = 0; a < N; ++a) {
            const double h = g.spacing(a);
            auto val = [&](int off) {
                Index<N> j = q;
                j[a] += off;
                return u.u.at(j);
            };
            const double gap1 = (val(1) - val(0)) / h - (val(0) - val(-1)) / h;
            const double gap2 = (val(2) - val(0)) / (2 * h) - (val(0) - val(-2)) / (2 * h);
            if (gap1 > 0.75 * gap2 && gap1 > 1e-10 * std::max(1.0, u.u.max_abs())) kink = true;
        }
    }

    if (!kink) {
        out.smooth = true;
        out.slopes.push_back(interpolate(gradient_field(u.u), p));
        return out;
    }

    // candidate slopes at the snapped node
    const Point<N> xq = g.coord(q);
    std::vector<Point<N>> cand;
    std::array<double, 2 * 3> axis_quot{};  // forward/backward per axis
    for (int a = 0; a < N; ++a) {
        Index<N> jp = q, jm = q;
        jp[a] += 1;
        jm[a] -= 1;
        axis_quot[2 * a] = (u.u.at(jp) - u.u.at(q)) / g.spacing(a);
        axis_quot[2 * a + 1] = (u.u.at(q) - u.u.at(jm)) / g.spacing(a);
    }
    for (int orthant = 0; orthant < (1 << N); ++orthant) {
        Point<N> y;
        for (int a = 0; a < N; ++a)
            y[a] = (orthant & (1 << a)) ? axis_quot[2 * a] : axis_quot[2 * a + 1];
        cand.push_back(y);
    }
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) {
            if (a == b) continue;
            for (int sb = -1; sb <= 1; sb += 2) {
                // diagonal direction e_a + sb*e_b, one-sided forward quotient
                Index<N> j = q;
                j[a] += 1;
                j[b] += sb;
                const double ha = g.spacing(a), hb = g.spacing(b);
                const double len = std::hypot(ha, hb);
                const double s = (u.u.at(j) - u.u.at(q)) / len;
                Point<N> y{};
                y[a] = s * ha / len;
                y[b] = s * sb * hb / len;
                cand.push_back(y);
            }
        }
    // central gradient is kept as a candidate so the extrinsic-distance
    // pairing is always dominated by the section threshold
    cand.push_back(fd::gradient_at(u.u, q));

    const double tol_support = 1e-9 * std::max(1.0, u.u.max_abs());
    std::vector<Point<N>> supported;
    for (const auto& y : cand) {
        bool ok = true;
        for_each_node(g, [&](std::size_t k, const Index<N>& ix) {
            if (!ok) return;
            const Point<N> x = g.coord(ix);
            double pair = 0;
            for (int a = 0; a < N; ++a) pair += (x[a] - xq[a]) * y[a];
            if (u.u[k] < u.u.at(q) + pair - tol_support) ok = false;
        });
        if (ok) supported.push_back(y);
    }
    if (supported.empty())
        throw InputError("no slope candidate passes the supporting test (input not convex enough)");
    out.slopes = detail::hull_vertices<N>(std::move(supported));
    return out;
}

/// Outer section S^u_r(p): nodes with u(x) < u(p) + sup_y <x-p, y> + r^2.
template <int N>
struct Section {
    Point<N> center{};
    double radius = 0;
    NodeMask<N> mask;
    SubdifferentialApprox<N> slopes;
    bool center_in_mask = false;
};

template <int N>
Section<N> build_section(const PotentialField<N>& u, const NoDeduce<Point<N>>& p, double r) {
    if (!(r > 0)) throw ParameterError("section radius must be positive");
    Section<N> sec;
    sec.center = p;
    sec.radius = r;
    sec.slopes = subdifferential(u, p);
    sec.mask = NodeMask<N>(u.grid());
    const double up = interpolate(u.u, p);
    for_each_node(u.grid(), [&](std::size_t k, const Index<N>& ix) {
        const Point<N> x = u.grid().coord(ix);
        Point<N> d;
        for (int a = 0; a < N; ++a) d[a] = x[a] - p[a];
        if (u.u[k] < up + sec.slopes.sup_pairing(d) + r * r) sec.mask.insert(k);
    });
    sec.center_in_mask = sec.mask.contains(u.grid().flat(detail::nearest_node(u.grid(), p)));
    return sec;
}

/// Extrinsic ball D^u_r(p): nodes with z(x) < r^2, plus the connected
/// component of p and a sampled star-shapedness flag.
template <int N>
struct ExtrinsicBall {
    Point<N> center{};
    double radius = 0;
    NodeMask<N> mask;
    NodeMask<N> component;
    bool star_shaped = true;
    double min_z = 0;
};

template <int N>
ExtrinsicBall<N> build_extrinsic_ball(const PotentialField<N>& u, const NoDeduce<Point<N>>& p,
                                      double r, HessianSource src = HessianSource::discrete) {
    if (!(r > 0)) throw ParameterError("extrinsic ball radius must be positive");
    const auto zf = extrinsic_distance(u, p, src);
    ExtrinsicBall<N> ball;
    ball.center = p;
    ball.radius = r;
    ball.min_z = zf.min_value;
    ball.mask = NodeMask<N>(u.grid());
    const double r2 = r * r;
    for (std::size_t k = 0; k < zf.z.values.size(); ++k)
        if (zf.z[k] < r2) ball.mask.insert(k);
    const std::size_t seed = u.grid().flat(detail::nearest_node(u.grid(), p));
    ball.component = ball.mask.contains(seed) ? connected_component(ball.mask, seed)
                                              : NodeMask<N>(u.grid());
    // sampled star-shapedness with one cell of z-variation as slack
    const double step = 0.5 * u.grid().max_spacing();
    double grad_scale = 0;
    const auto zgrad = gradient_field(zf.z);
    for (std::size_t k = 0; k < zf.z.values.size(); ++k) {
        if (!ball.mask.contains(k)) continue;
        double s = 0;
        for (int a = 0; a < N; ++a) s += zgrad[k][a] * zgrad[k][a];
        grad_scale = std::max(grad_scale, std::sqrt(s));
    }
    const double slack = grad_scale * u.grid().max_spacing() * std::sqrt(double(N));
    for_each_node(u.grid(), [&](std::size_t k, const Index<N>& ix) {
        if (!ball.star_shaped || !ball.mask.contains(k)) return;
        const Point<N> x = u.grid().coord(ix);
        double len = 0;
        for (int a = 0; a < N; ++a) len += (x[a] - p[a]) * (x[a] - p[a]);
        len = std::sqrt(len);
        const int steps = static_cast<int>(len / step);
        for (int s = 1; s < steps; ++s) {
            Point<N> xi;
            for (int a = 0; a < N; ++a) xi[a] = p[a] + (x[a] - p[a]) * (double(s) / steps);
            if (interpolate(zf.z, xi) >= r2 + slack) {
                ball.star_shaped = false;
                break;
            }
        }
    });
    return ball;
}

/// M = 1 + 2 sup over the family of the nodewise Euclidean gradient norm,
/// taken over the full grid box.
template <int N>
double gradient_bound_M(const std::vector<const PotentialField<N>*>& family) {
    if (family.empty()) throw ParameterError("gradient bound needs a nonempty family");
    double sup = 0;
    for (const auto* p : family) sup = std::max(sup, gradient_field(p->u).max_norm());
    return 1.0 + 2.0 * sup;
}

/// Euclidean-ball node mask.
template <int N>
NodeMask<N> euclidean_ball_mask(const GridSpec<N>& g, const NoDeduce<Point<N>>& p, double radius) {
    NodeMask<N> m(g);
    for_each_node(g, [&](std::size_t k, const Index<N>& ix) {
        const Point<N> x = g.coord(ix);
        double s = 0;
        for (int a = 0; a < N; ++a) s += (x[a] - p[a]) * (x[a] - p[a]);
        if (std::sqrt(s) < radius) m.insert(k);
    });
    return m;
}

/// Containment pair (Euclidean in extrinsic in section) verified nodewise.
template <int N>
struct ContainmentReport {
    bool euclidean_in_ball = true;   // B_{r^2/M}(p) subset D_r(p)
    bool ball_in_section = true;     // D_r(p) subset S_r(p)
    std::size_t euclidean_count = 0;
    std::size_t ball_count = 0;
    std::size_t section_count = 0;
};

template <int N>
ContainmentReport<N> check_containments(const PotentialField<N>& u, const NoDeduce<Point<N>>& p,
                                        double r, double M) {
    const auto ball = build_extrinsic_ball(u, p, r);
    const auto sec = build_section(u, p, r);
    const auto euc = euclidean_ball_mask(u.grid(), p, r * r / M);
    ContainmentReport<N> rep;
    rep.euclidean_in_ball = euc.subset_of(ball.mask);
    rep.ball_in_section = ball.mask.subset_of(sec.mask);
    rep.euclidean_count = euc.count();
    rep.ball_count = ball.mask.count();
    rep.section_count = sec.mask.count();
    return rep;
}

/// Lattice of scan centers covering the inner half-box.
template <int N>
std::vector<Point<N>> half_box_centers(const GridSpec<N>& g, int per_axis) {
    std::vector<Point<N>> out;
    Index<N> it{};
    while (true) {
        Point<N> p;
        for (int a = 0; a < N; ++a) {
            const double len = g.hi[a] - g.lo[a];
            p[a] = g.lo[a] + 0.25 * len + 0.5 * len * (per_axis == 1 ? 0.5 : double(it[a]) / (per_axis - 1));
        }
        out.push_back(p);
        int a = 0;
        for (; a < N; ++a) {
            if (++it[a] < per_axis) break;
            it[a] = 0;
        }
        if (a == N) break;
    }
    return out;
}

/// Table row of the section-shrinking scan (Lemma-style diagnostics):
/// sup over centers of diam S^u_r(p) for each radius.
struct DiameterScanRow {
    double r = 0;
    double sup_diameter = 0;
};

template <int N>
std::vector<DiameterScanRow> section_diameter_scan(const PotentialField<N>& u,
                                                   const std::vector<double>& radii,
                                                   const NoDeduce<std::vector<Point<N>>>& centers) {
    std::vector<DiameterScanRow> table;
    for (double r : radii) {
        DiameterScanRow row{r, 0.0};
        for (const auto& p : centers)
            row.sup_diameter = std::max(row.sup_diameter, mask_diameter(build_section(u, p, r).mask));
        table.push_back(row);
    }
    return table;
}

/// Containment scan S^{u_k}_r(p) subset S^u_{r+delta}(p) per family member;
/// k0 is the first index from which containment holds onward (-1 if never).
template <int N>
struct StabilityScan {
    std::vector<char> contained;
    int k0 = -1;
};

template <int N>
StabilityScan<N> section_stability_scan(const PotentialField<N>& u,
                                        const std::vector<PotentialField<N>>& family,
                                        const NoDeduce<Point<N>>& p, double r, double delta) {
    if (!(delta > 0)) throw ParameterError("stability scan needs delta > 0");
    StabilityScan<N> scan;
    const auto outer = build_section(u, p, r + delta);
    for (const auto& uk : family) {
        const auto inner = build_section(uk, p, r);
        scan.contained.push_back(inner.mask.subset_of(outer.mask) ? 1 : 0);
    }
    for (int k = static_cast<int>(scan.contained.size()); k-- > 0;) {
        if (!scan.contained[k]) break;
        scan.k0 = k;
    }
    return scan;
}

}  // namespace malab
