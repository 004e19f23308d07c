#pragma once

#include <array>
#include <cmath>

#include "malab/field.hpp"

namespace malab {
namespace fd {

struct Tap {
    int off;
    double w;
};

/// Second-order first-derivative stencil at position i of an n-node axis:
/// central inside, 3-point one-sided on the two boundary nodes.
inline std::array<Tap, 3> d1_stencil(int i, int n, double h, int& taps) {
    if (i == 0) {
        taps = 3;
        return {{{0, -1.5 / h}, {1, 2.0 / h}, {2, -0.5 / h}}};
    }
    if (i == n - 1) {
        taps = 3;
        return {{{0, 1.5 / h}, {-1, -2.0 / h}, {-2, 0.5 / h}}};
    }
    taps = 2;
    return {{{-1, -0.5 / h}, {1, 0.5 / h}, {0, 0.0}}};
}

/// Second-order pure second derivative: 3-point central inside, 4-point
/// one-sided on boundary nodes. Exact through cubics on the one-sided side.
inline std::array<Tap, 4> d2_stencil(int i, int n, double h, int& taps) {
    const double h2 = h * h;
    if (i == 0) {
        taps = 4;
        return {{{0, 2.0 / h2}, {1, -5.0 / h2}, {2, 4.0 / h2}, {3, -1.0 / h2}}};
    }
    if (i == n - 1) {
        taps = 4;
        return {{{0, 2.0 / h2}, {-1, -5.0 / h2}, {-2, 4.0 / h2}, {-3, -1.0 / h2}}};
    }
    taps = 3;
    return {{{-1, 1.0 / h2}, {0, -2.0 / h2}, {1, 1.0 / h2}, {0, 0.0}}};
}

template <int N>
double d1_at(const ScalarField<N>& f, const NoDeduce<Index<N>>& ix, int axis) {
    int t = 0;
    const auto st = d1_stencil(ix[axis], f.grid.counts[axis], f.grid.spacing(axis), t);
    double s = 0;
    Index<N> j = ix;
    for (int q = 0; q < t; ++q) {
        j[axis] = ix[axis] + st[q].off;
        s += st[q].w * f.values[f.grid.flat(j)];
    }
    return s;
}

template <int N>
double d2_at(const ScalarField<N>& f, const NoDeduce<Index<N>>& ix, int axis) {
    int t = 0;
    const auto st = d2_stencil(ix[axis], f.grid.counts[axis], f.grid.spacing(axis), t);
    double s = 0;
    Index<N> j = ix;
    for (int q = 0; q < t; ++q) {
        j[axis] = ix[axis] + st[q].off;
        s += st[q].w * f.values[f.grid.flat(j)];
    }
    return s;
}

/// Mixed derivative as the tensor composition of the two 1d stencils;
/// the 4-corner stencil at interior nodes.
template <int N>
double dmixed_at(const ScalarField<N>& f, const NoDeduce<Index<N>>& ix, int a, int b) {
    int ta = 0, tb = 0;
    const auto sa = d1_stencil(ix[a], f.grid.counts[a], f.grid.spacing(a), ta);
    const auto sb = d1_stencil(ix[b], f.grid.counts[b], f.grid.spacing(b), tb);
    double s = 0;
    Index<N> j = ix;
    for (int qa = 0; qa < ta; ++qa) {
        j[a] = ix[a] + sa[qa].off;
        double inner = 0;
        for (int qb = 0; qb < tb; ++qb) {
            j[b] = ix[b] + sb[qb].off;
            inner += sb[qb].w * f.values[f.grid.flat(j)];
        }
        j[b] = ix[b];
        s += sa[qa].w * inner;
    }
    return s;
}

template <int N>
SymMat<N> hessian_at(const ScalarField<N>& f, const NoDeduce<Index<N>>& ix) {
    SymMat<N> m;
    for (int a = 0; a < N; ++a) m.at(a, a) = d2_at(f, ix, a);
    for (int a = 0; a < N; ++a)
        for (int b = a + 1; b < N; ++b) m.at(a, b) = dmixed_at(f, ix, a, b);
    return m;
}

template <int N>
Point<N> gradient_at(const ScalarField<N>& f, const NoDeduce<Index<N>>& ix) {
    Point<N> g;
    for (int a = 0; a < N; ++a) g[a] = d1_at(f, ix, a);
    return g;
}

}  // namespace fd

template <int N>
void require_min_counts(const GridSpec<N>& g, int m) {
    for (int a = 0; a < N; ++a)
        if (g.counts[a] < m) throw DomainError("grid too small for the requested stencil");
}

/// Per-node gradient: central differences inside, second-order one-sided on
/// the boundary. Exact on polynomials of total degree <= 2.
template <int N>
VecField<N> gradient_field(const ScalarField<N>& f) {
    require_min_counts(f.grid, 3);
    VecField<N> out(f.grid);
    parallel_for(f.grid.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k)
            out.values[k] = fd::gradient_at(f, f.grid.unflat(k));
    });
    return out;
}

/// Per-node discrete Hessian, symmetric by storage; exact on quadratics.
template <int N>
SymMatField<N> hessian_field(const ScalarField<N>& f) {
    require_min_counts(f.grid, 4);
    SymMatField<N> out(f.grid);
    parallel_for(f.grid.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k)
            out.values[k] = fd::hessian_at(f, f.grid.unflat(k));
    });
    return out;
}

namespace detail {

template <int N>
struct CellLocator {
    Index<N> cell;
    Point<N> t;  // in [0,1] within the cell
};

template <int N>
CellLocator<N> locate(const GridSpec<N>& g, const NoDeduce<Point<N>>& x) {
    constexpr double kRelTol = 1e-9;
    CellLocator<N> loc;
    for (int a = 0; a < N; ++a) {
        const double tol = kRelTol * (g.hi[a] - g.lo[a]);
        if (x[a] < g.lo[a] - tol || x[a] > g.hi[a] + tol)
            throw DomainError("point outside grid box");
        const double h = g.spacing(a);
        int c = static_cast<int>(std::floor((x[a] - g.lo[a]) / h));
        c = std::max(0, std::min(c, g.counts[a] - 2));
        loc.cell[a] = c;
        loc.t[a] = std::min(1.0, std::max(0.0, (x[a] - (g.lo[a] + c * h)) / h));
    }
    return loc;
}

}  // namespace detail

/// Multilinear interpolation; reproduces affine functions exactly.
template <int N>
double interpolate(const ScalarField<N>& f, const NoDeduce<Point<N>>& x) {
    const auto loc = detail::locate(f.grid, x);
    double s = 0;
    for (int corner = 0; corner < (1 << N); ++corner) {
        double w = 1;
        Index<N> ix = loc.cell;
        for (int a = 0; a < N; ++a) {
            if (corner & (1 << a)) {
                ix[a] += 1;
                w *= loc.t[a];
            } else {
                w *= 1.0 - loc.t[a];
            }
        }
        s += w * f.values[f.grid.flat(ix)];
    }
    return s;
}

/// Multilinear interpolation of a vector field, componentwise.
template <int N>
Point<N> interpolate(const VecField<N>& f, const NoDeduce<Point<N>>& x) {
    const auto loc = detail::locate(f.grid, x);
    Point<N> s{};
    for (int corner = 0; corner < (1 << N); ++corner) {
        double w = 1;
        Index<N> ix = loc.cell;
        for (int a = 0; a < N; ++a) {
            if (corner & (1 << a)) {
                ix[a] += 1;
                w *= loc.t[a];
            } else {
                w *= 1.0 - loc.t[a];
            }
        }
        const auto& v = f.values[f.grid.flat(ix)];
        for (int a = 0; a < N; ++a) s[a] += w * v[a];
    }
    return s;
}

}  // namespace malab
