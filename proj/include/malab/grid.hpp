#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "malab/common.hpp"

namespace malab {

template <int N>
using Point = std::array<double, N>;

template <int N>
using Index = std::array<int, N>;

/// Uniform tensor grid on a box. Node k along axis a sits at
/// lo[a] + k*spacing(a) exactly; the last node evaluates to hi[a] by the
/// same formula up to round-off.
template <int N>
struct GridSpec {
    static_assert(N == 2 || N == 3, "grids are 2- or 3-dimensional");

    Point<N> lo{};
    Point<N> hi{};
    Index<N> counts{};

    GridSpec() = default;
    GridSpec(Point<N> lo_, Point<N> hi_, Index<N> counts_) : lo(lo_), hi(hi_), counts(counts_) {
        for (int a = 0; a < N; ++a) {
            if (counts[a] < 5) throw ParameterError("GridSpec: need at least 5 nodes per axis");
            if (!(hi[a] > lo[a])) throw ParameterError("GridSpec: hi must exceed lo on every axis");
        }
    }

    /// Cube grid helper: same bounds and count on every axis.
    static GridSpec cube(double lo_, double hi_, int count) {
        Point<N> l, h;
        Index<N> c;
        l.fill(lo_);
        h.fill(hi_);
        c.fill(count);
        return GridSpec(l, h, c);
    }

    double spacing(int axis) const { return (hi[axis] - lo[axis]) / (counts[axis] - 1); }

    double max_spacing() const {
        double m = 0;
        for (int a = 0; a < N; ++a) m = std::max(m, spacing(a));
        return m;
    }

    std::size_t size() const {
        std::size_t n = 1;
        for (int a = 0; a < N; ++a) n *= static_cast<std::size_t>(counts[a]);
        return n;
    }

    /// Flat index; axis 0 varies fastest. This is the canonical node order
    /// for sweeps and reductions.
    std::size_t flat(const Index<N>& ix) const {
        std::size_t f = 0;
        for (int a = N - 1; a >= 0; --a) f = f * counts[a] + ix[a];
        return f;
    }

    Index<N> unflat(std::size_t f) const {
        Index<N> ix;
        for (int a = 0; a < N; ++a) {
            ix[a] = static_cast<int>(f % counts[a]);
            f /= counts[a];
        }
        return ix;
    }

    Point<N> coord(const Index<N>& ix) const {
        Point<N> x;
        for (int a = 0; a < N; ++a) x[a] = lo[a] + ix[a] * spacing(a);
        return x;
    }

    Point<N> coord(std::size_t flat_index) const { return coord(unflat(flat_index)); }

    /// Distance to the boundary in cells; 0 on boundary nodes.
    int depth(const Index<N>& ix) const {
        int d = counts[0];
        for (int a = 0; a < N; ++a) d = std::min({d, ix[a], counts[a] - 1 - ix[a]});
        return d;
    }

    bool is_boundary(const Index<N>& ix) const { return depth(ix) == 0; }

    bool contains(const Point<N>& x, double tol = 0.0) const {
        for (int a = 0; a < N; ++a)
            if (x[a] < lo[a] - tol || x[a] > hi[a] + tol) return false;
        return true;
    }

    bool same_layout(const GridSpec& o) const {
        for (int a = 0; a < N; ++a)
            if (counts[a] != o.counts[a] || lo[a] != o.lo[a] || hi[a] != o.hi[a]) return false;
        return true;
    }

    std::string describe() const {
        std::string s = std::to_string(N) + "d [";
        for (int a = 0; a < N; ++a)
            s += (a ? "," : "") + std::to_string(lo[a]) + ".." + std::to_string(hi[a]);
        s += "] counts ";
        for (int a = 0; a < N; ++a) s += (a ? "x" : "") + std::to_string(counts[a]);
        return s;
    }
};

/// Visit all nodes in canonical (flat) order.
template <int N, typename F>
void for_each_node(const GridSpec<N>& g, F&& f) {
    const std::size_t n = g.size();
    Index<N> ix{};
    for (std::size_t k = 0; k < n; ++k) {
        f(k, ix);
        for (int a = 0; a < N; ++a) {
            if (++ix[a] < g.counts[a]) break;
            ix[a] = 0;
        }
    }
}

}  // namespace malab
