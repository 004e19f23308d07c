#pragma once

#include <cmath>
#include <vector>

#include "malab/grid.hpp"
#include "malab/smat.hpp"

namespace malab {

/// One real per node. Values are finite unless the field is flagged masked.
template <int N>
struct ScalarField {
    GridSpec<N> grid;
    std::vector<double> values;
    bool masked = false;

    ScalarField() = default;
    explicit ScalarField(const GridSpec<N>& g, double fill = 0.0)
        : grid(g), values(g.size(), fill) {}

    double operator[](std::size_t k) const { return values[k]; }
    double& operator[](std::size_t k) { return values[k]; }
    double at(const Index<N>& ix) const { return values[grid.flat(ix)]; }
    double& at(const Index<N>& ix) { return values[grid.flat(ix)]; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double max_abs() const {
        double m = 0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
};

/// One n-vector per node.
template <int N>
struct VecField {
    GridSpec<N> grid;
    std::vector<Point<N>> values;

    VecField() = default;
    explicit VecField(const GridSpec<N>& g) : grid(g), values(g.size(), Point<N>{}) {}

    const Point<N>& operator[](std::size_t k) const { return values[k]; }
    Point<N>& operator[](std::size_t k) { return values[k]; }

    double max_norm() const {
        double m = 0;
        for (const auto& v : values) {
            double s = 0;
            for (int a = 0; a < N; ++a) s += v[a] * v[a];
            m = std::max(m, s);
        }
        return std::sqrt(m);
    }
};

/// One symmetric matrix per node; symmetry is exact by storage.
template <int N>
struct SymMatField {
    GridSpec<N> grid;
    std::vector<SymMat<N>> values;

    SymMatField() = default;
    explicit SymMatField(const GridSpec<N>& g) : grid(g), values(g.size()) {}

    const SymMat<N>& operator[](std::size_t k) const { return values[k]; }
    SymMat<N>& operator[](std::size_t k) { return values[k]; }

    double max_spectral_norm() const {
        double m = 0;
        for (const auto& v : values) m = std::max(m, v.spectral_norm());
        return m;
    }
};

/// Node mask stored as a bitmap plus the grid it belongs to.
template <int N>
struct NodeMask {
    GridSpec<N> grid;
    std::vector<std::uint8_t> in;

    NodeMask() = default;
    explicit NodeMask(const GridSpec<N>& g) : grid(g), in(g.size(), 0) {}

    bool contains(std::size_t k) const { return in[k] != 0; }
    void insert(std::size_t k) { in[k] = 1; }

    std::size_t count() const {
        std::size_t c = 0;
        for (auto b : in) c += b;
        return c;
    }

    /// Sorted node indices; the serialization format for masks.
    std::vector<std::uint64_t> indices() const {
        std::vector<std::uint64_t> out;
        out.reserve(count());
        for (std::size_t k = 0; k < in.size(); ++k)
            if (in[k]) out.push_back(k);
        return out;
    }

    bool subset_of(const NodeMask& o) const {
        for (std::size_t k = 0; k < in.size(); ++k)
            if (in[k] && !o.in[k]) return false;
        return true;
    }
};

/// Dilate by one node layer (axis neighbors and diagonals).
template <int N>
NodeMask<N> dilate(const NodeMask<N>& m) {
    NodeMask<N> out(m.grid);
    for_each_node(m.grid, [&](std::size_t k, const Index<N>& ix) {
        if (!m.in[k]) return;
        Index<N> nb;
        const int span = 1;
        // walk the (2*span+1)^N neighborhood
        Index<N> off{};
        off.fill(-span);
        while (true) {
            bool ok = true;
            for (int a = 0; a < N; ++a) {
                nb[a] = ix[a] + off[a];
                if (nb[a] < 0 || nb[a] >= m.grid.counts[a]) ok = false;
            }
            if (ok) out.in[m.grid.flat(nb)] = 1;
            int a = 0;
            for (; a < N; ++a) {
                if (++off[a] <= span) break;
                off[a] = -span;
            }
            if (a == N) break;
        }
    });
    return out;
}

/// Connected component of the seed node under axis-neighbor adjacency.
template <int N>
NodeMask<N> connected_component(const NodeMask<N>& m, std::size_t seed) {
    NodeMask<N> out(m.grid);
    if (!m.in[seed]) return out;
    std::vector<std::size_t> stack{seed};
    out.in[seed] = 1;
    while (!stack.empty()) {
        const std::size_t k = stack.back();
        stack.pop_back();
        const Index<N> ix = m.grid.unflat(k);
        for (int a = 0; a < N; ++a) {
            for (int s = -1; s <= 1; s += 2) {
                Index<N> nb = ix;
                nb[a] += s;
                if (nb[a] < 0 || nb[a] >= m.grid.counts[a]) continue;
                const std::size_t kn = m.grid.flat(nb);
                if (m.in[kn] && !out.in[kn]) {
                    out.in[kn] = 1;
                    stack.push_back(kn);
                }
            }
        }
    }
    return out;
}

/// Euclidean diameter of the mask's node coordinates. Exact pairwise scan for
/// small masks; for large ones the candidate set is reduced to directional
/// extremes first (error well under a cell for the direction counts used).
template <int N>
double mask_diameter(const NodeMask<N>& m) {
    std::vector<Point<N>> pts;
    for_each_node(m.grid, [&](std::size_t k, const Index<N>& ix) {
        if (m.in[k]) pts.push_back(m.grid.coord(ix));
    });
    if (pts.size() < 2) return 0.0;
    if (pts.size() > 4096) {
        // keep extreme points along a fixed direction fan
        std::vector<Point<N>> dirs;
        if constexpr (N == 2) {
            for (int j = 0; j < 64; ++j) {
                const double th = 3.14159265358979323846 * j / 64.0;
                dirs.push_back({std::cos(th), std::sin(th)});
            }
        } else {
            for (int i = -3; i <= 3; ++i)
                for (int j = -3; j <= 3; ++j)
                    for (int k2 = 0; k2 <= 3; ++k2) {
                        if (i == 0 && j == 0 && k2 == 0) continue;
                        const double n0 = std::sqrt(double(i * i + j * j + k2 * k2));
                        dirs.push_back({i / n0, j / n0, k2 / n0});
                    }
        }
        std::vector<Point<N>> keep;
        for (const auto& d : dirs) {
            std::size_t lo = 0, hi = 0;
            double plo = 1e300, phi = -1e300;
            for (std::size_t q = 0; q < pts.size(); ++q) {
                double s = 0;
                for (int a = 0; a < N; ++a) s += pts[q][a] * d[a];
                if (s < plo) { plo = s; lo = q; }
                if (s > phi) { phi = s; hi = q; }
            }
            keep.push_back(pts[lo]);
            keep.push_back(pts[hi]);
        }
        pts.swap(keep);
    }
    double best = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            double s = 0;
            for (int a = 0; a < N; ++a) {
                const double d = pts[i][a] - pts[j][a];
                s += d * d;
            }
            best = std::max(best, s);
        }
    return std::sqrt(best);
}

}  // namespace malab
