#pragma once

#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "malab/field.hpp"
#include "malab/smat.hpp"

namespace malab {

/// A convex function defined by formulas, used as boundary data, oracle, or
/// geometry demonstrator. Gradient is the continuous extension where the
/// classical gradient degenerates (cusp axes, cone vertices).
template <int N>
struct AnalyticFunction {
    virtual ~AnalyticFunction() = default;
    virtual double value(const Point<N>& x) const = 0;
    virtual Point<N> gradient(const Point<N>& x) const = 0;
    virtual bool has_hessian() const { return false; }
    virtual SymMat<N> hessian(const Point<N>&) const {
        throw ParameterError("analytic hessian not available for this family");
    }
    virtual std::string describe() const = 0;
};

template <int N>
using AnalyticPtr = std::shared_ptr<const AnalyticFunction<N>>;

/// u = (1/2) x^T A x with A symmetric positive definite.
template <int N>
struct Quadratic final : AnalyticFunction<N> {
    SymMat<N> A;
    explicit Quadratic(const SymMat<N>& a) : A(a) {
        if (A.min_eigenvalue() <= 0.0) throw ParameterError("quadratic: matrix must be SPD");
    }

    /// Solution-family constructor: additionally requires det A = 1.
    static Quadratic unit_det(const SymMat<N>& a) {
        if (std::abs(a.det() - 1.0) > 1e-12)
            throw ParameterError("quadratic: det A must equal 1 within 1e-12");
        return Quadratic(a);
    }

    double value(const Point<N>& x) const override { return 0.5 * A.quad(x); }
    Point<N> gradient(const Point<N>& x) const override { return A.apply(x); }
    bool has_hessian() const override { return true; }
    SymMat<N> hessian(const Point<N>&) const override { return A; }
    std::string describe() const override {
        std::ostringstream os;
        os << "quadratic[";
        for (int i = 0; i < SymMat<N>::kPacked; ++i) os << (i ? "," : "") << A.v[i];
        os << "]";
        return os.str();
    }
};

/// 2d rotation of diag(l1, l2) by theta radians.
inline SymMat<2> rotated_diag(double l1, double l2, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    SymMat<2> m;
    m.at(0, 0) = l1 * c * c + l2 * s * s;
    m.at(1, 1) = l1 * s * s + l2 * c * c;
    m.at(0, 1) = (l1 - l2) * c * s;
    return m;
}

/// Rotationally symmetric solution of det D^2 u = 1 in the plane:
/// u'(r) = sqrt(r^2 + c), so the Hessian eigenvalues are
/// u''(r) = r/sqrt(r^2+c) (radial) and u'(r)/r (tangential), product 1.
/// For c > 0 the function has a cone vertex at the origin (|Du| -> sqrt(c)
/// with no limit direction); callers exclude a ball r < r_min from checks.
struct Radial2d final : AnalyticFunction<2> {
    double c;
    explicit Radial2d(double c_) : c(c_) {
        if (c < 0) throw ParameterError("radial: c must be >= 0");
    }

    double value(const Point<2>& x) const override {
        const double r = std::hypot(x[0], x[1]);
        if (c == 0.0) return 0.5 * r * r;
        const double s = std::sqrt(r * r + c);
        const double sc = std::sqrt(c);
        // log((r+s)/sc) via log1p for accuracy near r = 0
        const double lg = std::log1p((r + r * r / (s + sc)) / sc);
        return 0.5 * (r * s + c * lg);
    }

    Point<2> gradient(const Point<2>& x) const override {
        const double r = std::hypot(x[0], x[1]);
        if (r == 0.0) return {0.0, 0.0};  // continuous-extension choice at the vertex
        const double f = std::sqrt(r * r + c) / r;
        return {f * x[0], f * x[1]};
    }

    bool has_hessian() const override { return true; }

    SymMat<2> hessian(const Point<2>& x) const override {
        const double r = std::hypot(x[0], x[1]);
        if (c == 0.0) return SymMat<2>::identity();
        if (r == 0.0) throw DomainError("radial hessian undefined at the cone vertex (c > 0)");
        const double s = std::sqrt(r * r + c);
        const double lam_rad = r / s, lam_tan = s / r;
        const double e0 = x[0] / r, e1 = x[1] / r;
        SymMat<2> m;
        m.at(0, 0) = lam_rad * e0 * e0 + lam_tan * e1 * e1;
        m.at(1, 1) = lam_rad * e1 * e1 + lam_tan * e0 * e0;
        m.at(0, 1) = (lam_rad - lam_tan) * e0 * e1;
        return m;
    }

    std::string describe() const override { return "radial[c=" + std::to_string(c) + "]"; }
};

/// Degenerate family |x'|^{2-2/n} (1 + x_n^2) with x' the first N-1
/// coordinates. Identically zero with zero gradient along the x_n axis.
/// The representative is convex only for |x_n|^2 <= (alpha-1)/(alpha+1)
/// (= 1/7 for n = 3), so demonstration boxes keep |x_n| <= 0.35.
template <int N>
struct Pogorelov final : AnalyticFunction<N> {
    int n;
    double alpha;
    explicit Pogorelov(int n_) : n(n_), alpha(2.0 - 2.0 / n_) {
        if (n_ < 3) throw ParameterError("pogorelov: n must be >= 3");
    }

    static double prime_norm(const Point<N>& x) {
        double s = 0;
        for (int a = 0; a < N - 1; ++a) s += x[a] * x[a];
        return std::sqrt(s);
    }

    void check_domain(const Point<N>& x) const {
        if (prime_norm(x) > 1.0 + 1e-12 || std::abs(x[N - 1]) > 0.5 + 1e-12)
            throw DomainError("pogorelov: point outside |x'| <= 1, |x_n| <= 1/2");
    }

    double value(const Point<N>& x) const override {
        check_domain(x);
        const double s = prime_norm(x);
        const double t = x[N - 1];
        return std::pow(s, alpha) * (1.0 + t * t);
    }

    Point<N> gradient(const Point<N>& x) const override {
        check_domain(x);
        Point<N> g{};
        const double s = prime_norm(x);
        const double t = x[N - 1];
        if (s == 0.0) return g;  // vanishes continuously on the axis
        const double f = alpha * std::pow(s, alpha - 2.0) * (1.0 + t * t);
        for (int a = 0; a < N - 1; ++a) g[a] = f * x[a];
        g[N - 1] = 2.0 * t * std::pow(s, alpha);
        return g;
    }

    std::string describe() const override { return "pogorelov[n=" + std::to_string(n) + "]"; }

    /// Demonstration box: axis extent shrunk below the convexity threshold,
    /// cross extent keeping box corners inside |x'| <= 1.
    static GridSpec<N> demo_grid(int count) {
        Point<N> lo, hi;
        const double w = (N == 2) ? 0.75 : 0.7;
        for (int a = 0; a < N - 1; ++a) {
            lo[a] = -w;
            hi[a] = w;
        }
        lo[N - 1] = -0.35;
        hi[N - 1] = 0.35;
        Index<N> c;
        c.fill(count);
        return GridSpec<N>(lo, hi, c);
    }
};

/// Convex function with a Lipschitz kink: (1/2)|x|^2 + gamma |x[axis] - s0|.
template <int N>
struct KinkedQuadratic final : AnalyticFunction<N> {
    double gamma, s0;
    int axis;
    KinkedQuadratic(double gamma_, double s0_, int axis_ = 0)
        : gamma(gamma_), s0(s0_), axis(axis_) {
        if (gamma < 0 || axis < 0 || axis >= N) throw ParameterError("kink: bad parameters");
    }

    double value(const Point<N>& x) const override {
        double q = 0;
        for (int a = 0; a < N; ++a) q += x[a] * x[a];
        return 0.5 * q + gamma * std::abs(x[axis] - s0);
    }

    Point<N> gradient(const Point<N>& x) const override {
        Point<N> g = x;
        const double d = x[axis] - s0;
        g[axis] += d > 0 ? gamma : (d < 0 ? -gamma : 0.0);
        return g;
    }

    std::string describe() const override {
        return "kink[gamma=" + std::to_string(gamma) + ",s0=" + std::to_string(s0) + "]";
    }
};

/// Strongly convex non-solution of det D^2 u = 1; its Hessian quantity
/// violates strong subharmonicity on x0 in (ln 2, infinity), which makes it
/// the sharpness witness for the Jacobi check.
struct ExpWitness2d final : AnalyticFunction<2> {
    double kappa;
    explicit ExpWitness2d(double kappa_ = 2.0) : kappa(kappa_) {}

    double value(const Point<2>& x) const override {
        return std::exp(kappa * x[0]) / (kappa * kappa) + 0.5 * x[1] * x[1];
    }
    Point<2> gradient(const Point<2>& x) const override {
        return {std::exp(kappa * x[0]) / kappa, x[1]};
    }
    bool has_hessian() const override { return true; }
    SymMat<2> hessian(const Point<2>& x) const override {
        SymMat<2> m;
        m.at(0, 0) = std::exp(kappa * x[0]);
        m.at(1, 1) = 1.0;
        return m;
    }
    std::string describe() const override { return "expwitness[kappa=" + std::to_string(kappa) + "]"; }
};

/// Smooth approximation by averaging shifted evaluations over a fixed
/// nonnegative tensor Gauss rule, so convexity is preserved exactly, then
/// re-anchoring at a reference point so the constant drift vanishes
/// (a mollified quadratic is again the quadratic, exactly).
template <int N>
struct Mollified final : AnalyticFunction<N> {
    AnalyticPtr<N> base;
    double eps;
    Point<N> anchor;
    double shift = 0.0;
    std::vector<Point<N>> xi;
    std::vector<double> w;

    Mollified(AnalyticPtr<N> base_, double eps_, const Point<N>& anchor_)
        : base(std::move(base_)), eps(eps_), anchor(anchor_) {
        if (eps <= 0) throw ParameterError("mollifier: scale must be positive");
        // 3-point Gauss-Legendre per axis, normalized to an average
        const double node = std::sqrt(3.0 / 5.0);
        const double w1 = 5.0 / 18.0, w0 = 8.0 / 18.0;
        const double nodes[3] = {-node, 0.0, node};
        const double ws[3] = {w1, w0, w1};
        Index<N> it{};
        while (true) {
            Point<N> p;
            double ww = 1;
            for (int a = 0; a < N; ++a) {
                p[a] = nodes[it[a]];
                ww *= ws[it[a]];
            }
            xi.push_back(p);
            w.push_back(ww);
            int a = 0;
            for (; a < N; ++a) {
                if (++it[a] < 3) break;
                it[a] = 0;
            }
            if (a == N) break;
        }
        shift = raw_value(anchor) - base->value(anchor);
    }

    double raw_value(const Point<N>& x) const {
        KahanSum s;
        for (std::size_t q = 0; q < xi.size(); ++q) {
            Point<N> y;
            for (int a = 0; a < N; ++a) y[a] = x[a] - eps * xi[q][a];
            s.add(w[q] * base->value(y));
        }
        return s.sum;
    }

    double value(const Point<N>& x) const override { return raw_value(x) - shift; }

    Point<N> gradient(const Point<N>& x) const override {
        Point<N> g{};
        for (std::size_t q = 0; q < xi.size(); ++q) {
            Point<N> y;
            for (int a = 0; a < N; ++a) y[a] = x[a] - eps * xi[q][a];
            const Point<N> gb = base->gradient(y);
            for (int a = 0; a < N; ++a) g[a] += w[q] * gb[a];
        }
        return g;
    }

    bool has_hessian() const override { return base->has_hessian(); }

    SymMat<N> hessian(const Point<N>& x) const override {
        SymMat<N> h;
        for (std::size_t q = 0; q < xi.size(); ++q) {
            Point<N> y;
            for (int a = 0; a < N; ++a) y[a] = x[a] - eps * xi[q][a];
            const SymMat<N> hb = base->hessian(y);
            for (int i = 0; i < SymMat<N>::kPacked; ++i) h.v[i] += w[q] * hb.v[i];
        }
        return h;
    }

    std::string describe() const override {
        return "mollified[" + base->describe() + ",eps=" + std::to_string(eps) + "]";
    }
};

}  // namespace malab
