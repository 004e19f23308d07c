#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>

#include "malab/grid.hpp"

namespace malab {

/// Symmetric NxN matrix, upper triangle stored row-major:
/// 2d (a00,a01,a11), 3d (a00,a01,a02,a11,a12,a22).
template <int N>
struct SymMat {
    static constexpr int kPacked = N * (N + 1) / 2;
    std::array<double, kPacked> v{};

    static constexpr int slot(int i, int j) {
        if (i > j) std::swap(i, j);
        // row-major upper triangle offset
        return i * N - i * (i - 1) / 2 + (j - i);
    }

    double operator()(int i, int j) const { return v[slot(i, j)]; }
    double& at(int i, int j) { return v[slot(i, j)]; }

    static SymMat identity() {
        SymMat m;
        for (int i = 0; i < N; ++i) m.at(i, i) = 1.0;
        return m;
    }

    SymMat plus_identity() const {
        SymMat m = *this;
        for (int i = 0; i < N; ++i) m.at(i, i) += 1.0;
        return m;
    }

    Eigen::Matrix<double, N, N> dense() const {
        Eigen::Matrix<double, N, N> m;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) m(i, j) = (*this)(i, j);
        return m;
    }

    static SymMat from_dense(const Eigen::Matrix<double, N, N>& m) {
        SymMat s;
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) s.at(i, j) = 0.5 * (m(i, j) + m(j, i));
        return s;
    }

    double det() const {
        if constexpr (N == 2) {
            return v[0] * v[2] - v[1] * v[1];
        } else {
            const double a = v[0], b = v[1], c = v[2], d = v[3], e = v[4], f = v[5];
            return a * (d * f - e * e) - b * (b * f - e * c) + c * (b * e - d * c);
        }
    }

    double trace() const {
        double t = 0;
        for (int i = 0; i < N; ++i) t += (*this)(i, i);
        return t;
    }

    /// Eigenvalues in ascending order (closed-form path for 2x2/3x3).
    Eigen::Matrix<double, N, 1> eigenvalues() const {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es;
        es.computeDirect(dense(), Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }

    double min_eigenvalue() const { return eigenvalues()(0); }

    double spectral_norm() const {
        const auto ev = eigenvalues();
        return std::max(std::abs(ev(0)), std::abs(ev(N - 1)));
    }

    /// Inverse via adjugate; caller guarantees det != 0.
    SymMat inverse() const {
        SymMat m;
        const double d = det();
        if constexpr (N == 2) {
            m.v = {v[2] / d, -v[1] / d, v[0] / d};
        } else {
            const double a = v[0], b = v[1], c = v[2], e = v[3], f = v[4], g = v[5];
            m.v = {(e * g - f * f) / d, (c * f - b * g) / d,  (b * f - c * e) / d,
                   (a * g - c * c) / d, (b * c - a * f) / d,  (a * e - b * b) / d};
        }
        return m;
    }

    /// Eigenvalue-clamped inverse: (Q diag(max(|lam|, floor)) Q^T)^{-1}.
    /// Magnitudes are clamped so the result is positive definite even for
    /// indefinite input; a pure floor clamp would blow the inverse up to
    /// 1/floor along negative directions and Newton could never repair them.
    SymMat clamped_inverse(double floor) const {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es;
        es.computeDirect(dense());
        Eigen::Matrix<double, N, 1> inv_ev;
        for (int i = 0; i < N; ++i)
            inv_ev(i) = 1.0 / std::max(std::abs(es.eigenvalues()(i)), floor);
        const Eigen::Matrix<double, N, N> r =
            es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();
        return from_dense(r);
    }

    /// Product of eigenvalues clamped from below: det of the convexified matrix.
    double clamped_det(double floor) const {
        if constexpr (N == 2) {
            const double m = 0.5 * (v[0] + v[2]);
            const double s = std::hypot(0.5 * (v[0] - v[2]), v[1]);
            return std::max(m - s, floor) * std::max(m + s, floor);
        } else {
            const auto ev = eigenvalues();
            double p = 1.0;
            for (int i = 0; i < N; ++i) p *= std::max(ev(i), floor);
            return p;
        }
    }

    /// Quadratic form x^T M x.
    double quad(const Point<N>& x) const {
        double s = 0;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) s += (*this)(i, j) * x[i] * x[j];
        return s;
    }

    Point<N> apply(const Point<N>& x) const {
        Point<N> y{};
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) y[i] += (*this)(i, j) * x[j];
        return y;
    }
};

}  // namespace malab
