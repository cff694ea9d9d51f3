#pragma once

#include <cmath>
#include <numbers>

namespace odet {

inline constexpr double kPi = std::numbers::pi;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
    friend Vec2 operator*(Vec2 v, double s) { return {s * v.x, s * v.y}; }
    friend Vec2 operator/(Vec2 v, double s) { return {v.x / s, v.y / s}; }
    Vec2& operator+=(Vec2 b) { x += b.x; y += b.y; return *this; }
    Vec2& operator-=(Vec2 b) { x -= b.x; y -= b.y; return *this; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double norm2(Vec2 a) { return a.x * a.x + a.y * a.y; }
inline Vec2 normalized(Vec2 a) { double n = norm(a); return {a.x / n, a.y / n}; }
/// Rotate by +90 degrees (counterclockwise).
inline Vec2 rot90(Vec2 a) { return {-a.y, a.x}; }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }

/// General 2x2 matrix, row major.
struct Mat2 {
    double a = 0.0, b = 0.0; // [a b]
    double c = 0.0, d = 0.0; // [c d]

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }

    double det() const { return a * d - b * c; }
    double trace() const { return a + d; }

    Vec2 apply(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }

    friend Mat2 operator*(const Mat2& m, const Mat2& n) {
        return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d,
                m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
    }
    friend Mat2 operator*(double s, const Mat2& m) { return {s * m.a, s * m.b, s * m.c, s * m.d}; }
    friend Mat2 operator-(const Mat2& m, const Mat2& n) {
        return {m.a - n.a, m.b - n.b, m.c - n.c, m.d - n.d};
    }
    friend Mat2 operator+(const Mat2& m, const Mat2& n) {
        return {m.a + n.a, m.b + n.b, m.c + n.c, m.d + n.d};
    }

    Mat2 inverse() const {
        double de = det();
        return {d / de, -b / de, -c / de, a / de};
    }

    double frobenius() const { return std::sqrt(a * a + b * b + c * c + d * d); }
};

/// Symmetric 2x2 bilinear form (single mixed entry a12).
struct SymForm2 {
    double a11 = 0.0;
    double a12 = 0.0;
    double a22 = 0.0;

    static SymForm2 identity() { return {1.0, 0.0, 1.0}; }

    double det() const { return a11 * a22 - a12 * a12; }
    double trace() const { return a11 + a22; }

    /// Quadratic/bilinear evaluation a(u, v).
    double operator()(Vec2 u, Vec2 v) const {
        return a11 * u.x * v.x + a12 * (u.x * v.y + u.y * v.x) + a22 * u.y * v.y;
    }

    Vec2 apply(Vec2 v) const { return {a11 * v.x + a12 * v.y, a12 * v.x + a22 * v.y}; }

    Mat2 mat() const { return {a11, a12, a12, a22}; }

    bool positive_definite() const { return a11 > 0.0 && det() > 0.0; }
    bool negative_definite() const { return a11 < 0.0 && det() > 0.0; }

    /// +1 / -1 for definite forms, 0 otherwise.
    int definiteness_sign() const {
        if (positive_definite()) return 1;
        if (negative_definite()) return -1;
        return 0;
    }

    /// The form flipped to positive definite ("|Lambda|" normalization).
    SymForm2 abs_definite() const {
        return a11 + a22 < 0.0 ? SymForm2{-a11, -a12, -a22} : *this;
    }

    friend SymForm2 operator-(const SymForm2& m, const SymForm2& n) {
        return {m.a11 - n.a11, m.a12 - n.a12, m.a22 - n.a22};
    }
    friend SymForm2 operator+(const SymForm2& m, const SymForm2& n) {
        return {m.a11 + n.a11, m.a12 + n.a12, m.a22 + n.a22};
    }
    friend SymForm2 operator*(double s, const SymForm2& m) {
        return {s * m.a11, s * m.a12, s * m.a22};
    }

    double frobenius() const {
        return std::sqrt(a11 * a11 + 2.0 * a12 * a12 + a22 * a22);
    }

    /// Eigenvalues, ascending.
    void eigenvalues(double& lo, double& hi) const {
        double m = 0.5 * trace();
        double d = std::sqrt(std::max(0.0, m * m - det()));
        lo = m - d;
        hi = m + d;
    }
};

// ---------------------------------------------------------------------------
// angles mod pi (unoriented line directions)
// ---------------------------------------------------------------------------

/// Wrap into (-pi, pi].
inline double wrap_to_pi(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    if (a > kPi) a -= 2.0 * kPi;
    return a;
}

/// Canonical line angle in [0, pi).
inline double wrap_line_angle(double theta) {
    theta = std::fmod(theta, kPi);
    if (theta < 0.0) theta += kPi;
    if (theta >= kPi) theta -= kPi;
    return theta;
}

/// Unique representative of theta2 - theta1 (mod pi) in (-pi/2, pi/2].
inline double line_angle_diff(double theta1, double theta2) {
    double d = std::fmod(theta2 - theta1, kPi);
    if (d <= -0.5 * kPi) d += kPi;
    if (d > 0.5 * kPi) d -= kPi;
    return d;
}

inline double line_angle_of(Vec2 v) { return wrap_line_angle(std::atan2(v.y, v.x)); }

} // namespace odet
