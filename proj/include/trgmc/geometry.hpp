#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace trgmc {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double norm_sq(Vec2 a) { return a.x * a.x + a.y * a.y; }

struct DegenerateWarpError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingularMatrixError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingularSystemError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Plane projective transform mapping frame-local pixels to global
/// motion-compensated coordinates. Row-major 3x3, always normalized so
/// h[8] == 1 and kept invertible (|det| > 1e-12).
struct Homography {
    std::array<double, 9> h = {1, 0, 0, 0, 1, 0, 0, 0, 1};

    double operator()(int row, int col) const { return h[row * 3 + col]; }
    double& operator()(int row, int col) { return h[row * 3 + col]; }

    double det() const {
        return h[0] * (h[4] * h[8] - h[5] * h[7]) -
               h[1] * (h[3] * h[8] - h[5] * h[6]) +
               h[2] * (h[3] * h[7] - h[4] * h[6]);
    }

    Eigen::Matrix3d to_matrix() const {
        Eigen::Matrix3d m;
        m << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
        return m;
    }

    static Homography identity() { return Homography{}; }

    static Homography translation(double tx, double ty) {
        Homography out;
        out.h = {1, 0, tx, 0, 1, ty, 0, 0, 1};
        return out;
    }

    /// Builds from raw row-major entries, renormalizing so h[8] == 1.
    /// Throws SingularMatrixError when the matrix cannot be normalized or
    /// is not invertible.
    static Homography from_raw(const std::array<double, 9>& raw) {
        if (std::abs(raw[8]) <= 1e-12) {
            throw SingularMatrixError("homography has vanishing h[2][2], cannot normalize");
        }
        Homography out;
        const double inv = 1.0 / raw[8];
        for (int i = 0; i < 9; ++i) out.h[i] = raw[i] * inv;
        out.h[8] = 1.0;
        if (std::abs(out.det()) <= 1e-12) {
            throw SingularMatrixError("homography is singular");
        }
        for (double v : out.h) {
            if (!std::isfinite(v)) throw SingularMatrixError("homography has non-finite entries");
        }
        return out;
    }

    static Homography from_matrix(const Eigen::Matrix3d& m) {
        return from_raw({m(0, 0), m(0, 1), m(0, 2), m(1, 0), m(1, 1), m(1, 2),
                         m(2, 0), m(2, 1), m(2, 2)});
    }
};

/// Projective warp: divides by the homogeneous denominator. Throws
/// DegenerateWarpError when the point maps to infinity under H.
inline Vec2 warp_point(const Homography& H, Vec2 pt) {
    const double d = H.h[6] * pt.x + H.h[7] * pt.y + H.h[8];
    if (std::abs(d) <= 1e-9) {
        throw DegenerateWarpError("warp denominator vanishes at (" + std::to_string(pt.x) +
                                  ", " + std::to_string(pt.y) + ")");
    }
    return {(H.h[0] * pt.x + H.h[1] * pt.y + H.h[2]) / d,
            (H.h[3] * pt.x + H.h[4] * pt.y + H.h[5]) / d};
}

/// Matrix product A*B, renormalized. warp through the result equals
/// warping through B then A.
inline Homography compose(const Homography& A, const Homography& B) {
    std::array<double, 9> m{};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) acc += A.h[r * 3 + k] * B.h[k * 3 + c];
            m[r * 3 + c] = acc;
        }
    }
    return Homography::from_raw(m);
}

inline Homography invert(const Homography& H) {
    const double d = H.det();
    if (std::abs(d) <= 1e-12) throw SingularMatrixError("cannot invert singular homography");
    const auto& h = H.h;
    std::array<double, 9> adj = {
        h[4] * h[8] - h[5] * h[7], h[2] * h[7] - h[1] * h[8], h[1] * h[5] - h[2] * h[4],
        h[5] * h[6] - h[3] * h[8], h[0] * h[8] - h[2] * h[6], h[2] * h[3] - h[0] * h[5],
        h[3] * h[7] - h[4] * h[6], h[1] * h[6] - h[0] * h[7], h[0] * h[4] - h[1] * h[3]};
    for (double& v : adj) v /= d;
    return Homography::from_raw(adj);
}

/// Increment to the 8 free homography parameters.
struct ParamDelta {
    std::array<double, 8> dp{};

    double norm_sq() const {
        double acc = 0.0;
        for (double v : dp) acc += v * v;
        return acc;
    }
    bool is_finite() const {
        for (double v : dp) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

inline ParamDelta operator*(double s, const ParamDelta& d) {
    ParamDelta out;
    for (int i = 0; i < 8; ++i) out.dp[i] = s * d.dp[i];
    return out;
}

struct JacobianRows {
    std::array<double, 8> x_row;
    std::array<double, 8> y_row;
};

/// Rows of dW/dp for one link: warped start (wx, wy), other endpoint (u, v).
/// The projective columns use the endpoint coordinates, which coincides with
/// the exact derivative once the link is aligned.
inline JacobianRows jacobian_rows(Vec2 warped_start, Vec2 endpoint) {
    const double wx = warped_start.x, wy = warped_start.y;
    const double u = endpoint.x, v = endpoint.y;
    return {{wx, wy, 1, 0, 0, 0, -u * wx, -u * wy},
            {0, 0, 0, wx, wy, 1, -v * wx, -v * wy}};
}

/// Stacked alignment errors for one frame. First N entries of e are
/// x errors, last N are y errors; w carries the per-entry diagonal weights
/// with w[k + N] == w[k].
struct WeightedResiduals {
    Eigen::VectorXd e;
    Eigen::MatrixXd jac;  // 2N x 8
    Eigen::VectorXd w;

    int link_count() const { return static_cast<int>(e.size()) / 2; }
};

inline constexpr std::array<double, 8> kDefaultRegularizerMask = {1, 1, 0, 1, 1, 0, 1, 1};

/// Regularized normal-equation solve for the per-frame parameter update:
/// (J' W J + gamma * diag(mask)) dp = -J' W e.
/// Throws SingularSystemError when fewer than 4 links carry nonzero weight
/// or the normal matrix is numerically rank deficient.
inline ParamDelta solve_update(const WeightedResiduals& r, double gamma,
                               const std::array<double, 8>& mask = kDefaultRegularizerMask) {
    if (gamma <= 0.0) throw std::invalid_argument("solve_update: gamma must be positive");
    const int n = r.link_count();
    if (r.e.size() != 2 * n || r.jac.rows() != 2 * n || r.jac.cols() != 8 ||
        r.w.size() != 2 * n) {
        throw std::invalid_argument("solve_update: malformed residual stack");
    }
    int effective = 0;
    for (int k = 0; k < n; ++k) {
        if (r.w[k] > 0.0) ++effective;
    }
    if (effective < 4) {
        throw SingularSystemError("solve_update: fewer than 4 effective links (" +
                                  std::to_string(effective) + ")");
    }

    Eigen::Matrix<double, 8, 8> A =
        r.jac.transpose() * r.w.asDiagonal() * r.jac;
    for (int i = 0; i < 8; ++i) A(i, i) += gamma * mask[i];
    Eigen::Matrix<double, 8, 1> b = -(r.jac.transpose() * (r.w.cwiseProduct(r.e)));

    // Symmetric Jacobi equilibration: coordinate magnitudes make the raw
    // normal matrix badly conditioned.
    Eigen::Matrix<double, 8, 1> scale;
    for (int i = 0; i < 8; ++i) {
        scale[i] = A(i, i) > 1e-300 ? 1.0 / std::sqrt(A(i, i)) : 1.0;
    }
    const Eigen::Matrix<double, 8, 8> As = scale.asDiagonal() * A * scale.asDiagonal();
    const Eigen::Matrix<double, 8, 1> bs = scale.asDiagonal() * b;

    Eigen::Matrix<double, 8, 1> x;
    Eigen::LDLT<Eigen::Matrix<double, 8, 8>> ldlt(As);
    bool ok = ldlt.info() == Eigen::Success;
    if (ok) {
        x = scale.asDiagonal() * ldlt.solve(bs);
        ok = x.allFinite() && (A * x - b).norm() <= 1e-6 * (b.norm() + 1.0);
    }
    if (!ok) {
        Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(As);
        if (!lu.isInvertible()) {
            throw SingularSystemError("solve_update: rank-deficient normal matrix");
        }
        x = scale.asDiagonal() * lu.solve(bs);
        if (!x.allFinite()) {
            throw SingularSystemError("solve_update: rank-deficient normal matrix");
        }
    }

    ParamDelta out;
    for (int i = 0; i < 8; ++i) out.dp[i] = x[i];
    if (!out.is_finite()) throw SingularSystemError("solve_update: non-finite solution");
    return out;
}

/// Homography I + dp (dp added to the identity's 8 free parameters).
inline Homography increment_homography(const ParamDelta& d) {
    return Homography::from_raw({1.0 + d.dp[0], d.dp[1], d.dp[2],
                                 d.dp[3], 1.0 + d.dp[4], d.dp[5],
                                 d.dp[6], d.dp[7], 1.0});
}

/// Compositional update: the increment acts on already-warped coordinates,
/// so it pre-composes with the current transform.
inline Homography apply_increment(const Homography& H, const ParamDelta& d) {
    return compose(increment_homography(d), H);
}

namespace detail {

struct PointNormalization {
    Homography transform;
    bool degenerate = false;
};

inline PointNormalization normalize_points(std::span<const Vec2> pts) {
    Vec2 centroid{0, 0};
    for (const Vec2& p : pts) centroid = centroid + p;
    centroid = (1.0 / static_cast<double>(pts.size())) * centroid;
    double mean_dist = 0.0;
    for (const Vec2& p : pts) mean_dist += norm(p - centroid);
    mean_dist /= static_cast<double>(pts.size());
    PointNormalization out;
    if (mean_dist <= 1e-12) {
        out.degenerate = true;
        return out;
    }
    const double s = std::sqrt(2.0) / mean_dist;
    out.transform = Homography::from_raw({s, 0, -s * centroid.x, 0, s, -s * centroid.y, 0, 0, 1});
    return out;
}

}  // namespace detail

/// Least-squares homography from >= 4 correspondences via the normalized
/// direct linear transform. Throws SingularMatrixError on degenerate
/// configurations (e.g. 3 collinear source points).
inline Homography dlt_homography(std::span<const std::pair<Vec2, Vec2>> pairs) {
    const int n = static_cast<int>(pairs.size());
    if (n < 4) throw std::invalid_argument("dlt_homography: need at least 4 correspondences");

    std::vector<Vec2> src(n), dst(n);
    for (int i = 0; i < n; ++i) {
        src[i] = pairs[i].first;
        dst[i] = pairs[i].second;
    }
    const auto ns = detail::normalize_points(src);
    const auto nd = detail::normalize_points(dst);
    if (ns.degenerate || nd.degenerate) {
        throw SingularMatrixError("dlt_homography: degenerate point configuration");
    }

    Eigen::MatrixXd A(2 * n, 9);
    for (int i = 0; i < n; ++i) {
        const Vec2 p = warp_point(ns.transform, src[i]);
        const Vec2 q = warp_point(nd.transform, dst[i]);
        A.row(2 * i) << -p.x, -p.y, -1, 0, 0, 0, q.x * p.x, q.x * p.y, q.x;
        A.row(2 * i + 1) << 0, 0, 0, -p.x, -p.y, -1, q.y * p.x, q.y * p.y, q.y;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    // A one-dimensional null space is required for a well-posed solution;
    // collinear or repeated points collapse more singular values.
    const auto& sv = svd.singularValues();
    if (sv[7] <= 1e-9 * sv[0]) {
        throw SingularMatrixError("dlt_homography: degenerate point configuration");
    }
    const Eigen::VectorXd hv = svd.matrixV().col(8);

    Eigen::Matrix3d Hn;
    Hn << hv[0], hv[1], hv[2], hv[3], hv[4], hv[5], hv[6], hv[7], hv[8];
    const Eigen::Matrix3d H =
        invert(nd.transform).to_matrix() * Hn * ns.transform.to_matrix();
    try {
        return Homography::from_matrix(H);
    } catch (const SingularMatrixError&) {
        throw SingularMatrixError("dlt_homography: degenerate point configuration");
    }
}

inline Homography dlt_homography(const std::vector<std::pair<Vec2, Vec2>>& pairs) {
    return dlt_homography(std::span<const std::pair<Vec2, Vec2>>(pairs));
}

}  // namespace trgmc
