#pragma once

// Affine hulls and intersections of affine descriptors, computed in closed
// form with a rank-revealing SVD.

#include "feasibility/geometry.hpp"

#include <Eigen/SVD>

#include <optional>
#include <vector>

namespace feasibility {

namespace detail {

inline double rank_threshold(const Eigen::JacobiSVD<Eigen::MatrixXd>& svd, Eigen::Index rows, Eigen::Index cols) {
    const auto& sv = svd.singularValues();
    const double largest = sv.size() > 0 ? sv[0] : 0.0;
    return largest * 1e-10 * static_cast<double>(std::max(rows, cols));
}

inline Eigen::Index numerical_rank(const Eigen::JacobiSVD<Eigen::MatrixXd>& svd, double threshold) {
    Eigen::Index r = 0;
    const auto& sv = svd.singularValues();
    while (r < sv.size() && sv[r] > threshold) ++r;
    return r;
}

inline Eigen::MatrixXd as_columns(const std::vector<Vector>& vectors, Eigen::Index dim) {
    Eigen::MatrixXd m(dim, static_cast<Eigen::Index>(vectors.size()));
    for (std::size_t j = 0; j < vectors.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = vectors[j];
    return m;
}

/// Orthonormal basis of the column span of `m`.
inline std::vector<Vector> column_span(const Eigen::MatrixXd& m) {
    std::vector<Vector> basis;
    if (m.cols() == 0) return basis;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU);
    const auto r = numerical_rank(svd, rank_threshold(svd, m.rows(), m.cols()));
    for (Eigen::Index j = 0; j < r; ++j) basis.emplace_back(svd.matrixU().col(j));
    return basis;
}

}  // namespace detail

/// Hyperplanes and AffineSubspaces as basepoint + orthonormal basis.
/// Throws for non-affine descriptors.
inline AffineSubspace to_affine(const SetDescriptor& s) {
    if (const auto* a = s.get_if<AffineSubspace>()) return *a;
    if (const auto* h = s.get_if<Hyperplane>()) {
        const auto n = h->normal.size();
        const Vector base = (h->offset / h->normal.squaredNorm()) * h->normal;
        Eigen::MatrixXd row = h->normal.transpose();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(row, Eigen::ComputeFullV);
        std::vector<Vector> basis;
        for (Eigen::Index j = 1; j < n; ++j) basis.emplace_back(svd.matrixV().col(j));
        return AffineSubspace{base, orthonormalize(basis)};
    }
    throw InvalidArgument("to_affine: " + s.type_name() + " is not an affine set");
}

/// Affine hull of any catalog set.
inline AffineSubspace affine_hull(const SetDescriptor& s) {
    const auto n = static_cast<Eigen::Index>(s.dimension());
    if (s.is_affine()) return to_affine(s);
    auto axes = [n](const std::vector<bool>& free) {
        std::vector<Vector> basis;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (free[static_cast<std::size_t>(i)]) basis.emplace_back(Vector::Unit(n, i));
        }
        return basis;
    };
    if (const auto* b = s.get_if<Box>()) {
        std::vector<bool> free(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) free[static_cast<std::size_t>(i)] = b->lower[i] < b->upper[i];
        return AffineSubspace{project(s, Vector::Zero(n)), axes(free)};
    }
    if (const auto* f = s.get_if<OrthantFace>()) {
        std::vector<bool> free(static_cast<std::size_t>(n), false);
        for (std::size_t i = 0; i < f->k; ++i) free[i] = true;
        return AffineSubspace{Vector::Zero(n), axes(free)};
    }
    if (const auto* b = s.get_if<Ball>()) {
        if (b->radius == 0.0) return AffineSubspace{b->center, {}};
    }
    // halfspaces and solid balls
    return AffineSubspace{Vector::Zero(n), axes(std::vector<bool>(static_cast<std::size_t>(n), true))};
}

/// aff(A u B).
inline AffineSubspace affine_hull(const SetDescriptor& a, const SetDescriptor& b) {
    if (a.dimension() != b.dimension()) throw InvalidArgument("affine_hull: dimension mismatch");
    const auto ha = affine_hull(a);
    const auto hb = affine_hull(b);
    std::vector<Vector> dirs = ha.basis;
    dirs.insert(dirs.end(), hb.basis.begin(), hb.basis.end());
    dirs.push_back(hb.basepoint - ha.basepoint);
    const auto n = ha.basepoint.size();
    const auto span = detail::column_span(detail::as_columns(dirs, n));
    // basepoint: the hull point nearest the origin
    Vector base = ha.basepoint;
    for (const auto& v : span) base -= base.dot(v) * v;
    return AffineSubspace{base, span};
}

/// Intersection of affine sets, or nullopt when empty. `feasibility_tol` is
/// relative to the scale of the constraint data.
inline std::optional<AffineSubspace> affine_intersection(const std::vector<SetDescriptor>& sets,
                                                         double feasibility_tol = 1e-9) {
    if (sets.empty()) throw InvalidArgument("affine_intersection: empty family");
    const auto n = static_cast<Eigen::Index>(sets.front().dimension());
    // stack constraints M x = c, one block per set: rows spanning the
    // orthogonal complement of each set's direction space
    std::vector<Vector> rows;
    std::vector<double> rhs;
    for (const auto& s : sets) {
        if (static_cast<Eigen::Index>(s.dimension()) != n) throw InvalidArgument("affine_intersection: dimension mismatch");
        const auto a = to_affine(s);
        const auto dirs = detail::as_columns(a.basis, n);
        Eigen::MatrixXd complement = Eigen::MatrixXd::Identity(n, n);
        if (dirs.cols() > 0) complement -= dirs * dirs.transpose();
        for (const auto& r : detail::column_span(complement)) {
            rows.push_back(r);
            rhs.push_back(r.dot(a.basepoint));
        }
    }
    if (rows.empty()) return AffineSubspace{Vector::Zero(n), detail::column_span(Eigen::MatrixXd::Identity(n, n))};
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), n);
    Vector c(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        c[static_cast<Eigen::Index>(i)] = rhs[i];
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double threshold = detail::rank_threshold(svd, m.rows(), m.cols());
    svd.setThreshold(1e-10 * static_cast<double>(std::max(m.rows(), m.cols())));
    const Vector x = svd.solve(c);
    const double scale = 1.0 + c.norm();
    if ((m * x - c).norm() > feasibility_tol * scale) return std::nullopt;
    const auto r = detail::numerical_rank(svd, threshold);
    std::vector<Vector> basis;
    for (Eigen::Index j = r; j < n; ++j) basis.emplace_back(svd.matrixV().col(j));
    return AffineSubspace{x, orthonormalize(basis)};
}

}  // namespace feasibility
