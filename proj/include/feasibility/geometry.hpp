#pragma once

// Ambient vector space and the catalog of convex sets with closed-form
// Euclidean projections.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace feasibility {

using Vector = Eigen::VectorXd;

/// Thrown when inputs violate a precondition (dimension mismatch, bad
/// parameters, malformed configuration).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical slack used where exact arithmetic would demand equality.
struct Tolerances {
    double membership = 1e-10;       // set membership residual
    double inequality_slack = 1e-9;  // slack for nonexpansiveness-type checks
    double orthonormality = 1e-10;   // AffineSubspace basis validation
};

inline constexpr Tolerances default_tolerances{};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

inline void require_same_dimension(const Vector& a, const Vector& b, const char* what) {
    if (a.size() != b.size()) {
        throw InvalidArgument(std::string(what) + ": dimension mismatch (" +
                              std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    }
}

// ---------------------------------------------------------------------------
// Set variants

/// {x : <normal, x> = offset}
struct Hyperplane {
    Vector normal;
    double offset = 0.0;
};

/// {x : <normal, x> <= offset}
struct Halfspace {
    Vector normal;
    double offset = 0.0;
};

/// Componentwise bounds; +-infinity entries leave a coordinate unbounded.
struct Box {
    Vector lower;
    Vector upper;
};

struct Ball {
    Vector center;
    double radius = 0.0;
};

/// basepoint + span(basis), basis orthonormal.
struct AffineSubspace {
    Vector basepoint;
    std::vector<Vector> basis;
};

/// R^k_+ x {0}^{n-k}
struct OrthantFace {
    std::size_t n = 0;
    std::size_t k = 0;
};

/// A validated convex set with an exact projection rule.
class SetDescriptor {
public:
    using Variant = std::variant<Hyperplane, Halfspace, Box, Ball, AffineSubspace, OrthantFace>;

    SetDescriptor(Hyperplane h) : set_(std::move(h)) { validate(); }
    SetDescriptor(Halfspace h) : set_(std::move(h)) { validate(); }
    SetDescriptor(Box b) : set_(std::move(b)) { validate(); }
    SetDescriptor(Ball b) : set_(std::move(b)) { validate(); }
    SetDescriptor(AffineSubspace a) : set_(std::move(a)) { validate(); }
    SetDescriptor(OrthantFace f) : set_(f) { validate(); }

    const Variant& variant() const noexcept { return set_; }

    template <class T>
    const T* get_if() const noexcept { return std::get_if<T>(&set_); }

    template <class T>
    bool is() const noexcept { return std::holds_alternative<T>(set_); }

    std::size_t dimension() const noexcept {
        return std::visit(
            [](const auto& s) -> std::size_t {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, Hyperplane> || std::is_same_v<S, Halfspace>) {
                    return static_cast<std::size_t>(s.normal.size());
                } else if constexpr (std::is_same_v<S, Box>) {
                    return static_cast<std::size_t>(s.lower.size());
                } else if constexpr (std::is_same_v<S, Ball>) {
                    return static_cast<std::size_t>(s.center.size());
                } else if constexpr (std::is_same_v<S, AffineSubspace>) {
                    return static_cast<std::size_t>(s.basepoint.size());
                } else {
                    return s.n;
                }
            },
            set_);
    }

    /// Short type tag, matching the JSON encoding.
    std::string type_name() const {
        static constexpr const char* names[] = {"hyperplane", "halfspace",    "box",
                                                "ball",       "affine",       "orthant_face"};
        return names[set_.index()];
    }

    /// Hyperplanes and affine subspaces.
    bool is_affine() const noexcept { return is<Hyperplane>() || is<AffineSubspace>(); }

private:
    void validate() const {
        std::visit(
            [](const auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, Hyperplane> || std::is_same_v<S, Halfspace>) {
                    if (s.normal.size() == 0 || !(s.normal.norm() > 0.0)) {
                        throw InvalidArgument("hyperplane/halfspace: normal must be nonzero");
                    }
                    if (!std::isfinite(s.offset)) throw InvalidArgument("hyperplane/halfspace: offset must be finite");
                } else if constexpr (std::is_same_v<S, Box>) {
                    if (s.lower.size() != s.upper.size()) throw InvalidArgument("box: lower/upper dimension mismatch");
                    for (Eigen::Index i = 0; i < s.lower.size(); ++i) {
                        if (std::isnan(s.lower[i]) || std::isnan(s.upper[i]) || s.lower[i] > s.upper[i] ||
                            s.lower[i] == kInfinity || s.upper[i] == -kInfinity) {
                            throw InvalidArgument("box: requires lower <= upper componentwise");
                        }
                    }
                } else if constexpr (std::is_same_v<S, Ball>) {
                    if (!(s.radius >= 0.0) || !std::isfinite(s.radius)) {
                        throw InvalidArgument("ball: radius must be finite and >= 0");
                    }
                } else if constexpr (std::is_same_v<S, AffineSubspace>) {
                    const auto n = s.basepoint.size();
                    if (static_cast<Eigen::Index>(s.basis.size()) > n) {
                        throw InvalidArgument("affine: more basis vectors than the dimension");
                    }
                    for (std::size_t i = 0; i < s.basis.size(); ++i) {
                        if (s.basis[i].size() != n) throw InvalidArgument("affine: basis vector dimension mismatch");
                        for (std::size_t j = i; j < s.basis.size(); ++j) {
                            const double expected = i == j ? 1.0 : 0.0;
                            if (std::abs(s.basis[i].dot(s.basis[j]) - expected) > default_tolerances.orthonormality) {
                                throw InvalidArgument("affine: basis is not orthonormal");
                            }
                        }
                    }
                } else {
                    if (s.k > s.n) throw InvalidArgument("orthant_face: requires k <= n");
                }
            },
            set_);
    }

    Variant set_;
};

// ---------------------------------------------------------------------------
// Projection, reflection, distance

namespace detail {

inline void check_dimension(const SetDescriptor& s, const Vector& x) {
    if (static_cast<std::size_t>(x.size()) != s.dimension()) {
        throw InvalidArgument("projection onto " + s.type_name() + ": dimension mismatch (set " +
                              std::to_string(s.dimension()) + ", point " + std::to_string(x.size()) + ")");
    }
}

}  // namespace detail

/// Nearest point of `s` to `x`.
inline Vector project(const SetDescriptor& s, const Vector& x) {
    detail::check_dimension(s, x);
    return std::visit(
        [&x](const auto& set) -> Vector {
            using S = std::decay_t<decltype(set)>;
            if constexpr (std::is_same_v<S, Hyperplane>) {
                const double excess = set.normal.dot(x) - set.offset;
                return x - (excess / set.normal.squaredNorm()) * set.normal;
            } else if constexpr (std::is_same_v<S, Halfspace>) {
                const double excess = set.normal.dot(x) - set.offset;
                if (excess <= 0.0) return x;
                return x - (excess / set.normal.squaredNorm()) * set.normal;
            } else if constexpr (std::is_same_v<S, Box>) {
                return x.cwiseMax(set.lower).cwiseMin(set.upper);
            } else if constexpr (std::is_same_v<S, Ball>) {
                const Vector offset = x - set.center;
                const double dist = offset.norm();
                if (dist <= set.radius) return x;
                return set.center + (set.radius / dist) * offset;
            } else if constexpr (std::is_same_v<S, AffineSubspace>) {
                const Vector rel = x - set.basepoint;
                Vector result = set.basepoint;
                for (const auto& b : set.basis) result += rel.dot(b) * b;
                return result;
            } else {
                Vector result = Vector::Zero(x.size());
                for (std::size_t i = 0; i < set.k; ++i) {
                    const auto ii = static_cast<Eigen::Index>(i);
                    result[ii] = std::max(x[ii], 0.0);
                }
                return result;
            }
        },
        s.variant());
}

/// 2 P_s x - x
inline Vector reflect(const SetDescriptor& s, const Vector& x) {
    return 2.0 * project(s, x) - x;
}

inline double distance(const SetDescriptor& s, const Vector& x) {
    return (x - project(s, x)).norm();
}

inline bool contains(const SetDescriptor& s, const Vector& x, const Tolerances& tol = default_tolerances) {
    return distance(s, x) <= tol.membership;
}

// ---------------------------------------------------------------------------
// Convenience constructors

inline SetDescriptor hyperplane(Vector normal, double offset) {
    return Hyperplane{std::move(normal), offset};
}

inline SetDescriptor halfspace(Vector normal, double offset) {
    return Halfspace{std::move(normal), offset};
}

inline SetDescriptor ball(Vector center, double radius) {
    return Ball{std::move(center), radius};
}

/// Line through the origin of R^2 spanned by (cos theta, sin theta).
inline SetDescriptor line_through_origin(double theta) {
    Vector dir(2);
    dir << std::cos(theta), std::sin(theta);
    return AffineSubspace{Vector::Zero(2), {dir}};
}

/// Gram-Schmidt with re-orthogonalization. Vectors whose residual norm falls
/// below `rank_tol` times their original norm are dropped.
inline std::vector<Vector> orthonormalize(const std::vector<Vector>& vectors, double rank_tol = 1e-10) {
    std::vector<Vector> basis;
    for (const auto& v : vectors) {
        const double scale = v.norm();
        if (scale == 0.0) continue;
        Vector r = v;
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : basis) r -= r.dot(b) * b;
        }
        const double rn = r.norm();
        if (rn > rank_tol * scale) basis.push_back(r / rn);
    }
    return basis;
}

}  // namespace feasibility
