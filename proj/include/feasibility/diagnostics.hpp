#pragma once

// Empirical estimators for operator regularity (kappa), averagedness (sigma),
// the key-inequality constants, set-family regularity (mu), and checks of
// the Douglas-Rachford transversality and angle conditions.

#include "feasibility/affine.hpp"
#include "feasibility/operators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace feasibility {

using DistanceFn = std::function<double(const Vector&)>;

/// n points uniform in ball(center; radius): Gaussian direction scaled by
/// radius * U^(1/dim).
inline std::vector<Vector> sample_ball(const Vector& center, double radius, std::size_t n, std::uint64_t seed) {
    const auto dim = center.size();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Vector> out;
    out.reserve(n);
    while (out.size() < n) {
        Vector dir(dim);
        for (Eigen::Index i = 0; i < dim; ++i) dir[i] = gauss(rng);
        const double len = dir.norm();
        if (len == 0.0) continue;
        const double r = radius * std::pow(unif(rng), 1.0 / static_cast<double>(dim));
        out.emplace_back(center + (r / len) * dir);
    }
    return out;
}

inline std::vector<Vector> sample_ball(std::size_t dim, double radius, std::size_t n, std::uint64_t seed) {
    return sample_ball(Vector::Zero(static_cast<Eigen::Index>(dim)), radius, n, seed);
}

/// Uniform samples in the affine subspace `plane` intersected with ball(center; radius).
/// `center` must lie in the subspace.
inline std::vector<Vector> sample_ball_in(const AffineSubspace& plane, const Vector& center, double radius,
                                          std::size_t n, std::uint64_t seed) {
    const auto k = plane.basis.size();
    if (k == 0) return std::vector<Vector>(n, center);
    const auto local = sample_ball(k, radius, n, seed);
    std::vector<Vector> out;
    out.reserve(n);
    for (const auto& u : local) {
        Vector x = center;
        for (std::size_t j = 0; j < k; ++j) x += u[static_cast<Eigen::Index>(j)] * plane.basis[j];
        out.push_back(std::move(x));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Operator regularity

struct RegularityEstimate {
    double rho = 0.0;
    double kappa_hat = 0.0;
    std::size_t sample_count = 0;
    Vector argmax;
    /// A sample with (numerically) zero residual but positive Fix-distance.
    bool violated = false;
    std::optional<Vector> violation_point;
};

inline constexpr double kZeroResidual = 1e-14;
inline constexpr double kPositiveFixDistance = 1e-10;

/// Sampled lower bound on kappa(rho) = sup_{||x|| <= rho} d_Fix(x) / ||x - Tx||,
/// refined by a coordinate hill climb (100 sweeps, step 1e-3 rho) from the
/// best sample.
inline RegularityEstimate estimate_kappa(const FixedPointMap& map, double rho, std::size_t n_samples,
                                         std::uint64_t seed, bool refine = true) {
    if (!map.fix_distance()) throw InvalidArgument("estimate_kappa: map '" + map.label() + "' has no fix_distance oracle");
    if (!(rho > 0.0)) throw InvalidArgument("estimate_kappa: rho must be > 0");
    if (n_samples == 0) throw InvalidArgument("estimate_kappa: n_samples must be >= 1");
    const auto& dist = *map.fix_distance();

    RegularityEstimate est;
    est.rho = rho;
    // -1 marks "no ratio defined"
    auto ratio = [&](const Vector& x) -> double {
        const double r = map.residual(x);
        const double d = dist(x);
        if (r < kZeroResidual) {
            if (d > kPositiveFixDistance) {
                est.violated = true;
                if (!est.violation_point) est.violation_point = x;
                return std::numeric_limits<double>::infinity();
            }
            return -1.0;
        }
        return d / r;
    };

    double best = -1.0;
    for (const auto& x : sample_ball(map.dimension(), rho, n_samples, seed)) {
        const double q = ratio(x);
        ++est.sample_count;
        if (q > best) {
            best = q;
            est.argmax = x;
        }
    }

    if (refine && best >= 0.0 && std::isfinite(best)) {
        const double h = 1e-3 * rho;
        Vector x = est.argmax;
        for (int sweep = 0; sweep < 100; ++sweep) {
            bool improved = false;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                for (double sign : {1.0, -1.0}) {
                    Vector y = x;
                    y[i] += sign * h;
                    const double len = y.norm();
                    if (len > rho) y *= rho / len;
                    const double q = ratio(y);
                    if (q > best) {
                        best = q;
                        x = y;
                        improved = true;
                    }
                }
            }
            if (!improved) break;
        }
        est.argmax = x;
    }
    est.kappa_hat = est.violated ? std::numeric_limits<double>::infinity() : std::max(best, 0.0);
    return est;
}

/// sigma = (1 - a) / a for an a-averaged map.
inline double sigma_of(const FixedPointMap& map) {
    if (!map.averagedness()) throw InvalidArgument("sigma_of: map '" + map.label() + "' carries no averagedness");
    const double a = *map.averagedness();
    return (1.0 - a) / a;
}

struct KeyConstants {
    double alpha = 0.0;
    double beta = 1.0;
    double gamma = 0.0;
};

/// alpha = sqrt(s / (1 + s)) with s = kappa^2 / sigma, beta = (1 - alpha)^2,
/// gamma = sigma / kappa^2.
inline KeyConstants key_constants(double kappa, double sigma) {
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw InvalidArgument("key_constants: kappa must be finite and >= 0");
    if (!(sigma > 0.0)) throw InvalidArgument("key_constants: sigma must be > 0");
    if (kappa == 0.0) throw InvalidArgument("key_constants: kappa = 0 makes gamma infinite");
    const double s = kappa * kappa / sigma;
    KeyConstants k;
    k.alpha = std::sqrt(s / (1.0 + s));
    k.beta = (1.0 - k.alpha) * (1.0 - k.alpha);
    k.gamma = sigma / (kappa * kappa);
    return k;
}

struct KeyInequalityReport {
    // max positive excess of each inequality over the samples
    double key1 = 0.0;        // d_Z(Tx) <= alpha d_Z(x)
    double key2_lower = 0.0;  // beta d_Z(x)^2 <= (d_Z(x) - d_Z(Tx))^2
    double key2_upper = 0.0;  // (d_Z(x) - d_Z(Tx))^2 <= ||x - Tx||^2
    double key3 = 0.0;        // d_C(Tx)^2 <= d_C(x)^2 - gamma d_Z(x)^2
    std::size_t samples = 0;

    double worst() const { return std::max({key1, key2_lower, key2_upper, key3}); }
};

/// Evaluates the three key inequalities on samples from ball(0; rho).
/// `subset_distance` is d_C for some C inside Fix T.
inline KeyInequalityReport verify_key_inequalities(const FixedPointMap& map, const DistanceFn& subset_distance,
                                                   const KeyConstants& consts, double rho, std::size_t n_samples,
                                                   std::uint64_t seed) {
    if (!map.fix_distance()) throw InvalidArgument("verify_key_inequalities: map has no fix_distance oracle");
    const auto& dz = *map.fix_distance();
    KeyInequalityReport rep;
    for (const auto& x : sample_ball(map.dimension(), rho, n_samples, seed)) {
        const Vector tx = map(x);
        const double d = dz(x);
        const double dt = dz(tx);
        const double gap = d - dt;
        const double r2 = (x - tx).squaredNorm();
        const double c = subset_distance(x);
        const double ct = subset_distance(tx);
        rep.key1 = std::max(rep.key1, dt - consts.alpha * d);
        rep.key2_lower = std::max(rep.key2_lower, consts.beta * d * d - gap * gap);
        rep.key2_upper = std::max(rep.key2_upper, gap * gap - r2);
        rep.key3 = std::max(rep.key3, ct * ct - (c * c - consts.gamma * d * d));
        ++rep.samples;
    }
    return rep;
}

/// Excess of sigma ||x - Tx||^2 over ||x - z||^2 - ||Tx - z||^2 (positive means violated).
inline double averaged_inequality_excess(const FixedPointMap& map, double sigma, const Vector& x, const Vector& z) {
    const Vector tx = map(x);
    return sigma * (x - tx).squaredNorm() - ((x - z).squaredNorm() - (tx - z).squaredNorm());
}

struct CombinationExcess {
    double weighted = 0.0;  // ||y-z||^2 + sum w_i sigma_i ||x - T_i x||^2 - ||x-z||^2
    double aggregate = 0.0; // ||y-z||^2 + sigma_+ ||x - y||^2 - ||x-z||^2
};

/// Both bounds for y = sum w_i T_i x at a common fixed point z.
inline CombinationExcess combination_inequality_excess(const std::vector<FixedPointMap>& maps,
                                                       const std::vector<double>& weights, const Vector& x,
                                                       const Vector& z) {
    Vector y = Vector::Zero(x.size());
    double weighted_residuals = 0.0;
    double sigma_plus = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < maps.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        const Vector tx = maps[i](x);
        const double s = sigma_of(maps[i]);
        y += weights[i] * tx;
        weighted_residuals += weights[i] * s * (x - tx).squaredNorm();
        sigma_plus = std::min(sigma_plus, s);
    }
    const double lhs = (x - z).squaredNorm();
    const double yz = (y - z).squaredNorm();
    return {yz + weighted_residuals - lhs, yz + sigma_plus * (x - y).squaredNorm() - lhs};
}

// ---------------------------------------------------------------------------
// Set-family regularity

struct IntersectionOracle {
    DistanceFn distance;
    bool surrogate = false;
};

/// Dykstra's alternating projections: converges to the projection onto the
/// intersection of the sets.
inline Vector dykstra_projection(const std::vector<SetDescriptor>& sets, const Vector& x, std::size_t max_iter = 10'000,
                                 double tol = 1e-10) {
    const std::size_t m = sets.size();
    std::vector<Vector> corrections(m, Vector::Zero(x.size()));
    Vector y = x;
    for (std::size_t it = 0; it < max_iter; ++it) {
        const Vector prev = y;
        for (std::size_t i = 0; i < m; ++i) {
            const Vector shifted = y + corrections[i];
            y = project(sets[i], shifted);
            corrections[i] = shifted - y;
        }
        if ((y - prev).norm() <= tol) break;
    }
    return y;
}

/// Exact distance to the intersection for affine families. Other families
/// are refused unless `allow_surrogate`, which selects Dykstra's method with
/// 10^4 iterations and tolerance 1e-10.
inline IntersectionOracle intersection_oracle(const std::vector<SetDescriptor>& sets, bool allow_surrogate = false) {
    if (sets.empty()) throw InvalidArgument("intersection_oracle: empty family");
    const bool affine = std::all_of(sets.begin(), sets.end(), [](const auto& s) { return s.is_affine(); });
    if (affine) {
        auto inter = affine_intersection(sets);
        if (!inter) throw InvalidArgument("intersection_oracle: the sets have empty intersection");
        auto set = std::make_shared<const SetDescriptor>(*inter);
        return {[set](const Vector& x) { return distance(*set, x); }, false};
    }
    if (!allow_surrogate) {
        throw InvalidArgument("intersection_oracle: exact oracle only for affine families (enable the surrogate)");
    }
    auto shared = std::make_shared<const std::vector<SetDescriptor>>(sets);
    return {[shared](const Vector& x) { return (x - dykstra_projection(*shared, x)).norm(); }, true};
}

struct FamilyRegularityEstimate {
    double mu_hat = 0.0;
    double rho = 0.0;
    std::size_t samples = 0;  // samples with positive max_i d_{C_i}
    Vector argmax;
};

/// Sampled lower bound on mu(rho) = sup d_C(x) / max_i d_{C_i}(x) on ball(0; rho).
inline FamilyRegularityEstimate estimate_family_mu(const std::vector<SetDescriptor>& sets,
                                                   const DistanceFn& intersection_distance, double rho,
                                                   std::size_t n_samples, std::uint64_t seed) {
    if (sets.empty()) throw InvalidArgument("estimate_family_mu: empty family");
    if (!(rho > 0.0)) throw InvalidArgument("estimate_family_mu: rho must be > 0");
    FamilyRegularityEstimate est;
    est.rho = rho;
    for (const auto& x : sample_ball(sets.front().dimension(), rho, n_samples, seed)) {
        double worst = 0.0;
        for (const auto& s : sets) worst = std::max(worst, distance(s, x));
        if (worst <= kZeroResidual) continue;
        ++est.samples;
        const double q = intersection_distance(x) / worst;
        if (q > est.mu_hat) {
            est.mu_hat = q;
            est.argmax = x;
        }
    }
    if (est.samples == 0) throw InvalidArgument("estimate_family_mu: all samples feasible");
    return est;
}

// ---------------------------------------------------------------------------
// Douglas-Rachford for affine pairs

namespace detail {

inline AffineSubspace dr_intersection(const SetDescriptor& a, const SetDescriptor& b, const char* who) {
    if (!a.is_affine() || !b.is_affine()) {
        throw InvalidArgument(std::string(who) + ": both sets must be affine (hyperplane or affine subspace)");
    }
    auto inter = affine_intersection({a, b});
    if (!inter) throw InvalidArgument(std::string(who) + ": the sets do not intersect");
    return *inter;
}

}  // namespace detail

/// Exact d_{Fix T} for the DR operator of an intersecting affine pair:
/// x -> d_{A n B}(P_L x) with L = aff(A u B).
inline DistanceFn dr_fix_distance(const SetDescriptor& a, const SetDescriptor& b) {
    auto inter = std::make_shared<const SetDescriptor>(detail::dr_intersection(a, b, "dr_fix_distance"));
    auto hull = std::make_shared<const SetDescriptor>(affine_hull(a, b));
    return [inter, hull](const Vector& x) { return distance(*inter, project(*hull, x)); };
}

/// P_{Fix T} = Id - P_L + P_{A n B} P_L for the same pairs.
inline FixedPointMap::Rule dr_fix_projection(const SetDescriptor& a, const SetDescriptor& b) {
    auto inter = std::make_shared<const SetDescriptor>(detail::dr_intersection(a, b, "dr_fix_projection"));
    auto hull = std::make_shared<const SetDescriptor>(affine_hull(a, b));
    return [inter, hull](const Vector& x) -> Vector {
        const Vector pl = project(*hull, x);
        return x - pl + project(*inter, pl);
    };
}

/// DR operator with both Fix oracles attached.
inline FixedPointMap dr_operator_with_fix_oracle(const SetDescriptor& a, const SetDescriptor& b) {
    auto map = dr_operator(a, b);
    map.with_fix_distance(dr_fix_distance(a, b));
    map.with_fix_projection(dr_fix_projection(a, b));
    return map;
}

struct TransversalityCheck {
    /// Smallest theta in [0,1] with ||x-Tx||^2 >= (1-theta)/5 max(d_A^2, d_B^2)
    /// on every sample (1 means no theta < 1 works).
    double theta_hat = 0.0;
    double min_ratio = std::numeric_limits<double>::infinity();
    /// max over samples of (1-theta)/5 max(d_A^2, d_B^2) - ||x-Tx||^2 for the supplied theta
    double max_violation = 0.0;
    std::size_t samples = 0;
};

/// Samples L n ball(c; delta), L = aff(A u B), and measures the DR residual
/// against the larger of the two set distances.
inline TransversalityCheck check_transversality_bound(const SetDescriptor& a, const SetDescriptor& b, const Vector& c,
                                                      double delta, std::size_t n_samples, std::uint64_t seed,
                                                      double theta = 0.0) {
    const auto dr = dr_operator(a, b);
    require_same_dimension(c, Vector::Zero(static_cast<Eigen::Index>(a.dimension())), "check_transversality_bound");
    const double feas_tol = 1e-9 * (1.0 + c.norm());
    if (distance(a, c) > feas_tol || distance(b, c) > feas_tol) {
        throw InvalidArgument("check_transversality_bound: center is not in A n B");
    }
    if (!(delta > 0.0)) throw InvalidArgument("check_transversality_bound: delta must be > 0");
    const auto hull = affine_hull(a, b);
    TransversalityCheck out;
    for (const auto& x : sample_ball_in(hull, c, delta, n_samples, seed)) {
        const double da = distance(a, x);
        const double db = distance(b, x);
        const double worst = std::max(da * da, db * db);
        const double res2 = (x - dr(x)).squaredNorm();
        out.max_violation = std::max(out.max_violation, (1.0 - theta) / 5.0 * worst - res2);
        if (worst <= 1e-24) continue;
        ++out.samples;
        out.min_ratio = std::min(out.min_ratio, res2 / worst);
    }
    out.theta_hat = out.samples == 0 ? 0.0 : std::clamp(1.0 - 5.0 * out.min_ratio, 0.0, 1.0);
    return out;
}

struct AngleEstimate {
    /// max sampled cosine of the angle at y = P_Fix x between x and Tx
    double theta_hat = 0.0;
    /// 1 / sqrt(1 - theta_hat): the implied bound on kappa
    double kappa_bound = 1.0;
    std::size_t samples = 0;
    std::size_t skipped = 0;
};

inline AngleEstimate check_angle_condition(const FixedPointMap& map, double rho, std::size_t n_samples,
                                           std::uint64_t seed) {
    if (!map.fix_projection()) throw InvalidArgument("check_angle_condition: map has no fixed-point selector");
    const auto& select = *map.fix_projection();
    AngleEstimate out;
    out.theta_hat = -1.0;
    for (const auto& x : sample_ball(map.dimension(), rho, n_samples, seed)) {
        const Vector y = select(x);
        const Vector tx = map(x);
        const double a = (x - y).norm();
        const double b = (tx - y).norm();
        if (a < kZeroResidual || b < kZeroResidual) {
            ++out.skipped;
            continue;
        }
        ++out.samples;
        out.theta_hat = std::max(out.theta_hat, std::min(1.0, (x - y).dot(tx - y) / (a * b)));
    }
    if (out.samples == 0) out.theta_hat = 0.0;
    out.kappa_bound = out.theta_hat < 1.0 ? 1.0 / std::sqrt(1.0 - out.theta_hat) : std::numeric_limits<double>::infinity();
    return out;
}

}  // namespace feasibility
