#pragma once

// Fixed-point maps with known averagedness, their combinators, and the
// Douglas-Rachford family (DR, Borwein-Tam chain, cyclically anchored chain).

#include "feasibility/geometry.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace feasibility {

/// An operator T on R^n.
///
/// `averagedness` is the constant a in (0,1) with T = (1-a) Id + a N for some
/// nonexpansive N; when absent the map is only claimed nonexpansive.
/// `fix_distance` is an exact oracle for d_{Fix T}; `fix_projection` an exact
/// selector of the nearest fixed point. Both are attached only where a
/// closed form is known.
class FixedPointMap {
public:
    using Rule = std::function<Vector(const Vector&)>;
    using DistanceOracle = std::function<double(const Vector&)>;

    FixedPointMap(std::size_t dimension, Rule apply, std::optional<double> averagedness, std::string label)
        : dimension_(dimension), apply_(std::move(apply)), averagedness_(averagedness), label_(std::move(label)) {
        if (!apply_) throw InvalidArgument("FixedPointMap: empty apply rule");
        if (averagedness_ && !(*averagedness_ > 0.0 && *averagedness_ < 1.0)) {
            throw InvalidArgument("FixedPointMap: averagedness must lie in (0,1)");
        }
    }

    Vector operator()(const Vector& x) const {
        if (static_cast<std::size_t>(x.size()) != dimension_) {
            throw InvalidArgument(label_ + ": dimension mismatch (map " + std::to_string(dimension_) +
                                  ", point " + std::to_string(x.size()) + ")");
        }
        return apply_(x);
    }

    Vector apply(const Vector& x) const { return (*this)(x); }

    /// ||x - Tx||
    double residual(const Vector& x) const { return (x - (*this)(x)).norm(); }

    std::size_t dimension() const noexcept { return dimension_; }
    const std::optional<double>& averagedness() const noexcept { return averagedness_; }
    const std::string& label() const noexcept { return label_; }

    const std::optional<DistanceOracle>& fix_distance() const noexcept { return fix_distance_; }
    const std::optional<Rule>& fix_projection() const noexcept { return fix_projection_; }

    FixedPointMap& with_fix_distance(DistanceOracle oracle) {
        fix_distance_ = std::move(oracle);
        return *this;
    }

    FixedPointMap& with_fix_projection(Rule selector) {
        fix_projection_ = std::move(selector);
        return *this;
    }

    FixedPointMap& with_label(std::string label) {
        label_ = std::move(label);
        return *this;
    }

private:
    std::size_t dimension_;
    Rule apply_;
    std::optional<double> averagedness_;
    std::string label_;
    std::optional<DistanceOracle> fix_distance_;
    std::optional<Rule> fix_projection_;
};

/// Averagedness of T2 T1 for a1-averaged T1 and a2-averaged T2.
inline double compose_averagedness(double a1, double a2) {
    return (a1 + a2 - 2.0 * a1 * a2) / (1.0 - a1 * a2);
}

/// (1 - relax) Id + relax P_s, relax in (0,2). Fix T = s.
inline FixedPointMap relaxed_projector(const SetDescriptor& s, double relax) {
    if (!(relax > 0.0 && relax < 2.0)) {
        throw InvalidArgument("relaxed_projector: relax must lie in (0,2), got " + std::to_string(relax));
    }
    auto set = std::make_shared<const SetDescriptor>(s);
    FixedPointMap map(
        s.dimension(),
        [set, relax](const Vector& x) -> Vector {
            if (relax == 1.0) return project(*set, x);
            return (1.0 - relax) * x + relax * project(*set, x);
        },
        relax / 2.0, "P[" + s.type_name() + "]" + (relax == 1.0 ? "" : "^" + std::to_string(relax)));
    map.with_fix_distance([set](const Vector& x) { return distance(*set, x); });
    map.with_fix_projection([set](const Vector& x) { return project(*set, x); });
    return map;
}

inline FixedPointMap projector(const SetDescriptor& s) { return relaxed_projector(s, 1.0); }

/// R_s = 2 P_s - Id. Nonexpansive but not averaged.
inline FixedPointMap reflector(const SetDescriptor& s) {
    auto set = std::make_shared<const SetDescriptor>(s);
    FixedPointMap map(
        s.dimension(), [set](const Vector& x) { return reflect(*set, x); }, std::nullopt,
        "R[" + s.type_name() + "]");
    map.with_fix_distance([set](const Vector& x) { return distance(*set, x); });
    map.with_fix_projection([set](const Vector& x) { return project(*set, x); });
    return map;
}

/// Douglas-Rachford operator for the ordered pair (A,B): P_B R_A + Id - P_A.
inline FixedPointMap dr_operator(const SetDescriptor& a, const SetDescriptor& b) {
    if (a.dimension() != b.dimension()) {
        throw InvalidArgument("dr_operator: dimension mismatch (" + std::to_string(a.dimension()) + " vs " +
                              std::to_string(b.dimension()) + ")");
    }
    auto sa = std::make_shared<const SetDescriptor>(a);
    auto sb = std::make_shared<const SetDescriptor>(b);
    return FixedPointMap(
        a.dimension(),
        [sa, sb](const Vector& x) -> Vector {
            const Vector pa = project(*sa, x);
            const Vector ra = 2.0 * pa - x;
            return project(*sb, ra) + x - pa;
        },
        0.5, "DR(" + a.type_name() + "," + b.type_name() + ")");
}

/// Applies maps[0] first, maps.back() last.
inline FixedPointMap compose(std::vector<FixedPointMap> maps) {
    if (maps.empty()) throw InvalidArgument("compose: empty list");
    if (maps.size() == 1) return std::move(maps.front());
    const std::size_t dim = maps.front().dimension();
    std::optional<double> avg = maps.front().averagedness();
    std::string label = "compose(" + maps.front().label();
    for (std::size_t i = 1; i < maps.size(); ++i) {
        if (maps[i].dimension() != dim) throw InvalidArgument("compose: dimension mismatch at entry " + std::to_string(i));
        if (avg && maps[i].averagedness()) {
            avg = compose_averagedness(*avg, *maps[i].averagedness());
        } else {
            avg.reset();
        }
        label += "," + maps[i].label();
    }
    label += ")";
    auto chain = std::make_shared<const std::vector<FixedPointMap>>(std::move(maps));
    return FixedPointMap(
        dim,
        [chain](const Vector& x) {
            Vector y = x;
            for (const auto& t : *chain) y = t(y);
            return y;
        },
        avg, std::move(label));
}

/// x -> sum_i w_i T_i x. Zero-weight maps are never evaluated.
inline FixedPointMap convex_combination(std::vector<FixedPointMap> maps, std::vector<double> weights) {
    if (maps.empty()) throw InvalidArgument("convex_combination: empty list");
    if (maps.size() != weights.size()) throw InvalidArgument("convex_combination: weights/maps length mismatch");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw InvalidArgument("convex_combination: negative weight");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("convex_combination: weights must sum to 1");
    const std::size_t dim = maps.front().dimension();
    std::vector<FixedPointMap> active;
    std::vector<double> active_w;
    std::optional<double> avg = 0.0;
    std::string label = "combo(";
    for (std::size_t i = 0; i < maps.size(); ++i) {
        if (maps[i].dimension() != dim) {
            throw InvalidArgument("convex_combination: dimension mismatch at entry " + std::to_string(i));
        }
        if (weights[i] == 0.0) continue;
        if (avg && maps[i].averagedness()) {
            *avg += weights[i] * *maps[i].averagedness();
        } else {
            avg.reset();
        }
        label += (active.empty() ? "" : ",") + maps[i].label();
        active.push_back(std::move(maps[i]));
        active_w.push_back(weights[i]);
    }
    label += ")";
    if (active.size() == 1) return std::move(active.front());
    auto parts = std::make_shared<const std::vector<FixedPointMap>>(std::move(active));
    auto w = std::make_shared<const std::vector<double>>(std::move(active_w));
    return FixedPointMap(
        dim,
        [parts, w](const Vector& x) {
            Vector y = Vector::Zero(x.size());
            for (std::size_t i = 0; i < parts->size(); ++i) y += (*w)[i] * (*parts)[i](x);
            return y;
        },
        avg, std::move(label));
}

/// The DR pieces T_i = DR(U_i, U_{i+1}) with U_{m+1} = U_1.
inline std::vector<FixedPointMap> btm_operators(const std::vector<SetDescriptor>& sets) {
    if (sets.size() < 2) throw InvalidArgument("btm_chain: needs at least 2 sets");
    std::vector<FixedPointMap> ops;
    ops.reserve(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) {
        ops.push_back(dr_operator(sets[i], sets[(i + 1) % sets.size()]));
    }
    return ops;
}

/// Borwein-Tam operator T_m ... T_1.
inline FixedPointMap btm_chain(const std::vector<SetDescriptor>& sets) {
    auto map = compose(btm_operators(sets));
    map.with_label("BTM(m=" + std::to_string(sets.size()) + ", cyclic)");
    return map;
}

/// The DR pieces T_i = DR(anchor, B_i).
inline std::vector<FixedPointMap> cadra_operators(const SetDescriptor& anchor, const std::vector<SetDescriptor>& walls) {
    if (walls.empty()) throw InvalidArgument("cadra_chain: needs at least one wall");
    std::vector<FixedPointMap> ops;
    ops.reserve(walls.size());
    for (const auto& wall : walls) ops.push_back(dr_operator(anchor, wall));
    return ops;
}

/// Cyclically anchored DR operator T_m ... T_1. With one wall this is plain DR.
inline FixedPointMap cadra_chain(const SetDescriptor& anchor, const std::vector<SetDescriptor>& walls) {
    auto map = compose(cadra_operators(anchor, walls));
    if (walls.size() > 1) map.with_label("CADRA(m=" + std::to_string(walls.size()) + ")");
    return map;
}

// ---------------------------------------------------------------------------
// Fixtures with known regularity

/// Soft threshold at 1 on R. Fix T = {0}; kappa(rho) = max(rho, 1).
inline FixedPointMap thresholder_fixture() {
    FixedPointMap map(
        1,
        [](const Vector& x) -> Vector {
            Vector y(1);
            const double v = x[0];
            if (v > 1.0) {
                y[0] = v - 1.0;
            } else if (v < -1.0) {
                y[0] = v + 1.0;
            } else {
                y[0] = 0.0;
            }
            return y;
        },
        0.5, "thresholder");
    map.with_fix_distance([](const Vector& x) { return std::abs(x[0]); });
    map.with_fix_projection([](const Vector& x) -> Vector { return Vector::Zero(x.size()); });
    return map;
}

/// DR operator of the lines R(1,0) and R(cos t, sin t) in closed form:
/// cos t times rotation by t. Fix T = {0}; linearly regular with 1/sin t.
inline FixedPointMap two_lines_fixture(double theta) {
    if (!(theta > 0.0 && theta <= std::numbers::pi / 2.0)) {
        throw InvalidArgument("two_lines_fixture: theta must lie in (0, pi/2]");
    }
    const double c = theta == std::numbers::pi / 2.0 ? 0.0 : std::cos(theta);
    const double s = std::sin(theta);
    FixedPointMap map(
        2,
        [c, s](const Vector& x) -> Vector {
            Vector y(2);
            y[0] = c * (x[0] * c - x[1] * s);
            y[1] = c * (x[0] * s + x[1] * c);
            return y;
        },
        0.5, "two_lines(" + std::to_string(theta) + ")");
    map.with_fix_distance([](const Vector& x) { return x.norm(); });
    map.with_fix_projection([](const Vector& x) -> Vector { return Vector::Zero(x.size()); });
    return map;
}

}  // namespace feasibility
