#pragma once

// Index and weight schedules: which operators act at iteration n and with
// what weight. Operator indices are zero-based throughout.

#include "feasibility/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace feasibility {

using Weights = std::vector<double>;
using WeightRule = std::function<Weights(std::size_t step)>;

/// Index (n mod m) at step n.
struct Cyclic {
    std::size_t m = 1;
};

/// Explicit weight rule omega_{., n} with its claimed window p and floor.
struct QuasiCyclic {
    std::size_t m = 1;
    WeightRule weights;
    std::size_t window_p = 1;
    double weight_floor = 1.0;
    std::string name = "quasi_cyclic";
};

/// Random index sequence in which every index recurs within each block of
/// `recurrence_window` draws.
struct RandomMap {
    std::size_t m = 1;
    std::uint64_t seed = 0;
    std::size_t recurrence_window = 1;
};

/// i.i.d. index draws with probabilities `probs`.
struct Bernoulli {
    std::vector<double> probs;
    std::uint64_t seed = 0;
};

class Schedule {
public:
    using Variant = std::variant<Cyclic, QuasiCyclic, RandomMap, Bernoulli>;

    Schedule(Cyclic c) : s_(c) {
        if (c.m == 0) throw InvalidArgument("cyclic schedule: m must be >= 1");
    }
    Schedule(QuasiCyclic q) : s_(std::move(q)) {
        const auto& qc = std::get<QuasiCyclic>(s_);
        if (qc.m == 0) throw InvalidArgument("quasi_cyclic schedule: m must be >= 1");
        if (!qc.weights) throw InvalidArgument("quasi_cyclic schedule: missing weight rule");
        if (qc.window_p == 0) throw InvalidArgument("quasi_cyclic schedule: window must be >= 1");
        if (!(qc.weight_floor > 0.0)) throw InvalidArgument("quasi_cyclic schedule: weight floor must be > 0");
    }
    Schedule(RandomMap r) : s_(r) {
        if (r.m == 0) throw InvalidArgument("random_map schedule: m must be >= 1");
        if (r.recurrence_window < r.m) throw InvalidArgument("random_map schedule: window must be >= m");
    }
    Schedule(Bernoulli b);

    const Variant& variant() const noexcept { return s_; }

    template <class T>
    const T* get_if() const noexcept { return std::get_if<T>(&s_); }

    /// Number of operators the schedule indexes.
    std::size_t operator_count() const noexcept {
        return std::visit(
            [](const auto& s) -> std::size_t {
                if constexpr (std::is_same_v<std::decay_t<decltype(s)>, Bernoulli>) {
                    return s.probs.size();
                } else {
                    return s.m;
                }
            },
            s_);
    }

    std::string name() const {
        static constexpr const char* names[] = {"cyclic", "quasi_cyclic", "random_map", "bernoulli"};
        if (const auto* q = get_if<QuasiCyclic>()) return q->name;
        return names[s_.index()];
    }

    bool is_random() const noexcept { return s_.index() >= 2; }

    /// Copy with the random seed replaced (no-op for deterministic schedules).
    Schedule with_seed(std::uint64_t seed) const {
        Schedule copy = *this;
        if (auto* r = std::get_if<RandomMap>(&copy.s_)) r->seed = seed;
        if (auto* b = std::get_if<Bernoulli>(&copy.s_)) b->seed = seed;
        return copy;
    }

private:
    Variant s_;
};

// ---------------------------------------------------------------------------
// Draws

namespace detail {

inline void validate_probs(const std::vector<double>& probs) {
    if (probs.empty()) throw InvalidArgument("bernoulli: empty probability vector");
    double total = 0.0;
    for (double p : probs) {
        if (!(p > 0.0)) throw InvalidArgument("bernoulli: probabilities must be strictly positive");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("bernoulli: probabilities must sum to 1");
}

}  // namespace detail

inline Schedule::Schedule(Bernoulli b) : s_(std::move(b)) {
    detail::validate_probs(std::get<Bernoulli>(s_).probs);
}

/// Concatenated blocks of length W; each block holds every index once plus
/// W - m uniform extras, shuffled. Any 2W-1 consecutive draws therefore
/// contain a full block.
inline std::vector<std::size_t> draw_random_map(std::size_t m, std::uint64_t seed, std::size_t recurrence_window,
                                                std::size_t horizon) {
    if (m == 0) throw InvalidArgument("draw_random_map: m must be >= 1");
    if (recurrence_window < m) throw InvalidArgument("draw_random_map: window W must be >= m");
    if (horizon == 0) throw InvalidArgument("draw_random_map: horizon must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> extra(0, m - 1);
    std::vector<std::size_t> out;
    out.reserve(horizon + recurrence_window);
    std::vector<std::size_t> block(recurrence_window);
    while (out.size() < horizon) {
        std::iota(block.begin(), block.begin() + static_cast<std::ptrdiff_t>(m), std::size_t{0});
        for (std::size_t i = m; i < recurrence_window; ++i) block[i] = extra(rng);
        std::shuffle(block.begin(), block.end(), rng);
        out.insert(out.end(), block.begin(), block.end());
    }
    out.resize(horizon);
    return out;
}

inline std::vector<std::size_t> draw_bernoulli(const std::vector<double>& probs, std::uint64_t seed,
                                               std::size_t horizon) {
    detail::validate_probs(probs);
    std::mt19937_64 rng(seed);
    std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
    std::vector<std::size_t> out(horizon);
    for (auto& i : out) i = pick(rng);
    return out;
}

// ---------------------------------------------------------------------------
// Built-in weight rules

inline Weights point_mass(std::size_t m, std::size_t index) {
    Weights w(m, 0.0);
    w[index] = 1.0;
    return w;
}

/// Point mass on n mod m; window m, floor 1.
inline QuasiCyclic cyclic_weights(std::size_t m) {
    return QuasiCyclic{m, [m](std::size_t n) { return point_mass(m, n % m); }, m, 1.0, "cyclic"};
}

/// Uniform weights 1/m every step; window 1, floor 1/m.
inline QuasiCyclic uniform_parallel(std::size_t m) {
    return QuasiCyclic{m, [m](std::size_t) { return Weights(m, 1.0 / static_cast<double>(m)); }, 1,
                       1.0 / static_cast<double>(m), "parallel"};
}

/// Weight 1/2 on indices n mod m and (n+1) mod m; window max(1, m-1).
inline QuasiCyclic round_robin_pairs(std::size_t m) {
    if (m == 1) return cyclic_weights(1);
    return QuasiCyclic{m,
                       [m](std::size_t n) {
                           Weights w(m, 0.0);
                           w[n % m] += 0.5;
                           w[(n + 1) % m] += 0.5;
                           return w;
                       },
                       std::max<std::size_t>(1, m - 1), 0.5, "round_robin_pairs"};
}

/// Table rows reused periodically.
inline QuasiCyclic weight_table(std::vector<Weights> rows, std::size_t window_p, double weight_floor) {
    if (rows.empty()) throw InvalidArgument("weight_table: empty table");
    const std::size_t m = rows.front().size();
    for (const auto& r : rows) {
        if (r.size() != m) throw InvalidArgument("weight_table: ragged rows");
    }
    auto shared = std::make_shared<const std::vector<Weights>>(std::move(rows));
    return QuasiCyclic{m, [shared](std::size_t n) { return (*shared)[n % shared->size()]; }, window_p, weight_floor,
                       "quasi_cyclic"};
}

/// Point masses along a drawn index sequence.
inline QuasiCyclic index_sequence_weights(std::size_t m, std::vector<std::size_t> indices, std::size_t window_p) {
    auto shared = std::make_shared<const std::vector<std::size_t>>(std::move(indices));
    return QuasiCyclic{m, [m, shared](std::size_t n) { return point_mass(m, (*shared)[n % shared->size()]); },
                       window_p, 1.0, "index_sequence"};
}

// ---------------------------------------------------------------------------
// Validation

struct HypothesisCheck {
    std::string name;
    bool passed = true;
    std::optional<std::size_t> first_violation;
    std::string note;
};

struct ValidationReport {
    std::vector<HypothesisCheck> checks;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }

    const HypothesisCheck* find(const std::string& name) const {
        for (const auto& c : checks) {
            if (c.name == name) return &c;
        }
        return nullptr;
    }

    std::string summary() const {
        std::string out;
        for (const auto& c : checks) {
            out += c.name + ": " + (c.passed ? "pass" : "FAIL");
            if (c.first_violation) out += " (first violation at step " + std::to_string(*c.first_violation) + ")";
            if (!c.note.empty()) out += " [" + c.note + "]";
            out += "\n";
        }
        return out;
    }
};

inline constexpr double kWeightSumTolerance = 1e-12;

namespace detail {

inline void record_failure(HypothesisCheck& c, std::size_t step) {
    if (c.passed) {
        c.passed = false;
        c.first_violation = step;
    }
}

/// Checks weight range, sums, floor and p-window coverage on steps
/// 0..horizon-1. Coverage is checked for every window lying entirely inside
/// the horizon.
inline ValidationReport validate_weights(std::size_t m, const WeightRule& rule, std::size_t window_p, double floor,
                                         std::size_t horizon) {
    HypothesisCheck range{"weights range", true, std::nullopt, "each weight in [0,1]"};
    HypothesisCheck sum{"weights sum", true, std::nullopt, "sum to 1 within 1e-12"};
    HypothesisCheck floor_check{"weight floor", true, std::nullopt, "positive weights >= " + std::to_string(floor)};
    HypothesisCheck coverage{"window coverage", true, std::nullopt, "p = " + std::to_string(window_p)};

    std::vector<std::vector<bool>> support(horizon, std::vector<bool>(m, false));
    for (std::size_t n = 0; n < horizon; ++n) {
        const Weights w = rule(n);
        if (w.size() != m) {
            record_failure(sum, n);
            continue;
        }
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (!(w[i] >= 0.0 && w[i] <= 1.0)) record_failure(range, n);
            if (w[i] > 0.0) {
                support[n][i] = true;
                if (w[i] < floor) record_failure(floor_check, n);
            }
            total += w[i];
        }
        if (!(std::abs(total - 1.0) <= kWeightSumTolerance)) record_failure(sum, n);
    }

    if (horizon < window_p) {
        coverage.note += ", horizon shorter than window: not checked";
    } else {
        for (std::size_t n = 0; n + window_p <= horizon && coverage.passed; ++n) {
            std::vector<bool> seen(m, false);
            for (std::size_t j = n; j < n + window_p; ++j) {
                for (std::size_t i = 0; i < m; ++i) seen[i] = seen[i] || support[j][i];
            }
            if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) record_failure(coverage, n);
        }
    }
    return ValidationReport{{range, sum, floor_check, coverage}};
}

}  // namespace detail

/// Checks the quasi-cyclic hypotheses (weights in [0,1] summing to 1, a
/// positive floor on active weights, every index active within each window
/// of p steps) over steps 0..horizon-1.
inline ValidationReport validate(const Schedule& schedule, std::size_t horizon) {
    if (horizon == 0) throw InvalidArgument("validate: horizon must be >= 1");
    return std::visit(
        [horizon](const auto& s) -> ValidationReport {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, Cyclic>) {
                const auto q = cyclic_weights(s.m);
                return detail::validate_weights(q.m, q.weights, q.window_p, q.weight_floor, horizon);
            } else if constexpr (std::is_same_v<S, QuasiCyclic>) {
                return detail::validate_weights(s.m, s.weights, s.window_p, s.weight_floor, horizon);
            } else if constexpr (std::is_same_v<S, RandomMap>) {
                const auto q = index_sequence_weights(
                    s.m, draw_random_map(s.m, s.seed, s.recurrence_window, horizon), 2 * s.recurrence_window - 1);
                return detail::validate_weights(q.m, q.weights, q.window_p, q.weight_floor, horizon);
            } else {
                HypothesisCheck probs{"probabilities", true, std::nullopt, "strictly positive, sum to 1"};
                try {
                    detail::validate_probs(s.probs);
                } catch (const InvalidArgument&) {
                    probs.passed = false;
                    probs.first_violation = 0;
                }
                HypothesisCheck coverage{"window coverage", true, std::nullopt,
                                         "i.i.d. draws: coverage holds almost surely, not checked on a finite prefix"};
                return ValidationReport{{probs, coverage}};
            }
        },
        schedule.variant());
}

}  // namespace feasibility
