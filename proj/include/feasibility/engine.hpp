#pragma once

// Iteration driver for x_{n+1} = sum_i w_{i,n} T_i x_n and its cyclic,
// composed-pass and randomly indexed variants, with Fejer monitoring.

#include "feasibility/control.hpp"
#include "feasibility/operators.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace feasibility {

struct Probe {
    std::string label;
    std::function<double(const Vector&)> measure;
};

struct ResidualBelow {
    double tol = 1e-10;
};

struct ProbeBelow {
    std::string label;
    double tol = 1e-3;
};

struct MaxIterOnly {};

using StoppingRule = std::variant<ResidualBelow, ProbeBelow, MaxIterOnly>;

enum class IterationMode {
    per_step,       // one schedule step = one iteration
    composed_pass,  // cyclic only: T_m ... T_1 applied once per iteration
};

enum class StopReason { residual_below, probe_below, max_iter };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::residual_below: return "residual_below";
        case StopReason::probe_below: return "probe_below";
        case StopReason::max_iter: return "max_iter";
    }
    return "unknown";
}

struct RunConfig {
    std::vector<FixedPointMap> maps;
    Schedule schedule = Cyclic{1};
    IterationMode mode = IterationMode::per_step;
    Vector start;
    std::size_t max_iter = 1000;
    StoppingRule stop = MaxIterOnly{};
    std::vector<Probe> probes;
    /// Points for Fejer tracking; empty means self-anchored at the final iterate.
    std::vector<Vector> anchors;
    bool keep_iterates = true;
    /// Iterates are thinned once dimension * (max_iter + 1) exceeds this.
    std::size_t iterate_budget = 10'000'000;
    bool require_averaged = true;
};

struct RunTrace {
    /// Stored iterates and their iteration numbers (every `iterate_stride`-th,
    /// plus the last).
    std::vector<Vector> iterates;
    std::vector<std::size_t> iterate_steps;
    std::size_t iterate_stride = 1;
    /// residuals[n] = ||x_{n+1} - x_n||
    std::vector<double> residuals;
    std::vector<std::string> probe_labels;
    /// probe_values[k][n] = probe k at x_n, n = 0..iterations_used
    std::vector<std::vector<double>> probe_values;
    /// fejer_violation[n] = max_c (||x_{n+1} - c|| - ||x_n - c||)_+
    std::vector<double> fejer_violation;
    double max_fejer_violation = 0.0;
    /// Anchored at the final iterate (a necessary condition only).
    bool self_anchored = false;
    StopReason stop_reason = StopReason::max_iter;
    std::size_t iterations_used = 0;
    /// Operator index per step for randomly indexed runs.
    std::vector<std::size_t> indices;
    Vector final_iterate;
    std::string schedule_name;
    std::optional<std::uint64_t> seed;
    double sup_norm = 0.0;  // sup_n ||x_n||

    const std::vector<double>& probe(const std::string& label) const {
        for (std::size_t k = 0; k < probe_labels.size(); ++k) {
            if (probe_labels[k] == label) return probe_values[k];
        }
        throw InvalidArgument("RunTrace: unknown probe '" + label + "'");
    }
};

namespace detail {

using StepRule = std::function<Vector(std::size_t, const Vector&)>;

inline void check_config(const RunConfig& cfg) {
    if (cfg.maps.empty()) throw InvalidArgument("run: no operators");
    if (cfg.max_iter == 0) throw InvalidArgument("run: max_iter must be >= 1");
    for (const auto& t : cfg.maps) {
        if (t.dimension() != static_cast<std::size_t>(cfg.start.size())) {
            throw InvalidArgument("run: operator '" + t.label() + "' dimension differs from start point");
        }
        if (cfg.require_averaged && !t.averagedness()) {
            throw InvalidArgument("run: operator '" + t.label() + "' is not averaged");
        }
    }
    if (cfg.schedule.operator_count() != cfg.maps.size()) {
        throw InvalidArgument("run: schedule indexes " + std::to_string(cfg.schedule.operator_count()) +
                              " operators but " + std::to_string(cfg.maps.size()) + " were given");
    }
    for (const auto& a : cfg.anchors) require_same_dimension(a, cfg.start, "run: anchor");
    if (const auto* s = std::get_if<ResidualBelow>(&cfg.stop); s && !(s->tol > 0.0)) {
        throw InvalidArgument("run: stop tolerance must be > 0");
    }
    if (const auto* s = std::get_if<ProbeBelow>(&cfg.stop)) {
        if (!(s->tol > 0.0)) throw InvalidArgument("run: stop tolerance must be > 0");
        const bool known = std::any_of(cfg.probes.begin(), cfg.probes.end(),
                                       [&](const Probe& p) { return p.label == s->label; });
        if (!known) throw InvalidArgument("run: stopping rule refers to unknown probe '" + s->label + "'");
    }
}

inline RunTrace iterate(const RunConfig& cfg, const StepRule& step) {
    RunTrace trace;
    const auto dim = static_cast<std::size_t>(cfg.start.size());
    const std::size_t needed = dim * (cfg.max_iter + 1);
    trace.iterate_stride = needed <= cfg.iterate_budget ? 1 : (needed + cfg.iterate_budget - 1) / cfg.iterate_budget;
    trace.schedule_name = cfg.schedule.name();
    for (const auto& p : cfg.probes) trace.probe_labels.push_back(p.label);
    trace.probe_values.resize(cfg.probes.size());

    std::optional<std::size_t> stop_probe;
    double probe_tol = 0.0;
    if (const auto* s = std::get_if<ProbeBelow>(&cfg.stop)) {
        for (std::size_t k = 0; k < cfg.probes.size(); ++k) {
            if (cfg.probes[k].label == s->label) stop_probe = k;
        }
        probe_tol = s->tol;
    }

    Vector x = cfg.start;
    auto record = [&](std::size_t n, const Vector& point, bool force) {
        for (std::size_t k = 0; k < cfg.probes.size(); ++k) trace.probe_values[k].push_back(cfg.probes[k].measure(point));
        trace.sup_norm = std::max(trace.sup_norm, point.norm());
        if (cfg.keep_iterates && (force || n % trace.iterate_stride == 0)) {
            if (!trace.iterate_steps.empty() && trace.iterate_steps.back() == n) return;
            trace.iterates.push_back(point);
            trace.iterate_steps.push_back(n);
        }
    };
    record(0, x, false);

    if (stop_probe && trace.probe_values[*stop_probe].back() <= probe_tol) {
        trace.stop_reason = StopReason::probe_below;
    } else {
        for (std::size_t n = 0; n < cfg.max_iter; ++n) {
            Vector next = step(n, x);
            const double residual = (next - x).norm();
            double violation = 0.0;
            for (const auto& c : cfg.anchors) {
                violation = std::max(violation, (next - c).norm() - (x - c).norm());
            }
            trace.residuals.push_back(residual);
            trace.fejer_violation.push_back(violation);
            x = std::move(next);
            trace.iterations_used = n + 1;

            bool stop = false;
            if (const auto* s = std::get_if<ResidualBelow>(&cfg.stop); s && residual <= s->tol) {
                trace.stop_reason = StopReason::residual_below;
                stop = true;
            }
            record(n + 1, x, stop || n + 1 == cfg.max_iter);
            if (!stop && stop_probe && trace.probe_values[*stop_probe].back() <= probe_tol) {
                trace.stop_reason = StopReason::probe_below;
                stop = true;
            }
            if (stop) {
                if (cfg.keep_iterates && trace.iterate_steps.back() != n + 1) {
                    trace.iterates.push_back(x);
                    trace.iterate_steps.push_back(n + 1);
                }
                break;
            }
        }
    }
    trace.final_iterate = x;

    if (cfg.anchors.empty() && cfg.keep_iterates) {
        // retroactive check against the final iterate over stored iterates
        trace.self_anchored = true;
        trace.fejer_violation.assign(trace.residuals.size(), 0.0);
        for (std::size_t j = 1; j < trace.iterates.size(); ++j) {
            const double v = (trace.iterates[j] - x).norm() - (trace.iterates[j - 1] - x).norm();
            trace.fejer_violation[trace.iterate_steps[j] - 1] = std::max(0.0, v);
        }
    }
    for (double v : trace.fejer_violation) trace.max_fejer_violation = std::max(trace.max_fejer_violation, v);
    return trace;
}

inline Vector apply_weighted(const std::vector<FixedPointMap>& maps, const Weights& w, const Vector& x) {
    std::size_t active = 0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0) {
            ++active;
            last = i;
        }
    }
    if (active == 1 && w[last] == 1.0) return maps[last](x);
    Vector y = Vector::Zero(x.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0) y += w[i] * maps[i](x);
    }
    return y;
}

inline Vector apply_pass(const std::vector<FixedPointMap>& maps, const Vector& x) {
    Vector y = x;
    for (const auto& t : maps) y = t(y);
    return y;
}

}  // namespace detail

/// Deterministic schedules: Cyclic or QuasiCyclic. The schedule is validated
/// over the full horizon before iterating.
inline RunTrace run_quasi_cyclic(const RunConfig& cfg) {
    detail::check_config(cfg);
    const auto* cyclic = cfg.schedule.get_if<Cyclic>();
    const auto* quasi = cfg.schedule.get_if<QuasiCyclic>();
    if (!cyclic && !quasi) throw InvalidArgument("run_quasi_cyclic: schedule must be cyclic or quasi-cyclic");
    if (cfg.mode == IterationMode::composed_pass) {
        if (!cyclic) throw InvalidArgument("run_quasi_cyclic: composed-pass mode requires a cyclic schedule");
        return detail::iterate(cfg, [&cfg](std::size_t, const Vector& x) { return detail::apply_pass(cfg.maps, x); });
    }
    const auto report = validate(cfg.schedule, cfg.max_iter);
    if (!report.passed()) throw InvalidArgument("schedule validation failed:\n" + report.summary());
    const QuasiCyclic rule = cyclic ? cyclic_weights(cyclic->m) : *quasi;
    return detail::iterate(cfg, [&cfg, &rule](std::size_t n, const Vector& x) {
        return detail::apply_weighted(cfg.maps, rule.weights(n), x);
    });
}

/// x_{n+1} = T_{r(n)} x_n with r a random map or i.i.d. Bernoulli draws.
inline RunTrace run_random(const RunConfig& cfg) {
    detail::check_config(cfg);
    std::vector<std::size_t> indices;
    std::uint64_t seed = 0;
    if (const auto* r = cfg.schedule.get_if<RandomMap>()) {
        indices = draw_random_map(r->m, r->seed, r->recurrence_window, cfg.max_iter);
        seed = r->seed;
    } else if (const auto* b = cfg.schedule.get_if<Bernoulli>()) {
        indices = draw_bernoulli(b->probs, b->seed, cfg.max_iter);
        seed = b->seed;
    } else {
        throw InvalidArgument("run_random: schedule must be random_map or bernoulli");
    }
    if (cfg.mode == IterationMode::composed_pass) throw InvalidArgument("run_random: composed-pass mode is cyclic only");
    auto trace = detail::iterate(cfg, [&cfg, &indices](std::size_t n, const Vector& x) {
        return cfg.maps[indices[n]](x);
    });
    indices.resize(trace.iterations_used);
    trace.indices = std::move(indices);
    trace.seed = seed;
    return trace;
}

/// Dispatches on the schedule kind.
inline RunTrace run(const RunConfig& cfg) {
    return cfg.schedule.is_random() ? run_random(cfg) : run_quasi_cyclic(cfg);
}

// ---------------------------------------------------------------------------
// Rate estimation

struct RateEstimate {
    double alpha = 1.0;           // exp of the least-squares slope of log d(x_n)
    double r2 = 1.0;              // coefficient of determination of the fit
    double max_step_ratio = 0.0;  // max d(x_{n+1}) / d(x_n) over consecutive samples
    std::size_t samples = 0;
};

/// Geometric fit of a target distance along the stored iterates, using the
/// longest prefix on which the distance is positive.
inline RateEstimate estimate_rate(const RunTrace& trace, const std::function<double(const Vector&)>& target_distance) {
    std::vector<double> steps;
    std::vector<double> logs;
    std::vector<double> values;
    for (std::size_t j = 0; j < trace.iterates.size(); ++j) {
        const double d = target_distance(trace.iterates[j]);
        if (!(d > 0.0) || !std::isfinite(d)) break;
        steps.push_back(static_cast<double>(trace.iterate_steps[j]));
        logs.push_back(std::log(d));
        values.push_back(d);
    }
    if (values.size() < 3) throw InvalidArgument("estimate_rate: insufficient positive samples");

    const double count = static_cast<double>(values.size());
    double mean_t = 0.0;
    double mean_y = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) {
        mean_t += steps[j];
        mean_y += logs[j];
    }
    mean_t /= count;
    mean_y /= count;
    double stt = 0.0;
    double sty = 0.0;
    double syy = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) {
        stt += (steps[j] - mean_t) * (steps[j] - mean_t);
        sty += (steps[j] - mean_t) * (logs[j] - mean_y);
        syy += (logs[j] - mean_y) * (logs[j] - mean_y);
    }
    RateEstimate est;
    const double slope = sty / stt;
    est.alpha = std::exp(slope);
    est.r2 = syy > 0.0 ? (sty * sty) / (stt * syy) : 1.0;
    est.samples = values.size();
    for (std::size_t j = 1; j < values.size(); ++j) {
        const double gap = steps[j] - steps[j - 1];
        est.max_step_ratio = std::max(est.max_step_ratio, std::pow(values[j] / values[j - 1], 1.0 / gap));
    }
    return est;
}

struct EnvelopeCheck {
    bool holds = true;
    double worst_ratio = 0.0;  // max ||x_n - limit|| / (2 alpha^n d0)
    std::optional<std::size_t> first_violation;
};

/// Checks ||x_n - limit|| <= 2 alpha^n d0 (1 + rel_slack) along the stored iterates.
inline EnvelopeCheck check_linear_envelope(const RunTrace& trace, const Vector& limit, double alpha, double d0,
                                           double rel_slack = 1e-6) {
    EnvelopeCheck out;
    for (std::size_t j = 0; j < trace.iterates.size(); ++j) {
        const double n = static_cast<double>(trace.iterate_steps[j]);
        const double bound = 2.0 * std::pow(alpha, n) * d0;
        const double err = (trace.iterates[j] - limit).norm();
        if (bound > 0.0) out.worst_ratio = std::max(out.worst_ratio, err / bound);
        if (err > bound * (1.0 + rel_slack) && out.holds) {
            out.holds = false;
            out.first_violation = trace.iterate_steps[j];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Export

inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// CSV: iter,residual,probe_<label>...,fejer_violation. Row 0 has an empty
/// residual and violation.
inline void write_trace_csv(const RunTrace& trace, std::ostream& out) {
    out << "iter,residual";
    for (const auto& label : trace.probe_labels) out << ",probe_" << label;
    out << ",fejer_violation\n";
    for (std::size_t n = 0; n <= trace.iterations_used; ++n) {
        out << n << ',';
        if (n > 0) out << format_real(trace.residuals[n - 1]);
        for (const auto& series : trace.probe_values) out << ',' << format_real(series[n]);
        out << ',';
        if (n > 0) out << format_real(trace.fejer_violation[n - 1]);
        out << '\n';
    }
}

inline nlohmann::json trace_metadata(const RunTrace& trace) {
    nlohmann::json meta;
    meta["schedule"] = trace.schedule_name;
    meta["seed"] = trace.seed ? nlohmann::json(*trace.seed) : nlohmann::json(nullptr);
    meta["stop_reason"] = to_string(trace.stop_reason);
    meta["iterations_used"] = trace.iterations_used;
    meta["max_fejer_violation"] = trace.max_fejer_violation;
    meta["fejer_self_anchored"] = trace.self_anchored;
    meta["iterate_stride"] = trace.iterate_stride;
    std::vector<double> final(trace.final_iterate.data(), trace.final_iterate.data() + trace.final_iterate.size());
    meta["final_iterate"] = final;
    if (!trace.indices.empty()) meta["indices"] = trace.indices;
    return meta;
}

}  // namespace feasibility
