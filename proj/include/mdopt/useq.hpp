#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "error.hpp"
#include "integrate.hpp"
#include "objective.hpp"
#include "parallel.hpp"
#include "region.hpp"

namespace mdopt {

// Points the uniform sequence lives on, with f evaluated once. Either grid
// nodes (equal cell volumes) or a fixed box-uniform sample that is never
// refreshed, so its restriction to each shrunken set stays uniform there.
struct UseqDomain {
    std::size_t dim = 1;
    std::shared_ptr<const GridMesh> mesh;
    std::vector<double> sample_coords;
    std::size_t draws = 0;  // Monte Carlo only: candidates drawn, members or not
    double weight = 0.0;
    std::vector<double> f;

    bool is_monte_carlo() const noexcept { return mesh == nullptr; }
    std::size_t size() const noexcept { return f.size(); }
    std::span<const double> node(std::size_t i) const {
        return mesh ? mesh->node(i) : std::span<const double>(sample_coords).subspan(i * dim, dim);
    }
};

struct UniformSeqState {
    std::size_t iteration = 0;
    std::shared_ptr<const UseqDomain> domain;
    std::vector<std::uint8_t> mask;
    double threshold = 0.0;  // mean of f over the set
    double measure = 0.0;
    double measure_error = 0.0;
    std::size_t node_count = 0;
    double best_value = 0.0;  // smallest f among surviving points
    bool stop = false;
};

enum class UseqStop { stagnation, few_nodes, rel_tol, max_iter };

inline const char* to_string(UseqStop s) {
    switch (s) {
        case UseqStop::stagnation: return "stagnation";
        case UseqStop::few_nodes: return "few_nodes";
        case UseqStop::rel_tol: return "rel_tol";
        case UseqStop::max_iter: return "max_iter";
    }
    return "?";
}

// Below this many surviving points the set average is not trusted.
inline constexpr std::size_t useq_min_nodes = 16;

namespace detail {

inline void summarize(UniformSeqState& s) {
    const auto& dom = *s.domain;
    std::vector<double> vals;
    vals.reserve(dom.size());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < dom.size(); ++i)
        if (s.mask[i]) {
            vals.push_back(dom.f[i]);
            best = std::min(best, dom.f[i]);
        }
    s.node_count = vals.size();
    s.threshold = pairwise_sum(vals) / static_cast<double>(vals.size());
    s.best_value = best;
    if (dom.is_monte_carlo()) {
        const double n = static_cast<double>(dom.draws);
        const double p = static_cast<double>(s.node_count) / n;
        const double box = dom.weight * n;
        s.measure = box * p;
        s.measure_error = 3.0 * box * std::sqrt(p * (1.0 - p) / n);
    } else {
        s.measure = dom.weight * static_cast<double>(s.node_count);
        s.measure_error = 0.0;
    }
}

inline UniformSeqState initial_state(std::shared_ptr<UseqDomain> dom, const Objective& obj) {
    if (obj.dim != dom->dim) throw InputError("useq: objective and region dimensions differ");
    if (dom->mesh)
        dom->f = evaluate_flat(obj, dom->mesh->coordinates());
    else
        dom->f = evaluate_flat(obj, dom->sample_coords);
    UniformSeqState s;
    s.mask.assign(dom->f.size(), 1);
    s.domain = std::move(dom);
    summarize(s);
    return s;
}

}  // namespace detail

inline UniformSeqState useq_initial_state(const Objective& obj, const CompactRegion& region,
                                          std::vector<std::size_t> resolution) {
    auto dom = std::make_shared<UseqDomain>();
    dom->dim = region.dim();
    dom->mesh = std::make_shared<const GridMesh>(region, std::move(resolution));
    dom->weight = dom->mesh->cell_volume();
    return detail::initial_state(std::move(dom), obj);
}

inline UniformSeqState useq_initial_state_mc(const Objective& obj, const CompactRegion& region,
                                             std::size_t n, std::uint64_t seed) {
    auto rules = make_rules(region, IntegratorConfig::monte_carlo(n, seed));
    auto dom = std::make_shared<UseqDomain>();
    dom->dim = region.dim();
    dom->sample_coords = std::move(rules.back().sample_coords);
    dom->draws = rules.back().draws;
    dom->weight = rules.back().weight;
    return detail::initial_state(std::move(dom), obj);
}

// D_{j+1} = {x in D_j : f(x) <= mean of f over D_j}. A step that would keep
// every point (or none) returns the same set and threshold with `stop` set.
inline UniformSeqState useq_step(const UniformSeqState& state) {
    if (state.node_count == 0) throw InputError("useq_step: empty state");
    const auto& dom = *state.domain;
    UniformSeqState next;
    next.domain = state.domain;
    next.iteration = state.iteration + 1;
    next.mask.assign(dom.size(), 0);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < dom.size(); ++i)
        if (state.mask[i] && dom.f[i] <= state.threshold) {
            next.mask[i] = 1;
            ++kept;
        }
    if (kept == 0 || kept == state.node_count) {
        UniformSeqState same = state;
        same.iteration = next.iteration;
        same.stop = true;
        return same;
    }
    detail::summarize(next);
    if (next.node_count < useq_min_nodes) next.stop = true;
    return next;
}

// f values live in the state's domain; obj only guards against mixing problems.
inline UniformSeqState useq_step(const UniformSeqState& state, const Objective& obj) {
    if (obj.dim != state.domain->dim) throw InputError("useq_step: objective dimension mismatch");
    return useq_step(state);
}

struct UseqResult {
    std::vector<UniformSeqState> states;  // states[0] is the full domain
    double fstar_estimate = 0.0;
    double best_value = 0.0;
    UseqStop stop_reason = UseqStop::max_iter;
};

namespace detail {

inline UseqResult run_from(UniformSeqState s, std::size_t max_iter, double rel_tol) {
    UseqResult r;
    r.states.push_back(std::move(s));
    r.stop_reason = UseqStop::max_iter;
    while (r.states.back().iteration < max_iter) {
        const auto& cur = r.states.back();
        auto next = useq_step(cur);
        if (next.stop && next.mask == cur.mask) {
            r.stop_reason = UseqStop::stagnation;
            r.states.push_back(std::move(next));
            break;
        }
        const double improvement = std::abs(cur.threshold - next.threshold) /
                                   std::max(std::abs(cur.threshold), std::numeric_limits<double>::min());
        const bool few = next.stop;
        r.states.push_back(std::move(next));
        if (few) {
            r.stop_reason = UseqStop::few_nodes;
            break;
        }
        if (improvement < rel_tol) {
            r.stop_reason = UseqStop::rel_tol;
            r.states.back().stop = true;
            break;
        }
    }
    r.fstar_estimate = r.states.back().threshold;
    r.best_value = r.states.back().best_value;
    return r;
}

}  // namespace detail

// Iterates useq_step until it stalls, fewer than 16 points survive, the
// relative threshold improvement drops below rel_tol, or max_iter steps.
inline UseqResult useq_run(const Objective& obj, const CompactRegion& region,
                           std::vector<std::size_t> resolution, std::size_t max_iter, double rel_tol) {
    return detail::run_from(useq_initial_state(obj, region, std::move(resolution)), max_iter, rel_tol);
}

inline UseqResult useq_run_mc(const Objective& obj, const CompactRegion& region, std::size_t n,
                              std::uint64_t seed, std::size_t max_iter, double rel_tol) {
    return detail::run_from(useq_initial_state_mc(obj, region, n, seed), max_iter, rel_tol);
}

}  // namespace mdopt
