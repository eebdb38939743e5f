#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otawa/core.hpp"
#include "otawa/models.hpp"

namespace otawa {

struct SolverConfig {
    double beta = 0.0;
    Constraints constraints{};
    bool allow_empty = true;
};

struct SolveResult {
    Segmentation segmentation;
    double objective = 0.0;
    double beta = 0.0;
    std::uint64_t n_cost_evals = 0;
};

inline void to_json(nlohmann::json& j, const SolveResult& r) {
    j = nlohmann::json{{"change_points", r.segmentation.change_points()},
                       {"objective", r.objective},
                       {"beta", r.beta},
                       {"n_cost_evals", r.n_cost_evals},
                       {"n_steps", r.segmentation.n_steps()}};
}

/// A pairwise cost c(x[r, s), x[s, t)).
template <class C>
concept PairCost = requires(C c, std::size_t r, std::size_t s, std::size_t t) {
    { c(r, s, t) } -> std::convertible_to<double>;
};

enum class CostEvaluation {
    incremental,  // running per-(r, s) sums over t; each log-density computed once per model
    direct,       // every cost recomputed from scratch over x[s, t)
};

struct CostStats {
    std::uint64_t fits = 0;
    std::uint64_t density_terms = 0;
};

/// The negated empirical cross-entropy cost with a per-(r, s) model cache.
///
/// Models fitted on x[r, s) are kept for the most recent s only, which matches the
/// solver's traversal (all t and r for one s before moving on). Both evaluation modes
/// sum log-densities in the same order, so they return bit-identical values, and both
/// agree bit-for-bit with the free function nce_cost.
class NceCost {
public:
    NceCost(const TimeSeries& x, const ModelSpec& spec, CostEvaluation mode = CostEvaluation::incremental)
        : x_(&x), spec_(resolve_spec(spec, x)), mode_(mode), skip_(history_len(spec_)),
          rows_(x.n_steps() + 1) {
        validate(spec_);
    }

    double operator()(std::size_t r, std::size_t s, std::size_t t) {
        if (!(r < s && s < t && t <= x_->n_steps())) {
            throw Error(ErrorCode::InvalidConfig, "pair cost needs r < s < t <= T");
        }
        if (t - s <= skip_) {
            throw Error(ErrorCode::IntervalTooShort, "evaluation interval too short for the model");
        }
        if (s != current_s_) {
            for (auto& row : rows_) row.reset();
            current_s_ = s;
        }
        auto& row = rows_[r];
        if (!row) {
            row.emplace(Row{fit(spec_, *x_, {r, s}), {}});
            ++stats_.fits;
            if (mode_ == CostEvaluation::incremental) {
                const std::size_t first = s + skip_;
                auto& cum = row->cumulative;
                cum.reserve(x_->n_steps() - first + 1);
                cum.push_back(0.0);
                double acc = 0.0;
                for (std::size_t j = first; j < x_->n_steps(); ++j) {
                    acc += row->model.log_density(*x_, j);
                    cum.push_back(acc);
                }
                stats_.density_terms += x_->n_steps() - first;
            }
        }
        const std::size_t terms = t - s - skip_;
        if (mode_ == CostEvaluation::incremental) {
            return row->cumulative[terms] / static_cast<double>(terms);
        }
        double acc = 0.0;
        for (std::size_t j = s + skip_; j < t; ++j) acc += row->model.log_density(*x_, j);
        stats_.density_terms += terms;
        return acc / static_cast<double>(terms);
    }

    const CostStats& stats() const { return stats_; }
    const ModelSpec& spec() const { return spec_; }

private:
    struct Row {
        FittedModel model;
        std::vector<double> cumulative;
    };

    const TimeSeries* x_;
    ModelSpec spec_;
    CostEvaluation mode_;
    std::size_t skip_;
    std::size_t current_s_ = std::numeric_limits<std::size_t>::max();
    std::vector<std::optional<Row>> rows_;
    CostStats stats_;
};

/// Dense DP tables over the admissible boundary list {0} U candidates U {T}.
/// Cell (si, ti) holds G for second-to-last boundary b[si] and last boundary b[ti].
struct DpState {
    static constexpr std::int64_t kNone = -1;

    std::vector<std::size_t> boundaries;
    std::vector<double> g_values;        // NaN where unreachable
    std::vector<std::int64_t> back;      // predecessor boundary index, kNone for si == 0
    std::vector<std::uint32_t> n_change_points;

    std::size_t size() const { return boundaries.size(); }
    std::size_t cell(std::size_t si, std::size_t ti) const { return si * boundaries.size() + ti; }
    bool reachable(std::size_t si, std::size_t ti) const { return !std::isnan(g_values[cell(si, ti)]); }
    double g(std::size_t si, std::size_t ti) const { return g_values[cell(si, ti)]; }

    void reset(std::vector<std::size_t> b) {
        boundaries = std::move(b);
        const std::size_t n = boundaries.size();
        g_values.assign(n * n, std::numeric_limits<double>::quiet_NaN());
        back.assign(n * n, kNone);
        n_change_points.assign(n * n, 0);
    }

    /// Interior change points of the best segmentation of x[0, b[ti]) ending with (si, ti).
    std::vector<std::size_t> chain(std::size_t si, std::size_t ti) const {
        std::vector<std::size_t> out;
        while (si != 0) {
            out.push_back(boundaries[si]);
            const auto prev = back[cell(si, ti)];
            ti = si;
            si = static_cast<std::size_t>(prev);
        }
        std::reverse(out.begin(), out.end());
        return out;
    }
};

inline std::vector<std::size_t> boundary_list(std::size_t n_steps, const Constraints& c) {
    std::vector<std::size_t> b{0};
    for (std::size_t cand : candidate_boundaries(n_steps, c)) b.push_back(cand);
    b.push_back(n_steps);
    return b;
}

namespace detail {

// Lexicographic tie-break key: (value, number of change points, change point list).
inline bool better(double v, std::size_t m, const std::vector<std::size_t>& cps, double best_v,
                   std::size_t best_m, const std::vector<std::size_t>& best_cps) {
    if (v != best_v) return v < best_v;
    if (m != best_m) return m < best_m;
    return cps < best_cps;
}

}  // namespace detail

/// Exact minimizer of sum_i c(x[tau_{i-1}, tau_i), x[tau_i, tau_{i+1})) + beta * m over all
/// segmentations satisfying the constraints, for any pairwise cost.
///
/// G(s, t) = min_r { G(r, s) + c(r, s, t) + beta }, G(0, u) = 0. Ties prefer fewer change
/// points, then the lexicographically smallest list.
template <PairCost Cost>
SolveResult solve_pairwise(std::size_t n_steps, const SolverConfig& cfg, Cost&& cost,
                           DpState* state_out = nullptr) {
    cfg.constraints.validate();
    if (!std::isfinite(cfg.beta)) throw Error(ErrorCode::InvalidConfig, "beta must be finite");
    const std::size_t S = cfg.constraints.min_segment_len;

    DpState local;
    DpState& st = state_out ? *state_out : local;
    st.reset(boundary_list(n_steps, cfg.constraints));
    const auto& b = st.boundaries;
    const std::size_t n = b.size();
    const std::size_t last = n - 1;

    for (std::size_t ui = 1; ui < last; ++ui) st.g_values[st.cell(0, ui)] = 0.0;

    std::uint64_t evals = 0;
    std::vector<std::size_t> cand_cps, best_cps;
    for (std::size_t si = 1; si < last; ++si) {
        const std::size_t s = b[si];
        for (std::size_t ti = si + 1; ti < n; ++ti) {
            const std::size_t t = b[ti];
            if (t - s < S) continue;
            double best_v = std::numeric_limits<double>::infinity();
            std::size_t best_m = 0;
            std::int64_t best_r = DpState::kNone;
            for (std::size_t ri = 0; ri < si; ++ri) {
                const std::size_t r = b[ri];
                if (s - r < S || !st.reachable(ri, si)) continue;
                const double v = (st.g(ri, si) + static_cast<double>(cost(r, s, t))) + cfg.beta;
                ++evals;
                const std::size_t m = st.n_change_points[st.cell(ri, si)] + 1;
                if (best_r == DpState::kNone || v < best_v || (v == best_v && m < best_m)) {
                    best_v = v;
                    best_m = m;
                    best_r = static_cast<std::int64_t>(ri);
                } else if (v == best_v && m == best_m) {
                    cand_cps = st.chain(ri, si);
                    best_cps = st.chain(static_cast<std::size_t>(best_r), si);
                    if (cand_cps < best_cps) best_r = static_cast<std::int64_t>(ri);
                }
            }
            if (best_r == DpState::kNone) continue;
            if (!std::isfinite(best_v)) {
                throw Error(ErrorCode::InvariantViolation,
                            "non-finite DP value at (" + std::to_string(s) + ", " + std::to_string(t) + ")");
            }
            const std::size_t c = st.cell(si, ti);
            st.g_values[c] = best_v;
            st.back[c] = best_r;
            st.n_change_points[c] = static_cast<std::uint32_t>(best_m);
        }
    }

    bool found = false;
    double best_v = 0.0;
    std::size_t best_m = 0;
    std::vector<std::size_t> best;
    if (cfg.allow_empty) found = true;
    for (std::size_t si = 1; si < last; ++si) {
        if (!st.reachable(si, last)) continue;
        const double v = st.g(si, last);
        const std::size_t m = st.n_change_points[st.cell(si, last)];
        if (!found) {
            found = true;
            best_v = v;
            best_m = m;
            best = st.chain(si, last);
            continue;
        }
        if (v > best_v || (v == best_v && m > best_m)) continue;
        auto cps = st.chain(si, last);
        if (detail::better(v, m, cps, best_v, best_m, best)) {
            best_v = v;
            best_m = m;
            best = std::move(cps);
        }
    }
    if (!found) {
        throw Error(ErrorCode::Infeasible, "no segmentation with at least one change point "
                                           "satisfies the constraints");
    }
    return SolveResult{Segmentation(n_steps, std::move(best)), best_v, cfg.beta, evals};
}

inline void check_model_constraints(const ModelSpec& spec, const Constraints& c) {
    validate(spec);
    c.validate();
    if (c.min_segment_len < min_segment_length(spec)) {
        throw Error(ErrorCode::InvalidConfig,
                    "min_segment_len " + std::to_string(c.min_segment_len) +
                        " is below the model minimum segment length " +
                        std::to_string(min_segment_length(spec)));
    }
}

/// OTAWA with the cross-entropy cost.
inline SolveResult solve(const TimeSeries& x, const ModelSpec& spec, const SolverConfig& cfg,
                         DpState* state = nullptr,
                         CostEvaluation mode = CostEvaluation::incremental) {
    check_model_constraints(spec, cfg.constraints);
    NceCost cost(x, spec, mode);
    return solve_pairwise(x.n_steps(), cfg, cost, state);
}

/// V(T, x): pairs accumulated left to right as acc = (acc + c_i) + beta, the same
/// association the DP uses. Zero for the empty segmentation.
template <PairCost Cost>
double pairwise_objective(const Segmentation& seg, double beta, Cost&& cost) {
    if (seg.empty()) return 0.0;
    std::vector<std::size_t> b{0};
    b.insert(b.end(), seg.change_points().begin(), seg.change_points().end());
    b.push_back(seg.n_steps());
    double acc = 0.0;
    for (std::size_t i = 1; i + 1 < b.size(); ++i) {
        acc = (acc + static_cast<double>(cost(b[i - 1], b[i], b[i + 1]))) + beta;
    }
    return acc;
}

inline double objective_value(const TimeSeries& x, const ModelSpec& spec, double beta,
                              const Segmentation& seg) {
    if (seg.n_steps() != x.n_steps()) {
        throw Error(ErrorCode::MismatchedLength, "segmentation length differs from series length");
    }
    NceCost cost(x, spec, CostEvaluation::direct);
    return pairwise_objective(seg, beta, cost);
}

namespace detail {

template <class Visit>
void enumerate_subsets(const std::vector<std::size_t>& cands, std::size_t n_steps, std::size_t S,
                       std::size_t start, std::size_t prev, std::vector<std::size_t>& current,
                       Visit&& visit) {
    for (std::size_t i = start; i < cands.size(); ++i) {
        const std::size_t cp = cands[i];
        if (cp - prev < S || n_steps - cp < S) continue;
        current.push_back(cp);
        visit(current);
        enumerate_subsets(cands, n_steps, S, i + 1, cp, current, visit);
        current.pop_back();
    }
}

}  // namespace detail

/// Every constraint-satisfying segmentation (excluding the empty one) in lexicographic order.
inline std::vector<Segmentation> enumerate_segmentations(std::size_t n_steps, const Constraints& c,
                                                         std::size_t max_candidates = 20) {
    const auto cands = candidate_boundaries(n_steps, c);
    if (cands.size() > max_candidates) {
        throw Error(ErrorCode::TooLarge, std::to_string(cands.size()) +
                                             " candidate boundaries exceed the enumeration guard of " +
                                             std::to_string(max_candidates));
    }
    std::vector<Segmentation> out;
    std::vector<std::size_t> current;
    detail::enumerate_subsets(cands, n_steps, c.min_segment_len, 0, 0, current,
                              [&](const std::vector<std::size_t>& cps) {
                                  out.emplace_back(n_steps, cps);
                              });
    return out;
}

/// Exhaustive-enumeration oracle for solve (at most 20 candidate boundaries).
inline SolveResult brute_force_solve(const TimeSeries& x, const ModelSpec& spec,
                                     const SolverConfig& cfg) {
    check_model_constraints(spec, cfg.constraints);
    const auto all = enumerate_segmentations(x.n_steps(), cfg.constraints);
    NceCost cost(x, spec, CostEvaluation::direct);
    std::optional<SolveResult> best;
    std::uint64_t evals = 0;
    if (cfg.allow_empty) best = SolveResult{Segmentation(x.n_steps(), {}), 0.0, cfg.beta, 0};
    for (const auto& seg : all) {
        const double v = pairwise_objective(seg, cfg.beta, cost);
        evals += seg.size();
        if (!best || detail::better(v, seg.size(), seg.change_points(), best->objective,
                                    best->segmentation.size(), best->segmentation.change_points())) {
            best = SolveResult{seg, v, cfg.beta, 0};
        }
    }
    if (!best) throw Error(ErrorCode::Infeasible, "no admissible segmentation");
    best->n_cost_evals = evals;
    return *best;
}

/// Number of (r, s, t) triples the solver evaluates for T steps under the constraints.
inline std::uint64_t count_cost_evals(std::size_t n_steps, const Constraints& c) {
    const auto b = boundary_list(n_steps, c);
    const std::size_t S = c.min_segment_len;
    const std::size_t n = b.size();
    std::uint64_t total = 0;
    for (std::size_t si = 1; si + 1 < n; ++si) {
        std::uint64_t rs = 0, ts = 0;
        for (std::size_t ri = 0; ri < si; ++ri) rs += (b[si] - b[ri] >= S);
        for (std::size_t ti = si + 1; ti < n; ++ti) ts += (b[ti] - b[si] >= S);
        total += rs * ts;
    }
    return total;
}

/// Log-density terms summed when each of those triples is evaluated directly, i.e. the
/// O(t - s) per-cost work behind the quartic complexity bound.
inline std::uint64_t count_density_terms(std::size_t n_steps, const Constraints& c,
                                         std::size_t history = 0) {
    const auto b = boundary_list(n_steps, c);
    const std::size_t S = c.min_segment_len;
    const std::size_t n = b.size();
    std::uint64_t total = 0;
    for (std::size_t si = 1; si + 1 < n; ++si) {
        std::uint64_t rs = 0, terms = 0;
        for (std::size_t ri = 0; ri < si; ++ri) rs += (b[si] - b[ri] >= S);
        for (std::size_t ti = si + 1; ti < n; ++ti) {
            if (b[ti] - b[si] >= S) terms += b[ti] - b[si] - history;
        }
        total += rs * terms;
    }
    return total;
}

/// All admissible triple costs evaluated once and stored, for re-solving at many betas.
class PairCostTable {
public:
    static constexpr std::size_t kDefaultMaxEntries = std::size_t{1} << 24;

    template <PairCost Cost>
    PairCostTable(std::size_t n_steps, const Constraints& c, Cost&& cost)
        : boundaries_(boundary_list(n_steps, c)), index_of_(n_steps + 1, kAbsent) {
        const std::size_t n = boundaries_.size();
        for (std::size_t i = 0; i < n; ++i) index_of_[boundaries_[i]] = i;
        offsets_.assign(n, 0);
        std::size_t total = 0;
        for (std::size_t si = 1; si + 1 < n; ++si) {
            offsets_[si] = total;
            total += si * (n - 1 - si);
        }
        values_.assign(total, std::numeric_limits<double>::quiet_NaN());
        const std::size_t S = c.min_segment_len;
        for (std::size_t si = 1; si + 1 < n; ++si) {
            for (std::size_t ti = si + 1; ti < n; ++ti) {
                if (boundaries_[ti] - boundaries_[si] < S) continue;
                for (std::size_t ri = 0; ri < si; ++ri) {
                    if (boundaries_[si] - boundaries_[ri] < S) continue;
                    values_[slot(ri, si, ti)] = static_cast<double>(
                        cost(boundaries_[ri], boundaries_[si], boundaries_[ti]));
                }
            }
        }
    }

    static std::size_t entries_needed(std::size_t n_steps, const Constraints& c) {
        const std::size_t n = boundary_list(n_steps, c).size();
        std::size_t total = 0;
        for (std::size_t si = 1; si + 1 < n; ++si) total += si * (n - 1 - si);
        return total;
    }

    double operator()(std::size_t r, std::size_t s, std::size_t t) const {
        const std::size_t last = index_of_.size() - 1;
        if (r > last || s > last || t > last) throw Error(ErrorCode::InvariantViolation, "cost table miss");
        const std::size_t ri = index_of_[r], si = index_of_[s], ti = index_of_[t];
        if (ri == kAbsent || si == kAbsent || ti == kAbsent || !(ri < si && si < ti)) {
            throw Error(ErrorCode::InvariantViolation, "cost table miss");
        }
        const double v = values_[slot(ri, si, ti)];
        if (std::isnan(v)) throw Error(ErrorCode::InvariantViolation, "cost table miss");
        return v;
    }

private:
    static constexpr std::size_t kAbsent = std::numeric_limits<std::size_t>::max();

    std::size_t slot(std::size_t ri, std::size_t si, std::size_t ti) const {
        const std::size_t n = boundaries_.size();
        return offsets_[si] + ri * (n - 1 - si) + (ti - si - 1);
    }

    std::vector<std::size_t> boundaries_;
    std::vector<std::size_t> index_of_;
    std::vector<std::size_t> offsets_;
    std::vector<double> values_;
};

}  // namespace otawa
