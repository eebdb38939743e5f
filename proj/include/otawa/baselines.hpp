#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "otawa/core.hpp"
#include "otawa/models.hpp"
#include "otawa/otawa.hpp"

namespace otawa {

/// A single-segment cost c(x[a, b)).
template <class C>
concept SegmentCost = requires(C c, std::size_t a, std::size_t b) {
    { c(a, b) } -> std::convertible_to<double>;
};

/// Memoized negative log-likelihood segment cost.
class NllCost {
public:
    NllCost(const TimeSeries& x, const ModelSpec& spec) : x_(&x), spec_(resolve_spec(spec, x)) { validate(spec_); }

    double operator()(std::size_t a, std::size_t b) {
        const std::uint64_t key = static_cast<std::uint64_t>(a) * (x_->n_steps() + 1) + b;
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        const double v = segment_nll_cost(spec_, *x_, {a, b});
        ++fits_;
        memo_.emplace(key, v);
        return v;
    }

    std::uint64_t fits() const { return fits_; }

private:
    const TimeSeries* x_;
    ModelSpec spec_;
    std::unordered_map<std::uint64_t, double> memo_;
    std::uint64_t fits_ = 0;
};

/// Classic penalized sum of segment costs, accumulated as acc = (acc + c_i) + beta from
/// acc = -beta, so m change points pay exactly beta * m.
template <SegmentCost Cost>
double classic_objective(const Segmentation& seg, double beta, Cost&& cost) {
    double acc = -beta;
    for (const auto& iv : segments(seg)) acc = (acc + static_cast<double>(cost(iv.begin, iv.end))) + beta;
    return acc;
}

/// Optimal Partitioning: F(t) = min_s { F(s) + c(x[s, t)) + beta }, F(0) = -beta.
template <SegmentCost Cost>
SolveResult optimal_partitioning_with(std::size_t n_steps, double beta, const Constraints& c,
                                      Cost&& cost) {
    c.validate();
    if (!std::isfinite(beta)) throw Error(ErrorCode::InvalidConfig, "beta must be finite");
    const auto b = boundary_list(n_steps, c);
    const std::size_t n = b.size();
    const std::size_t S = c.min_segment_len;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> f(n, nan);
    std::vector<std::int64_t> back(n, -1);
    std::vector<std::uint32_t> m(n, 0);
    f[0] = -beta;

    auto chain = [&](std::size_t i) {
        std::vector<std::size_t> out;
        while (i != 0 && i != n - 1) {
            out.push_back(b[i]);
            i = static_cast<std::size_t>(back[i]);
        }
        std::reverse(out.begin(), out.end());
        return out;
    };

    std::uint64_t evals = 0;
    for (std::size_t ti = 1; ti < n; ++ti) {
        std::int64_t best = -1;
        double best_v = 0.0;
        std::uint32_t best_m = 0;
        for (std::size_t si = 0; si < ti; ++si) {
            if (b[ti] - b[si] < S || std::isnan(f[si])) continue;
            const double v = (f[si] + static_cast<double>(cost(b[si], b[ti]))) + beta;
            ++evals;
            const std::uint32_t mm = m[si] + (si == 0 ? 0 : 1);
            if (best < 0 || v < best_v || (v == best_v && mm < best_m)) {
                best = static_cast<std::int64_t>(si);
                best_v = v;
                best_m = mm;
            } else if (v == best_v && mm == best_m && chain(si) < chain(static_cast<std::size_t>(best))) {
                best = static_cast<std::int64_t>(si);
            }
        }
        if (best < 0) continue;
        f[ti] = best_v;
        back[ti] = best;
        m[ti] = best_m;
    }
    if (std::isnan(f[n - 1])) {
        throw Error(ErrorCode::Infeasible, "no segmentation satisfies the constraints");
    }
    auto cps = chain(static_cast<std::size_t>(back[n - 1]));
    return SolveResult{Segmentation(n_steps, std::move(cps)), f[n - 1], beta, evals};
}

inline SolveResult optimal_partitioning(const TimeSeries& x, const ModelSpec& spec, double beta,
                                        const Constraints& c) {
    check_model_constraints(spec, c);
    return optimal_partitioning_with(x.n_steps(), beta, c, NllCost(x, spec));
}

/// Greedy top-down splitting: split the segment whose best admissible split gives the
/// largest cost reduction, until that reduction is <= beta.
template <SegmentCost Cost>
Segmentation binary_segmentation_with(std::size_t n_steps, double beta, const Constraints& c,
                                      Cost&& cost) {
    c.validate();
    const auto cands = candidate_boundaries(n_steps, c);
    const std::size_t S = c.min_segment_len;

    struct Split {
        std::size_t begin, end;
        std::optional<std::size_t> at;
        double gain;
    };
    auto best_split = [&](std::size_t a, std::size_t e) {
        Split sp{a, e, std::nullopt, -std::numeric_limits<double>::infinity()};
        const double whole = static_cast<double>(cost(a, e));
        for (std::size_t tau : cands) {
            if (tau <= a || tau >= e || tau - a < S || e - tau < S) continue;
            const double gain = whole - (static_cast<double>(cost(a, tau)) + static_cast<double>(cost(tau, e)));
            if (!sp.at || gain > sp.gain) {
                sp.at = tau;
                sp.gain = gain;
            }
        }
        return sp;
    };

    std::vector<Split> open;
    if (n_steps >= S) open.push_back(best_split(0, n_steps));
    std::vector<std::size_t> cps;
    while (true) {
        std::optional<std::size_t> pick;
        for (std::size_t i = 0; i < open.size(); ++i) {
            if (!open[i].at) continue;
            if (!pick || open[i].gain > open[*pick].gain ||
                (open[i].gain == open[*pick].gain && *open[i].at < *open[*pick].at)) {
                pick = i;
            }
        }
        if (!pick || !(open[*pick].gain > beta)) break;
        const Split sp = open[*pick];
        open.erase(open.begin() + static_cast<std::ptrdiff_t>(*pick));
        cps.push_back(*sp.at);
        open.push_back(best_split(sp.begin, *sp.at));
        open.push_back(best_split(*sp.at, sp.end));
    }
    std::sort(cps.begin(), cps.end());
    return Segmentation(n_steps, std::move(cps));
}

inline Segmentation binary_segmentation(const TimeSeries& x, const ModelSpec& spec, double beta,
                                        const Constraints& c) {
    check_model_constraints(spec, c);
    return binary_segmentation_with(x.n_steps(), beta, c, NllCost(x, spec));
}

/// d(t) = c(x[t-L, t+L)) - c(x[t-L, t)) - c(x[t, t+L)) for t in [L, T - L].
struct WsScoreSeries {
    std::size_t n_steps = 0;
    std::size_t window_len = 0;
    std::vector<double> scores;  // scores[i] belongs to t = window_len + i

    std::size_t time_of(std::size_t i) const { return window_len + i; }
};

inline WsScoreSeries window_sliding_scores(const TimeSeries& x, const ModelSpec& spec,
                                           std::size_t window_len) {
    validate(spec);
    const ModelSpec resolved = resolve_spec(spec, x);
    const std::size_t L = window_len;
    if (L < min_fit_length(spec)) {
        throw Error(ErrorCode::InvalidConfig, "window length " + std::to_string(L) +
                                                  " is below the model minimum fit length " +
                                                  std::to_string(min_fit_length(spec)));
    }
    if (x.n_steps() < 2 * L) {
        throw Error(ErrorCode::SeriesTooShort, "series of length " + std::to_string(x.n_steps()) +
                                                   " is shorter than two windows of " + std::to_string(L));
    }
    WsScoreSeries out{x.n_steps(), L, {}};
    out.scores.reserve(x.n_steps() - 2 * L + 1);
    for (std::size_t t = L; t + L <= x.n_steps(); ++t) {
        const double joint = segment_nll_cost(resolved, x, {t - L, t + L});
        const double left = segment_nll_cost(resolved, x, {t - L, t});
        const double right = segment_nll_cost(resolved, x, {t, t + L});
        out.scores.push_back(joint - (left + right));
    }
    return out;
}

/// Greedy non-maximum suppression on the scores. Exactly one of threshold / max_peaks is
/// given; indices closer than min_spacing to an emitted peak are suppressed. Only times
/// admissible under `admissible` (grid and distance to 0 and T) are considered.
inline Segmentation peak_detect(const WsScoreSeries& scores, std::size_t min_spacing,
                                std::optional<double> threshold,
                                std::optional<std::size_t> max_peaks,
                                const Constraints& admissible = {}) {
    if (threshold.has_value() == max_peaks.has_value()) {
        throw Error(ErrorCode::InvalidConfig, "peak detection needs exactly one of threshold or k");
    }
    const std::size_t T = scores.n_steps;
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < scores.scores.size(); ++i) {
        const std::size_t t = scores.time_of(i);
        if (t % admissible.resolution != 0) continue;
        if (t < admissible.min_segment_len || T - t < admissible.min_segment_len) continue;
        order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores.scores[a] > scores.scores[b];
    });
    std::vector<bool> suppressed(scores.scores.size(), false);
    std::vector<std::size_t> peaks;
    for (std::size_t i : order) {
        if (max_peaks && peaks.size() >= *max_peaks) break;
        if (threshold && scores.scores[i] < *threshold) break;
        if (suppressed[i]) continue;
        const std::size_t t = scores.time_of(i);
        peaks.push_back(t);
        for (std::size_t j = 0; j < scores.scores.size(); ++j) {
            const std::size_t u = scores.time_of(j);
            if ((u > t ? u - t : t - u) < min_spacing) suppressed[j] = true;
        }
    }
    std::sort(peaks.begin(), peaks.end());
    return Segmentation(T, std::move(peaks));
}

inline void write_scores_csv(std::ostream& os, const WsScoreSeries& scores) {
    os << "t,score\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < scores.scores.size(); ++i) {
        os << scores.time_of(i) << ',' << scores.scores[i] << '\n';
    }
}

}  // namespace otawa
