#pragma once

#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "otawa/baselines.hpp"
#include "otawa/core.hpp"
#include "otawa/models.hpp"
#include "otawa/otawa.hpp"

namespace otawa {

class BetaGrid {
public:
    explicit BetaGrid(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) throw Error(ErrorCode::InvalidConfig, "beta grid is empty");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) throw Error(ErrorCode::InvalidConfig, "beta grid has a non-finite value");
            if (i > 0 && !(values_[i] > values_[i - 1])) {
                throw Error(ErrorCode::InvalidConfig, "beta grid must be strictly increasing");
            }
        }
    }

    static BetaGrid log_spaced(double lo, double hi, std::size_t n) {
        if (!(lo > 0.0) || !(hi > lo) || n < 1) {
            throw Error(ErrorCode::InvalidConfig, "log grid needs 0 < lo < hi and n >= 1");
        }
        if (n == 1) return BetaGrid({lo});
        std::vector<double> v(n);
        const double a = std::log10(lo), b = std::log10(hi);
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
        }
        return BetaGrid(std::move(v));
    }

    /// 25 values, log-spaced over [1e-3, 10].
    static BetaGrid default_grid() { return log_spaced(1e-3, 10.0, 25); }

    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }

private:
    std::vector<double> values_;
};

/// -2 * (in-sample log-likelihood summed over all m + 1 segments) + log(T) * sum p_i.
inline double bic(const TimeSeries& x, const ModelSpec& spec, const Segmentation& seg) {
    if (seg.n_steps() != x.n_steps()) {
        throw Error(ErrorCode::MismatchedLength, "segmentation length differs from series length");
    }
    const ModelSpec resolved = resolve_spec(spec, x);
    double loglik = 0.0;
    std::size_t params = 0;
    for (const auto& iv : segments(seg)) {
        const auto model = fit(resolved, x, iv);
        loglik += segment_loglik(model, x, iv);
        params += model.param_count();
    }
    return -2.0 * loglik + std::log(static_cast<double>(x.n_steps())) * static_cast<double>(params);
}

struct BicPoint {
    double beta = 0.0;
    double bic = 0.0;
    std::size_t n_change_points = 0;
};

struct SelectionResult {
    double best_beta = 0.0;
    Segmentation best_segmentation;
    std::vector<BicPoint> bic_curve;
};

/// Runs detect(beta) for each grid value and keeps the segmentation with the smallest BIC;
/// ties go to the larger beta.
template <class DetectFn>
SelectionResult select_beta_with(const TimeSeries& x, const ModelSpec& spec, const BetaGrid& grid,
                                 DetectFn&& detect) {
    SelectionResult out;
    std::map<std::vector<std::size_t>, double> seen;
    std::optional<double> best_bic;
    for (double beta : grid.values()) {
        Segmentation seg = detect(beta);
        double value;
        if (auto it = seen.find(seg.change_points()); it != seen.end()) {
            value = it->second;
        } else {
            value = bic(x, spec, seg);
            seen.emplace(seg.change_points(), value);
        }
        out.bic_curve.push_back({beta, value, seg.size()});
        if (!best_bic || value <= *best_bic) {
            best_bic = value;
            out.best_beta = beta;
            out.best_segmentation = std::move(seg);
        }
    }
    return out;
}

enum class Algorithm { otawa, op, bs, ws };

inline std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::otawa: return "otawa";
        case Algorithm::op: return "op";
        case Algorithm::bs: return "bs";
        case Algorithm::ws: return "ws";
    }
    return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
    if (s == "otawa") return Algorithm::otawa;
    if (s == "op") return Algorithm::op;
    if (s == "bs") return Algorithm::bs;
    if (s == "ws") return Algorithm::ws;
    throw Error(ErrorCode::InvalidConfig, "unknown algorithm '" + s + "' (expected otawa, op, bs or ws)");
}

struct DetectorOptions {
    Algorithm algorithm = Algorithm::otawa;
    Constraints constraints{};
    bool allow_empty = true;
    std::size_t ws_window = 0;  // required for ws
    std::size_t max_table_entries = PairCostTable::kDefaultMaxEntries;
};

/// A beta -> Segmentation detector whose cost caches are shared across calls, so a grid of
/// betas fits each segment model once. For ws, beta is the peak threshold.
class Detector {
public:
    Detector(const TimeSeries& x, const ModelSpec& spec, DetectorOptions opts)
        : x_(&x), spec_(resolve_spec(spec, x)), opts_(opts) {
        if (opts_.algorithm == Algorithm::ws) {
            validate(spec_);
            opts_.constraints.validate();
            if (opts_.ws_window == 0) throw Error(ErrorCode::InvalidConfig, "ws needs a window length");
            scores_ = window_sliding_scores(x, spec_, opts_.ws_window);
            return;
        }
        check_model_constraints(spec_, opts_.constraints);
        if (opts_.algorithm == Algorithm::otawa) {
            if (PairCostTable::entries_needed(x.n_steps(), opts_.constraints) <= opts_.max_table_entries) {
                NceCost cost(x, spec_);
                table_ = std::make_shared<PairCostTable>(x.n_steps(), opts_.constraints, cost);
            }
        } else {
            nll_ = std::make_shared<NllCost>(x, spec_);
        }
    }

    SolveResult run(double beta) {
        switch (opts_.algorithm) {
            case Algorithm::otawa: {
                SolverConfig cfg{beta, opts_.constraints, opts_.allow_empty};
                if (table_) return solve_pairwise(x_->n_steps(), cfg, *table_);
                return solve(*x_, spec_, cfg);
            }
            case Algorithm::op:
                return optimal_partitioning_with(x_->n_steps(), beta, opts_.constraints, *nll_);
            case Algorithm::bs: {
                auto seg = binary_segmentation_with(x_->n_steps(), beta, opts_.constraints, *nll_);
                const double obj = classic_objective(seg, beta, *nll_);
                return SolveResult{std::move(seg), obj, beta, 0};
            }
            case Algorithm::ws: {
                const std::size_t spacing = std::max<std::size_t>(opts_.constraints.min_segment_len, 1);
                auto seg = peak_detect(*scores_, spacing, beta, std::nullopt, opts_.constraints);
                return SolveResult{std::move(seg), std::numeric_limits<double>::quiet_NaN(), beta, 0};
            }
        }
        throw Error(ErrorCode::InvariantViolation, "unhandled algorithm");
    }

    Segmentation operator()(double beta) { return run(beta).segmentation; }

    const std::optional<WsScoreSeries>& scores() const { return scores_; }

private:
    const TimeSeries* x_;
    ModelSpec spec_;
    DetectorOptions opts_;
    std::shared_ptr<PairCostTable> table_;
    std::shared_ptr<NllCost> nll_;
    std::optional<WsScoreSeries> scores_;
};

inline SelectionResult select_beta(const TimeSeries& x, const ModelSpec& spec, const BetaGrid& grid,
                                   const DetectorOptions& opts) {
    Detector detector(x, spec, opts);
    return select_beta_with(x, spec, grid, detector);
}

inline void write_bic_curve_csv(std::ostream& os, const std::vector<BicPoint>& curve) {
    os << "beta,bic,n_change_points\n";
    os << std::setprecision(17);
    for (const auto& p : curve) os << p.beta << ',' << p.bic << ',' << p.n_change_points << '\n';
}

}  // namespace otawa
