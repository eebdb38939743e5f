#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "otawa/core.hpp"

namespace otawa {

enum class GaussianVariance {
    per_segment,  // maximum-likelihood variance of each segment
    pooled,       // one variance per dimension shared by every segment, estimated from the whole series
};

/// i.i.d. Gaussian with diagonal covariance.
struct GaussianSpec {
    double variance_floor = 1e-8;
    GaussianVariance variance = GaussianVariance::per_segment;
    // Resolved pooled variances (one per dimension). Empty means "estimate from the series
    // being fitted"; see resolve_spec.
    std::vector<double> pooled_variance;

    friend bool operator==(const GaussianSpec&, const GaussianSpec&) = default;
};

/// How a VAR segment model reports its parameter count to the BIC.
enum class ParamCounting {
    full,     // d*d*p coefficients + d intercepts + d variances
    literal,  // d*d*p coefficients only ("AR(p) has p parameters" in the univariate case)
};

/// Vector autoregression of order p with an L1 penalty on the lag coefficients.
struct VarSpec {
    std::size_t order = 1;
    double l1_alpha = 0.0;
    std::size_t max_iter = 1000;
    double tol = 1e-8;
    double variance_floor = 1e-8;
    ParamCounting counting = ParamCounting::full;

    friend bool operator==(const VarSpec&, const VarSpec&) = default;
};

using ModelSpec = std::variant<GaussianSpec, VarSpec>;

inline void validate(const ModelSpec& spec) {
    std::visit(
        [](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if (!(s.variance_floor > 0.0) || !std::isfinite(s.variance_floor)) {
                throw Error(ErrorCode::InvalidConfig, "variance_floor must be positive");
            }
            if constexpr (std::is_same_v<S, VarSpec>) {
                if (s.order < 1) throw Error(ErrorCode::InvalidConfig, "VAR order must be >= 1");
                if (!(s.l1_alpha >= 0.0)) throw Error(ErrorCode::InvalidConfig, "l1_alpha must be >= 0");
                if (s.max_iter < 1) throw Error(ErrorCode::InvalidConfig, "max_iter must be >= 1");
                if (!(s.tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "tol must be positive");
            }
        },
        spec);
}

/// Leading terms of an interval that have no within-interval history (p for VAR).
inline std::size_t history_len(const ModelSpec& spec) {
    if (const auto* v = std::get_if<VarSpec>(&spec)) return v->order;
    return 0;
}

inline std::size_t min_fit_length(const ModelSpec& spec) {
    return std::holds_alternative<VarSpec>(spec) ? history_len(spec) + 2 : 2;
}

inline std::size_t min_eval_length(const ModelSpec& spec) { return history_len(spec) + 1; }

/// Shortest segment usable both as a fitted (prior) segment and an evaluated one.
inline std::size_t min_segment_length(const ModelSpec& spec) {
    return std::max(min_fit_length(spec), min_eval_length(spec));
}

inline std::string model_name(const ModelSpec& spec) {
    return std::holds_alternative<VarSpec>(spec) ? "var" : "gaussian";
}

struct GaussianParams {
    std::vector<double> mean;
    std::vector<double> variance;
};

struct VarParams {
    std::size_t order = 1;
    // A_k[i][j] stored at ((k - 1) * d + i) * d + j for lag k = 1..p.
    std::vector<double> coefficients;
    std::vector<double> intercept;
    std::vector<double> variance;

    double coef(std::size_t lag, std::size_t i, std::size_t j, std::size_t d) const {
        return coefficients[((lag - 1) * d + i) * d + j];
    }
};

struct VarFitReport {
    // Penalized objective before the first sweep and after each sweep.
    std::vector<double> objective_trace;
    std::size_t sweeps = 0;
    bool converged = false;
};

class FittedModel {
public:
    FittedModel(ModelSpec spec, std::size_t n_dims, std::variant<GaussianParams, VarParams> params)
        : spec_(std::move(spec)), n_dims_(n_dims), params_(std::move(params)) {
        const auto& var = variance();
        log_norm_ = 0.0;
        inv_two_var_.resize(n_dims_);
        for (std::size_t k = 0; k < n_dims_; ++k) {
            log_norm_ += -0.5 * std::log(2.0 * std::numbers::pi * var[k]);
            inv_two_var_[k] = 0.5 / var[k];
        }
    }

    const ModelSpec& spec() const { return spec_; }
    std::size_t n_dims() const { return n_dims_; }
    const std::variant<GaussianParams, VarParams>& params() const { return params_; }

    const std::vector<double>& variance() const {
        return std::visit([](const auto& p) -> const std::vector<double>& { return p.variance; },
                          params_);
    }

    std::size_t param_count() const {
        const std::size_t d = n_dims_;
        if (const auto* v = std::get_if<VarSpec>(&spec_)) {
            const std::size_t lags = d * d * v->order;
            return v->counting == ParamCounting::full ? lags + 2 * d : lags;
        }
        const auto& g = std::get<GaussianSpec>(spec_);
        return g.variance == GaussianVariance::pooled ? d : 2 * d;
    }

    /// log f(x_j | x_{j-1}, ..., x_{j-p}); for VAR the caller guarantees p rows of history.
    double log_density(const TimeSeries& x, std::size_t j) const {
        const std::size_t d = n_dims_;
        double acc = log_norm_;
        if (const auto* g = std::get_if<GaussianParams>(&params_)) {
            for (std::size_t k = 0; k < d; ++k) {
                const double r = x(j, k) - g->mean[k];
                acc -= r * r * inv_two_var_[k];
            }
            return acc;
        }
        const auto& v = std::get<VarParams>(params_);
        for (std::size_t i = 0; i < d; ++i) {
            double pred = v.intercept[i];
            for (std::size_t lag = 1; lag <= v.order; ++lag) {
                const auto prev = x.row(j - lag);
                for (std::size_t k = 0; k < d; ++k) pred += v.coef(lag, i, k, d) * prev[k];
            }
            const double r = x(j, i) - pred;
            acc -= r * r * inv_two_var_[i];
        }
        return acc;
    }

private:
    ModelSpec spec_;
    std::size_t n_dims_;
    std::variant<GaussianParams, VarParams> params_;
    double log_norm_ = 0.0;
    std::vector<double> inv_two_var_;
};

namespace detail {

inline void check_interval(const TimeSeries& x, Interval iv) {
    if (iv.begin >= iv.end || iv.end > x.n_steps()) {
        throw Error(ErrorCode::InvalidConfig, "interval [" + std::to_string(iv.begin) + ", " +
                                                  std::to_string(iv.end) + ") outside series");
    }
}

inline double median_inplace(std::vector<double>& v) {
    const std::size_t n = v.size();
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    const double hi = *mid;
    if (n % 2 == 1) return hi;
    return 0.5 * (hi + *std::max_element(v.begin(), mid));
}

}  // namespace detail

/// Noise variance per dimension from first differences: (1.4826 * MAD(diff x))^2 / 2.
/// Unaffected by a bounded number of mean shifts; clamped below at the floor.
inline std::vector<double> difference_variance(const TimeSeries& x, double floor) {
    const std::size_t d = x.n_dims();
    std::vector<double> out(d);
    std::vector<double> diff(x.n_steps() - 1);
    for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t t = 0; t + 1 < x.n_steps(); ++t) diff[t] = x(t + 1, k) - x(t, k);
        const double med = detail::median_inplace(diff);
        for (double& v : diff) v = std::abs(v - med);
        const double sigma = 1.4826 * detail::median_inplace(diff);
        out[k] = std::max(0.5 * sigma * sigma, floor);
    }
    return out;
}

/// Fills data-dependent model settings (the pooled Gaussian variance) once for a series,
/// so repeated fits do not re-estimate them. Fitting an unresolved spec gives the same
/// result.
inline ModelSpec resolve_spec(const ModelSpec& spec, const TimeSeries& x) {
    if (const auto* g = std::get_if<GaussianSpec>(&spec)) {
        if (g->variance == GaussianVariance::pooled && g->pooled_variance.empty()) {
            GaussianSpec out = *g;
            out.pooled_variance = difference_variance(x, g->variance_floor);
            return out;
        }
    }
    return spec;
}

namespace detail {

inline GaussianParams fit_gaussian(const GaussianSpec& spec, const TimeSeries& x, Interval iv) {
    const std::size_t d = x.n_dims();
    const double n = static_cast<double>(iv.length());
    GaussianParams p{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (std::size_t t = iv.begin; t < iv.end; ++t) {
        for (std::size_t k = 0; k < d; ++k) p.mean[k] += x(t, k);
    }
    for (std::size_t k = 0; k < d; ++k) p.mean[k] /= n;
    if (spec.variance == GaussianVariance::pooled) {
        p.variance = spec.pooled_variance.empty() ? difference_variance(x, spec.variance_floor)
                                                  : spec.pooled_variance;
        if (p.variance.size() != d) {
            throw Error(ErrorCode::InvalidConfig, "pooled variance has the wrong dimension");
        }
        return p;
    }
    for (std::size_t t = iv.begin; t < iv.end; ++t) {
        for (std::size_t k = 0; k < d; ++k) {
            const double r = x(t, k) - p.mean[k];
            p.variance[k] += r * r;
        }
    }
    for (std::size_t k = 0; k < d; ++k) {
        p.variance[k] = std::max(p.variance[k] / n, spec.variance_floor);
    }
    return p;
}

inline double soft_threshold(double v, double lambda) {
    if (v > lambda) return v - lambda;
    if (v < -lambda) return v + lambda;
    return 0.0;
}

// Lasso by cyclic coordinate descent. Regressors and targets are centered within the
// segment, which solves for the unpenalized intercept in closed form; coefficients stay on
// the raw scale so the penalty is exactly alpha * sum |A_k entries|.
inline VarParams fit_var(const VarSpec& spec, const TimeSeries& x, Interval iv,
                         VarFitReport* report) {
    const std::size_t d = x.n_dims();
    const std::size_t p = spec.order;
    const std::size_t n = iv.length() - p;
    const std::size_t n_feat = d * p;
    const double inv_n = 1.0 / static_cast<double>(n);
    const double half_alpha = 0.5 * spec.l1_alpha;

    // Column-major design: feature f = (lag - 1) * d + k holds x_{j - lag, k}.
    std::vector<double> z(n_feat * n);
    std::vector<double> y(d * n);
    std::vector<double> z_mean(n_feat, 0.0), y_mean(d, 0.0);
    for (std::size_t row = 0; row < n; ++row) {
        const std::size_t j = iv.begin + p + row;
        for (std::size_t lag = 1; lag <= p; ++lag) {
            for (std::size_t k = 0; k < d; ++k) {
                const std::size_t f = (lag - 1) * d + k;
                z[f * n + row] = x(j - lag, k);
                z_mean[f] += x(j - lag, k);
            }
        }
        for (std::size_t k = 0; k < d; ++k) {
            y[k * n + row] = x(j, k);
            y_mean[k] += x(j, k);
        }
    }
    for (auto& m : z_mean) m *= inv_n;
    for (auto& m : y_mean) m *= inv_n;
    std::vector<double> sq_norm(n_feat, 0.0);
    for (std::size_t f = 0; f < n_feat; ++f) {
        for (std::size_t row = 0; row < n; ++row) {
            z[f * n + row] -= z_mean[f];
            sq_norm[f] += z[f * n + row] * z[f * n + row];
        }
        sq_norm[f] *= inv_n;
    }

    // weights[o * n_feat + f]; residual[o * n + row]
    std::vector<double> weights(d * n_feat, 0.0);
    std::vector<double> residual(d * n);
    for (std::size_t o = 0; o < d; ++o) {
        for (std::size_t row = 0; row < n; ++row) residual[o * n + row] = y[o * n + row] - y_mean[o];
    }

    auto objective = [&]() {
        double total = 0.0;
        for (std::size_t o = 0; o < d; ++o) {
            double rss = 0.0;
            for (std::size_t row = 0; row < n; ++row) rss += residual[o * n + row] * residual[o * n + row];
            double l1 = 0.0;
            for (std::size_t f = 0; f < n_feat; ++f) l1 += std::abs(weights[o * n_feat + f]);
            total += rss * inv_n + spec.l1_alpha * l1;
        }
        return total;
    };

    if (report) {
        report->objective_trace.clear();
        report->objective_trace.push_back(objective());
        report->sweeps = 0;
        report->converged = false;
    }

    for (std::size_t sweep = 0; sweep < spec.max_iter; ++sweep) {
        double max_change = 0.0;
        for (std::size_t o = 0; o < d; ++o) {
            double* r = residual.data() + o * n;
            for (std::size_t f = 0; f < n_feat; ++f) {
                double& w = weights[o * n_feat + f];
                const double* zf = z.data() + f * n;
                double w_new = 0.0;
                if (sq_norm[f] > 0.0) {
                    double rho = 0.0;
                    for (std::size_t row = 0; row < n; ++row) rho += zf[row] * r[row];
                    rho = rho * inv_n + sq_norm[f] * w;
                    w_new = soft_threshold(rho, half_alpha) / sq_norm[f];
                }
                const double delta = w_new - w;
                if (delta != 0.0) {
                    for (std::size_t row = 0; row < n; ++row) r[row] -= zf[row] * delta;
                    w = w_new;
                }
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        if (report) {
            report->objective_trace.push_back(objective());
            report->sweeps = sweep + 1;
        }
        if (max_change < spec.tol) {
            if (report) report->converged = true;
            break;
        }
    }

    VarParams out;
    out.order = p;
    out.coefficients.assign(d * d * p, 0.0);
    out.intercept.assign(d, 0.0);
    out.variance.assign(d, 0.0);
    for (std::size_t o = 0; o < d; ++o) {
        double c = y_mean[o];
        for (std::size_t lag = 1; lag <= p; ++lag) {
            for (std::size_t k = 0; k < d; ++k) {
                const double w = weights[o * n_feat + (lag - 1) * d + k];
                out.coefficients[((lag - 1) * d + o) * d + k] = w;
                c -= w * z_mean[(lag - 1) * d + k];
            }
        }
        out.intercept[o] = c;
    }
    // Residual variance recomputed on the raw scale.
    for (std::size_t row = 0; row < n; ++row) {
        const std::size_t j = iv.begin + p + row;
        for (std::size_t o = 0; o < d; ++o) {
            double pred = out.intercept[o];
            for (std::size_t lag = 1; lag <= p; ++lag) {
                for (std::size_t k = 0; k < d; ++k) pred += out.coef(lag, o, k, d) * x(j - lag, k);
            }
            const double e = x(j, o) - pred;
            out.variance[o] += e * e;
        }
    }
    for (auto& v : out.variance) v = std::max(v * inv_n, spec.variance_floor);
    return out;
}

}  // namespace detail

/// Maximum-likelihood (or L1-penalized for VAR) fit on x[iv.begin, iv.end).
inline FittedModel fit(const ModelSpec& spec, const TimeSeries& x, Interval iv,
                       VarFitReport* report = nullptr) {
    detail::check_interval(x, iv);
    if (iv.length() < min_fit_length(spec)) {
        throw Error(ErrorCode::IntervalTooShort,
                    "fit needs at least " + std::to_string(min_fit_length(spec)) +
                        " steps, interval has " + std::to_string(iv.length()));
    }
    if (const auto* g = std::get_if<GaussianSpec>(&spec)) {
        return FittedModel(spec, x.n_dims(), detail::fit_gaussian(*g, x, iv));
    }
    return FittedModel(spec, x.n_dims(),
                       detail::fit_var(std::get<VarSpec>(spec), x, iv, report));
}

/// Sum of log-densities over the interval, skipping the first p steps for VAR so that
/// every conditioning history lies inside the interval.
inline double segment_loglik(const FittedModel& model, const TimeSeries& x, Interval iv) {
    detail::check_interval(x, iv);
    const std::size_t skip = history_len(model.spec());
    if (iv.length() <= skip) {
        throw Error(ErrorCode::IntervalTooShort,
                    "evaluation interval of length " + std::to_string(iv.length()) +
                        " leaves no terms after skipping " + std::to_string(skip));
    }
    double acc = 0.0;
    for (std::size_t j = iv.begin + skip; j < iv.end; ++j) acc += model.log_density(x, j);
    return acc;
}

inline double avg_loglik(const FittedModel& model, const TimeSeries& x, Interval iv) {
    const double sum = segment_loglik(model, x, iv);
    return sum / static_cast<double>(iv.length() - history_len(model.spec()));
}

/// Negated empirical cross-entropy between x[r, s) and x[s, t): the model fitted on the
/// prior segment, averaged log-likelihood on the subsequent one.
inline double nce_cost(const ModelSpec& spec, const TimeSeries& x, std::size_t r, std::size_t s,
                       std::size_t t) {
    if (!(r < s && s < t)) {
        throw Error(ErrorCode::InvalidConfig, "nce_cost needs r < s < t");
    }
    return avg_loglik(fit(spec, x, {r, s}), x, {s, t});
}

/// Negative in-sample log-likelihood of the segment under its own fitted model.
inline double segment_nll_cost(const ModelSpec& spec, const TimeSeries& x, Interval iv) {
    return -segment_loglik(fit(spec, x, iv), x, iv);
}

inline ModelSpec parse_model_spec(const nlohmann::json& j) {
    const std::string kind = j.value("model", std::string("gaussian"));
    ModelSpec spec;
    if (kind == "gaussian") {
        GaussianSpec g;
        g.variance_floor = j.value("variance_floor", g.variance_floor);
        const std::string variance = j.value("variance", std::string("per_segment"));
        if (variance == "per_segment") {
            g.variance = GaussianVariance::per_segment;
        } else if (variance == "pooled") {
            g.variance = GaussianVariance::pooled;
        } else {
            throw Error(ErrorCode::InvalidConfig, "unknown gaussian variance mode '" + variance + "'");
        }
        spec = g;
    } else if (kind == "var") {
        VarSpec v;
        v.order = j.value("order", v.order);
        v.l1_alpha = j.value("l1_alpha", v.l1_alpha);
        v.max_iter = j.value("max_iter", v.max_iter);
        v.tol = j.value("tol", v.tol);
        v.variance_floor = j.value("variance_floor", v.variance_floor);
        const std::string counting = j.value("param_counting", std::string("full"));
        if (counting == "full") {
            v.counting = ParamCounting::full;
        } else if (counting == "literal") {
            v.counting = ParamCounting::literal;
        } else {
            throw Error(ErrorCode::InvalidConfig, "unknown param_counting '" + counting + "'");
        }
        spec = v;
    } else {
        throw Error(ErrorCode::InvalidConfig, "unknown model '" + kind + "'");
    }
    validate(spec);
    return spec;
}

inline nlohmann::json to_json(const ModelSpec& spec) {
    if (const auto* v = std::get_if<VarSpec>(&spec)) {
        return {{"model", "var"},
                {"order", v->order},
                {"l1_alpha", v->l1_alpha},
                {"max_iter", v->max_iter},
                {"tol", v->tol},
                {"variance_floor", v->variance_floor},
                {"param_counting", v->counting == ParamCounting::full ? "full" : "literal"}};
    }
    const auto& g = std::get<GaussianSpec>(spec);
    return {{"model", "gaussian"},
            {"variance", g.variance == GaussianVariance::pooled ? "pooled" : "per_segment"},
            {"variance_floor", g.variance_floor}};
}

}  // namespace otawa
