#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace otawa {

enum class ErrorCode {
    InvalidSegmentation,
    InvalidSeries,
    InvalidConfig,
    IntervalTooShort,
    SeriesTooShort,
    Infeasible,
    TooLarge,
    MismatchedLength,
    EmptySet,
    ParseError,
    NonFinite,
    UnstableCoefficients,
    Io,
    InvariantViolation,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidSegmentation: return "InvalidSegmentation";
        case ErrorCode::InvalidSeries: return "InvalidSeries";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::IntervalTooShort: return "IntervalTooShort";
        case ErrorCode::SeriesTooShort: return "SeriesTooShort";
        case ErrorCode::Infeasible: return "Infeasible";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::MismatchedLength: return "MismatchedLength";
        case ErrorCode::EmptySet: return "EmptySet";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::UnstableCoefficients: return "UnstableCoefficients";
        case ErrorCode::Io: return "Io";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Half-open index interval [begin, end).
struct Interval {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t length() const { return end - begin; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// A T x d matrix of finite observations, stored row-major (one row per time step).
/// Optional timestamps (seconds) travel with the rows through preprocessing.
class TimeSeries {
public:
    TimeSeries() = default;

    TimeSeries(std::size_t n_steps, std::size_t n_dims, std::vector<double> values,
               std::optional<std::vector<double>> timestamps = std::nullopt)
        : n_steps_(n_steps), n_dims_(n_dims), values_(std::move(values)),
          timestamps_(std::move(timestamps)) {
        if (n_steps_ < 2 || n_dims_ < 1) {
            throw Error(ErrorCode::InvalidSeries, "series needs T >= 2 and d >= 1, got T=" +
                                                      std::to_string(n_steps_) +
                                                      " d=" + std::to_string(n_dims_));
        }
        if (values_.size() != n_steps_ * n_dims_) {
            throw Error(ErrorCode::InvalidSeries, "value count does not match T x d");
        }
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                throw Error(ErrorCode::NonFinite, "non-finite value at row " +
                                                      std::to_string(i / n_dims_) + ", column " +
                                                      std::to_string(i % n_dims_));
            }
        }
        if (timestamps_ && timestamps_->size() != n_steps_) {
            throw Error(ErrorCode::InvalidSeries, "timestamp count does not match T");
        }
    }

    static TimeSeries univariate(std::vector<double> values) {
        const std::size_t n = values.size();
        return TimeSeries(n, 1, std::move(values));
    }

    std::size_t n_steps() const { return n_steps_; }
    std::size_t n_dims() const { return n_dims_; }

    std::span<const double> row(std::size_t t) const {
        return {values_.data() + t * n_dims_, n_dims_};
    }
    double operator()(std::size_t t, std::size_t k) const { return values_[t * n_dims_ + k]; }

    const std::vector<double>& values() const { return values_; }
    const std::optional<std::vector<double>>& timestamps() const { return timestamps_; }

private:
    std::size_t n_steps_ = 0;
    std::size_t n_dims_ = 0;
    std::vector<double> values_;
    std::optional<std::vector<double>> timestamps_;
};

/// Interior change points 0 < tau_1 < ... < tau_m < T; boundaries 0 and T are implicit.
class Segmentation {
public:
    Segmentation() = default;

    Segmentation(std::size_t n_steps, std::vector<std::size_t> change_points)
        : n_steps_(n_steps), change_points_(std::move(change_points)) {
        if (n_steps_ < 1) {
            throw Error(ErrorCode::InvalidSegmentation, "n_steps must be positive");
        }
        std::size_t prev = 0;
        for (std::size_t cp : change_points_) {
            if (cp <= prev || cp >= n_steps_) {
                throw Error(ErrorCode::InvalidSegmentation,
                            "change points must be strictly increasing inside (0, T); offending "
                            "index " + std::to_string(cp) + " with T=" + std::to_string(n_steps_));
            }
            prev = cp;
        }
    }

    std::size_t n_steps() const { return n_steps_; }
    const std::vector<std::size_t>& change_points() const { return change_points_; }
    std::size_t size() const { return change_points_.size(); }
    bool empty() const { return change_points_.empty(); }

    friend bool operator==(const Segmentation&, const Segmentation&) = default;

private:
    std::size_t n_steps_ = 1;
    std::vector<std::size_t> change_points_;
};

/// Minimum segment length S and change point grid resolution R.
struct Constraints {
    std::size_t min_segment_len = 1;
    std::size_t resolution = 1;

    void validate() const {
        if (min_segment_len < 1 || resolution < 1) {
            throw Error(ErrorCode::InvalidConfig, "min_segment_len and resolution must be >= 1");
        }
    }
};

inline std::vector<Interval> segments(const Segmentation& seg) {
    std::vector<Interval> out;
    out.reserve(seg.size() + 1);
    std::size_t begin = 0;
    for (std::size_t cp : seg.change_points()) {
        out.push_back({begin, cp});
        begin = cp;
    }
    out.push_back({begin, seg.n_steps()});
    return out;
}

inline bool satisfies(const Segmentation& seg, const Constraints& c) {
    for (std::size_t cp : seg.change_points()) {
        if (cp % c.resolution != 0) return false;
    }
    for (const auto& iv : segments(seg)) {
        if (iv.length() < c.min_segment_len) return false;
    }
    return true;
}

/// Admissible interior boundaries: multiples of R inside [S, T - S].
inline std::vector<std::size_t> candidate_boundaries(std::size_t n_steps, const Constraints& c) {
    std::vector<std::size_t> out;
    if (n_steps < 2 * c.min_segment_len) return out;
    const std::size_t lo = c.min_segment_len;
    const std::size_t hi = n_steps - c.min_segment_len;
    std::size_t first = ((lo + c.resolution - 1) / c.resolution) * c.resolution;
    for (std::size_t b = std::max<std::size_t>(first, c.resolution); b <= hi; b += c.resolution) {
        if (b > 0 && b < n_steps) out.push_back(b);
    }
    return out;
}

inline void to_json(nlohmann::json& j, const Segmentation& seg) {
    j = nlohmann::json{{"n_steps", seg.n_steps()}, {"change_points", seg.change_points()}};
}

inline void from_json(const nlohmann::json& j, Segmentation& seg) {
    seg = Segmentation(j.at("n_steps").get<std::size_t>(),
                       j.at("change_points").get<std::vector<std::size_t>>());
}

}  // namespace otawa
