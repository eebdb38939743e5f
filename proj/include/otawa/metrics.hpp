#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "otawa/core.hpp"

namespace otawa {

struct PrecisionRecallF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t matches = 0;
};

struct MetricsReport {
    std::size_t annotation_error = 0;
    double precision = 0.0;
    double f1 = 0.0;
    std::optional<double> hausdorff;      // undefined when either side is empty
    std::optional<double> mean_distance;  // undefined when either side is empty
    double rand_index = 0.0;
    std::size_t detection_radius = 1;
};

namespace detail {

inline void check_same_length(const Segmentation& a, const Segmentation& b) {
    if (a.n_steps() != b.n_steps()) {
        throw Error(ErrorCode::MismatchedLength, "segmentations cover " + std::to_string(a.n_steps()) +
                                                     " and " + std::to_string(b.n_steps()) + " steps");
    }
}

inline std::size_t dist(std::size_t a, std::size_t b) { return a > b ? a - b : b - a; }

inline std::size_t nearest(std::size_t v, const std::vector<std::size_t>& sorted) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
    std::size_t best = std::numeric_limits<std::size_t>::max();
    if (it != sorted.end()) best = dist(*it, v);
    if (it != sorted.begin()) best = std::min(best, dist(*std::prev(it), v));
    return best;
}

inline std::uint64_t pairs(std::uint64_t n) { return n * (n - 1) / 2; }

}  // namespace detail

inline std::size_t annotation_error(const Segmentation& truth, const Segmentation& pred) {
    detail::check_same_length(truth, pred);
    return detail::dist(truth.size(), pred.size());
}

/// One-to-one matching: candidate pairs within the radius are taken in order of increasing
/// distance (then truth index, then prediction index), skipping already-matched points.
inline PrecisionRecallF1 precision_recall_f1(const Segmentation& truth, const Segmentation& pred,
                                             std::size_t radius) {
    detail::check_same_length(truth, pred);
    if (radius < 1) throw Error(ErrorCode::InvalidConfig, "detection radius must be >= 1");
    const auto& ts = truth.change_points();
    const auto& ps = pred.change_points();
    if (ts.empty() && ps.empty()) return {1.0, 1.0, 1.0, 0};
    if (ts.empty() || ps.empty()) return {0.0, 0.0, 0.0, 0};

    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> cands;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        for (std::size_t j = 0; j < ps.size(); ++j) {
            const std::size_t d = detail::dist(ts[i], ps[j]);
            if (d <= radius) cands.emplace_back(d, i, j);
        }
    }
    std::sort(cands.begin(), cands.end());
    std::vector<bool> t_used(ts.size(), false), p_used(ps.size(), false);
    std::size_t matches = 0;
    for (const auto& [d, i, j] : cands) {
        if (t_used[i] || p_used[j]) continue;
        t_used[i] = p_used[j] = true;
        ++matches;
    }
    PrecisionRecallF1 out;
    out.matches = matches;
    out.precision = static_cast<double>(matches) / static_cast<double>(ps.size());
    out.recall = static_cast<double>(matches) / static_cast<double>(ts.size());
    out.f1 = matches == 0 ? 0.0 : 2.0 * out.precision * out.recall / (out.precision + out.recall);
    return out;
}

inline double hausdorff(const Segmentation& truth, const Segmentation& pred) {
    detail::check_same_length(truth, pred);
    if (truth.empty() || pred.empty()) {
        throw Error(ErrorCode::EmptySet, "Hausdorff distance is undefined for an empty change point set");
    }
    std::size_t worst = 0;
    for (std::size_t t : truth.change_points()) worst = std::max(worst, detail::nearest(t, pred.change_points()));
    for (std::size_t p : pred.change_points()) worst = std::max(worst, detail::nearest(p, truth.change_points()));
    return static_cast<double>(worst);
}

inline double mean_distance(const Segmentation& truth, const Segmentation& pred) {
    detail::check_same_length(truth, pred);
    if (truth.empty() || pred.empty()) {
        throw Error(ErrorCode::EmptySet, "mean distance is undefined for an empty change point set");
    }
    std::uint64_t total = 0;
    for (std::size_t t : truth.change_points()) total += detail::nearest(t, pred.change_points());
    return static_cast<double>(total) / static_cast<double>(truth.size());
}

/// Fraction of index pairs on which both segmentations agree (same segment / different
/// segments), via segment-overlap counts.
inline double rand_index(const Segmentation& truth, const Segmentation& pred) {
    detail::check_same_length(truth, pred);
    const std::uint64_t T = truth.n_steps();
    if (T < 2) return 1.0;
    const auto a = segments(truth);
    const auto b = segments(pred);
    std::uint64_t same_a = 0, same_b = 0, same_both = 0;
    for (const auto& s : a) same_a += detail::pairs(s.length());
    for (const auto& s : b) same_b += detail::pairs(s.length());
    std::size_t j = 0;
    for (const auto& s : a) {
        while (j < b.size() && b[j].end <= s.begin) ++j;
        for (std::size_t k = j; k < b.size() && b[k].begin < s.end; ++k) {
            const std::size_t lo = std::max(s.begin, b[k].begin);
            const std::size_t hi = std::min(s.end, b[k].end);
            if (hi > lo) same_both += detail::pairs(hi - lo);
        }
    }
    const std::uint64_t total = detail::pairs(T);
    const std::uint64_t disagree = same_a + same_b - 2 * same_both;
    return static_cast<double>(total - disagree) / static_cast<double>(total);
}

inline MetricsReport evaluate(const Segmentation& truth, const Segmentation& pred, std::size_t radius) {
    MetricsReport r;
    r.detection_radius = radius;
    r.annotation_error = annotation_error(truth, pred);
    const auto prf = precision_recall_f1(truth, pred, radius);
    r.precision = prf.precision;
    r.f1 = prf.f1;
    if (!truth.empty() && !pred.empty()) {
        r.hausdorff = hausdorff(truth, pred);
        r.mean_distance = mean_distance(truth, pred);
    }
    r.rand_index = rand_index(truth, pred);
    return r;
}

inline void to_json(nlohmann::json& j, const MetricsReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    j = nlohmann::json{{"annotation_error", r.annotation_error},
                       {"precision", r.precision},
                       {"f1", r.f1},
                       {"hausdorff", opt(r.hausdorff)},
                       {"mean_distance", opt(r.mean_distance)},
                       {"rand_index", r.rand_index},
                       {"detection_radius", r.detection_radius}};
}

/// Header plus one data row; undefined distances are written as empty cells.
inline void write_metrics_csv(std::ostream& os, const MetricsReport& r) {
    os << "annotation_error,precision,f1,hausdorff,mean_distance,rand_index,detection_radius\n";
    os << std::setprecision(17);
    os << r.annotation_error << ',' << r.precision << ',' << r.f1 << ',';
    if (r.hausdorff) os << *r.hausdorff;
    os << ',';
    if (r.mean_distance) os << *r.mean_distance;
    os << ',' << r.rand_index << ',' << r.detection_radius << '\n';
}

}  // namespace otawa
