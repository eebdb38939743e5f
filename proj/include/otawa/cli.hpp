#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otawa/baselines.hpp"
#include "otawa/core.hpp"
#include "otawa/data.hpp"
#include "otawa/metrics.hpp"
#include "otawa/models.hpp"
#include "otawa/otawa.hpp"
#include "otawa/selection.hpp"

namespace otawa::cli {

struct RunConfig {
    std::filesystem::path input;
    bool has_header = false;
    std::optional<std::size_t> time_column;
    ModelSpec model = GaussianSpec{};
    Algorithm algorithm = Algorithm::otawa;
    std::optional<double> beta;
    std::optional<std::string> beta_grid;  // "default", "lo:hi:n" (log-spaced) or "b1,b2,..."
    std::optional<std::size_t> min_segment_len;
    std::size_t resolution = 1;
    std::optional<std::size_t> ws_window;
    std::optional<std::size_t> peaks;  // ws: fixed number of peaks instead of a threshold
    std::optional<std::size_t> radius;
    std::vector<std::string> preprocess;
    std::filesystem::path output;
    std::filesystem::path bic_output;
    std::uint64_t seed = 0;
    bool allow_empty = true;

    Constraints constraints() const {
        return {min_segment_len.value_or(min_segment_length(model)), resolution};
    }
};

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double to_double(const std::string& s, const std::string& what) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::InvalidConfig, "cannot parse " + what + " value '" + s + "'");
    }
    return v;
}

inline std::size_t to_size(const std::string& s, const std::string& what) {
    const double v = to_double(s, what);
    if (v < 0 || v != std::floor(v)) throw Error(ErrorCode::InvalidConfig, what + " must be a nonnegative integer");
    return static_cast<std::size_t>(v);
}

inline BetaGrid parse_beta_grid(const std::string& s) {
    if (s == "default") return BetaGrid::default_grid();
    if (s.rfind("log:", 0) == 0 || (s.find(':') != std::string::npos && s.find(',') == std::string::npos)) {
        auto parts = split_list(s.rfind("log:", 0) == 0 ? s.substr(4) : s, ':');
        if (parts.size() != 3) throw Error(ErrorCode::InvalidConfig, "log grid is lo:hi:n, got '" + s + "'");
        return BetaGrid::log_spaced(to_double(parts[0], "grid lo"), to_double(parts[1], "grid hi"),
                                    to_size(parts[2], "grid size"));
    }
    std::vector<double> v;
    for (const auto& p : split_list(s)) v.push_back(to_double(p, "beta grid"));
    return BetaGrid(std::move(v));
}

/// Steps: minmax | subsample:k | daily | stft[:fs[:window[:overlap[:low[:high]]]]]
inline TimeSeries apply_preprocessing(TimeSeries x, const std::vector<std::string>& steps) {
    for (const auto& step : steps) {
        const auto parts = split_list(step, ':');
        if (parts.empty()) continue;
        const std::string& name = parts[0];
        if (name == "minmax") {
            x = minmax_scale(x);
        } else if (name == "subsample") {
            if (parts.size() != 2) throw Error(ErrorCode::InvalidConfig, "subsample needs a rate, e.g. subsample:15");
            x = subsample(x, to_size(parts[1], "subsample rate"));
        } else if (name == "daily") {
            x = daily_mean(x);
        } else if (name == "stft") {
            StftConfig c;
            if (parts.size() > 1) c.sample_rate_hz = to_double(parts[1], "stft sample rate");
            if (parts.size() > 2) c.window_len = to_size(parts[2], "stft window");
            if (parts.size() > 3) c.overlap_fraction = to_double(parts[3], "stft overlap");
            if (parts.size() > 4) c.band_low_hz = to_double(parts[4], "stft band low");
            if (parts.size() > 5) c.band_high_hz = to_double(parts[5], "stft band high");
            x = stft_features(x, c);
        } else {
            throw Error(ErrorCode::InvalidConfig, "unknown preprocessing step '" + step + "'");
        }
    }
    return x;
}

inline TimeSeries load_series(const RunConfig& cfg) {
    return apply_preprocessing(read_csv(cfg.input, CsvOptions{cfg.has_header, cfg.time_column}), cfg.preprocess);
}

inline void check_run_config(const RunConfig& cfg) {
    validate(cfg.model);
    if (cfg.beta && cfg.beta_grid) throw Error(ErrorCode::InvalidConfig, "give either --beta or --beta-grid, not both");
    if (cfg.algorithm == Algorithm::ws) {
        if (!cfg.ws_window) throw Error(ErrorCode::InvalidConfig, "--algo ws requires --window");
        const int stops = int(cfg.beta.has_value()) + int(cfg.beta_grid.has_value()) + int(cfg.peaks.has_value());
        if (stops != 1) {
            throw Error(ErrorCode::InvalidConfig, "--algo ws needs exactly one of --beta (threshold), --beta-grid or --peaks");
        }
    } else {
        if (cfg.peaks) throw Error(ErrorCode::InvalidConfig, "--peaks only applies to --algo ws");
        if (!cfg.beta && !cfg.beta_grid) {
            throw Error(ErrorCode::InvalidConfig, "--algo " + to_string(cfg.algorithm) + " requires --beta or --beta-grid");
        }
    }
}

inline DetectorOptions detector_options(const RunConfig& cfg) {
    DetectorOptions o;
    o.algorithm = cfg.algorithm;
    o.constraints = cfg.constraints();
    o.allow_empty = cfg.allow_empty;
    o.ws_window = cfg.ws_window.value_or(0);
    return o;
}

inline nlohmann::json curve_json(const std::vector<BicPoint>& curve) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : curve) arr.push_back({{"beta", p.beta}, {"bic", p.bic}, {"n_change_points", p.n_change_points}});
    return arr;
}

struct DetectOutcome {
    SolveResult result;
    std::optional<SelectionResult> selection;
};

inline DetectOutcome detect(const TimeSeries& x, const RunConfig& cfg) {
    Detector detector(x, cfg.model, detector_options(cfg));
    if (cfg.algorithm == Algorithm::ws && cfg.peaks) {
        const auto c = cfg.constraints();
        auto seg = peak_detect(*detector.scores(), c.min_segment_len, std::nullopt, *cfg.peaks, c);
        return {SolveResult{std::move(seg), std::numeric_limits<double>::quiet_NaN(), 0.0, 0}, std::nullopt};
    }
    if (cfg.beta_grid) {
        auto sel = select_beta_with(x, cfg.model, parse_beta_grid(*cfg.beta_grid), detector);
        auto res = detector.run(sel.best_beta);
        return {std::move(res), std::move(sel)};
    }
    return {detector.run(*cfg.beta), std::nullopt};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

/// Reads, preprocesses, detects; returns the result document (also written to cfg.output
/// when set).
inline nlohmann::json cmd_detect(const RunConfig& cfg) {
    check_run_config(cfg);
    const TimeSeries x = load_series(cfg);
    const auto outcome = detect(x, cfg);
    nlohmann::json j = outcome.result;
    j["algorithm"] = to_string(cfg.algorithm);
    j["model"] = to_json(cfg.model);
    j["min_segment_len"] = cfg.constraints().min_segment_len;
    j["resolution"] = cfg.constraints().resolution;
    if (outcome.selection) {
        j["selected_by"] = "bic";
        j["bic_curve"] = curve_json(outcome.selection->bic_curve);
    } else {
        j["selected_by"] = cfg.peaks ? "peaks" : "fixed";
    }
    if (!cfg.output.empty()) write_json(cfg.output, j);
    return j;
}

inline Segmentation read_segmentation(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
    try {
        nlohmann::json j;
        in >> j;
        return j.get<Segmentation>();
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::ParseError, "'" + path.string() + "' is not a segmentation document: " + ex.what());
    }
}

struct EvaluateOutcome {
    nlohmann::json report;
    std::vector<std::string> warnings;
};

inline EvaluateOutcome cmd_evaluate(const std::filesystem::path& pred_path,
                                    const std::filesystem::path& truth_path, std::size_t radius) {
    const auto pred = read_segmentation(pred_path);
    const auto truth = read_segmentation(truth_path);
    const auto report = evaluate(truth, pred, radius);
    EvaluateOutcome out{report, {}};
    if (!report.hausdorff) out.warnings.push_back("hausdorff undefined: a change point set is empty");
    if (!report.mean_distance) out.warnings.push_back("mean_distance undefined: a change point set is empty");
    return out;
}

struct BenchConfig {
    ModelSpec model = GaussianSpec{};
    std::optional<std::size_t> min_segment_len;
    std::size_t resolution = 1;
    std::string beta_grid = "default";
    std::optional<double> beta;  // fixed beta (and ws threshold) instead of grid selection
    std::size_t ws_window = 0;
    std::size_t radius = 0;
    std::vector<std::string> preprocess;
    bool allow_empty = true;
};

struct BenchRow {
    std::string method;
    std::string metric;
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t count = 0;
};

struct BenchOutcome {
    std::vector<BenchRow> rows;
    std::vector<std::pair<std::string, std::string>> failures;  // (series, message)
    std::size_t succeeded = 0;
};

inline const std::vector<std::string>& bench_metric_names() {
    static const std::vector<std::string> names{"annotation_error", "precision", "f1",
                                                "hausdorff", "mean_distance", "rand_index"};
    return names;
}

/// Runs all four detectors on every manifest series; aggregates per-method metric means
/// and population standard deviations over the series where each metric is defined.
inline BenchOutcome cmd_bench(const std::vector<ManifestEntry>& manifest, const BenchConfig& bc) {
    if (bc.radius < 1) throw Error(ErrorCode::InvalidConfig, "bench requires --radius");
    if (bc.ws_window < 1) throw Error(ErrorCode::InvalidConfig, "bench requires --window for ws");
    validate(bc.model);
    const std::vector<Algorithm> methods{Algorithm::otawa, Algorithm::op, Algorithm::ws, Algorithm::bs};
    std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> samples;  // (method, metric)
    BenchOutcome out;
    for (const auto& entry : manifest) {
        std::vector<MetricsReport> reports;
        try {
            RunConfig rc;
            rc.input = entry.series;
            rc.has_header = entry.has_header;
            rc.time_column = entry.time_column;
            rc.model = bc.model;
            rc.min_segment_len = bc.min_segment_len;
            rc.resolution = bc.resolution;
            rc.ws_window = bc.ws_window;
            rc.preprocess = bc.preprocess;
            for (auto& step : rc.preprocess) {
                // A bare "stft" step takes the series' own sample rate when the manifest has one.
                if (step == "stft" && entry.sample_rate_hz) step = "stft:" + std::to_string(*entry.sample_rate_hz);
            }
            rc.allow_empty = bc.allow_empty;
            if (bc.beta) {
                rc.beta = bc.beta;
            } else {
                rc.beta_grid = bc.beta_grid;
            }
            const TimeSeries x = load_series(rc);
            const Segmentation truth(x.n_steps(), entry.labels);
            for (Algorithm a : methods) {
                rc.algorithm = a;
                check_run_config(rc);
                reports.push_back(evaluate(truth, detect(x, rc).result.segmentation, bc.radius));
            }
        } catch (const std::exception& ex) {
            out.failures.emplace_back(entry.series.string(), ex.what());
            continue;
        }
        ++out.succeeded;
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            const auto& r = reports[mi];
            const std::vector<std::optional<double>> vals{static_cast<double>(r.annotation_error), r.precision, r.f1,
                                                          r.hausdorff, r.mean_distance, r.rand_index};
            for (std::size_t k = 0; k < vals.size(); ++k) {
                if (vals[k]) samples[{mi, k}].push_back(*vals[k]);
            }
        }
    }
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        for (std::size_t k = 0; k < bench_metric_names().size(); ++k) {
            BenchRow row{to_string(methods[mi]), bench_metric_names()[k], std::numeric_limits<double>::quiet_NaN(),
                         std::numeric_limits<double>::quiet_NaN(), 0};
            if (auto it = samples.find({mi, k}); it != samples.end() && !it->second.empty()) {
                const auto& v = it->second;
                double mean = 0.0;
                for (double s : v) mean += s;
                mean /= static_cast<double>(v.size());
                double var = 0.0;
                for (double s : v) var += (s - mean) * (s - mean);
                row.mean = mean;
                row.stddev = std::sqrt(var / static_cast<double>(v.size()));
                row.count = v.size();
            }
            out.rows.push_back(row);
        }
    }
    return out;
}

inline void write_bench_csv(std::ostream& os, const BenchOutcome& b) {
    os << "method,metric,mean,std,count\n";
    os << std::setprecision(17);
    for (const auto& r : b.rows) {
        os << r.method << ',' << r.metric << ',';
        if (r.count > 0) os << r.mean;
        os << ',';
        if (r.count > 0) os << r.stddev;
        os << ',' << r.count << '\n';
    }
    // Failed series keep the five-column shape: method "error", metric = series path.
    for (const auto& f : b.failures) os << "error," << f.first << ",,,0\n";
}

struct SynthConfig {
    std::string kind = "gaussian";  // gaussian | var
    std::size_t n_steps = 0;
    std::vector<std::size_t> changes;
    std::uint64_t seed = 0;
    std::size_t dims = 1;
    std::vector<double> means;   // gaussian: one per segment (default alternating 0, shift)
    double shift = 3.0;
    std::vector<double> stds;    // gaussian: one per segment (default 1)
    std::vector<double> coeffs;  // var: AR(1) coefficient per segment, A_1 = a * I
    double noise = 1.0;
    std::filesystem::path output;
    std::filesystem::path labels;
};

inline SyntheticSeries synthesize(const SynthConfig& sc) {
    const Segmentation truth(sc.n_steps, sc.changes);
    const std::size_t n_seg = truth.size() + 1;
    auto per_segment = [&](const std::vector<double>& given, const std::string& what,
                           auto default_value) {
        if (given.empty()) {
            std::vector<double> v(n_seg);
            for (std::size_t i = 0; i < n_seg; ++i) v[i] = default_value(i);
            return v;
        }
        if (given.size() != n_seg) {
            throw Error(ErrorCode::InvalidConfig, what + " needs one value per segment (" + std::to_string(n_seg) + ")");
        }
        return given;
    };
    if (sc.dims < 1) throw Error(ErrorCode::InvalidConfig, "--dims must be >= 1");
    if (sc.kind == "gaussian") {
        SyntheticSpec<GaussianRegime> spec{sc.seed, truth, {}, sc.noise};
        const auto means = per_segment(sc.means, "--means", [&](std::size_t i) { return (i % 2) * sc.shift; });
        const auto stds = per_segment(sc.stds, "--stds", [](std::size_t) { return 1.0; });
        for (std::size_t i = 0; i < n_seg; ++i) {
            if (!(stds[i] > 0.0)) throw Error(ErrorCode::InvalidConfig, "--stds must be positive");
            spec.regimes.push_back({std::vector<double>(sc.dims, means[i]), std::vector<double>(sc.dims, stds[i])});
        }
        return synth_piecewise_gaussian(spec);
    }
    if (sc.kind == "var") {
        SyntheticSpec<VarRegime> spec{sc.seed, truth, {}, sc.noise};
        const auto coeffs = per_segment(sc.coeffs, "--coeffs", [](std::size_t i) { return i % 2 ? -0.5 : 0.5; });
        const auto means = per_segment(sc.means, "--means", [](std::size_t) { return 0.0; });
        for (std::size_t i = 0; i < n_seg; ++i) {
            VarRegime r;
            r.order = 1;
            r.coefficients.assign(sc.dims * sc.dims, 0.0);
            for (std::size_t k = 0; k < sc.dims; ++k) r.coefficients[k * sc.dims + k] = coeffs[i];
            // Intercept chosen so the stationary mean equals the requested segment mean.
            r.intercept.assign(sc.dims, means[i] * (1.0 - coeffs[i]));
            r.noise_std.assign(sc.dims, 1.0);
            spec.regimes.push_back(std::move(r));
        }
        return synth_piecewise_var(spec);
    }
    throw Error(ErrorCode::InvalidConfig, "unknown --kind '" + sc.kind + "' (expected gaussian or var)");
}

inline void cmd_synth(const SynthConfig& sc) {
    if (sc.output.empty()) throw Error(ErrorCode::InvalidConfig, "synth requires --output");
    const auto out = synthesize(sc);
    write_csv(sc.output, out.series);
    auto labels = sc.labels;
    if (labels.empty()) {
        labels = sc.output;
        labels.replace_extension(".labels.json");
    }
    write_json(labels, nlohmann::json(out.truth));
}

/// Writes the window-sliding score series (when a window is set) and/or the BIC curve
/// (when a grid is set) as CSV.
inline void cmd_scores(const RunConfig& cfg) {
    validate(cfg.model);
    if (!cfg.ws_window && !cfg.beta_grid) {
        throw Error(ErrorCode::InvalidConfig, "scores needs --window (score series) and/or --beta-grid (BIC curve)");
    }
    if (cfg.ws_window && cfg.output.empty()) throw Error(ErrorCode::InvalidConfig, "scores --window needs --output");
    if (cfg.beta_grid && cfg.bic_output.empty()) {
        throw Error(ErrorCode::InvalidConfig, "scores --beta-grid needs --bic-output");
    }
    const TimeSeries x = load_series(cfg);
    if (cfg.ws_window) {
        const auto scores = window_sliding_scores(x, cfg.model, *cfg.ws_window);
        std::ofstream out(cfg.output);
        if (!out) throw Error(ErrorCode::Io, "cannot write '" + cfg.output.string() + "'");
        write_scores_csv(out, scores);
    }
    if (cfg.beta_grid) {
        auto opts = detector_options(cfg);
        if (opts.algorithm == Algorithm::ws && opts.ws_window == 0) opts.algorithm = Algorithm::otawa;
        const auto sel = select_beta(x, cfg.model, parse_beta_grid(*cfg.beta_grid), opts);
        std::ofstream out(cfg.bic_output);
        if (!out) throw Error(ErrorCode::Io, "cannot write '" + cfg.bic_output.string() + "'");
        write_bic_curve_csv(out, sel.bic_curve);
    }
}

}  // namespace otawa::cli
