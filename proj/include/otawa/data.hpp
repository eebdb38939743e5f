#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "otawa/core.hpp"

namespace otawa {

struct CsvOptions {
    bool has_header = false;
    std::optional<std::size_t> time_column;  // column holding timestamps (numeric seconds or ISO dates)
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string cell_location(std::size_t row, std::size_t col) {
    return "row " + std::to_string(row) + ", column " + std::to_string(col + 1);
}

inline double parse_number(std::string_view cell, std::size_t row, std::size_t col) {
    const std::string buf(cell);
    char* end = nullptr;
    const double v = buf.empty() ? 0.0 : std::strtod(buf.c_str(), &end);
    if (buf.empty() || end != buf.c_str() + buf.size()) {
        throw Error(ErrorCode::ParseError, "cannot parse '" + buf + "' as a number at " + cell_location(row, col));
    }
    if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFinite, "non-finite value '" + buf + "' at " + cell_location(row, col));
    }
    return v;
}

// Seconds since the Unix epoch from "YYYY-MM-DD", optionally followed by [T ]HH:MM[:SS].
inline std::optional<double> parse_iso_datetime(std::string_view s) {
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    const std::string buf(s);
    char sep = 0;
    const int n = std::sscanf(buf.c_str(), "%d-%u-%u%c%u:%u:%u", &y, &mo, &d, &sep, &h, &mi, &sec);
    if (n < 3) return std::nullopt;
    if (n > 3 && sep != 'T' && sep != ' ') return std::nullopt;
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{mo}, day{d}};
    if (!ymd.ok()) return std::nullopt;
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<double>(days) * 86400.0 + h * 3600.0 + mi * 60.0 + sec;
}

}  // namespace detail

/// Comma-delimited numeric table, '.' decimal point, one row per time step.
inline TimeSeries read_csv(std::istream& is, const CsvOptions& opts = {}) {
    std::string line;
    std::size_t row = 0;
    std::size_t n_cols = 0;
    std::vector<double> values;
    std::vector<double> stamps;
    std::size_t n_rows = 0;
    if (opts.has_header) {
        if (!std::getline(is, line)) throw Error(ErrorCode::ParseError, "missing header row");
        ++row;
    }
    while (std::getline(is, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split(line, ',');
        if (n_cols == 0) {
            n_cols = cells.size();
            if (opts.time_column && *opts.time_column >= n_cols) {
                throw Error(ErrorCode::ParseError, "time column out of range");
            }
        } else if (cells.size() != n_cols) {
            throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + " has " +
                                                   std::to_string(cells.size()) + " cells, expected " +
                                                   std::to_string(n_cols));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (opts.time_column && c == *opts.time_column) {
                if (auto ts = detail::parse_iso_datetime(cells[c])) {
                    stamps.push_back(*ts);
                } else {
                    stamps.push_back(detail::parse_number(cells[c], row, c));
                }
                continue;
            }
            values.push_back(detail::parse_number(cells[c], row, c));
        }
        ++n_rows;
    }
    const std::size_t d = n_cols - (opts.time_column ? 1 : 0);
    if (n_rows == 0 || d == 0) throw Error(ErrorCode::ParseError, "no numeric data");
    std::optional<std::vector<double>> ts;
    if (opts.time_column) ts = std::move(stamps);
    return TimeSeries(n_rows, d, std::move(values), std::move(ts));
}

inline TimeSeries read_csv(const std::filesystem::path& path, const CsvOptions& opts = {}) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
    return read_csv(in, opts);
}

inline TimeSeries read_csv(const std::filesystem::path& path, bool has_header) {
    return read_csv(path, CsvOptions{has_header, std::nullopt});
}

/// Values at 17 significant digits, so a read back reproduces them exactly.
inline void write_csv(std::ostream& os, const TimeSeries& x, bool header = false) {
    if (header) {
        for (std::size_t k = 0; k < x.n_dims(); ++k) os << (k ? "," : "") << "x" << k;
        os << '\n';
    }
    os << std::setprecision(17);
    for (std::size_t t = 0; t < x.n_steps(); ++t) {
        for (std::size_t k = 0; k < x.n_dims(); ++k) os << (k ? "," : "") << x(t, k);
        os << '\n';
    }
}

inline void write_csv(const std::filesystem::path& path, const TimeSeries& x, bool header = false) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
    write_csv(out, x, header);
}

/// Per-dimension (v - min) / (max - min); constant dimensions become zeros.
inline TimeSeries minmax_scale(const TimeSeries& x) {
    const std::size_t T = x.n_steps(), d = x.n_dims();
    std::vector<double> lo(d, std::numeric_limits<double>::infinity());
    std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < d; ++k) {
            lo[k] = std::min(lo[k], x(t, k));
            hi[k] = std::max(hi[k], x(t, k));
        }
    }
    std::vector<double> out(T * d);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < d; ++k) {
            const double range = hi[k] - lo[k];
            out[t * d + k] = range > 0.0 ? (x(t, k) - lo[k]) / range : 0.0;
        }
    }
    return TimeSeries(T, d, std::move(out), x.timestamps());
}

/// Keeps rows 0, rate, 2 * rate, ...
inline TimeSeries subsample(const TimeSeries& x, std::size_t rate) {
    if (rate < 1) throw Error(ErrorCode::InvalidConfig, "subsample rate must be >= 1");
    const std::size_t d = x.n_dims();
    std::vector<double> out;
    std::optional<std::vector<double>> ts;
    if (x.timestamps()) ts.emplace();
    std::size_t n = 0;
    for (std::size_t t = 0; t < x.n_steps(); t += rate, ++n) {
        const auto row = x.row(t);
        out.insert(out.end(), row.begin(), row.end());
        if (ts) ts->push_back((*x.timestamps())[t]);
    }
    return TimeSeries(n, d, std::move(out), std::move(ts));
}

/// Mean per calendar day (UTC), days in increasing order. Requires timestamps.
inline TimeSeries daily_mean(const TimeSeries& x) {
    if (!x.timestamps()) throw Error(ErrorCode::InvalidConfig, "daily bucketing needs timestamps");
    const std::size_t d = x.n_dims();
    std::map<std::int64_t, std::pair<std::vector<double>, std::size_t>> days;
    for (std::size_t t = 0; t < x.n_steps(); ++t) {
        const auto key = static_cast<std::int64_t>(std::floor((*x.timestamps())[t] / 86400.0));
        auto& [sum, count] = days[key];
        if (sum.empty()) sum.assign(d, 0.0);
        for (std::size_t k = 0; k < d; ++k) sum[k] += x(t, k);
        ++count;
    }
    std::vector<double> out;
    std::vector<double> ts;
    for (const auto& [key, acc] : days) {
        for (std::size_t k = 0; k < d; ++k) out.push_back(acc.first[k] / static_cast<double>(acc.second));
        ts.push_back(static_cast<double>(key) * 86400.0);
    }
    return TimeSeries(days.size(), d, std::move(out), std::move(ts));
}

struct StftConfig {
    std::size_t window_len = 512;
    double overlap_fraction = 0.75;
    double sample_rate_hz = 100.0;
    double band_low_hz = 0.5;
    double band_high_hz = 5.0;

    std::size_t hop() const {
        return static_cast<std::size_t>(std::llround(static_cast<double>(window_len) * (1.0 - overlap_fraction)));
    }

    void validate() const {
        if (window_len < 2) throw Error(ErrorCode::InvalidConfig, "STFT window must be >= 2 samples");
        if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
            throw Error(ErrorCode::InvalidConfig, "STFT overlap must lie in [0, 1)");
        }
        if (!(sample_rate_hz > 0.0)) throw Error(ErrorCode::InvalidConfig, "sample rate must be positive");
        if (!(band_low_hz >= 0.0 && band_low_hz < band_high_hz && band_high_hz <= sample_rate_hz / 2.0)) {
            throw Error(ErrorCode::InvalidConfig, "STFT band must satisfy 0 <= low < high <= fs/2");
        }
        if (hop() < 1) throw Error(ErrorCode::InvalidConfig, "STFT hop must be >= 1");
    }
};

/// DFT bins k with low <= k * fs / N <= high (both ends inclusive).
inline std::vector<std::size_t> stft_bins(const StftConfig& cfg) {
    cfg.validate();
    std::vector<std::size_t> out;
    const double df = cfg.sample_rate_hz / static_cast<double>(cfg.window_len);
    const double eps = 1e-9 * df;
    for (std::size_t k = 0; k <= cfg.window_len / 2; ++k) {
        const double f = static_cast<double>(k) * df;
        if (f + eps >= cfg.band_low_hz && f - eps <= cfg.band_high_hz) out.push_back(k);
    }
    return out;
}

inline std::size_t stft_frame_count(std::size_t n_steps, const StftConfig& cfg) {
    if (n_steps < cfg.window_len) return 0;
    return (n_steps - cfg.window_len) / cfg.hop() + 1;
}

/// Hann-windowed (periodic) magnitude spectrogram restricted to the band. Each input
/// channel contributes n_bins consecutive output columns.
inline TimeSeries stft_features(const TimeSeries& x, const StftConfig& cfg) {
    cfg.validate();
    const std::size_t N = cfg.window_len;
    if (x.n_steps() < N) {
        throw Error(ErrorCode::SeriesTooShort, "series of length " + std::to_string(x.n_steps()) +
                                                   " is shorter than the STFT window " + std::to_string(N));
    }
    const auto bins = stft_bins(cfg);
    const std::size_t frames = stft_frame_count(x.n_steps(), cfg);
    const std::size_t hop = cfg.hop();
    const std::size_t d = x.n_dims();
    const std::size_t width = d * bins.size();

    std::vector<double> window(N);
    for (std::size_t n = 0; n < N; ++n) {
        window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(N));
    }
    // twiddle[b * N + n] = exp(-2 pi i k_b n / N)
    std::vector<std::complex<double>> twiddle(bins.size() * N);
    for (std::size_t b = 0; b < bins.size(); ++b) {
        for (std::size_t n = 0; n < N; ++n) {
            const double angle = -2.0 * std::numbers::pi * static_cast<double>((bins[b] * n) % N) / static_cast<double>(N);
            twiddle[b * N + n] = {std::cos(angle), std::sin(angle)};
        }
    }

    std::vector<double> out(frames * width);
    std::vector<double> buf(N);
    for (std::size_t f = 0; f < frames; ++f) {
        const std::size_t start = f * hop;
        for (std::size_t ch = 0; ch < d; ++ch) {
            for (std::size_t n = 0; n < N; ++n) buf[n] = window[n] * x(start + n, ch);
            for (std::size_t b = 0; b < bins.size(); ++b) {
                std::complex<double> acc{0.0, 0.0};
                const auto* tw = twiddle.data() + b * N;
                for (std::size_t n = 0; n < N; ++n) acc += buf[n] * tw[n];
                out[f * width + ch * bins.size() + b] = std::abs(acc);
            }
        }
    }
    return TimeSeries(frames, width, std::move(out));
}

struct GaussianRegime {
    std::vector<double> mean;
    std::vector<double> stddev;
};

struct VarRegime {
    std::size_t order = 1;
    std::vector<double> coefficients;  // same layout as VarParams::coefficients
    std::vector<double> intercept;
    std::vector<double> noise_std;
};

template <class Regime>
struct SyntheticSpec {
    std::uint64_t seed = 0;
    Segmentation truth;
    std::vector<Regime> regimes;  // one per segment
    double noise_scale = 1.0;
};

struct SyntheticSeries {
    TimeSeries series;
    Segmentation truth;
};

namespace detail {

template <class Regime>
void check_regime_count(const SyntheticSpec<Regime>& spec) {
    if (spec.regimes.size() != spec.truth.size() + 1) {
        throw Error(ErrorCode::InvalidConfig, "need one regime per segment: " +
                                                  std::to_string(spec.truth.size() + 1) + " segments, " +
                                                  std::to_string(spec.regimes.size()) + " regimes");
    }
    if (!(spec.noise_scale > 0.0)) throw Error(ErrorCode::InvalidConfig, "noise_scale must be positive");
}

}  // namespace detail

inline SyntheticSeries synth_piecewise_gaussian(const SyntheticSpec<GaussianRegime>& spec) {
    detail::check_regime_count(spec);
    const std::size_t d = spec.regimes.front().mean.size();
    for (const auto& r : spec.regimes) {
        if (r.mean.size() != d || r.stddev.size() != d || d == 0) {
            throw Error(ErrorCode::InvalidConfig, "regime dimensions disagree");
        }
    }
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t T = spec.truth.n_steps();
    std::vector<double> values(T * d);
    const auto segs = segments(spec.truth);
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const auto& reg = spec.regimes[i];
        for (std::size_t t = segs[i].begin; t < segs[i].end; ++t) {
            for (std::size_t k = 0; k < d; ++k) {
                values[t * d + k] = reg.mean[k] + spec.noise_scale * reg.stddev[k] * normal(rng);
            }
        }
    }
    return {TimeSeries(T, d, std::move(values)), spec.truth};
}

/// Largest |eigenvalue| of the VAR companion matrix.
inline double spectral_radius(const VarRegime& reg, std::size_t d) {
    const std::size_t p = reg.order;
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d * p), static_cast<Eigen::Index>(d * p));
    for (std::size_t lag = 1; lag <= p; ++lag) {
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                comp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>((lag - 1) * d + j)) =
                    reg.coefficients[((lag - 1) * d + i) * d + j];
            }
        }
    }
    for (std::size_t i = d; i < d * p; ++i) {
        comp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - d)) = 1.0;
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Each segment follows its own stable VAR recursion, continuing from the previous
/// segment's last p values; the first segment starts after a discarded burn-in.
inline SyntheticSeries synth_piecewise_var(const SyntheticSpec<VarRegime>& spec,
                                           std::size_t burn_in = 200) {
    detail::check_regime_count(spec);
    const std::size_t d = spec.regimes.front().intercept.size();
    std::size_t p_max = 0;
    for (std::size_t i = 0; i < spec.regimes.size(); ++i) {
        const auto& r = spec.regimes[i];
        if (d == 0 || r.order < 1 || r.intercept.size() != d || r.noise_std.size() != d ||
            r.coefficients.size() != d * d * r.order) {
            throw Error(ErrorCode::InvalidConfig, "VAR regime " + std::to_string(i) + " has inconsistent shapes");
        }
        const double rho = spectral_radius(r, d);
        if (!(rho < 1.0)) {
            throw Error(ErrorCode::UnstableCoefficients,
                        "regime " + std::to_string(i) + " has spectral radius " + std::to_string(rho));
        }
        p_max = std::max(p_max, r.order);
    }
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t T = spec.truth.n_steps();
    const std::size_t pre = p_max + burn_in;
    std::vector<double> buf((pre + T) * d, 0.0);

    auto step = [&](const VarRegime& r, std::size_t row) {
        for (std::size_t i = 0; i < d; ++i) {
            double v = r.intercept[i];
            for (std::size_t lag = 1; lag <= r.order; ++lag) {
                for (std::size_t j = 0; j < d; ++j) {
                    v += r.coefficients[((lag - 1) * d + i) * d + j] * buf[(row - lag) * d + j];
                }
            }
            buf[row * d + i] = v + spec.noise_scale * r.noise_std[i] * normal(rng);
        }
    };
    for (std::size_t row = p_max; row < pre; ++row) step(spec.regimes.front(), row);
    const auto segs = segments(spec.truth);
    for (std::size_t i = 0; i < segs.size(); ++i) {
        for (std::size_t t = segs[i].begin; t < segs[i].end; ++t) step(spec.regimes[i], pre + t);
    }
    std::vector<double> values(buf.begin() + static_cast<std::ptrdiff_t>(pre * d), buf.end());
    return {TimeSeries(T, d, std::move(values)), spec.truth};
}

/// {"series": "path.csv", "labels": [...], "sample_rate_hz": ...}; labels index the
/// series after preprocessing.
struct ManifestEntry {
    std::filesystem::path series;
    std::vector<std::size_t> labels;
    std::optional<double> sample_rate_hz;
    bool has_header = false;
    std::optional<std::size_t> time_column;
};

inline ManifestEntry parse_manifest_entry(const nlohmann::json& j, const std::filesystem::path& base) {
    ManifestEntry e;
    std::filesystem::path p = j.at("series").get<std::string>();
    e.series = p.is_absolute() ? p : base / p;
    e.labels = j.value("labels", std::vector<std::size_t>{});
    if (j.contains("sample_rate_hz") && !j.at("sample_rate_hz").is_null()) {
        e.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    }
    e.has_header = j.value("has_header", false);
    if (j.contains("time_column")) e.time_column = j.at("time_column").get<std::size_t>();
    return e;
}

/// A manifest is a single entry, an array of entries, or {"datasets": [entries]}.
inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open manifest '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::ParseError, "manifest '" + path.string() + "': " + ex.what());
    }
    const auto base = path.parent_path();
    std::vector<ManifestEntry> out;
    const nlohmann::json* list = nullptr;
    if (j.is_array()) {
        list = &j;
    } else if (j.is_object() && j.contains("datasets")) {
        list = &j.at("datasets");
    }
    if (list) {
        for (const auto& e : *list) out.push_back(parse_manifest_entry(e, base));
    } else {
        out.push_back(parse_manifest_entry(j, base));
    }
    if (out.empty()) throw Error(ErrorCode::InvalidConfig, "manifest lists no series");
    return out;
}

}  // namespace otawa
