#include <catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "otawa/data.hpp"
#include "support.hpp"

using namespace otawa;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

TEST_CASE("read_csv parses numeric tables") {
    std::istringstream in("1,2\n3,4\n5,6\n");
    const auto x = read_csv(in);
    CHECK(x.n_steps() == 3);
    CHECK(x.n_dims() == 2);
    CHECK(x(2, 1) == 6.0);

    std::istringstream with_header("a,b\n1.5, -2\n\n3e1,4\n");
    const auto y = read_csv(with_header, {true, std::nullopt});
    CHECK(y.n_steps() == 2);
    CHECK(y(0, 1) == -2.0);
    CHECK(y(1, 0) == 30.0);
}

TEST_CASE("read_csv reports the failing cell") {
    std::istringstream in("1,2\n3,abc\n");
    try {
        read_csv(in);
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        CHECK_THAT(std::string(e.what()), ContainsSubstring("row 2, column 2"));
        CHECK_THAT(std::string(e.what()), ContainsSubstring("abc"));
    }
    std::istringstream ragged("1,2\n3\n");
    CHECK_THROWS_AS(read_csv(ragged), Error);
    std::istringstream nan("1\nnan\n");
    try {
        read_csv(nan);
        FAIL("expected NonFinite");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonFinite);
    }
    std::istringstream empty("");
    CHECK_THROWS_AS(read_csv(empty), Error);
    CHECK_THROWS_AS(read_csv(std::filesystem::path("/nonexistent/file.csv"), false), Error);
}

TEST_CASE("read_csv time column") {
    std::istringstream in("2020-01-01,1\n2020-01-01T12:00:00,3\n2020-01-02 06:30,5\n");
    const auto x = read_csv(in, {false, 0});
    CHECK(x.n_dims() == 1);
    REQUIRE(x.timestamps());
    CHECK((*x.timestamps())[0] == 1577836800.0);
    CHECK((*x.timestamps())[1] == 1577836800.0 + 43200.0);
    CHECK((*x.timestamps())[2] == 1577836800.0 + 86400.0 + 6.0 * 3600.0 + 30.0 * 60.0);
    std::istringstream numeric("0,1\n60,2\n");
    CHECK((*read_csv(numeric, {false, 0}).timestamps())[1] == 60.0);
}

TEST_CASE("csv round trip is exact") {
    const auto dir = testing::scratch_dir("csv");
    const TimeSeries x(3, 2, {0.1, 1.0 / 3.0, -2.5e-7, 12345.678901234567, 1e300, -0.0});
    write_csv(dir / "x.csv", x, true);
    const auto y = read_csv(dir / "x.csv", true);
    CHECK(y.values() == x.values());
}

TEST_CASE("minmax scaling") {
    const auto x = minmax_scale(TimeSeries::univariate({0.0, 5.0, 10.0}));
    CHECK(x.values() == std::vector<double>{0.0, 0.5, 1.0});
    const auto c = minmax_scale(TimeSeries(2, 2, {3.0, 1.0, 3.0, 2.0}));
    CHECK(c.values() == std::vector<double>{0.0, 0.0, 0.0, 1.0});
}

TEST_CASE("subsampling and daily means") {
    std::vector<double> v(10);
    for (std::size_t i = 0; i < 10; ++i) v[i] = static_cast<double>(i);
    const auto x = TimeSeries::univariate(v);
    CHECK(subsample(x, 2).values() == std::vector<double>{0, 2, 4, 6, 8});
    CHECK(subsample(x, 1).values() == x.values());
    CHECK(subsample(TimeSeries::univariate(std::vector<double>(10399, 0.0)), 15).n_steps() == 694);
    CHECK_THROWS_AS(subsample(x, 0), Error);

    std::vector<double> ts{0, 3600, 7200, 86400, 90000, 3 * 86400.0};
    const TimeSeries stamped(6, 1, {1, 2, 3, 10, 20, 7}, ts);
    const auto daily = daily_mean(stamped);
    CHECK(daily.values() == std::vector<double>{2, 15, 7});
    CHECK(*daily.timestamps() == std::vector<double>{0, 86400, 3 * 86400.0});
    CHECK_THROWS_AS(daily_mean(x), Error);
}

TEST_CASE("stft bins and frames") {
    const StftConfig cfg;
    const auto bins = stft_bins(cfg);
    REQUIRE(bins.size() == 23);
    CHECK(bins.front() == 3);
    CHECK(bins.back() == 25);
    CHECK(cfg.hop() == 128);
    CHECK(stft_frame_count(2000, cfg) == (2000 - 512) / 128 + 1);
    CHECK(stft_frame_count(100, cfg) == 0);

    StftConfig exact;  // band edges landing exactly on bins are kept
    exact.window_len = 100;
    exact.band_low_hz = 1.0;
    exact.band_high_hz = 3.0;
    CHECK(stft_bins(exact) == std::vector<std::size_t>{1, 2, 3});

    StftConfig bad;
    bad.band_high_hz = 80.0;
    CHECK_THROWS_AS(stft_bins(bad), Error);
}

TEST_CASE("stft of a sinusoid peaks at its bin") {
    const StftConfig cfg;
    std::vector<double> v(3000);
    for (std::size_t t = 0; t < v.size(); ++t) {
        v[t] = std::sin(2.0 * std::numbers::pi * 2.0 * static_cast<double>(t) / cfg.sample_rate_hz);
    }
    const auto features = stft_features(TimeSeries::univariate(v), cfg);
    const auto bins = stft_bins(cfg);
    CHECK(features.n_steps() == stft_frame_count(3000, cfg));
    CHECK(features.n_dims() == 23);
    // 2 Hz / (100 / 512) = 10.24, nearest bin 10.
    for (std::size_t f = 0; f < features.n_steps(); ++f) {
        std::size_t arg = 0;
        for (std::size_t b = 1; b < bins.size(); ++b) {
            if (features(f, b) > features(f, arg)) arg = b;
        }
        CHECK(bins[arg] == 10);
    }
    // Two channels produce concatenated blocks.
    std::vector<double> two(2 * 800);
    for (std::size_t t = 0; t < 800; ++t) {
        two[2 * t] = v[t];
        two[2 * t + 1] = 0.0;
    }
    const auto f2 = stft_features(TimeSeries(800, 2, two), cfg);
    CHECK(f2.n_dims() == 46);
    CHECK(f2(0, 23) == 0.0);
    CHECK(f2(0, 7) == stft_features(TimeSeries::univariate(std::vector<double>(v.begin(), v.begin() + 800)), cfg)(0, 7));
    CHECK_THROWS_AS(stft_features(TimeSeries::univariate(std::vector<double>(100, 0.0)), cfg), Error);
}

TEST_CASE("piecewise gaussian generator") {
    SyntheticSpec<GaussianRegime> spec{11, Segmentation(400, {200}), {{{0.0}, {1.0}}, {{10.0}, {1.0}}}, 1.0};
    const auto a = synth_piecewise_gaussian(spec);
    const auto b = synth_piecewise_gaussian(spec);
    CHECK(a.series.values() == b.series.values());
    CHECK(a.truth == spec.truth);
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t t = 0; t < 200; ++t) m0 += a.series(t, 0) / 200.0;
    for (std::size_t t = 200; t < 400; ++t) m1 += a.series(t, 0) / 200.0;
    CHECK(std::abs(m0 - 0.0) < 3.0 / std::sqrt(200.0));
    CHECK(std::abs(m1 - 10.0) < 3.0 / std::sqrt(200.0));
    spec.seed = 12;
    CHECK(synth_piecewise_gaussian(spec).series.values() != a.series.values());
    spec.regimes.pop_back();
    CHECK_THROWS_AS(synth_piecewise_gaussian(spec), Error);
}

TEST_CASE("piecewise var generator") {
    VarRegime zero{1, {0.0}, {0.0}, {1.0}};
    VarRegime shifted{1, {0.0}, {4.0}, {1.0}};
    SyntheticSpec<VarRegime> spec{3, Segmentation(300, {150}), {zero, shifted}, 1.0};
    const auto x = synth_piecewise_var(spec);
    double m1 = 0.0;
    for (std::size_t t = 150; t < 300; ++t) m1 += x.series(t, 0) / 150.0;
    CHECK(std::abs(m1 - 4.0) < 3.0 / std::sqrt(150.0));
    CHECK(synth_piecewise_var(spec).series.values() == x.series.values());

    VarRegime unstable{1, {1.2}, {0.0}, {1.0}};
    SyntheticSpec<VarRegime> bad{3, Segmentation(100, {}), {unstable}, 1.0};
    try {
        synth_piecewise_var(bad);
        FAIL("expected UnstableCoefficients");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnstableCoefficients);
    }
    CHECK_THAT(spectral_radius(VarRegime{2, {0.5, 0.2}, {0.0}, {1.0}}, 1),
               WithinAbs((0.5 + std::sqrt(0.25 + 0.8)) / 2.0, 1e-12));
}

TEST_CASE("manifest formats") {
    const auto dir = testing::scratch_dir("manifest");
    {
        std::ofstream(dir / "one.json") << R"({"series":"a.csv","labels":[10,20],"sample_rate_hz":100})";
        std::ofstream(dir / "list.json") << R"([{"series":"a.csv"},{"series":"/abs/b.csv","labels":[5],"has_header":true}])";
        std::ofstream(dir / "wrapped.json") << R"({"datasets":[{"series":"c.csv","time_column":0}]})";
        std::ofstream(dir / "broken.json") << "{not json";
    }
    const auto one = read_manifest(dir / "one.json");
    REQUIRE(one.size() == 1);
    CHECK(one[0].series == dir / "a.csv");
    CHECK(one[0].labels == std::vector<std::size_t>{10, 20});
    CHECK(one[0].sample_rate_hz == 100.0);
    const auto list = read_manifest(dir / "list.json");
    REQUIRE(list.size() == 2);
    CHECK(list[1].series == "/abs/b.csv");
    CHECK(list[1].has_header);
    const auto wrapped = read_manifest(dir / "wrapped.json");
    CHECK(wrapped[0].time_column == 0u);
    CHECK_THROWS_AS(read_manifest(dir / "broken.json"), Error);
    CHECK_THROWS_AS(read_manifest(dir / "missing.json"), Error);
}
