#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "otawa/cli.hpp"

namespace {

using otawa::cli::RunConfig;

struct ModelFlags {
    std::string model = "gaussian";
    std::size_t order = 1;
    double l1_alpha = 0.0;
    std::optional<double> variance_floor;
    std::string variance = "per_segment";
    std::size_t max_iter = 1000;
    double tol = 1e-8;

    void attach(CLI::App* app) {
        app->add_option("--model", model, "gaussian or var")->check(CLI::IsMember({"gaussian", "var"}));
        app->add_option("--order", order, "VAR order p");
        app->add_option("--l1-alpha", l1_alpha, "VAR L1 penalty");
        app->add_option("--variance-floor", variance_floor, "lower bound on fitted variances");
        app->add_option("--variance", variance, "gaussian: per_segment or pooled (one series-wide estimate)")
            ->check(CLI::IsMember({"per_segment", "pooled"}));
        app->add_option("--max-iter", max_iter, "VAR coordinate-descent sweep limit");
        app->add_option("--tol", tol, "VAR coordinate-descent tolerance");
    }

    otawa::ModelSpec spec() const {
        if (model == "gaussian") {
            otawa::GaussianSpec g;
            if (variance_floor) g.variance_floor = *variance_floor;
            if (variance == "pooled") g.variance = otawa::GaussianVariance::pooled;
            return g;
        }
        otawa::VarSpec v;
        v.order = order;
        v.l1_alpha = l1_alpha;
        v.max_iter = max_iter;
        v.tol = tol;
        if (variance_floor) v.variance_floor = *variance_floor;
        return v;
    }
};

struct RunFlags {
    RunConfig cfg;
    ModelFlags model;
    std::string algo = "otawa";
    std::string preprocess;

    void attach_input(CLI::App* app) {
        app->add_option("--input", cfg.input, "series CSV")->required();
        app->add_flag("--header", cfg.has_header, "first CSV row is a header");
        app->add_option("--time-column", cfg.time_column, "0-based column holding timestamps");
        app->add_option("--preprocess", preprocess, "comma list: minmax, subsample:k, daily, stft[:fs:win:overlap:lo:hi]");
        model.attach(app);
    }

    void attach_detection(CLI::App* app) {
        app->add_option("--algo", algo, "otawa, op, bs or ws")->check(CLI::IsMember({"otawa", "op", "bs", "ws"}));
        app->add_option("--beta", cfg.beta, "penalty (peak threshold for ws)");
        app->add_option("--beta-grid", cfg.beta_grid, "default | lo:hi:n | b1,b2,...");
        app->add_option("--min-seg", cfg.min_segment_len, "minimum segment length S");
        app->add_option("--resolution", cfg.resolution, "boundary grid spacing R");
        app->add_option("--window", cfg.ws_window, "ws window length L");
        app->add_option("--peaks", cfg.peaks, "ws: number of peaks instead of a threshold");
        app->add_option("--seed", cfg.seed, "seed (detection is deterministic)");
        app->add_option("--allow-empty", cfg.allow_empty, "allow the no-change-point answer (true/false)");
    }

    RunConfig finish() {
        cfg.model = model.spec();
        cfg.algorithm = otawa::parse_algorithm(algo);
        cfg.preprocess = otawa::cli::split_list(preprocess);
        return cfg;
    }
};

std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& p : otawa::cli::split_list(s)) out.push_back(otawa::cli::to_double(p, what));
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"Penalized change point detection over pairwise segment costs"};
    app.require_subcommand(1);

    RunFlags detect_flags;
    auto* detect = app.add_subcommand("detect", "detect change points and write the result as JSON");
    detect_flags.attach_input(detect);
    detect_flags.attach_detection(detect);
    detect->add_option("--output", detect_flags.cfg.output, "result JSON path (stdout when omitted)");

    std::string pred_path, truth_path;
    std::optional<std::size_t> eval_radius;
    std::string eval_output;
    auto* evaluate = app.add_subcommand("evaluate", "compare predicted and true segmentations");
    evaluate->add_option("--pred", pred_path, "predicted segmentation JSON")->required();
    evaluate->add_option("--truth", truth_path, "true segmentation JSON")->required();
    evaluate->add_option("--radius", eval_radius, "detection radius r")->required();
    evaluate->add_option("--output", eval_output, "report JSON path (stdout when omitted)");

    otawa::cli::BenchConfig bench_cfg;
    ModelFlags bench_model;
    std::string manifest_path, bench_output, bench_preprocess;
    std::optional<std::size_t> bench_radius, bench_window;
    auto* bench = app.add_subcommand("bench", "run all detectors over a labelled manifest");
    bench->add_option("--manifest", manifest_path, "manifest JSON")->required();
    bench->add_option("--radius", bench_radius, "detection radius r")->required();
    bench->add_option("--window", bench_window, "ws window length L")->required();
    bench->add_option("--beta-grid", bench_cfg.beta_grid, "default | lo:hi:n | b1,b2,...");
    bench->add_option("--beta", bench_cfg.beta, "fixed penalty instead of grid selection");
    bench->add_option("--min-seg", bench_cfg.min_segment_len, "minimum segment length S");
    bench->add_option("--resolution", bench_cfg.resolution, "boundary grid spacing R");
    bench->add_option("--preprocess", bench_preprocess, "comma list of preprocessing steps");
    bench->add_option("--allow-empty", bench_cfg.allow_empty, "allow the no-change-point answer");
    bench->add_option("--output", bench_output, "CSV path (stdout when omitted)");
    bench_model.attach(bench);

    otawa::cli::SynthConfig synth_cfg;
    std::string changes, means, stds, coeffs;
    auto* synth = app.add_subcommand("synth", "generate a labelled piecewise-stationary series");
    synth->add_option("--kind", synth_cfg.kind, "gaussian or var");
    synth->add_option("--T,--n-steps", synth_cfg.n_steps, "series length")->required();
    synth->add_option("--changes", changes, "comma list of change points");
    synth->add_option("--seed", synth_cfg.seed, "generator seed");
    synth->add_option("--dims", synth_cfg.dims, "number of dimensions");
    synth->add_option("--means", means, "per-segment mean (comma list)");
    synth->add_option("--shift", synth_cfg.shift, "default alternating mean shift");
    synth->add_option("--stds", stds, "per-segment standard deviation (gaussian)");
    synth->add_option("--coeffs", coeffs, "per-segment AR(1) coefficient (var)");
    synth->add_option("--noise", synth_cfg.noise, "noise scale");
    synth->add_option("--output", synth_cfg.output, "series CSV path")->required();
    synth->add_option("--labels", synth_cfg.labels, "labels JSON path (default <output>.labels.json)");

    RunFlags scores_flags;
    auto* scores = app.add_subcommand("scores", "export ws scores and/or the BIC curve as CSV");
    scores_flags.attach_input(scores);
    scores_flags.attach_detection(scores);
    scores->add_option("--output", scores_flags.cfg.output, "score CSV path (needs --window)");
    scores->add_option("--bic-output", scores_flags.cfg.bic_output, "BIC curve CSV path (needs --beta-grid)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (detect->parsed()) {
        const auto j = otawa::cli::cmd_detect(detect_flags.finish());
        if (detect_flags.cfg.output.empty()) std::cout << j.dump(2) << '\n';
    } else if (evaluate->parsed()) {
        const auto out = otawa::cli::cmd_evaluate(pred_path, truth_path, *eval_radius);
        for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
        if (eval_output.empty()) {
            std::cout << out.report.dump(2) << '\n';
        } else {
            otawa::cli::write_json(eval_output, out.report);
        }
    } else if (bench->parsed()) {
        bench_cfg.model = bench_model.spec();
        bench_cfg.radius = *bench_radius;
        bench_cfg.ws_window = *bench_window;
        bench_cfg.preprocess = otawa::cli::split_list(bench_preprocess);
        const auto out = otawa::cli::cmd_bench(otawa::read_manifest(manifest_path), bench_cfg);
        for (const auto& [series, msg] : out.failures) std::cerr << "error: " << series << ": " << msg << '\n';
        if (bench_output.empty()) {
            otawa::cli::write_bench_csv(std::cout, out);
        } else {
            std::ofstream os(bench_output);
            if (!os) throw otawa::Error(otawa::ErrorCode::Io, "cannot write '" + bench_output + "'");
            otawa::cli::write_bench_csv(os, out);
        }
        if (out.succeeded == 0) {
            std::cerr << "error: no series in the manifest succeeded\n";
            return 1;
        }
    } else if (synth->parsed()) {
        for (const auto& p : otawa::cli::split_list(changes)) {
            synth_cfg.changes.push_back(otawa::cli::to_size(p, "--changes"));
        }
        synth_cfg.means = parse_doubles(means, "--means");
        synth_cfg.stds = parse_doubles(stds, "--stds");
        synth_cfg.coeffs = parse_doubles(coeffs, "--coeffs");
        otawa::cli::cmd_synth(synth_cfg);
    } else if (scores->parsed()) {
        otawa::cli::cmd_scores(scores_flags.finish());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const otawa::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == otawa::ErrorCode::InvariantViolation ? 2 : 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 2;
    }
}
