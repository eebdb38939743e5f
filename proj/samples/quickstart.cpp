// Generates a labelled three-change series, selects beta by BIC for a few detector
// configurations and scores each result against the labels.
#include <iostream>
#include <string>

#include "otawa/data.hpp"
#include "otawa/metrics.hpp"
#include "otawa/selection.hpp"

int main() {
    using namespace otawa;
    SyntheticSpec<GaussianRegime> spec{42, Segmentation(300, {75, 150, 225}), {}, 1.0};
    for (double mean : {0.0, 3.0, 0.0, 3.0}) spec.regimes.push_back({{mean}, {1.0}});
    const auto data = synth_piecewise_gaussian(spec);
    const BetaGrid grid = BetaGrid::default_grid();

    GaussianSpec pooled;
    pooled.variance = GaussianVariance::pooled;

    struct Run {
        std::string label;
        Algorithm algorithm;
        GaussianSpec model;
    };
    for (const Run& run : {Run{"otawa, per-segment variance", Algorithm::otawa, GaussianSpec{}},
                           Run{"otawa, pooled variance", Algorithm::otawa, pooled},
                           Run{"op, per-segment variance", Algorithm::op, GaussianSpec{}}}) {
        DetectorOptions opts;
        opts.algorithm = run.algorithm;
        opts.constraints = {8, 1};
        const auto sel = select_beta(data.series, run.model, grid, opts);

        std::cout << run.label << ": beta = " << sel.best_beta << ", change points:";
        for (auto t : sel.best_segmentation.change_points()) std::cout << ' ' << t;
        std::cout << '\n' << nlohmann::json(evaluate(data.truth, sel.best_segmentation, 6)).dump() << "\n\n";
    }
}
