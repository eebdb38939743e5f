#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "otawa/core.hpp"

namespace otawa::testing {

inline TimeSeries random_series(std::mt19937_64& rng, std::size_t n_steps, std::size_t n_dims = 1) {
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> v(n_steps * n_dims);
    for (double& x : v) x = noise(rng);
    return TimeSeries(n_steps, n_dims, std::move(v));
}

inline TimeSeries step_series(std::size_t n_steps, std::size_t step, double low, double high) {
    std::vector<double> v(n_steps);
    for (std::size_t t = 0; t < n_steps; ++t) v[t] = t < step ? low : high;
    return TimeSeries::univariate(std::move(v));
}

/// A fresh, empty directory under the system temp dir, unique per name.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("otawa_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace otawa::testing
