#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "svt/grid.hpp"

namespace svt::test {

// Fresh directory under the system temp dir, named after the running test.
inline std::filesystem::path temp_dir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::filesystem::path p = std::filesystem::temp_directory_path() / "svt_tests" /
                              (std::string(info->test_suite_name()) + "." + info->name());
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline ScalarField random_field(int h, int w, double lo, double hi, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    ScalarField f(h, w);
    for (double& x : f.values()) x = d(rng);
    return f;
}

inline ImageField random_image(int h, int w, int c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    ImageField f(h, w, c);
    for (double& x : f.values()) x = d(rng);
    return f;
}

inline Mask full_mask(int h, int w) { return Mask(ScalarField(h, w, 1.0)); }

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

}  // namespace svt::test
