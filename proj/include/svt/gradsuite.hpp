#pragma once

// Seeded finite-difference checks for every differentiable operator.

#include <cstdint>
#include <string>
#include <vector>

#include "svt/optimize.hpp"

namespace svt {

struct GradCase {
    std::string name;
    double tolerance = 1e-4;
    DifferentiableOp op;
    std::vector<double> input;
};

/// Names accepted by make_grad_case(), in suite order.
const std::vector<std::string>& grad_case_names();

/// Random instance of one operator on a size x size grid (6..8 in the
/// suite). Vector-valued operators are reduced to a scalar through a fixed
/// random projection. Inputs keep a margin from kinks (ReLU, |.|, texel
/// boundaries) so central differences do not straddle them.
GradCase make_grad_case(const std::string& name, std::uint64_t seed, int size);

struct GradReport {
    std::string name;
    double error = 0.0;
    double tolerance = 0.0;
    std::size_t coordinates = 0;
    bool pass() const { return error <= tolerance; }
};

GradReport run_grad_case(const GradCase& c, std::uint64_t seed);

}  // namespace svt
