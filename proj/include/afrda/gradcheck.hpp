#pragma once

// Central finite-difference verification of reverse-mode gradients.
//
// For a case f with inputs x, the checked loss is L = sum(R * f(x)) for a fixed
// random R. For each sampled coordinate x_i the numeric derivative is
// sum(R * (f(x + h e_i) - f(x - h e_i))) / 2h, differenced per output element
// before reduction. Coordinates whose +-h evaluation takes a different branch
// (ReLU mask, argmax) than the unperturbed pass are skipped and resampled.

#include "afrda/seg_net.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace afrda {

struct GradcheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;      // max relative error
    double floor = 1e-6;          // denominator floor: |a - n| / max(|a|, |n|, floor)
    std::size_t coordinates = 100;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
};

/// Inputs live in a NetParams so composed cases can run the full network;
/// plain op cases just use its ParamSet.
using GradcheckFn = std::function<Var(Tape&, NetParams&, Binding)>;

struct GradcheckCase {
    std::string name;
    NetParams inputs;
    GradcheckFn fn;
};

struct GradcheckReport {
    std::string name;
    std::uint64_t seed = 0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
    double max_rel_error = 0.0;
    std::string worst;            // input name and flat index of the worst coordinate
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    bool passed = false;
};

GradcheckReport check_gradient(GradcheckCase& c, std::uint64_t seed, const GradcheckOptions& options = {});

/// Every differentiable op, the AFR sub-blocks, afr_forward with two levels and
/// the network plus cross-entropy on a 4x4 image. Inputs are drawn from `seed`.
std::vector<GradcheckCase> standard_cases(std::uint64_t seed);

std::vector<GradcheckReport> run_gradcheck_suite(const GradcheckOptions& options = {});

std::string format_report(const GradcheckReport& report);

}  // namespace afrda
