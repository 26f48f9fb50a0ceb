#pragma once
// Invariant suites shared by `fregan verify` and the acceptance binary.

#include <cstdint>
#include <string>

#include "fregan/train.hpp"
#include "fregan/wavelet.hpp"

namespace fregan::checks {

inline constexpr double kReconstructionTol = 1e-5;  // max abs
inline constexpr double kParsevalTol = 1e-4;        // relative
inline constexpr double kShareSumTol = 1e-4;
inline constexpr double kGradTol = 1e-3;            // max relative
inline constexpr double kAdjointTol = 1e-4;         // relative
inline constexpr double kAnalyticTol = 1e-6;

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct CorpusOptions {
    int cases = 100;
    int max_n = 4;
    int max_c = 8;
    int max_size = 64;  // even H and W in [2, max_size]
    std::uint64_t seed = 1;
};

SuiteResult reconstruction(const CorpusOptions& corpus,
                           const wavelet::HaarKernels& kernels = wavelet::HaarKernels::standard());
// Energy identity per tensor plus band-share sums.
SuiteResult parseval(const CorpusOptions& corpus);
SuiteResult gradients(std::uint64_t seed = 7);
SuiteResult adjoint(int cases = 50, std::uint64_t seed = 3);
// Constant and tile-2 checkerboard inputs.
SuiteResult analytic_wavelet();
// Trainer with all components off against the reference hinge GAN. The
// trainer's per-step reports are appended to `reports` when given.
SuiteResult baseline_equivalence(const train::TrainConfig& config, int steps,
                                 std::vector<gan::LossReport>* reports = nullptr);

// Haar kernels with one coefficient nudged, for fault-injection runs.
wavelet::HaarKernels perturbed_kernels(float delta = 1e-3f);

}  // namespace fregan::checks
