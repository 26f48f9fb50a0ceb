#pragma once
// A plain hinge GAN written directly against the tensor ops, with its own
// forward passes, loss composition and Adam. Used to cross-check the trainer
// with every frequency component disabled.

#include <vector>

#include "fregan/train.hpp"

namespace fregan::reference {

struct StepLosses {
    float l_d = 0.0f;
    float l_g = 0.0f;
    float l_recons = 0.0f;
};

// Runs `steps` iterations from the initial weights of Model(config.widths,
// config.seed), drawing batches and latents exactly as the trainer does.
std::vector<StepLosses> run_hinge_gan(const train::TrainConfig& config, int steps);

}  // namespace fregan::reference
