#pragma once

#include <vector>

#include "lmof/deconv.hpp"
#include "lmof/featurenet.hpp"

namespace lmof {

/// Per-sample kernels from the current feature representation at `stage`,
/// after running the earlier (frozen) iterations. These are the kernels the
/// training objective holds fixed during a gradient step.
std::vector<BlurKernel> compute_stage_kernels(const std::vector<TrainSample>& batch,
                                              const NetParams& params, int stage,
                                              const DeconvConfig& cfg);

/// Training objective with the kernels held fixed: the latent estimated by
/// deconvolving the blur features against `kernels[i]` is compared to the
/// sharp target, plus an auxiliary term pulling the latent-feature head
/// towards the sharp image. Pass `grad` to accumulate the stage gradient.
double loss_with_kernels(const std::vector<TrainSample>& batch, const NetParams& params,
                         int stage, const std::vector<BlurKernel>& kernels,
                         const DeconvConfig& cfg, double aux_weight,
                         StageParams* grad = nullptr);

/// Loss and analytic gradient for the highest unmasked stage. Masked stages
/// get zero gradient; an all-false mask returns a zero gradient outright.
std::pair<double, NetParams> loss_and_gradient(const std::vector<TrainSample>& batch,
                                               const NetParams& params,
                                               const std::vector<bool>& stage_mask,
                                               const DeconvConfig& cfg,
                                               double aux_weight = 1.0);

/// Full-batch gradient descent on one stage, learning rate lr * decay^step.
NetParams train_stage(const std::vector<TrainSample>& dataset, const NetParams& params,
                      int stage, double lr, double decay, int steps, const DeconvConfig& cfg,
                      double aux_weight = 1.0, std::vector<double>* loss_trace = nullptr);

}  // namespace lmof
