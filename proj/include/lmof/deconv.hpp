#pragma once

#include <array>
#include <vector>

#include "lmof/featurenet.hpp"
#include "lmof/image.hpp"

namespace lmof {

struct DeconvConfig {
    // Weights for the five derivative pairs: dx, dy, dxx, dyy, dxy.
    std::array<double, 5> tau = {1.0, 1.0, 0.5, 0.5, 0.25};
    double beta_k = 1e-2;   // Tikhonov weight on the kernel
    double beta_l = 2e-3;   // gradient regularizer for the latent solve
    int kernel_side = 15;   // odd
    int iterations = 3;     // network iterations N
    int inner_cg = 60;      // CG cap for the kernel solve

    void validate() const;
};

/// Least-squares kernel fit over the five derivative-pair channels of each
/// feature pair, solved by CG in the transform domain, then cleaned up
/// (clamp negatives, drop taps below 5% of the peak, renormalize).
BlurKernel estimate_kernel(const std::vector<Image>& I_hat, const std::vector<Image>& l_hat,
                           const DeconvConfig& cfg);

/// Tikhonov-on-gradients deconvolution, periodic model on the raw grid.
/// Exposed separately so it can be checked against dense normal equations.
Image nonblind_deconv_periodic(const Image& img, const BlurKernel& k, double beta_l);

/// Eq-per-frequency deconvolution with edge-tapered periodic extension.
/// Output is not clipped; clipping happens once at the end of a pipeline.
Image nonblind_deconv(const Image& img, const BlurKernel& k, double beta_l);

/// The N-iteration deblurring loop: features -> kernel -> latent, with the
/// evolving latent stacked onto the blurred input from iteration 2 on.
std::pair<Image, BlurKernel> deblur_iterate(const Image& img, const NetParams& params,
                                            const DeconvConfig& cfg,
                                            std::vector<Image>* latent_trace = nullptr);

/// Kernel side rescaled to a pyramid level: round, floor 3, forced odd.
int scaled_kernel_side(int base_side, double scale);

}  // namespace lmof
