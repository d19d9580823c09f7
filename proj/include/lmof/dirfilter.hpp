#pragma once

#include <vector>

#include "lmof/image.hpp"

namespace lmof {

/// Bank of oriented 1-D Gaussian filters with learnable per-direction strengths.
struct DirectionalBank {
    std::vector<double> directions;  // radians, strictly increasing in [0, pi)
    double sigma = 2.0;              // Gaussian scale, pixels
    int support = 9;                 // filter side, odd
    std::vector<double> phi;         // strength per direction, learnable

    static DirectionalBank uniform(int count, double sigma = 2.0, int support = 9);
    void validate() const;
    int count() const { return static_cast<int>(directions.size()); }
};

/// Oriented 1-D Gaussian rasterized onto a support x support grid, sum 1.
BlurKernel directional_kernel(double theta, double sigma, int support);

/// One filtered copy of img per direction, scaled by phi_i.
std::vector<Image> apply_df_layer(const Image& img, const DirectionalBank& bank);

}  // namespace lmof
