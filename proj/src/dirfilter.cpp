#include "lmof/dirfilter.hpp"

#include <cmath>

namespace lmof {

DirectionalBank DirectionalBank::uniform(int count, double sigma, int support) {
    DirectionalBank b;
    b.sigma = sigma;
    b.support = support;
    for (int i = 0; i < count; ++i) {
        b.directions.push_back(M_PI * i / count);
        b.phi.push_back(1.0);
    }
    b.validate();
    return b;
}

void DirectionalBank::validate() const {
    if (support < 3 || support % 2 == 0)
        throw std::invalid_argument("DirectionalBank: support must be odd and >= 3");
    if (sigma <= 0.0) throw std::invalid_argument("DirectionalBank: sigma must be positive");
    if (directions.empty() || directions.size() != phi.size())
        throw std::invalid_argument("DirectionalBank: phi/direction length mismatch");
    for (size_t i = 0; i < directions.size(); ++i) {
        if (directions[i] < 0.0 || directions[i] >= M_PI)
            throw std::invalid_argument("DirectionalBank: direction outside [0, pi)");
        if (i > 0 && directions[i] <= directions[i - 1])
            throw std::invalid_argument("DirectionalBank: directions must increase");
        if (!std::isfinite(phi[i]))
            throw std::invalid_argument("DirectionalBank: non-finite phi");
    }
}

BlurKernel directional_kernel(double theta, double sigma, int support) {
    if (support % 2 == 0 || support < 3)
        throw std::invalid_argument("directional_kernel: support must be odd and >= 3");
    if (sigma <= 0.0) throw std::invalid_argument("directional_kernel: sigma must be positive");
    BlurKernel k(support);
    const int r = support / 2;
    const double cx = std::cos(theta), cy = std::sin(theta);
    // Line reach: far enough to cover the grid diagonal and the Gaussian tail.
    const double reach = (r + 1) * std::sqrt(2.0);
    const int samples = 64 * support + 1;
    const double h = 2.0 * reach / (samples - 1);
    for (int n = 0; n < samples; ++n) {
        const double t = -reach + n * h;
        const double g = std::exp(-0.5 * t * t / (sigma * sigma));
        const double px = r + t * cx;
        const double py = r + t * cy;
        const int x0 = static_cast<int>(std::floor(px));
        const int y0 = static_cast<int>(std::floor(py));
        const double fx = px - x0, fy = py - y0;
        for (int dy = 0; dy <= 1; ++dy)
            for (int dx = 0; dx <= 1; ++dx) {
                const int x = x0 + dx, y = y0 + dy;
                if (x < 0 || x >= support || y < 0 || y >= support) continue;
                const double wgt = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
                k.at(x, y) += g * wgt;
            }
    }
    k.normalize();
    return k;
}

std::vector<Image> apply_df_layer(const Image& img, const DirectionalBank& bank) {
    bank.validate();
    std::vector<Image> out;
    out.reserve(bank.directions.size());
    for (size_t i = 0; i < bank.directions.size(); ++i) {
        const BlurKernel k = directional_kernel(bank.directions[i], bank.sigma, bank.support);
        Image filt = convolve(img, k, Boundary::Replicate);
        for (double& v : filt.data) v *= bank.phi[i];
        out.push_back(std::move(filt));
    }
    return out;
}

}  // namespace lmof
