#pragma once

#include <complex>
#include <vector>

#include "lmof/image.hpp"

namespace lmof::fft {

/// Half-plane r2c spectrum of a real w x h grid (row-major, h rows of w/2+1 bins).
struct Spectrum {
    int w = 0, h = 0;
    std::vector<std::complex<double>> c;

    int bins_x() const { return w / 2 + 1; }
    std::complex<double>& at(int kx, int ky) { return c[static_cast<size_t>(ky) * bins_x() + kx]; }
    std::complex<double> at(int kx, int ky) const { return c[static_cast<size_t>(ky) * bins_x() + kx]; }
};

Spectrum forward(const std::vector<double>& plane, int w, int h);
std::vector<double> inverse(const Spectrum& s);  // already divided by w*h

/// Kernel embedded into a w x h grid with its center tap at the origin.
Spectrum psf_otf(const BlurKernel& k, int w, int h);

/// |Dx|^2 + |Dy|^2 for periodic forward-difference gradients, per frequency bin.
std::vector<double> gradient_power(int w, int h);

Image convolve_periodic(const Image& img, const BlurKernel& k);

}  // namespace lmof::fft
