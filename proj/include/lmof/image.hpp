#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace lmof {

// Thrown when an operation cannot proceed for numerical reasons
// (CG breakdown, singular deconvolution, degenerate inputs).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown on malformed files (bad magic, truncation, inconsistent dims).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Row-major floating point image, 1 or 3 channels, nominal range [0,1].
/// Solver intermediates may leave the range; nothing clamps until output.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c = 1, double fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {
        if (w < 1 || h < 1 || (c != 1 && c != 3 && c != 2))
            throw std::invalid_argument("Image: bad dimensions");
    }

    size_t size() const { return data.size(); }
    size_t pixels() const { return static_cast<size_t>(width) * height; }

    double& at(int x, int y, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    // Replicate-clamped access.
    double atc(int x, int y, int c = 0) const {
        x = x < 0 ? 0 : (x >= width ? width - 1 : x);
        y = y < 0 ? 0 : (y >= height ? height - 1 : y);
        return at(x, y, c);
    }

    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

/// Point-spread function: odd side, non-negative, sums to one.
struct BlurKernel {
    int side = 1;
    std::vector<double> weights;  // side*side, row-major

    BlurKernel() : weights(1, 1.0) {}
    explicit BlurKernel(int s, double fill = 0.0)
        : side(s), weights(static_cast<size_t>(s) * s, fill) {
        if (s < 1 || s % 2 == 0)
            throw std::invalid_argument("BlurKernel: side must be odd and >= 1");
    }

    static BlurKernel delta(int s) {
        BlurKernel k(s);
        k.weights[static_cast<size_t>(s) * s / 2] = 1.0;
        return k;
    }

    int radius() const { return side / 2; }
    double& at(int x, int y) { return weights[static_cast<size_t>(y) * side + x]; }
    double at(int x, int y) const { return weights[static_cast<size_t>(y) * side + x]; }

    double sum() const;
    void normalize();                 // divide by sum; throws if sum <= 0
    bool valid(double tol = 1e-6) const;  // non-negative and sums to 1
};

/// Dense displacement field w = (u, v) in pixels.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<double> u, v;

    FlowField() = default;
    FlowField(int w, int h, double du = 0.0, double dv = 0.0)
        : width(w), height(h),
          u(static_cast<size_t>(w) * h, du), v(static_cast<size_t>(w) * h, dv) {}

    size_t pixels() const { return static_cast<size_t>(width) * height; }
    size_t idx(int x, int y) const { return static_cast<size_t>(y) * width + x; }
};

/// Coarse-to-fine image stack; levels[0] is the coarsest.
struct Pyramid {
    std::vector<Image> levels;
    double eta = 0.8;

    int num_levels() const { return static_cast<int>(levels.size()); }
    const Image& coarsest() const { return levels.front(); }
    const Image& finest() const { return levels.back(); }
};

enum class Boundary { Replicate, Periodic };
enum class Deriv { Dx, Dy, Dxx, Dyy, Dxy };

// Spatial/frequency crossover: kernels wider than this go through the FFT path.
inline constexpr int kConvFftCrossover = 15;

Image convolve(const Image& img, const BlurKernel& k, Boundary boundary = Boundary::Replicate);
Image derivative(const Image& img, Deriv which);
// Bilinear sample of img at x + w(x); mask(x)=1 where the sample landed inside.
std::pair<Image, Image> warp_bilinear(const Image& img, const FlowField& w);
// Analytic gradient of the bilinear interpolant at x + w(x); returns (d/dx, d/dy) images.
std::pair<Image, Image> warp_bilinear_grad(const Image& img, const FlowField& w);
Image resample(const Image& img, double scale);
Image resample_to(const Image& img, int new_w, int new_h);
FlowField resample_flow(const FlowField& w, int new_w, int new_h);
Pyramid build_pyramid(const Image& img, double eta, int min_side);
std::vector<std::pair<int, int>> pyramid_sizes(int w, int h, double eta, int min_side);

Image to_luminance(const Image& img);

}  // namespace lmof
