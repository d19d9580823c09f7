#include "lmof/fftutil.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

namespace lmof::fft {

// FFTW planning is not thread-safe; execution of independent plans is.
static std::mutex g_plan_mutex;

Spectrum forward(const std::vector<double>& plane, int w, int h) {
    Spectrum s;
    s.w = w;
    s.h = h;
    s.c.resize(static_cast<size_t>(h) * (w / 2 + 1));
    std::vector<double> in(plane);  // FFTW may clobber input
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lk(g_plan_mutex);
        plan = fftw_plan_dft_r2c_2d(h, w, in.data(),
                                    reinterpret_cast<fftw_complex*>(s.c.data()),
                                    FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lk(g_plan_mutex);
        fftw_destroy_plan(plan);
    }
    return s;
}

std::vector<double> inverse(const Spectrum& s) {
    std::vector<double> out(static_cast<size_t>(s.w) * s.h);
    std::vector<std::complex<double>> in(s.c);  // c2r clobbers input
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lk(g_plan_mutex);
        plan = fftw_plan_dft_c2r_2d(s.h, s.w,
                                    reinterpret_cast<fftw_complex*>(in.data()),
                                    out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lk(g_plan_mutex);
        fftw_destroy_plan(plan);
    }
    const double norm = 1.0 / (static_cast<double>(s.w) * s.h);
    for (double& v : out) v *= norm;
    return out;
}

Spectrum psf_otf(const BlurKernel& k, int w, int h) {
    std::vector<double> grid(static_cast<size_t>(w) * h, 0.0);
    const int r = k.radius();
    for (int t = -r; t <= r; ++t)
        for (int s = -r; s <= r; ++s) {
            const int x = ((s % w) + w) % w;
            const int y = ((t % h) + h) % h;
            grid[static_cast<size_t>(y) * w + x] += k.at(s + r, t + r);
        }
    return forward(grid, w, h);
}

std::vector<double> gradient_power(int w, int h) {
    std::vector<double> p(static_cast<size_t>(h) * (w / 2 + 1));
    for (int ky = 0; ky < h; ++ky)
        for (int kx = 0; kx < w / 2 + 1; ++kx) {
            const double sx = std::sin(M_PI * kx / w);
            const double sy = std::sin(M_PI * ky / h);
            p[static_cast<size_t>(ky) * (w / 2 + 1) + kx] = 4.0 * (sx * sx + sy * sy);
        }
    return p;
}

Image convolve_periodic(const Image& img, const BlurKernel& k) {
    Image out(img.width, img.height, img.channels);
    const Spectrum otf = psf_otf(k, img.width, img.height);
    std::vector<double> plane(img.pixels());
    for (int c = 0; c < img.channels; ++c) {
        for (size_t i = 0; i < img.pixels(); ++i) plane[i] = img.data[i * img.channels + c];
        Spectrum s = forward(plane, img.width, img.height);
        for (size_t i = 0; i < s.c.size(); ++i) s.c[i] *= otf.c[i];
        const std::vector<double> res = inverse(s);
        for (size_t i = 0; i < img.pixels(); ++i) out.data[i * img.channels + c] = res[i];
    }
    return out;
}

}  // namespace lmof::fft
