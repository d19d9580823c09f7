#include "lmof/deconv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "lmof/fftutil.hpp"

namespace lmof {

void DeconvConfig::validate() const {
    for (double t : tau)
        if (t < 0.0) throw std::invalid_argument("DeconvConfig: negative tau");
    if (beta_k < 0.0 || beta_l < 0.0)
        throw std::invalid_argument("DeconvConfig: negative regularizer weight");
    if (kernel_side < 1 || kernel_side % 2 == 0)
        throw std::invalid_argument("DeconvConfig: kernel_side must be odd");
    if (iterations < 1) throw std::invalid_argument("DeconvConfig: iterations must be >= 1");
    if (inner_cg < 1) throw std::invalid_argument("DeconvConfig: inner_cg must be >= 1");
}

int scaled_kernel_side(int base_side, double scale) {
    int s = static_cast<int>(std::lround(base_side * scale));
    if (s < 3) s = 3;
    if (s % 2 == 0) ++s;
    return s;
}

static Image pad_taper(const Image& img, int p);

// Flat interior, raised-cosine ramp over the border band. Suppresses the
// residual model error of the padded periodic extension.
static void apply_border_window(Image& img, int margin) {
    margin = std::min({margin, img.width / 3, img.height / 3});
    if (margin < 1) return;
    auto ramp = [margin](int d) {
        if (d >= margin) return 1.0;
        return 0.5 * (1.0 - std::cos(M_PI * d / margin));
    };
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double w = ramp(std::min(x, img.width - 1 - x)) *
                             ramp(std::min(y, img.height - 1 - y));
            img.at(x, y) *= w;
        }
}

// Gather kernel-support coefficients from a full-size grid (origin-wrapped).
static void crop_kernel(const std::vector<double>& grid, int W, int H, BlurKernel& k) {
    const int r = k.radius();
    for (int t = -r; t <= r; ++t)
        for (int s = -r; s <= r; ++s) {
            const int x = ((s % W) + W) % W;
            const int y = ((t % H) + H) % H;
            k.at(s + r, t + r) = grid[static_cast<size_t>(y) * W + x];
        }
}

static std::vector<double> pad_kernel(const BlurKernel& k, int W, int H) {
    std::vector<double> grid(static_cast<size_t>(W) * H, 0.0);
    const int r = k.radius();
    for (int t = -r; t <= r; ++t)
        for (int s = -r; s <= r; ++s) {
            const int x = ((s % W) + W) % W;
            const int y = ((t % H) + H) % H;
            grid[static_cast<size_t>(y) * W + x] += k.at(s + r, t + r);
        }
    return grid;
}

BlurKernel estimate_kernel(const std::vector<Image>& I_hat, const std::vector<Image>& l_hat,
                           const DeconvConfig& cfg) {
    cfg.validate();
    if (I_hat.empty() || I_hat.size() != l_hat.size())
        throw std::invalid_argument("estimate_kernel: feature pair count mismatch");
    const int W = I_hat[0].width, H = I_hat[0].height;
    for (size_t i = 0; i < I_hat.size(); ++i)
        if (!I_hat[i].same_shape(l_hat[i]) || I_hat[i].width != W || I_hat[i].height != H ||
            I_hat[i].channels != 1)
            throw std::invalid_argument("estimate_kernel: feature shapes inconsistent");
    if (cfg.kernel_side > std::min(W, H))
        throw std::invalid_argument("estimate_kernel: kernel larger than feature images");

    double peak = 0.0;
    for (const Image& im : I_hat)
        for (double v : im.data) peak = std::max(peak, std::abs(v));
    for (const Image& im : l_hat)
        for (double v : im.data) peak = std::max(peak, std::abs(v));
    if (peak < 1e-12) throw NumericalError("estimate_kernel: all-zero feature images");

    const int n = cfg.kernel_side;
    const int r = n / 2;
    const size_t nk = static_cast<size_t>(n) * n;

    // Normal equations restricted to interior pixels where the convolution
    // model and the derivative stencils involve no boundary samples, so the
    // least-squares model is exact. Assembled per tap-offset delta with
    // integral images; A(k,k') depends on the offset through one product
    // image g(u) = l(u - delta) l(u) summed over a shifted rectangle.
    std::vector<double> A(nk * nk, 0.0), b(nk, 0.0);
    std::vector<double> integ(static_cast<size_t>(W + 1) * (H + 1));
    std::vector<double> g(static_cast<size_t>(W) * H);
    bool any_pixels = false;

    for (size_t o = 0; o < I_hat.size(); ++o) {
        Image dyl = derivative(l_hat[o], Deriv::Dy);
        Image dxl = derivative(l_hat[o], Deriv::Dx);
        Image dxy_l = derivative(dyl, Deriv::Dx);
        Image dyx_l = derivative(dxl, Deriv::Dy);
        Image mixed_l(W, H, 1);
        for (size_t i = 0; i < mixed_l.data.size(); ++i)
            mixed_l.data[i] = 0.5 * (dxy_l.data[i] + dyx_l.data[i]);
        const Image pairs_I[5] = {derivative(I_hat[o], Deriv::Dx), derivative(I_hat[o], Deriv::Dy),
                                  derivative(I_hat[o], Deriv::Dxx), derivative(I_hat[o], Deriv::Dyy),
                                  derivative(I_hat[o], Deriv::Dxy)};
        const Image pairs_l[5] = {std::move(dxl), std::move(dyl), derivative(l_hat[o], Deriv::Dxx),
                                  derivative(l_hat[o], Deriv::Dyy), std::move(mixed_l)};
        const int sten[5] = {1, 1, 1, 1, 2};
        for (int d = 0; d < 5; ++d) {
            if (cfg.tau[d] == 0.0) continue;
            const double tau = cfg.tau[d];
            const Image& bi = pairs_I[d];
            const Image& li = pairs_l[d];
            const int m0x = r + sten[d], m1x = W - 1 - r - sten[d];
            const int m0y = r + sten[d], m1y = H - 1 - r - sten[d];
            if (m0x > m1x || m0y > m1y) continue;  // image too small for this pair
            any_pixels = true;

            // rhs(k) = sum_rect bi(x) li(x - k)
            for (int ty = -r; ty <= r; ++ty)
                for (int tx = -r; tx <= r; ++tx) {
                    double acc = 0.0;
                    for (int y = m0y; y <= m1y; ++y)
                        for (int x = m0x; x <= m1x; ++x)
                            acc += bi.at(x, y) * li.at(x - tx, y - ty);
                    b[static_cast<size_t>(ty + r) * n + (tx + r)] += tau * acc;
                }

            // A(k, k') = sum_rect li(x - k) li(x - k'), grouped by delta = k - k'.
            for (int dy = -(n - 1); dy <= n - 1; ++dy)
                for (int dx = -(n - 1); dx <= n - 1; ++dx) {
                    // g(u) = li(u - delta) li(u) where both samples exist.
                    for (int y = 0; y < H; ++y)
                        for (int x = 0; x < W; ++x) {
                            const int ux = x - dx, uy = y - dy;
                            g[static_cast<size_t>(y) * W + x] =
                                (ux >= 0 && ux < W && uy >= 0 && uy < H)
                                    ? li.at(x, y) * li.at(ux, uy)
                                    : 0.0;
                        }
                    // summed-area table of g
                    for (int x = 0; x <= W; ++x) integ[x] = 0.0;
                    for (int y = 1; y <= H; ++y) {
                        integ[static_cast<size_t>(y) * (W + 1)] = 0.0;
                        double row = 0.0;
                        for (int x = 1; x <= W; ++x) {
                            row += g[static_cast<size_t>(y - 1) * W + (x - 1)];
                            integ[static_cast<size_t>(y) * (W + 1) + x] =
                                integ[static_cast<size_t>(y - 1) * (W + 1) + x] + row;
                        }
                    }
                    auto rect = [&](int x0, int y0, int x1, int y1) {  // inclusive
                        return integ[static_cast<size_t>(y1 + 1) * (W + 1) + (x1 + 1)] -
                               integ[static_cast<size_t>(y0) * (W + 1) + (x1 + 1)] -
                               integ[static_cast<size_t>(y1 + 1) * (W + 1) + x0] +
                               integ[static_cast<size_t>(y0) * (W + 1) + x0];
                    };
                    // k = k' + delta; iterate over k' within kernel support.
                    for (int ky = -r; ky <= r; ++ky)
                        for (int kx = -r; kx <= r; ++kx) {
                            const int kpx = kx - dx, kpy = ky - dy;  // k' = k - delta
                            if (kpx < -r || kpx > r || kpy < -r || kpy > r) continue;
                            // sum over x in rect of g(x - k')
                            const double s = rect(m0x - kpx, m0y - kpy, m1x - kpx, m1y - kpy);
                            const size_t ik = static_cast<size_t>(ky + r) * n + (kx + r);
                            const size_t ikp = static_cast<size_t>(kpy + r) * n + (kpx + r);
                            A[ik * nk + ikp] += tau * s;
                        }
                }
        }
    }
    if (!any_pixels)
        throw std::invalid_argument("estimate_kernel: images too small for the kernel support");

    // CG on the kernel coefficients.
    auto apply = [&](const std::vector<double>& x, std::vector<double>& out) {
        for (size_t i = 0; i < nk; ++i) {
            double acc = cfg.beta_k * x[i];
            const double* row = &A[i * nk];
            for (size_t j = 0; j < nk; ++j) acc += row[j] * x[j];
            out[i] = acc;
        }
    };
    std::vector<double> x(nk, 0.0), rres = b, p = b, Ap(nk);
    double rr = 0.0;
    for (double v : rres) rr += v * v;
    const double rr0 = rr;
    for (int it = 0; it < cfg.inner_cg && rr > 1e-24 * std::max(1.0, rr0); ++it) {
        apply(p, Ap);
        double pAp = 0.0;
        for (size_t i = 0; i < nk; ++i) pAp += p[i] * Ap[i];
        if (!(pAp > 0.0) || !std::isfinite(pAp))
            throw NumericalError("estimate_kernel: CG breakdown");
        const double alpha = rr / pAp;
        for (size_t i = 0; i < nk; ++i) {
            x[i] += alpha * p[i];
            rres[i] -= alpha * Ap[i];
        }
        double rr_new = 0.0;
        for (double v : rres) rr_new += v * v;
        const double beta = rr_new / rr;
        rr = rr_new;
        for (size_t i = 0; i < nk; ++i) p[i] = rres[i] + beta * p[i];
    }

    BlurKernel k(n);
    k.weights = x;
    double mx = 0.0;
    for (double& v : k.weights) {
        if (v < 0.0) v = 0.0;
        mx = std::max(mx, v);
    }
    for (double& v : k.weights)
        if (v < 0.05 * mx) v = 0.0;
    double mass = k.sum();
    if (mass <= 1e-12) return BlurKernel::delta(n);  // no blur evidence
    k.normalize();
    return k;
}

// ---------------------------------------------------------------------------
// Non-blind deconvolution

static std::vector<double> channel_vec(const Image& img, int c) {
    std::vector<double> p(img.pixels());
    for (size_t i = 0; i < p.size(); ++i) p[i] = img.data[i * img.channels + c];
    return p;
}

Image nonblind_deconv_periodic(const Image& img, const BlurKernel& k, double beta_l) {
    if (!k.valid()) throw std::invalid_argument("nonblind_deconv: invalid kernel");
    if (beta_l < 0.0) throw std::invalid_argument("nonblind_deconv: negative beta_l");
    const fft::Spectrum otf = fft::psf_otf(k, img.width, img.height);
    const std::vector<double> gp = fft::gradient_power(img.width, img.height);
    if (beta_l == 0.0)
        for (size_t i = 0; i < otf.c.size(); ++i)
            if (std::norm(otf.c[i]) < 1e-24)
                throw NumericalError("nonblind_deconv: singular spectrum with beta_l = 0");
    Image out(img.width, img.height, img.channels);
    for (int c = 0; c < img.channels; ++c) {
        fft::Spectrum s = fft::forward(channel_vec(img, c), img.width, img.height);
        for (size_t i = 0; i < s.c.size(); ++i)
            s.c[i] = std::conj(otf.c[i]) * s.c[i] / (std::norm(otf.c[i]) + beta_l * gp[i]);
        const std::vector<double> res = fft::inverse(s);
        for (size_t i = 0; i < img.pixels(); ++i) out.data[i * img.channels + c] = res[i];
    }
    return out;
}

// Replicate-pad, then blend opposite borders across the pad band so the
// periodic extension is continuous at the wrap seam.
static Image pad_taper(const Image& img, int p) {
    const int W = img.width, H = img.height;
    Image h(W + 2 * p, H, img.channels);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W + 2 * p; ++x) {
            const int ix = x - p;
            for (int c = 0; c < img.channels; ++c) {
                double v;
                if (ix >= 0 && ix < W) {
                    v = img.at(ix, y, c);
                } else {
                    const double near = img.at(ix < 0 ? 0 : W - 1, y, c);
                    const double far = img.at(ix < 0 ? W - 1 : 0, y, c);
                    const int d = ix < 0 ? -ix : ix - (W - 1);
                    const double a = 1.0 - 0.5 * d / p;
                    v = a * near + (1.0 - a) * far;
                }
                h.at(x, y, c) = v;
            }
        }
    Image out(W + 2 * p, H + 2 * p, img.channels);
    for (int y = 0; y < H + 2 * p; ++y)
        for (int x = 0; x < W + 2 * p; ++x) {
            const int iy = y - p;
            for (int c = 0; c < img.channels; ++c) {
                double v;
                if (iy >= 0 && iy < H) {
                    v = h.at(x, iy, c);
                } else {
                    const double near = h.at(x, iy < 0 ? 0 : H - 1, c);
                    const double far = h.at(x, iy < 0 ? H - 1 : 0, c);
                    const int d = iy < 0 ? -iy : iy - (H - 1);
                    const double a = 1.0 - 0.5 * d / p;
                    v = a * near + (1.0 - a) * far;
                }
                out.at(x, y, c) = v;
            }
        }
    return out;
}

Image nonblind_deconv(const Image& img, const BlurKernel& k, double beta_l) {
    const int p = std::min({k.side, img.width, img.height});
    const Image padded = pad_taper(img, p);
    const Image solved = nonblind_deconv_periodic(padded, k, beta_l);
    Image out(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(x, y, c) = solved.at(x + p, y + p, c);
    return out;
}

std::pair<Image, BlurKernel> deblur_iterate(const Image& img, const NetParams& params,
                                            const DeconvConfig& cfg,
                                            std::vector<Image>* latent_trace) {
    cfg.validate();
    params.validate();
    const Image lum = to_luminance(img);
    Image latent = img;
    BlurKernel kernel = BlurKernel::delta(cfg.kernel_side);
    for (int it = 0; it < cfg.iterations; ++it) {
        const int stage = std::min(it, static_cast<int>(params.stages.size()) - 1);
        Image input;
        if (params.arch.depth(stage) == 1) {
            input = lum;
        } else {
            input = Image(lum.width, lum.height, 2);
            const Image lat_lum = to_luminance(latent);
            for (size_t i = 0; i < lum.pixels(); ++i) {
                input.data[2 * i] = lum.data[i];
                input.data[2 * i + 1] = lat_lum.data[i];
            }
        }
        const HeadOutputs heads = net_forward(input, params, stage);
        kernel = estimate_kernel(heads.I_hat, heads.l_hat, cfg);
        latent = nonblind_deconv(img, kernel, cfg.beta_l);
        if (latent_trace) latent_trace->push_back(latent);
    }
    return {latent, kernel};
}

}  // namespace lmof
