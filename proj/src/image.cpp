#include "lmof/image.hpp"

#include <algorithm>
#include <cmath>

#include "lmof/fftutil.hpp"

namespace lmof {

double BlurKernel::sum() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

void BlurKernel::normalize() {
    double s = sum();
    if (s <= 0.0) throw NumericalError("BlurKernel: non-positive mass");
    for (double& w : weights) w /= s;
}

bool BlurKernel::valid(double tol) const {
    if (side < 1 || side % 2 == 0) return false;
    for (double w : weights)
        if (!(w >= 0.0) || !std::isfinite(w)) return false;
    return std::abs(sum() - 1.0) <= tol;
}

static Image convolve_spatial(const Image& img, const BlurKernel& k, Boundary boundary) {
    Image out(img.width, img.height, img.channels);
    const int r = k.radius();
    const int W = img.width, H = img.height, C = img.channels;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int t = -r; t <= r; ++t) {
                    for (int s = -r; s <= r; ++s) {
                        const double kw = k.at(s + r, t + r);
                        if (kw == 0.0) continue;
                        int sx = x - s, sy = y - t;
                        if (boundary == Boundary::Replicate) {
                            sx = std::clamp(sx, 0, W - 1);
                            sy = std::clamp(sy, 0, H - 1);
                        } else {
                            sx = ((sx % W) + W) % W;
                            sy = ((sy % H) + H) % H;
                        }
                        acc += kw * img.at(sx, sy, c);
                    }
                }
                out.at(x, y, c) = acc;
            }
        }
    }
    return out;
}

Image convolve(const Image& img, const BlurKernel& k, Boundary boundary) {
    if (k.side > std::min(img.width, img.height))
        throw std::invalid_argument("convolve: kernel larger than image");
    if (boundary == Boundary::Periodic && k.side > kConvFftCrossover)
        return fft::convolve_periodic(img, k);
    return convolve_spatial(img, k, boundary);
}

Image derivative(const Image& img, Deriv which) {
    if (img.width < 3 || img.height < 3)
        throw std::invalid_argument("derivative: image smaller than 3x3");
    if (which == Deriv::Dxy) return derivative(derivative(img, Deriv::Dy), Deriv::Dx);
    Image out(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double v = 0.0;
                switch (which) {
                    case Deriv::Dx:
                        v = 0.5 * (img.atc(x + 1, y, c) - img.atc(x - 1, y, c));
                        break;
                    case Deriv::Dy:
                        v = 0.5 * (img.atc(x, y + 1, c) - img.atc(x, y - 1, c));
                        break;
                    case Deriv::Dxx:
                        v = img.atc(x + 1, y, c) - 2.0 * img.at(x, y, c) + img.atc(x - 1, y, c);
                        break;
                    case Deriv::Dyy:
                        v = img.atc(x, y + 1, c) - 2.0 * img.at(x, y, c) + img.atc(x, y - 1, c);
                        break;
                    case Deriv::Dxy:
                        break;  // handled above
                }
                out.at(x, y, c) = v;
            }
    return out;
}

std::pair<Image, Image> warp_bilinear(const Image& img, const FlowField& w) {
    if (img.width != w.width || img.height != w.height)
        throw std::invalid_argument("warp_bilinear: dimension mismatch");
    Image out(img.width, img.height, img.channels);
    Image mask(img.width, img.height, 1, 1.0);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double sx = x + w.u[w.idx(x, y)];
            const double sy = y + w.v[w.idx(x, y)];
            if (sx < 0.0 || sy < 0.0 || sx > img.width - 1 || sy > img.height - 1) {
                mask.at(x, y) = 0.0;
                for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(x, y, c);
                continue;
            }
            int x0 = static_cast<int>(std::floor(sx));
            int y0 = static_cast<int>(std::floor(sy));
            if (x0 == img.width - 1) --x0;
            if (y0 == img.height - 1) --y0;
            const double fx = sx - x0, fy = sy - y0;
            for (int c = 0; c < img.channels; ++c) {
                const double v00 = img.at(x0, y0, c), v10 = img.at(x0 + 1, y0, c);
                const double v01 = img.at(x0, y0 + 1, c), v11 = img.at(x0 + 1, y0 + 1, c);
                out.at(x, y, c) = (1 - fy) * ((1 - fx) * v00 + fx * v10) +
                                  fy * ((1 - fx) * v01 + fx * v11);
            }
        }
    return {out, mask};
}

std::pair<Image, Image> warp_bilinear_grad(const Image& img, const FlowField& w) {
    if (img.width != w.width || img.height != w.height)
        throw std::invalid_argument("warp_bilinear_grad: dimension mismatch");
    Image gx(img.width, img.height, img.channels);
    Image gy(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double sx = x + w.u[w.idx(x, y)];
            const double sy = y + w.v[w.idx(x, y)];
            if (sx < 0.0 || sy < 0.0 || sx > img.width - 1 || sy > img.height - 1)
                continue;
            int x0 = static_cast<int>(std::floor(sx));
            int y0 = static_cast<int>(std::floor(sy));
            if (x0 == img.width - 1) --x0;
            if (y0 == img.height - 1) --y0;
            const double fx = sx - x0, fy = sy - y0;
            for (int c = 0; c < img.channels; ++c) {
                const double v00 = img.at(x0, y0, c), v10 = img.at(x0 + 1, y0, c);
                const double v01 = img.at(x0, y0 + 1, c), v11 = img.at(x0 + 1, y0 + 1, c);
                gx.at(x, y, c) = (1 - fy) * (v10 - v00) + fy * (v11 - v01);
                gy.at(x, y, c) = (1 - fx) * (v01 - v00) + fx * (v11 - v10);
            }
        }
    return {gx, gy};
}

Image resample_to(const Image& img, int new_w, int new_h) {
    if (new_w < 1 || new_h < 1)
        throw std::invalid_argument("resample: degenerate output size");
    if (new_w == img.width && new_h == img.height) return img;
    Image out(new_w, new_h, img.channels);
    const double sx = static_cast<double>(img.width) / new_w;
    const double sy = static_cast<double>(img.height) / new_h;
    for (int y = 0; y < new_h; ++y)
        for (int x = 0; x < new_w; ++x) {
            double fxs = (x + 0.5) * sx - 0.5;
            double fys = (y + 0.5) * sy - 0.5;
            fxs = std::clamp(fxs, 0.0, img.width - 1.0);
            fys = std::clamp(fys, 0.0, img.height - 1.0);
            int x0 = std::min(static_cast<int>(fxs), img.width - 2);
            int y0 = std::min(static_cast<int>(fys), img.height - 2);
            if (img.width == 1) x0 = 0;
            if (img.height == 1) y0 = 0;
            const double fx = fxs - x0, fy = fys - y0;
            const int x1 = std::min(x0 + 1, img.width - 1);
            const int y1 = std::min(y0 + 1, img.height - 1);
            for (int c = 0; c < img.channels; ++c) {
                const double v = (1 - fy) * ((1 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c)) +
                                 fy * ((1 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c));
                out.at(x, y, c) = v;
            }
        }
    return out;
}

Image resample(const Image& img, double scale) {
    if (scale <= 0.0) throw std::invalid_argument("resample: scale must be positive");
    const int nw = static_cast<int>(std::lround(img.width * scale));
    const int nh = static_cast<int>(std::lround(img.height * scale));
    return resample_to(img, nw, nh);
}

FlowField resample_flow(const FlowField& w, int new_w, int new_h) {
    if (new_w < 1 || new_h < 1)
        throw std::invalid_argument("resample_flow: degenerate output size");
    Image packed(w.width, w.height, 2);
    for (size_t i = 0; i < w.pixels(); ++i) {
        packed.data[2 * i] = w.u[i];
        packed.data[2 * i + 1] = w.v[i];
    }
    Image r = resample_to(packed, new_w, new_h);
    FlowField out(new_w, new_h);
    const double ru = static_cast<double>(new_w) / w.width;
    const double rv = static_cast<double>(new_h) / w.height;
    for (size_t i = 0; i < out.pixels(); ++i) {
        out.u[i] = r.data[2 * i] * ru;
        out.v[i] = r.data[2 * i + 1] * rv;
    }
    return out;
}

std::vector<std::pair<int, int>> pyramid_sizes(int w, int h, double eta, int min_side) {
    if (!(eta > 0.0 && eta < 1.0))
        throw std::invalid_argument("pyramid: eta must lie in (0,1)");
    if (min_side < 8) throw std::invalid_argument("pyramid: min_side must be >= 8");
    std::vector<std::pair<int, int>> sizes;  // finest first
    double f = 1.0;
    for (int l = 0;; ++l, f *= eta) {
        const int lw = static_cast<int>(std::lround(w * f));
        const int lh = static_cast<int>(std::lround(h * f));
        if (l > 0 && (lw < min_side || lh < min_side)) break;
        if (l > 0 && lw == sizes.back().first && lh == sizes.back().second) continue;
        sizes.emplace_back(lw, lh);
    }
    return sizes;
}

Pyramid build_pyramid(const Image& img, double eta, int min_side) {
    auto sizes = pyramid_sizes(img.width, img.height, eta, min_side);
    Pyramid p;
    p.eta = eta;
    const size_t L = sizes.size();
    p.levels.resize(L);
    p.levels[L - 1] = img;
    // Coarser levels come from successive downsampling (band-limited),
    // with sizes pinned by the eta^l formula. sizes[l] is finest-index l,
    // i.e. levels[L-1-l].
    for (size_t i = L - 1; i-- > 0;) {
        const auto [lw, lh] = sizes[L - 1 - i];
        p.levels[i] = resample_to(p.levels[i + 1], lw, lh);
    }
    return p;
}

Image to_luminance(const Image& img) {
    if (img.channels == 1) return img;
    Image out(img.width, img.height, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            out.at(x, y) = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) +
                           0.114 * img.at(x, y, 2);
    return out;
}

}  // namespace lmof
