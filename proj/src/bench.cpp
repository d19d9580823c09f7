#include "lmof/bench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "lmof/io.hpp"
#include "lmof/rng.hpp"

namespace fs = std::filesystem;

namespace lmof {

static double sample_kernel_bilinear(const BlurKernel& k, double x, double y) {
    if (x < 0.0 || y < 0.0 || x > k.side - 1 || y > k.side - 1) return 0.0;
    int x0 = std::min(static_cast<int>(x), k.side - 2);
    int y0 = std::min(static_cast<int>(y), k.side - 2);
    if (k.side == 1) return k.at(0, 0);
    if (x0 < 0) x0 = 0;
    if (y0 < 0) y0 = 0;
    const double fx = x - x0, fy = y - y0;
    return (1 - fy) * ((1 - fx) * k.at(x0, y0) + fx * k.at(x0 + 1, y0)) +
           fy * ((1 - fx) * k.at(x0, y0 + 1) + fx * k.at(x0 + 1, y0 + 1));
}

BlurKernel rotate_kernel(const BlurKernel& k, double angle) {
    BlurKernel out(k.side);
    const double c = std::cos(angle), s = std::sin(angle);
    const double ctr = k.radius();
    for (int y = 0; y < k.side; ++y)
        for (int x = 0; x < k.side; ++x) {
            const double dx = x - ctr, dy = y - ctr;
            // inverse rotation back into the source grid
            const double sx = ctr + c * dx + s * dy;
            const double sy = ctr - s * dx + c * dy;
            out.at(x, y) = sample_kernel_bilinear(k, sx, sy);
        }
    out.normalize();
    return out;
}

BlurKernel resize_kernel(const BlurKernel& k, int new_side) {
    if (new_side < 3 || new_side % 2 == 0)
        throw std::invalid_argument("resize_kernel: side must be odd and >= 3");
    if (new_side == k.side) return k;
    BlurKernel out(new_side);
    const double scale = static_cast<double>(k.side - 1) / std::max(1, new_side - 1);
    for (int y = 0; y < new_side; ++y)
        for (int x = 0; x < new_side; ++x)
            out.at(x, y) = sample_kernel_bilinear(k, x * scale, y * scale);
    out.normalize();
    return out;
}

std::vector<BlurKernel> synthetic_base_kernels(int count, int side, uint64_t seed) {
    std::vector<BlurKernel> out;
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        BlurKernel k(side);
        const double theta = rng.uniform(0.0, M_PI);
        const double len = rng.uniform(0.45, 0.9) * (side / 2);
        const double curve = rng.uniform(-0.15, 0.15);  // slight bend
        const double sigma = 0.6;
        const double cx = std::cos(theta), cy = std::sin(theta);
        const int samples = 400;
        for (int n = 0; n < samples; ++n) {
            const double t = -len + 2.0 * len * n / (samples - 1);
            const double off = curve * t * t / std::max(1.0, len);
            const double px = side / 2 + t * cx - off * cy;
            const double py = side / 2 + t * cy + off * cx;
            for (int dy = -2; dy <= 2; ++dy)
                for (int dx = -2; dx <= 2; ++dx) {
                    const int x = static_cast<int>(std::round(px)) + dx;
                    const int y = static_cast<int>(std::round(py)) + dy;
                    if (x < 0 || x >= side || y < 0 || y >= side) continue;
                    const double d2 = (x - px) * (x - px) + (y - py) * (y - py);
                    k.at(x, y) += std::exp(-0.5 * d2 / (sigma * sigma));
                }
        }
        k.normalize();
        out.push_back(std::move(k));
    }
    return out;
}

KernelBank build_kernel_bank(const std::vector<BlurKernel>& base, int rotations,
                             const std::vector<int>& sides, int denominator) {
    if (rotations < 1) throw std::invalid_argument("build_kernel_bank: rotations must be >= 1");
    for (int s : sides)
        if (s < 3 || s % 2 == 0)
            throw std::invalid_argument("build_kernel_bank: sides must be odd and >= 3");
    KernelBank bank;
    bank.base = base;
    for (size_t b = 0; b < base.size(); ++b)
        for (int n = 0; n < rotations; ++n) {
            const BlurKernel rotated = rotate_kernel(base[b], n * M_PI / denominator);
            for (int s : sides) {
                bank.variations.push_back(resize_kernel(rotated, s));
                bank.provenance.push_back({static_cast<int>(b), n, s});
            }
        }
    return bank;
}

NoiseKind parse_noise_kind(const std::string& name) {
    if (name == "gaussian") return NoiseKind::Gaussian;
    if (name == "salt_pepper" || name == "saltpepper") return NoiseKind::SaltPepper;
    throw std::invalid_argument("unknown noise kind: " + name);
}

std::string noise_kind_name(NoiseKind k) {
    return k == NoiseKind::Gaussian ? "gaussian" : "salt_pepper";
}

Image add_noise(const Image& img, NoiseKind kind, double level, uint64_t seed) {
    if (level < 0.0) throw std::invalid_argument("add_noise: negative level");
    Image out = img;
    if (level == 0.0) return out;
    Rng rng(seed);
    if (kind == NoiseKind::Gaussian) {
        for (double& v : out.data) v = std::clamp(v + level * rng.normal(), 0.0, 1.0);
    } else {
        for (size_t p = 0; p < out.pixels(); ++p) {
            if (rng.uniform() >= level) continue;
            const double v = rng.uniform() < 0.5 ? 0.0 : 1.0;
            for (int c = 0; c < out.channels; ++c) out.data[p * out.channels + c] = v;
        }
    }
    return out;
}

GtCase synthesize_pair(const Image& sharp1, const Image& sharp2, const FlowField& gt_flow,
                       const BlurKernel& k1, const BlurKernel& k2, NoiseKind kind, double level,
                       uint64_t seed, double* warp_residual) {
    if (!sharp1.same_shape(sharp2) || sharp1.width != gt_flow.width ||
        sharp1.height != gt_flow.height)
        throw std::invalid_argument("synthesize_pair: shape mismatch");
    // Consistency: frame 2 warped by the flow should reproduce frame 1.
    if (warp_residual) {
        auto [warped, mask] = warp_bilinear(sharp2, gt_flow);
        double res = 0.0;
        const int m = std::max(k1.radius(), k2.radius()) + 2;
        for (int y = m; y < sharp1.height - m; ++y)
            for (int x = m; x < sharp1.width - m; ++x) {
                if (mask.at(x, y) == 0.0) continue;
                for (int c = 0; c < sharp1.channels; ++c)
                    res = std::max(res, std::abs(warped.at(x, y, c) - sharp1.at(x, y, c)));
            }
        *warp_residual = res;
    }
    GtCase c;
    c.sharp1 = sharp1;
    c.sharp2 = sharp2;
    c.gt_flow = gt_flow;
    c.k1 = k1;
    c.k2 = k2;
    c.noise_kind = kind;
    c.noise_level = level;
    c.seed = seed;
    c.blurred1 = add_noise(convolve(sharp1, k1, Boundary::Replicate), kind, level, seed * 2 + 1);
    c.blurred2 = add_noise(convolve(sharp2, k2, Boundary::Replicate), kind, level, seed * 2 + 2);
    return c;
}

Image make_texture(int width, int height, uint64_t seed, int channels) {
    Rng rng(seed);
    Image base(width, height, channels);
    for (double& v : base.data) v = rng.uniform();
    // band-limit the noise
    BlurKernel g(5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x)
            g.at(x, y) = std::exp(-0.5 * ((x - 2) * (x - 2) + (y - 2) * (y - 2)) / 1.2);
    g.normalize();
    Image tex = convolve(base, g, Boundary::Replicate);
    // low-frequency structure on top
    for (int k = 0; k < 3; ++k) {
        const double fx = rng.uniform(0.02, 0.12), fy = rng.uniform(0.02, 0.12);
        const double ph = rng.uniform(0.0, 2.0 * M_PI), amp = rng.uniform(0.1, 0.25);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                for (int c = 0; c < channels; ++c)
                    tex.at(x, y, c) += amp * std::sin(2.0 * M_PI * (fx * x + fy * y) + ph + c);
    }
    double lo = tex.data[0], hi = tex.data[0];
    for (double v : tex.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi - lo > 1e-12 ? hi - lo : 1.0;
    for (double& v : tex.data) v = 0.05 + 0.9 * (v - lo) / span;
    return tex;
}

GtCase make_case(int width, int height, double flow_u, double flow_v, const BlurKernel& k1,
                 const BlurKernel& k2, NoiseKind kind, double level, uint64_t seed) {
    const Image sharp2 = make_texture(width, height, seed);
    const FlowField flow(width, height, flow_u, flow_v);
    const Image sharp1 = warp_bilinear(sharp2, flow).first;
    GtCase c = synthesize_pair(sharp1, sharp2, flow, k1, k2, kind, level, seed);
    std::ostringstream id;
    id << "case_" << seed;
    c.id = id.str();
    return c;
}

double aee(const FlowField& est, const FlowField& gt) {
    if (est.width != gt.width || est.height != gt.height)
        throw std::invalid_argument("aee: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < est.pixels(); ++i)
        acc += std::hypot(est.u[i] - gt.u[i], est.v[i] - gt.v[i]);
    return acc / static_cast<double>(est.pixels());
}

double aae(const FlowField& est, const FlowField& gt) {
    if (est.width != gt.width || est.height != gt.height)
        throw std::invalid_argument("aae: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < est.pixels(); ++i) {
        const double num = est.u[i] * gt.u[i] + est.v[i] * gt.v[i] + 1.0;
        const double den = std::sqrt(est.u[i] * est.u[i] + est.v[i] * est.v[i] + 1.0) *
                           std::sqrt(gt.u[i] * gt.u[i] + gt.v[i] * gt.v[i] + 1.0);
        acc += std::acos(std::clamp(num / den, -1.0, 1.0));
    }
    return acc / static_cast<double>(est.pixels()) * 180.0 / M_PI;
}

double psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
    double mse = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse <= 0.0) return 99.0;
    return 10.0 * std::log10(1.0 / mse);
}

void write_kernel_text(const BlurKernel& k, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f << k.side << " " << k.side << "\n";
    f.precision(17);
    for (int y = 0; y < k.side; ++y) {
        for (int x = 0; x < k.side; ++x) f << (x ? " " : "") << k.at(x, y);
        f << "\n";
    }
}

BlurKernel read_kernel_text(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open " + path);
    int s1 = 0, s2 = 0;
    f >> s1 >> s2;
    if (!f || s1 != s2 || s1 < 1 || s1 % 2 == 0)
        throw FormatError(path + ": bad kernel header");
    BlurKernel k(s1);
    for (double& w : k.weights) {
        f >> w;
        if (!f) throw FormatError(path + ": truncated kernel data");
    }
    return k;
}

void write_case(const GtCase& c, const std::string& dir) {
    fs::create_directories(dir);
    const std::string ext = c.sharp1.channels == 3 ? ".ppm" : ".pgm";
    write_image(dir + "/sharp1" + ext, c.sharp1);
    write_image(dir + "/sharp2" + ext, c.sharp2);
    write_image(dir + "/blurred1" + ext, c.blurred1);
    write_image(dir + "/blurred2" + ext, c.blurred2);
    write_flo(dir + "/gt.flo", c.gt_flow);
    write_kernel_text(c.k1, dir + "/k1.txt");
    write_kernel_text(c.k2, dir + "/k2.txt");
    std::ofstream m(dir + "/manifest.txt");
    if (!m) throw FormatError("cannot write manifest in " + dir);
    m << "id=" << c.id << "\n";
    m << "seed=" << c.seed << "\n";
    m << "noise_kind=" << noise_kind_name(c.noise_kind) << "\n";
    m << "noise_level=" << c.noise_level << "\n";
    m << "channels=" << c.sharp1.channels << "\n";
}

GtCase read_case(const std::string& dir) {
    std::ifstream m(dir + "/manifest.txt");
    if (!m) throw FormatError(dir + ": missing manifest.txt");
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(m, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    GtCase c;
    c.id = kv.count("id") ? kv["id"] : fs::path(dir).filename().string();
    c.seed = kv.count("seed") ? std::stoull(kv["seed"]) : 0;
    c.noise_kind = kv.count("noise_kind") ? parse_noise_kind(kv["noise_kind"]) : NoiseKind::Gaussian;
    c.noise_level = kv.count("noise_level") ? std::stod(kv["noise_level"]) : 0.0;
    const std::string ext = kv.count("channels") && kv["channels"] == "3" ? ".ppm" : ".pgm";
    c.sharp1 = read_image(dir + "/sharp1" + ext);
    c.sharp2 = read_image(dir + "/sharp2" + ext);
    c.blurred1 = read_image(dir + "/blurred1" + ext);
    c.blurred2 = read_image(dir + "/blurred2" + ext);
    c.gt_flow = read_flo(dir + "/gt.flo");
    c.k1 = read_kernel_text(dir + "/k1.txt");
    c.k2 = read_kernel_text(dir + "/k2.txt");
    return c;
}

}  // namespace lmof
