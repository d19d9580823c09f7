#include "lmof/featurenet.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "lmof/rng.hpp"

namespace lmof {

DirectionalBank NetParams::bank(int stage) const {
    DirectionalBank b = DirectionalBank::uniform(arch.num_dirs, arch.df_sigma, arch.df_support);
    if (!stages.empty() && stage < static_cast<int>(stages.size()) &&
        !stages[stage].phi.empty())
        b.phi = stages[stage].phi;
    return b;
}

void NetParams::validate() const {
    if (arch.iterations < 1 || static_cast<int>(stages.size()) != arch.iterations)
        throw std::invalid_argument("NetParams: stage count != iterations");
    if (arch.cf_side % 2 == 0) throw std::invalid_argument("NetParams: cf_side must be odd");
    for (int s = 0; s < arch.iterations; ++s) {
        const StageParams& st = stages[s];
        if (arch.use_df && static_cast<int>(st.phi.size()) != arch.num_dirs)
            throw std::invalid_argument("NetParams: phi size mismatch");
        if (static_cast<int>(st.conv_filters.size()) != arch.num_cf)
            throw std::invalid_argument("NetParams: filter count mismatch");
        for (const auto& f : st.conv_filters)
            if (static_cast<int>(f.size()) != arch.cf_side * arch.cf_side)
                throw std::invalid_argument("NetParams: filter size mismatch");
        if (static_cast<int>(st.w1.size()) != arch.hidden * arch.num_maps(s))
            throw std::invalid_argument("NetParams: w1 size mismatch");
        if (static_cast<int>(st.lambda.size()) != arch.outputs * arch.hidden ||
            static_cast<int>(st.delta.size()) != arch.outputs * arch.hidden)
            throw std::invalid_argument("NetParams: head size mismatch");
        for (double v : st.phi)
            if (!std::isfinite(v)) throw std::invalid_argument("NetParams: non-finite phi");
    }
}

NetParams NetParams::zero_like(const NetParams& p) {
    NetParams z;
    z.arch = p.arch;
    z.stages.resize(p.stages.size());
    for (size_t s = 0; s < p.stages.size(); ++s) {
        z.stages[s].phi.assign(p.stages[s].phi.size(), 0.0);
        z.stages[s].conv_filters.assign(p.stages[s].conv_filters.size(),
                                        std::vector<double>(p.stages[s].conv_filters[0].size(), 0.0));
        z.stages[s].w1.assign(p.stages[s].w1.size(), 0.0);
        z.stages[s].lambda.assign(p.stages[s].lambda.size(), 0.0);
        z.stages[s].delta.assign(p.stages[s].delta.size(), 0.0);
    }
    return z;
}

// ---------------------------------------------------------------------------
// Initialization

static std::vector<double> gauss_filter(int side, double sigma) {
    std::vector<double> f(static_cast<size_t>(side) * side);
    const int r = side / 2;
    double sum = 0.0;
    for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x) {
            const double g = std::exp(-0.5 * (x * x + y * y) / (sigma * sigma));
            f[(y + r) * side + (x + r)] = g;
            sum += g;
        }
    for (double& v : f) v /= sum;
    return f;
}

// Filter prototypes: identity, unsharp masks, derivative stencils, smoothing.
static std::vector<double> filter_prototype(int j, int side, double scale) {
    std::vector<double> f(static_cast<size_t>(side) * side, 0.0);
    const int r = side / 2;
    auto set = [&](int x, int y, double v) { f[(y + r) * side + (x + r)] += v; };
    auto add_gauss = [&](double sigma, double w) {
        auto g = gauss_filter(side, sigma);
        for (size_t i = 0; i < f.size(); ++i) f[i] += w * g[i];
    };
    switch (j % 8) {
        case 0: set(0, 0, 1.0); break;                       // identity
        case 1: set(0, 0, 3.0); add_gauss(2.0, -2.0); break; // unsharp, sigma 2
        case 2: set(1, 0, 0.5); set(-1, 0, -0.5); break;     // d/dx
        case 3: set(0, 1, 0.5); set(0, -1, -0.5); break;     // d/dy
        case 4:                                              // laplacian
            set(1, 0, 1.0); set(-1, 0, 1.0); set(0, 1, 1.0); set(0, -1, 1.0);
            set(0, 0, -4.0);
            break;
        case 5: add_gauss(1.0, 1.0); break;                  // mild smoothing
        case 6: set(0, 0, 2.0); add_gauss(1.0, -1.0); break; // unsharp, sigma 1
        case 7: set(0, 0, 1.0); add_gauss(2.0, -1.0); break; // highpass
    }
    for (double& v : f) v *= scale;
    return f;
}

NetParams NetParams::initialize(const NetArch& arch, uint64_t seed) {
    NetParams p;
    p.arch = arch;
    p.stages.resize(arch.iterations);
    Rng rng(seed);
    const double s = 0.25;       // conv filter scale, keeps tanh near-linear
    const double inv = 1.0 / s;  // compensating head gain
    const double noise = 0.002;
    for (int st = 0; st < arch.iterations; ++st) {
        StageParams& sp = p.stages[st];
        const int depth = arch.depth(st);
        const int D = arch.dirs_effective();
        const int J = arch.num_cf;
        const int H = arch.hidden;
        const int M = arch.num_maps(st);
        if (arch.use_df)
            for (int d = 0; d < arch.num_dirs; ++d)
                sp.phi.push_back(1.0 + noise * rng.normal());
        for (int j = 0; j < J; ++j) {
            auto f = filter_prototype(j, arch.cf_side, s);
            for (double& v : f) v += noise * s * rng.normal();
            sp.conv_filters.push_back(std::move(f));
        }
        sp.w1.assign(static_cast<size_t>(H) * M, 0.0);
        auto midx = [&](int c, int d, int j) { return (c * D + d) * J + j; };
        for (int h = 0; h < H; ++h) {
            const int c = depth == 2 ? h % 2 : 0;
            const int j = (depth == 2 ? h / 2 : h) % J;
            for (int d = 0; d < D; ++d) sp.w1[h * M + midx(c, d, j)] = 1.0 / D;
            for (int m = 0; m < M; ++m) sp.w1[h * M + m] += noise * rng.normal() / D;
        }
        sp.lambda.assign(static_cast<size_t>(arch.outputs) * H, 0.0);
        sp.delta.assign(static_cast<size_t>(arch.outputs) * H, 0.0);
        // Heads form matched operator pairs so the kernel fit cancels the
        // shared feature operator; the latent head carries a small extra
        // sharpening bias that drives progressive refinement per stage.
        const double boost = 0.3;
        for (int o = 0; o < arch.outputs; ++o) {
            if (depth == 2) {
                if (o % 2 == 0) {
                    sp.lambda[o * H + 0] = inv;                  // ident @ blurred
                    if (3 < H) {
                        sp.delta[o * H + 1] = inv * (1.0 - boost);  // ident @ latent
                        sp.delta[o * H + 3] = inv * boost;          // unsharp @ latent
                    } else {
                        sp.delta[o * H + 1] = inv;
                    }
                } else {
                    sp.lambda[o * H + (2 < H ? 2 : 0)] = inv;    // unsharp @ blurred
                    sp.delta[o * H + (3 < H ? 3 : 1 % H)] = inv; // unsharp @ latent
                }
            } else {
                if (o % 2 == 0) {
                    sp.lambda[o * H + 0] = inv;                  // ident
                    sp.delta[o * H + (1 < H ? 1 : 0)] = inv;     // unsharp sigma 2
                } else {
                    sp.lambda[o * H + (1 < H ? 1 : 0)] = inv;    // unsharp sigma 2
                    sp.delta[o * H + (6 < H ? 6 : 1 % H)] = inv; // unsharp sigma 1
                }
            }
            for (int h = 0; h < H; ++h) {
                sp.lambda[o * H + h] += noise * rng.normal();
                sp.delta[o * H + h] += noise * rng.normal();
            }
        }
    }
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// Forward / backward

static Image conv2d(const Image& in, const std::vector<double>& k, int side) {
    Image out(in.width, in.height, 1);
    const int r = side / 2;
    const int W = in.width, H = in.height;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int t = -r; t <= r; ++t) {
                const int sy = std::clamp(y - t, 0, H - 1);
                const double* krow = &k[(t + r) * side];
                for (int s = -r; s <= r; ++s) {
                    const int sx = std::clamp(x - s, 0, W - 1);
                    acc += krow[s + r] * in.at(sx, sy);
                }
            }
            out.at(x, y) = acc;
        }
    return out;
}

static void conv2d_backward(const Image& in, const Image& dout, const std::vector<double>& k,
                            int side, std::vector<double>* dk, Image* din) {
    const int r = side / 2;
    const int W = in.width, H = in.height;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double g = dout.at(x, y);
            if (g == 0.0) continue;
            for (int t = -r; t <= r; ++t) {
                const int sy = std::clamp(y - t, 0, H - 1);
                for (int s = -r; s <= r; ++s) {
                    const int sx = std::clamp(x - s, 0, W - 1);
                    if (dk) (*dk)[(t + r) * side + (s + r)] += g * in.at(sx, sy);
                    if (din) din->at(sx, sy) += g * k[(t + r) * side + (s + r)];
                }
            }
        }
}

static Image channel_plane(const Image& img, int c) {
    Image p(img.width, img.height, 1);
    for (size_t i = 0; i < img.pixels(); ++i) p.data[i] = img.data[i * img.channels + c];
    return p;
}

HeadOutputs net_forward(const Image& input_stack, const NetParams& params, int stage,
                        ForwardCache* cache) {
    params.validate();
    if (stage < 0 || stage >= params.arch.iterations)
        throw std::invalid_argument("net_forward: bad stage index");
    const NetArch& a = params.arch;
    const int depth = a.depth(stage);
    if (input_stack.channels != depth)
        throw std::invalid_argument("net_forward: input depth mismatch");
    const StageParams& sp = params.stages[stage];
    const int D = a.dirs_effective();
    const int J = a.num_cf;
    const int H = a.hidden;
    const int M = a.num_maps(stage);
    const size_t N = input_stack.pixels();

    std::vector<Image> df_raw, df;  // depth*D planes
    std::vector<BlurKernel> dk;
    if (a.use_df) {
        const DirectionalBank bank = params.bank(stage);
        for (int d = 0; d < D; ++d)
            dk.push_back(directional_kernel(bank.directions[d], bank.sigma, bank.support));
    }
    for (int c = 0; c < depth; ++c) {
        Image plane = channel_plane(input_stack, c);
        for (int d = 0; d < D; ++d) {
            Image raw = a.use_df ? convolve(plane, dk[d], Boundary::Replicate) : plane;
            Image scaled = raw;
            if (a.use_df)
                for (double& v : scaled.data) v *= sp.phi[d];
            df_raw.push_back(std::move(raw));
            df.push_back(std::move(scaled));
        }
    }

    std::vector<Image> conv_out(M), tanh1(M);
    for (int c = 0; c < depth; ++c)
        for (int d = 0; d < D; ++d)
            for (int j = 0; j < J; ++j) {
                const int m = (c * D + d) * J + j;
                conv_out[m] = conv2d(df[c * D + d], sp.conv_filters[j], a.cf_side);
                tanh1[m] = conv_out[m];
                for (double& v : tanh1[m].data) v = std::tanh(v);
            }

    std::vector<Image> hidden(H), tanh2(H);
    for (int h = 0; h < H; ++h) {
        hidden[h] = Image(input_stack.width, input_stack.height, 1);
        for (int m = 0; m < M; ++m) {
            const double w = sp.w1[h * M + m];
            if (w == 0.0) continue;
            for (size_t i = 0; i < N; ++i) hidden[h].data[i] += w * tanh1[m].data[i];
        }
        tanh2[h] = hidden[h];
        for (double& v : tanh2[h].data) v = std::tanh(v);
    }

    HeadOutputs out;
    out.I_hat.resize(a.outputs);
    out.l_hat.resize(a.outputs);
    for (int o = 0; o < a.outputs; ++o) {
        out.I_hat[o] = Image(input_stack.width, input_stack.height, 1);
        out.l_hat[o] = Image(input_stack.width, input_stack.height, 1);
        for (int h = 0; h < H; ++h) {
            const double wl = sp.lambda[o * H + h], wd = sp.delta[o * H + h];
            for (size_t i = 0; i < N; ++i) {
                out.I_hat[o].data[i] += wl * tanh2[h].data[i];
                out.l_hat[o].data[i] += wd * tanh2[h].data[i];
            }
        }
    }

    if (cache) {
        cache->input = input_stack;
        cache->df_raw = std::move(df_raw);
        cache->conv_out = std::move(conv_out);
        cache->tanh1 = std::move(tanh1);
        cache->hidden = std::move(hidden);
        cache->tanh2 = std::move(tanh2);
    }
    return out;
}

void net_backward(const std::vector<Image>& dI_hat, const std::vector<Image>& dl_hat,
                  const NetParams& params, int stage, const ForwardCache& cache,
                  StageParams& grad) {
    const NetArch& a = params.arch;
    const StageParams& sp = params.stages[stage];
    const int depth = a.depth(stage);
    const int D = a.dirs_effective();
    const int J = a.num_cf;
    const int H = a.hidden;
    const int M = a.num_maps(stage);
    const size_t N = cache.input.pixels();

    // Heads -> tanh2
    std::vector<Image> dU(H, Image(cache.input.width, cache.input.height, 1));
    for (int o = 0; o < a.outputs; ++o)
        for (int h = 0; h < H; ++h) {
            double gl = 0.0, gd = 0.0;
            const double wl = sp.lambda[o * H + h], wd = sp.delta[o * H + h];
            for (size_t i = 0; i < N; ++i) {
                const double u = cache.tanh2[h].data[i];
                gl += dI_hat[o].data[i] * u;
                gd += dl_hat[o].data[i] * u;
                dU[h].data[i] += wl * dI_hat[o].data[i] + wd * dl_hat[o].data[i];
            }
            grad.lambda[o * H + h] += gl;
            grad.delta[o * H + h] += gd;
        }

    // tanh2 -> hidden -> tanh1
    std::vector<Image> dT(M, Image(cache.input.width, cache.input.height, 1));
    for (int h = 0; h < H; ++h) {
        Image dH(cache.input.width, cache.input.height, 1);
        for (size_t i = 0; i < N; ++i) {
            const double u = cache.tanh2[h].data[i];
            dH.data[i] = dU[h].data[i] * (1.0 - u * u);
        }
        for (int m = 0; m < M; ++m) {
            double gw = 0.0;
            const double w = sp.w1[h * M + m];
            for (size_t i = 0; i < N; ++i) {
                gw += dH.data[i] * cache.tanh1[m].data[i];
                dT[m].data[i] += w * dH.data[i];
            }
            grad.w1[h * M + m] += gw;
        }
    }

    // tanh1 -> conv filters and DF strengths
    for (int c = 0; c < depth; ++c)
        for (int d = 0; d < D; ++d) {
            Image dF(cache.input.width, cache.input.height, 1);
            const bool need_df_grad = a.use_df;
            for (int j = 0; j < J; ++j) {
                const int m = (c * D + d) * J + j;
                Image dG(cache.input.width, cache.input.height, 1);
                for (size_t i = 0; i < N; ++i) {
                    const double t = cache.tanh1[m].data[i];
                    dG.data[i] = dT[m].data[i] * (1.0 - t * t);
                }
                // df plane fed into the conv: phi-scaled raw
                Image fplane = cache.df_raw[c * D + d];
                if (a.use_df)
                    for (double& v : fplane.data) v *= sp.phi[d];
                conv2d_backward(fplane, dG, sp.conv_filters[j], a.cf_side,
                                &grad.conv_filters[j], need_df_grad ? &dF : nullptr);
            }
            if (need_df_grad) {
                double gphi = 0.0;
                for (size_t i = 0; i < N; ++i)
                    gphi += dF.data[i] * cache.df_raw[c * D + d].data[i];
                grad.phi[d] += gphi;
            }
        }
}

// ---------------------------------------------------------------------------
// Serialization

static constexpr char kMagic[4] = {'L', 'M', 'O', 'F'};
static constexpr uint32_t kVersion = 1;

template <typename T>
static void put(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
static T get(std::ifstream& f) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw FormatError("params file truncated");
    return v;
}

void save_params(const NetParams& p, const std::string& path) {
    p.validate();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f.write(kMagic, 4);
    put<uint32_t>(f, kVersion);
    put<uint32_t>(f, p.arch.num_dirs);
    put<uint32_t>(f, p.arch.num_cf);
    put<uint32_t>(f, p.arch.hidden);
    put<uint32_t>(f, p.arch.outputs);
    put<uint32_t>(f, p.arch.cf_side);
    put<uint32_t>(f, p.arch.df_support);
    put<uint32_t>(f, p.arch.iterations);
    put<uint32_t>(f, p.arch.use_df ? 1 : 0);
    put<double>(f, p.arch.df_sigma);
    for (const StageParams& sp : p.stages) {
        for (double v : sp.phi) put<double>(f, v);
        for (const auto& cf : sp.conv_filters)
            for (double v : cf) put<double>(f, v);
        for (double v : sp.w1) put<double>(f, v);
        for (double v : sp.lambda) put<double>(f, v);
        for (double v : sp.delta) put<double>(f, v);
    }
}

NetParams load_params(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(path + ": bad magic at offset 0");
    if (get<uint32_t>(f) != kVersion) throw FormatError(path + ": unsupported version");
    NetParams p;
    p.arch.num_dirs = static_cast<int>(get<uint32_t>(f));
    p.arch.num_cf = static_cast<int>(get<uint32_t>(f));
    p.arch.hidden = static_cast<int>(get<uint32_t>(f));
    p.arch.outputs = static_cast<int>(get<uint32_t>(f));
    p.arch.cf_side = static_cast<int>(get<uint32_t>(f));
    p.arch.df_support = static_cast<int>(get<uint32_t>(f));
    p.arch.iterations = static_cast<int>(get<uint32_t>(f));
    p.arch.use_df = get<uint32_t>(f) != 0;
    p.arch.df_sigma = get<double>(f);
    p.stages.resize(p.arch.iterations);
    for (int s = 0; s < p.arch.iterations; ++s) {
        StageParams& sp = p.stages[s];
        if (p.arch.use_df) {
            sp.phi.resize(p.arch.num_dirs);
            for (double& v : sp.phi) v = get<double>(f);
        }
        sp.conv_filters.resize(p.arch.num_cf);
        for (auto& cf : sp.conv_filters) {
            cf.resize(static_cast<size_t>(p.arch.cf_side) * p.arch.cf_side);
            for (double& v : cf) v = get<double>(f);
        }
        sp.w1.resize(static_cast<size_t>(p.arch.hidden) * p.arch.num_maps(s));
        for (double& v : sp.w1) v = get<double>(f);
        sp.lambda.resize(static_cast<size_t>(p.arch.outputs) * p.arch.hidden);
        for (double& v : sp.lambda) v = get<double>(f);
        sp.delta.resize(static_cast<size_t>(p.arch.outputs) * p.arch.hidden);
        for (double& v : sp.delta) v = get<double>(f);
    }
    p.validate();
    return p;
}

void export_params_text(const NetParams& p, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f << "lmof_params version " << kVersion << "\n";
    f << "dirs " << p.arch.num_dirs << " cf " << p.arch.num_cf << " hidden " << p.arch.hidden
      << " outputs " << p.arch.outputs << " cf_side " << p.arch.cf_side << " df_support "
      << p.arch.df_support << " iterations " << p.arch.iterations << " use_df "
      << (p.arch.use_df ? 1 : 0) << " df_sigma " << p.arch.df_sigma << "\n";
    for (size_t s = 0; s < p.stages.size(); ++s) {
        const StageParams& sp = p.stages[s];
        f << "stage " << s << "\n";
        f << "phi";
        for (double v : sp.phi) f << ' ' << v;
        f << "\n";
        for (size_t j = 0; j < sp.conv_filters.size(); ++j) {
            f << "cf " << j;
            for (double v : sp.conv_filters[j]) f << ' ' << v;
            f << "\n";
        }
        f << "w1";
        for (double v : sp.w1) f << ' ' << v;
        f << "\nlambda";
        for (double v : sp.lambda) f << ' ' << v;
        f << "\ndelta";
        for (double v : sp.delta) f << ' ' << v;
        f << "\n";
    }
}

}  // namespace lmof
