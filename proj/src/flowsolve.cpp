#include "lmof/flowsolve.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <sstream>

namespace lmof {

void FlowConfig::validate() const {
    if (gamma <= 0.0) throw std::invalid_argument("FlowConfig: gamma must be positive");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("FlowConfig: alpha outside [0,1]");
    if (epsilon <= 0.0) throw std::invalid_argument("FlowConfig: epsilon must be positive");
    if (cg_iters < 1) throw std::invalid_argument("FlowConfig: cg_iters must be >= 1");
    if (outer_iters < 1) throw std::invalid_argument("FlowConfig: outer_iters must be >= 1");
    deconv.validate();
}

std::pair<Image, Image> blur_match(const Image& I1, const Image& I2, const BlurKernel& k1,
                                   const BlurKernel& k2) {
    if (!I1.same_shape(I2)) throw std::invalid_argument("blur_match: shape mismatch");
    return {convolve(I1, k2, Boundary::Replicate), convolve(I2, k1, Boundary::Replicate)};
}

static inline double lorentzian(double q, double eps) { return std::log1p(q / (2.0 * eps * eps)); }
static inline double lorentzian_d(double q, double eps) { return 1.0 / (2.0 * eps * eps + q); }

double total_energy(const Image& B1, const Image& B2, const FlowField& w, const FlowConfig& cfg) {
    cfg.validate();
    if (!B1.same_shape(B2) || B1.width != w.width || B1.height != w.height)
        throw std::invalid_argument("total_energy: shape mismatch");
    const Image B1x = derivative(B1, Deriv::Dx), B1y = derivative(B1, Deriv::Dy);
    const Image B2x = derivative(B2, Deriv::Dx), B2y = derivative(B2, Deriv::Dy);
    auto [B2w, mask] = warp_bilinear(B2, w);
    const Image B2xw = warp_bilinear(B2x, w).first;
    const Image B2yw = warp_bilinear(B2y, w).first;

    double e_data = 0.0;
    const int C = B1.channels;
    for (int y = 0; y < B1.height; ++y)
        for (int x = 0; x < B1.width; ++x) {
            if (mask.at(x, y) == 0.0) continue;
            double qb = 0.0, qg = 0.0;
            for (int c = 0; c < C; ++c) {
                const double db = B2w.at(x, y, c) - B1.at(x, y, c);
                const double dgx = B2xw.at(x, y, c) - B1x.at(x, y, c);
                const double dgy = B2yw.at(x, y, c) - B1y.at(x, y, c);
                qb += db * db;
                qg += dgx * dgx + dgy * dgy;
            }
            e_data += lorentzian(qb, cfg.epsilon) + cfg.alpha * lorentzian(qg, cfg.epsilon);
        }

    double e_sm = 0.0;
    for (int y = 0; y < w.height; ++y)
        for (int x = 0; x < w.width; ++x) {
            auto cd = [&](const std::vector<double>& f, int dx, int dy) {
                const int xp = std::clamp(x + dx, 0, w.width - 1);
                const int yp = std::clamp(y + dy, 0, w.height - 1);
                const int xm = std::clamp(x - dx, 0, w.width - 1);
                const int ym = std::clamp(y - dy, 0, w.height - 1);
                return 0.5 * (f[w.idx(xp, yp)] - f[w.idx(xm, ym)]);
            };
            const double ux = cd(w.u, 1, 0), uy = cd(w.u, 0, 1);
            const double vx = cd(w.v, 1, 0), vy = cd(w.v, 0, 1);
            e_sm += lorentzian(ux * ux + uy * uy + vx * vx + vy * vy, cfg.epsilon);
        }
    return e_data + cfg.gamma * e_sm;
}

double energy_directional_derivative(const Image& B1, const Image& B2, const FlowField& w,
                                     const FlowField& p, const FlowConfig& cfg) {
    if (w.width != p.width || w.height != p.height)
        throw std::invalid_argument("energy_directional_derivative: flow shape mismatch");
    const Image B1x = derivative(B1, Deriv::Dx), B1y = derivative(B1, Deriv::Dy);
    const Image B2x = derivative(B2, Deriv::Dx), B2y = derivative(B2, Deriv::Dy);
    auto [B2w, mask] = warp_bilinear(B2, w);
    auto [g2x, g2y] = warp_bilinear_grad(B2, w);
    const Image B2xw = warp_bilinear(B2x, w).first;
    const Image B2yw = warp_bilinear(B2y, w).first;
    auto [gxx, gxy] = warp_bilinear_grad(B2x, w);
    auto [gyx, gyy] = warp_bilinear_grad(B2y, w);

    double d = 0.0;
    const int C = B1.channels;
    for (int y = 0; y < B1.height; ++y)
        for (int x = 0; x < B1.width; ++x) {
            if (mask.at(x, y) == 0.0) continue;
            const double pu = p.u[p.idx(x, y)], pv = p.v[p.idx(x, y)];
            double qb = 0.0, qg = 0.0, dqb = 0.0, dqg = 0.0;
            for (int c = 0; c < C; ++c) {
                const double db = B2w.at(x, y, c) - B1.at(x, y, c);
                const double dgx = B2xw.at(x, y, c) - B1x.at(x, y, c);
                const double dgy = B2yw.at(x, y, c) - B1y.at(x, y, c);
                qb += db * db;
                qg += dgx * dgx + dgy * dgy;
                dqb += 2.0 * db * (g2x.at(x, y, c) * pu + g2y.at(x, y, c) * pv);
                dqg += 2.0 * dgx * (gxx.at(x, y, c) * pu + gxy.at(x, y, c) * pv) +
                       2.0 * dgy * (gyx.at(x, y, c) * pu + gyy.at(x, y, c) * pv);
            }
            d += lorentzian_d(qb, cfg.epsilon) * dqb +
                 cfg.alpha * lorentzian_d(qg, cfg.epsilon) * dqg;
        }

    for (int y = 0; y < w.height; ++y)
        for (int x = 0; x < w.width; ++x) {
            auto cd = [&](const std::vector<double>& f, int dx, int dy) {
                const int xp = std::clamp(x + dx, 0, w.width - 1);
                const int yp = std::clamp(y + dy, 0, w.height - 1);
                const int xm = std::clamp(x - dx, 0, w.width - 1);
                const int ym = std::clamp(y - dy, 0, w.height - 1);
                return 0.5 * (f[w.idx(xp, yp)] - f[w.idx(xm, ym)]);
            };
            const double ux = cd(w.u, 1, 0), uy = cd(w.u, 0, 1);
            const double vx = cd(w.v, 1, 0), vy = cd(w.v, 0, 1);
            const double pux = cd(p.u, 1, 0), puy = cd(p.u, 0, 1);
            const double pvx = cd(p.v, 1, 0), pvy = cd(p.v, 0, 1);
            const double s = ux * ux + uy * uy + vx * vx + vy * vy;
            d += cfg.gamma * lorentzian_d(s, cfg.epsilon) * 2.0 *
                 (ux * pux + uy * puy + vx * pvx + vy * pvy);
        }
    return d;
}

std::vector<double> cg_solve(const LinearSystem& sys, int iters, double tol,
                             double* out_residual) {
    const size_t n = sys.dimension;
    std::vector<double> x(n, 0.0), r = sys.rhs, p = sys.rhs, Ap(n);
    double rr = 0.0;
    for (double v : r) rr += v * v;
    const double b2 = rr;
    if (b2 == 0.0) {
        if (out_residual) *out_residual = 0.0;
        return x;
    }
    double res = 1.0;
    for (int it = 0; it < iters; ++it) {
        res = std::sqrt(rr / b2);
        if (res <= tol) break;
        sys.apply(p, Ap);
        double pAp = 0.0;
        for (size_t i = 0; i < n; ++i) pAp += p[i] * Ap[i];
        if (!std::isfinite(pAp)) throw NumericalError("cg_solve: non-finite iterate");
        if (pAp <= 0.0) break;  // semi-definite stall
        const double alpha = rr / pAp;
        for (size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        double rr_new = 0.0;
        for (double v : r) {
            if (!std::isfinite(v)) throw NumericalError("cg_solve: non-finite residual");
            rr_new += v * v;
        }
        const double beta = rr_new / rr;
        rr = rr_new;
        res = std::sqrt(rr / b2);
        for (size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    if (out_residual) *out_residual = res;
    return x;
}

namespace {

// One lagged-nonlinearity linearization of the increment system at a given
// flow: Jacobi-scaled SPD operator, scaled right-hand side, and the scaling
// needed to map the solution back to pixel units.
struct IncrementAssembly {
    int W = 0, H = 0;
    double gamma = 0.0;
    std::vector<double> A11, A12, A22;  // per-pixel data normal terms
    std::vector<double> wS;             // smoothness robust weights
    std::vector<double> scale;          // Jacobi scaling, size 2N
    std::vector<double> rhs;            // scaled right-hand side, size 2N

    size_t idx(int x, int y) const { return static_cast<size_t>(y) * W + x; }
    double edge_w(size_t a, size_t b) const { return gamma * 0.5 * (wS[a] + wS[b]); }

    void apply_smooth(const double* f, double* out) const {
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const size_t i = idx(x, y);
                double acc = 0.0;
                if (x > 0) acc += edge_w(i, idx(x - 1, y)) * (f[i] - f[idx(x - 1, y)]);
                if (x < W - 1) acc += edge_w(i, idx(x + 1, y)) * (f[i] - f[idx(x + 1, y)]);
                if (y > 0) acc += edge_w(i, idx(x, y - 1)) * (f[i] - f[idx(x, y - 1)]);
                if (y < H - 1) acc += edge_w(i, idx(x, y + 1)) * (f[i] - f[idx(x, y + 1)]);
                out[i] += acc;
            }
    }
};

std::shared_ptr<IncrementAssembly> assemble_at(const Image& B1, const Image& B2,
                                               const FlowField& wc, const FlowConfig& cfg) {
    const int W = wc.width, H = wc.height, C = B1.channels;
    const size_t N = wc.pixels();

    const Image B1x = derivative(B1, Deriv::Dx), B1y = derivative(B1, Deriv::Dy);
    const Image Bx = warp_bilinear(derivative(B2, Deriv::Dx), wc).first;
    const Image By = warp_bilinear(derivative(B2, Deriv::Dy), wc).first;
    const Image Bxx = warp_bilinear(derivative(B2, Deriv::Dxx), wc).first;
    const Image Byy = warp_bilinear(derivative(B2, Deriv::Dyy), wc).first;
    const Image Bxy = warp_bilinear(derivative(B2, Deriv::Dxy), wc).first;
    auto [B2w, mask] = warp_bilinear(B2, wc);

    Image Bz(W, H, C), Bxz(W, H, C), Byz(W, H, C);
    for (size_t i = 0; i < Bz.data.size(); ++i) {
        Bz.data[i] = B2w.data[i] - B1.data[i];
        Bxz.data[i] = Bx.data[i] - B1x.data[i];
        Byz.data[i] = By.data[i] - B1y.data[i];
    }

    auto a = std::make_shared<IncrementAssembly>();
    a->W = W;
    a->H = H;
    a->gamma = cfg.gamma;
    a->A11.assign(N, 0.0);
    a->A12.assign(N, 0.0);
    a->A22.assign(N, 0.0);
    a->wS.assign(N, 0.0);

    // Lagged robust weights at the current flow.
    std::vector<double> wB(N, 0.0), wG(N, 0.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const size_t i = a->idx(x, y);
            if (mask.at(x, y) != 0.0) {
                double qb = 0.0, qg = 0.0;
                for (int c = 0; c < C; ++c) {
                    qb += Bz.at(x, y, c) * Bz.at(x, y, c);
                    qg += Bxz.at(x, y, c) * Bxz.at(x, y, c) + Byz.at(x, y, c) * Byz.at(x, y, c);
                }
                wB[i] = lorentzian_d(qb, cfg.epsilon);
                wG[i] = cfg.alpha * lorentzian_d(qg, cfg.epsilon);
            }
            auto cd = [&](const std::vector<double>& f, int dx, int dy) {
                const size_t ip = a->idx(std::clamp(x + dx, 0, W - 1), std::clamp(y + dy, 0, H - 1));
                const size_t im = a->idx(std::clamp(x - dx, 0, W - 1), std::clamp(y - dy, 0, H - 1));
                return 0.5 * (f[ip] - f[im]);
            };
            const double ux = cd(wc.u, 1, 0), uy = cd(wc.u, 0, 1);
            const double vx = cd(wc.v, 1, 0), vy = cd(wc.v, 0, 1);
            a->wS[i] = lorentzian_d(ux * ux + uy * uy + vx * vx + vy * vy, cfg.epsilon);
        }

    // Per-pixel data normal terms for the increment beyond wc.
    std::vector<double> bu(N, 0.0), bv(N, 0.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const size_t i = a->idx(x, y);
            if (mask.at(x, y) == 0.0) continue;
            for (int c = 0; c < C; ++c) {
                const double bx = Bx.at(x, y, c), by = By.at(x, y, c);
                const double bxx = Bxx.at(x, y, c), bxy = Bxy.at(x, y, c), byy = Byy.at(x, y, c);
                a->A11[i] += wB[i] * bx * bx + wG[i] * (bxx * bxx + bxy * bxy);
                a->A12[i] += wB[i] * bx * by + wG[i] * (bxx * bxy + bxy * byy);
                a->A22[i] += wB[i] * by * by + wG[i] * (bxy * bxy + byy * byy);
                bu[i] -= wB[i] * bx * Bz.at(x, y, c) +
                         wG[i] * (bxx * Bxz.at(x, y, c) + bxy * Byz.at(x, y, c));
                bv[i] -= wB[i] * by * Bz.at(x, y, c) +
                         wG[i] * (bxy * Bxz.at(x, y, c) + byy * Byz.at(x, y, c));
            }
        }

    a->rhs.assign(2 * N, 0.0);
    for (size_t i = 0; i < N; ++i) {
        a->rhs[i] = bu[i];
        a->rhs[N + i] = bv[i];
    }
    // Smoothness couples the increment to the current flow: move the -S wc
    // term to the right-hand side.
    {
        std::vector<double> su(N, 0.0), sv(N, 0.0);
        a->apply_smooth(wc.u.data(), su.data());
        a->apply_smooth(wc.v.data(), sv.data());
        for (size_t i = 0; i < N; ++i) {
            a->rhs[i] -= su[i];
            a->rhs[N + i] -= sv[i];
        }
    }

    // The robust weights span many orders of magnitude, which stalls plain
    // CG. Solve the Jacobi-scaled system S A S y = S b, dd = S y.
    a->scale.assign(2 * N, 1.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const size_t i = a->idx(x, y);
            double esum = 0.0;
            if (x > 0) esum += a->edge_w(i, a->idx(x - 1, y));
            if (x < W - 1) esum += a->edge_w(i, a->idx(x + 1, y));
            if (y > 0) esum += a->edge_w(i, a->idx(x, y - 1));
            if (y < H - 1) esum += a->edge_w(i, a->idx(x, y + 1));
            a->scale[i] = 1.0 / std::sqrt(std::max(a->A11[i] + esum, 1e-12));
            a->scale[N + i] = 1.0 / std::sqrt(std::max(a->A22[i] + esum, 1e-12));
        }
    for (size_t i = 0; i < 2 * N; ++i) a->rhs[i] *= a->scale[i];
    return a;
}

LinearSystem system_from(std::shared_ptr<IncrementAssembly> a) {
    const size_t N = a->A11.size();
    LinearSystem sys;
    sys.dimension = 2 * N;
    sys.rhs = a->rhs;
    sys.apply = [a, N](const std::vector<double>& xv, std::vector<double>& out) {
        std::vector<double> xs(2 * N);
        for (size_t i = 0; i < 2 * N; ++i) xs[i] = a->scale[i] * xv[i];
        out.assign(2 * N, 0.0);
        for (size_t i = 0; i < N; ++i) {
            out[i] = a->A11[i] * xs[i] + a->A12[i] * xs[N + i];
            out[N + i] = a->A12[i] * xs[i] + a->A22[i] * xs[N + i];
        }
        a->apply_smooth(xs.data(), out.data());
        a->apply_smooth(xs.data() + N, out.data() + N);
        for (size_t i = 0; i < 2 * N; ++i) out[i] *= a->scale[i];
    };
    return sys;
}

}  // namespace

LinearSystem assemble_increment_system(const Image& B1, const Image& B2, const FlowField& w,
                                       const FlowConfig& cfg) {
    cfg.validate();
    if (!B1.same_shape(B2) || B1.width != w.width || B1.height != w.height)
        throw std::invalid_argument("assemble_increment_system: shape mismatch");
    return system_from(assemble_at(B1, B2, w, cfg));
}

FlowField solve_increment(const Image& B1, const Image& B2, const FlowField& w,
                          const FlowConfig& cfg, double* out_residual,
                          std::vector<double>* energy_trace) {
    cfg.validate();
    if (!B1.same_shape(B2) || B1.width != w.width || B1.height != w.height)
        throw std::invalid_argument("solve_increment: shape mismatch");
    const int W = w.width, H = w.height;
    const size_t N = w.pixels();

    FlowField d(W, H);  // accumulated increment over the outer iterations
    double residual = 0.0;
    double e_cur = total_energy(B1, B2, w, cfg);

    for (int outer = 0; outer < cfg.outer_iters; ++outer) {
        // Relinearize at the current flow w + d.
        FlowField wc = w;
        for (size_t i = 0; i < N; ++i) {
            wc.u[i] += d.u[i];
            wc.v[i] += d.v[i];
        }
        const auto a = assemble_at(B1, B2, wc, cfg);
        const LinearSystem sys = system_from(a);

        const std::vector<double> sol = cg_solve(sys, cfg.cg_iters, cfg.cg_tol, &residual);
        FlowField dd(W, H);
        for (size_t i = 0; i < N; ++i) {
            dd.u[i] = a->scale[i] * sol[i];
            dd.v[i] = a->scale[N + i] * sol[N + i];
        }

        // The lagged linearization can overshoot on strongly nonlinear
        // residuals; halve the step until the energy stops increasing.
        bool accepted = false;
        for (int tries = 0; tries < 12; ++tries) {
            FlowField cand = wc;
            for (size_t i = 0; i < N; ++i) {
                cand.u[i] += dd.u[i];
                cand.v[i] += dd.v[i];
            }
            const double e_cand = total_energy(B1, B2, cand, cfg);
            if (e_cand <= e_cur + 1e-12) {
                for (size_t i = 0; i < N; ++i) {
                    d.u[i] += dd.u[i];
                    d.v[i] += dd.v[i];
                }
                e_cur = e_cand;
                accepted = true;
                break;
            }
            for (size_t i = 0; i < N; ++i) {
                dd.u[i] *= 0.5;
                dd.v[i] *= 0.5;
            }
        }
        if (energy_trace) energy_trace->push_back(e_cur);
        if (!accepted) break;  // no descent step found at this linearization
    }
    // A converged early exit leaves the energy flat for the remaining slots.
    if (energy_trace)
        while (static_cast<int>(energy_trace->size()) < cfg.outer_iters)
            energy_trace->push_back(e_cur);
    if (out_residual) *out_residual = residual;
    return d;
}

std::string FlowDiagnostics::to_text() const {
    std::ostringstream os;
    for (const LevelDiagnostics& l : levels) {
        os << "level " << l.level << " size " << l.width << "x" << l.height << " kernel_side "
           << l.kernel_side << " energies";
        for (double e : l.energies) os << ' ' << e;
        os << " cg_residual " << l.cg_residual << " wall_time_s " << l.wall_time_s << "\n";
    }
    return os.str();
}

static Image stack_lum(const Image& img, const Image& latent) {
    const Image a = to_luminance(img), b = to_luminance(latent);
    Image s(a.width, a.height, 2);
    for (size_t i = 0; i < a.pixels(); ++i) {
        s.data[2 * i] = a.data[i];
        s.data[2 * i + 1] = b.data[i];
    }
    return s;
}

FlowField estimate_flow(const Image& I1, const Image& I2, const FlowConfig& cfg,
                        FlowDiagnostics* diag) {
    cfg.validate();
    if (!I1.same_shape(I2)) throw std::invalid_argument("estimate_flow: shape mismatch");
    NetParams net = cfg.net;
    const bool needs_net = cfg.deblur_mode != DeblurMode::Off;
    if (needs_net && net.stages.empty()) net = NetParams::initialize(net.arch, 0x1a0fULL);

    Image F1 = I1, F2 = I2;  // frames fed to the pyramid pass
    bool per_level_deblur = false;
    BlurKernel full_k1, full_k2;
    switch (cfg.deblur_mode) {
        case DeblurMode::PerLevel:
            per_level_deblur = true;
            break;
        case DeblurMode::Independent: {
            auto [l1, k1] = deblur_iterate(I1, net, cfg.deconv);
            auto [l2, k2] = deblur_iterate(I2, net, cfg.deconv);
            full_k1 = k1;
            full_k2 = k2;
            if (diag) {
                diag->kernels1.push_back(k1);
                diag->kernels2.push_back(k2);
            }
            if (cfg.blur_match) {
                auto [b1, b2] = blur_match(I1, I2, k1, k2);
                F1 = b1;
                F2 = b2;
            } else {
                F1 = l1;
                F2 = l2;
            }
            break;
        }
        case DeblurMode::Off:
            break;
    }

    const Pyramid P1 = build_pyramid(F1, cfg.eta, cfg.min_side);
    const Pyramid P2 = build_pyramid(F2, cfg.eta, cfg.min_side);
    const int L = P1.num_levels();

    FlowField w(P1.coarsest().width, P1.coarsest().height);
    Image lat1 = P1.coarsest(), lat2 = P2.coarsest();

    for (int l = 0; l < L; ++l) {
        const auto t0 = std::chrono::steady_clock::now();
        const Image& lv1 = P1.levels[l];
        const Image& lv2 = P2.levels[l];
        if (l > 0) {
            w = resample_flow(w, lv1.width, lv1.height);
            if (per_level_deblur) {
                lat1 = resample_to(lat1, lv1.width, lv1.height);
                lat2 = resample_to(lat2, lv2.width, lv2.height);
            }
        }
        Image B1 = lv1, B2 = lv2;
        int kside = 0;
        if (per_level_deblur) {
            const double scale = static_cast<double>(lv1.width) / F1.width;
            DeconvConfig dc = cfg.deconv;
            dc.kernel_side =
                std::min(scaled_kernel_side(cfg.deconv.kernel_side, scale),
                         std::min(lv1.width, lv1.height) % 2 ? std::min(lv1.width, lv1.height)
                                                             : std::min(lv1.width, lv1.height) - 1);
            kside = dc.kernel_side;
            const int stage = net.arch.iterations - 1;
            const Image in1 = net.arch.depth(stage) == 2 ? stack_lum(lv1, lat1) : to_luminance(lv1);
            const Image in2 = net.arch.depth(stage) == 2 ? stack_lum(lv2, lat2) : to_luminance(lv2);
            const HeadOutputs h1 = net_forward(in1, net, stage);
            const HeadOutputs h2 = net_forward(in2, net, stage);
            const BlurKernel k1 = estimate_kernel(h1.I_hat, h1.l_hat, dc);
            const BlurKernel k2 = estimate_kernel(h2.I_hat, h2.l_hat, dc);
            lat1 = nonblind_deconv(lv1, k1, dc.beta_l);
            lat2 = nonblind_deconv(lv2, k2, dc.beta_l);
            if (diag) {
                diag->kernels1.push_back(k1);
                diag->kernels2.push_back(k2);
            }
            if (cfg.blur_match) {
                auto [b1, b2] = blur_match(lv1, lv2, k1, k2);
                B1 = std::move(b1);
                B2 = std::move(b2);
            }
        }

        double cg_res = 0.0;
        LevelDiagnostics ld;
        ld.level = l;
        ld.width = lv1.width;
        ld.height = lv1.height;
        ld.kernel_side = kside;
        const FlowField dw = solve_increment(B1, B2, w, cfg, &cg_res, &ld.energies);
        for (size_t i = 0; i < w.pixels(); ++i) {
            w.u[i] += dw.u[i];
            w.v[i] += dw.v[i];
        }
        ld.cg_residual = cg_res;
        ld.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (diag) diag->levels.push_back(ld);
    }
    return w;
}

}  // namespace lmof
