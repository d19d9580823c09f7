#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lmof/deconv.hpp"
#include "lmof/featurenet.hpp"
#include "lmof/image.hpp"

namespace lmof {

enum class DeblurMode { PerLevel, Independent, Off };

struct FlowConfig {
    double gamma = 2.0;     // smoothness weight
    double alpha = 0.9;     // gradient-constancy weight, in [0,1]
    double epsilon = 5e-2;  // Lorentzian scale
    double eta = 0.8;       // pyramid downsampling factor
    int min_side = 16;
    int outer_iters = 5;    // lagged-nonlinearity iterations per level
    int cg_iters = 60;
    double cg_tol = 1e-6;
    DeblurMode deblur_mode = DeblurMode::PerLevel;
    bool blur_match = true;
    DeconvConfig deconv;
    NetParams net;  // empty stages => initialize(arch) on demand

    void validate() const;
};

/// Matrix-free SPD system; apply(x, out) computes out = A x.
struct LinearSystem {
    size_t dimension = 0;
    std::function<void(const std::vector<double>&, std::vector<double>&)> apply;
    std::vector<double> rhs;
};

struct LevelDiagnostics {
    int level = 0;
    int width = 0, height = 0;
    int kernel_side = 0;
    std::vector<double> energies;  // per outer iteration, after the update
    double cg_residual = 0.0;      // last solve, relative
    double wall_time_s = 0.0;
};

struct FlowDiagnostics {
    std::vector<LevelDiagnostics> levels;
    std::vector<BlurKernel> kernels1, kernels2;  // per level (when deblurring)
    std::string to_text() const;
};

/// Cross-convolution so both frames carry the same compound blur.
std::pair<Image, Image> blur_match(const Image& I1, const Image& I2, const BlurKernel& k1,
                                   const BlurKernel& k2);

/// Blur brightness + gradient constancy data term with Lorentzian penalties
/// plus gamma-weighted Lorentzian smoothness.
double total_energy(const Image& B1, const Image& B2, const FlowField& w, const FlowConfig& cfg);

/// Analytic directional derivative of total_energy at w along p, using the
/// exact bilinear-interpolant gradients.
double energy_directional_derivative(const Image& B1, const Image& B2, const FlowField& w,
                                     const FlowField& p, const FlowConfig& cfg);

/// Plain conjugate gradients; stops at iters or relative residual <= tol.
/// Returns the solution; final relative residual in *out_residual if given.
std::vector<double> cg_solve(const LinearSystem& sys, int iters, double tol,
                             double* out_residual = nullptr);

/// The Jacobi-scaled SPD increment system linearized at w; exposed so the
/// operator's symmetry and conditioning can be probed directly.
LinearSystem assemble_increment_system(const Image& B1, const Image& B2, const FlowField& w,
                                       const FlowConfig& cfg);

/// One level of the nested fixed-point scheme: lagged robust weights outside,
/// a CG solve for the flow increment inside.
FlowField solve_increment(const Image& B1, const Image& B2, const FlowField& w,
                          const FlowConfig& cfg, double* out_residual = nullptr,
                          std::vector<double>* energy_trace = nullptr);

/// Coarse-to-fine estimation with per-level (or one-shot, or no) deblurring.
FlowField estimate_flow(const Image& I1, const Image& I2, const FlowConfig& cfg,
                        FlowDiagnostics* diag = nullptr);

}  // namespace lmof
