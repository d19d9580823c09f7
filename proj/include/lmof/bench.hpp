#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmof/image.hpp"

namespace lmof {

enum class NoiseKind { Gaussian, SaltPepper };

struct KernelProvenance {
    int base_index = 0;
    int rotation_index = 0;
    int target_side = 0;
};

struct KernelBank {
    std::vector<BlurKernel> base;
    std::vector<BlurKernel> variations;
    std::vector<KernelProvenance> provenance;
};

struct GtCase {
    std::string id;
    Image sharp1, sharp2;
    FlowField gt_flow;
    BlurKernel k1, k2;
    NoiseKind noise_kind = NoiseKind::Gaussian;
    double noise_level = 0.0;
    uint64_t seed = 0;
    Image blurred1, blurred2;
};

/// Kernel rotated about its center by bilinear resampling, mass renormalized.
BlurKernel rotate_kernel(const BlurKernel& k, double angle);
/// Kernel resized to a new odd side by bilinear resampling, renormalized.
BlurKernel resize_kernel(const BlurKernel& k, int new_side);

/// Near-linear synthetic base kernels (oriented lines with slight curvature),
/// standing in for kernels estimated from real footage.
std::vector<BlurKernel> synthetic_base_kernels(int count, int side, uint64_t seed);

/// Rotations by n*pi/denominator, n = 0..rotations-1, resized to each
/// requested side.
KernelBank build_kernel_bank(const std::vector<BlurKernel>& base, int rotations,
                             const std::vector<int>& sides, int denominator = 20);

Image add_noise(const Image& img, NoiseKind kind, double level, uint64_t seed);
NoiseKind parse_noise_kind(const std::string& name);
std::string noise_kind_name(NoiseKind k);

/// Blur + noise applied to a sharp pair with known flow. Warns (returns the
/// residual) if the pair is inconsistent with gt_flow; throws on shape errors.
GtCase synthesize_pair(const Image& sharp1, const Image& sharp2, const FlowField& gt_flow,
                       const BlurKernel& k1, const BlurKernel& k2, NoiseKind kind, double level,
                       uint64_t seed, double* warp_residual = nullptr);

/// Procedural textured image (filtered noise plus low-frequency structure).
Image make_texture(int width, int height, uint64_t seed, int channels = 1);

/// A full synthetic case: texture frame 2, frame 1 warped from it by gt_flow.
GtCase make_case(int width, int height, double flow_u, double flow_v, const BlurKernel& k1,
                 const BlurKernel& k2, NoiseKind kind, double level, uint64_t seed);

double aee(const FlowField& est, const FlowField& gt);
double aae(const FlowField& est, const FlowField& gt);  // degrees, (u,v,1) convention
double psnr(const Image& a, const Image& b);            // dB, unit peak

// Case directory layout: images, gt.flo, k1.txt/k2.txt, manifest key=value.
void write_case(const GtCase& c, const std::string& dir);
GtCase read_case(const std::string& dir);

void write_kernel_text(const BlurKernel& k, const std::string& path);
BlurKernel read_kernel_text(const std::string& path);

}  // namespace lmof
