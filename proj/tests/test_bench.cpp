#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "lmof/bench.hpp"
#include "lmof/flowsolve.hpp"
#include "lmof/rng.hpp"
#include "oracles.hpp"

using namespace lmof;

TEST_CASE("rotate_kernel: zero angle is the identity to 1e-6") {
    const BlurKernel k = synthetic_base_kernels(1, 9, 1)[0];
    const BlurKernel r = rotate_kernel(k, 0.0);
    CHECK(oracle::max_abs_diff(k.weights, r.weights) < 1e-6);
}

TEST_CASE("rotate_kernel: a horizontal line rotated pi/2 equals its transpose") {
    // Build an exactly horizontal line kernel.
    BlurKernel line(9, 0.0);
    for (int x = 1; x < 8; ++x) line.at(x, 4) = 1.0;
    line.normalize();
    const BlurKernel rot = rotate_kernel(line, M_PI / 2);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x) CHECK(std::fabs(rot.at(x, y) - line.at(y, x)) <= 1e-3);
}

TEST_CASE("rotate_kernel: output satisfies kernel invariants for many angles") {
    const BlurKernel k = synthetic_base_kernels(1, 11, 2)[0];
    for (int n = 0; n < 10; ++n) {
        const BlurKernel r = rotate_kernel(k, M_PI * n / 20.0);
        CHECK(r.valid(1e-6));
        for (double w : r.weights) CHECK(w >= 0.0);
    }
}

TEST_CASE("resize_kernel: same side is the identity; resized kernels stay valid") {
    const BlurKernel k = synthetic_base_kernels(1, 9, 3)[0];
    CHECK(oracle::max_abs_diff(resize_kernel(k, 9).weights, k.weights) < 1e-9);
    for (int side : {5, 7, 13, 15}) {
        const BlurKernel r = resize_kernel(k, side);
        CHECK(r.side == side);
        CHECK(r.valid(1e-6));
    }
}

TEST_CASE("build_kernel_bank: 16 base x 10 rotations = 160 variations, all valid") {
    const auto base = synthetic_base_kernels(16, 15, 4);
    const KernelBank bank = build_kernel_bank(base, 10, {15});
    REQUIRE(bank.variations.size() == 160);
    REQUIRE(bank.provenance.size() == 160);
    for (const BlurKernel& k : bank.variations) {
        CHECK(k.valid(1e-6));
        for (double w : k.weights) CHECK(w >= 0.0);
    }
    // provenance covers every (base, rotation) combination exactly once
    std::vector<int> seen(160, 0);
    for (const auto& p : bank.provenance) {
        CHECK(p.target_side == 15);
        ++seen[p.base_index * 10 + p.rotation_index];
    }
    for (int s : seen) CHECK(s == 1);
}

TEST_CASE("build_kernel_bank: rejects even sides") {
    const auto base = synthetic_base_kernels(1, 9, 5);
    CHECK_THROWS_AS(build_kernel_bank(base, 2, {8}), std::invalid_argument);
}

TEST_CASE("add_noise: level zero leaves the image unchanged") {
    const Image img = make_texture(32, 32, 6);
    for (NoiseKind k : {NoiseKind::Gaussian, NoiseKind::SaltPepper}) {
        const Image out = add_noise(img, k, 0.0, 9);
        CHECK(oracle::max_abs_diff(out.data, img.data) < 1e-12);
    }
}

TEST_CASE("add_noise: salt-pepper 0.15 alters 14-16% of pixels, 5 seeds") {
    Image img(256, 256, 1, 0.5);
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const Image out = add_noise(img, NoiseKind::SaltPepper, 0.15, 100 + seed);
        int altered = 0;
        for (size_t i = 0; i < img.size(); ++i)
            if (out.data[i] != img.data[i]) {
                CHECK((out.data[i] == 0.0 || out.data[i] == 1.0));
                ++altered;
            }
        const double frac = static_cast<double>(altered) / img.size();
        CHECK(frac >= 0.14);
        CHECK(frac <= 0.16);
    }
}

TEST_CASE("add_noise: seeded runs are bit-reproducible, different seeds differ") {
    const Image img = make_texture(48, 48, 7);
    const Image a = add_noise(img, NoiseKind::Gaussian, 0.01, 42);
    const Image b = add_noise(img, NoiseKind::Gaussian, 0.01, 42);
    const Image c = add_noise(img, NoiseKind::Gaussian, 0.01, 43);
    CHECK(a.data == b.data);
    CHECK(a.data != c.data);
}

TEST_CASE("add_noise: gaussian output stays within [0,1]") {
    const Image img = make_texture(32, 32, 8);
    const Image out = add_noise(img, NoiseKind::Gaussian, 0.2, 11);
    for (double v : out.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("parse_noise_kind round-trips and rejects unknown names") {
    CHECK(parse_noise_kind(noise_kind_name(NoiseKind::Gaussian)) == NoiseKind::Gaussian);
    CHECK(parse_noise_kind(noise_kind_name(NoiseKind::SaltPepper)) == NoiseKind::SaltPepper);
    CHECK_THROWS_AS(parse_noise_kind("poisson"), std::invalid_argument);
}

TEST_CASE("synthesize_pair: delta kernels, zero noise, zero flow reproduce the input") {
    const Image sharp = make_texture(32, 32, 9);
    const GtCase c = synthesize_pair(sharp, sharp, FlowField(32, 32, 0.0, 0.0),
                                     BlurKernel::delta(3), BlurKernel::delta(3),
                                     NoiseKind::Gaussian, 0.0, 5);
    CHECK(oracle::max_abs_diff(c.blurred1.data, sharp.data) < 1e-12);
    CHECK(oracle::max_abs_diff(c.blurred2.data, sharp.data) < 1e-12);
}

TEST_CASE("synthesize_pair: same-latent pair satisfies the zero-motion matching identity") {
    const Image latent = make_texture(48, 48, 10);
    const BlurKernel k1 = rotate_kernel(synthetic_base_kernels(1, 9, 11)[0], M_PI / 8);
    const BlurKernel k2 = rotate_kernel(synthetic_base_kernels(1, 9, 12)[0], M_PI / 3);
    const GtCase c = synthesize_pair(latent, latent, FlowField(48, 48, 0.0, 0.0), k1, k2,
                                     NoiseKind::Gaussian, 0.0, 6);
    auto [B1, B2] = blur_match(c.blurred1, c.blurred2, k1, k2);
    const int m = 9;
    for (int y = m; y < 48 - m; ++y)
        for (int x = m; x < 48 - m; ++x) CHECK(std::fabs(B1.at(x, y) - B2.at(x, y)) <= 1e-4);
}

TEST_CASE("synthesize_pair: translation pair passes the warp consistency check") {
    const GtCase c = make_case(64, 64, 3.0, 0.0, BlurKernel::delta(3), BlurKernel::delta(3),
                               NoiseKind::Gaussian, 0.0, 13);
    double residual = 1e9;
    synthesize_pair(c.sharp1, c.sharp2, c.gt_flow, c.k1, c.k2, NoiseKind::Gaussian, 0.0, 13,
                    &residual);
    CHECK(residual <= 1e-3);
}

TEST_CASE("synthesize_pair: rejects shape mismatch") {
    CHECK_THROWS_AS(synthesize_pair(Image(8, 8, 1), Image(9, 8, 1), FlowField(8, 8),
                                    BlurKernel::delta(3), BlurKernel::delta(3),
                                    NoiseKind::Gaussian, 0.0, 1),
                    std::invalid_argument);
}

TEST_CASE("aee/aae: exact flow gives zero error") {
    FlowField f(16, 16, 1.5, -0.5);
    CHECK(aee(f, f) == 0.0);
    CHECK(aae(f, f) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("aee: constant (3,4) offset gives exactly 5") {
    Rng rng(14);
    FlowField gt(16, 16);
    for (size_t i = 0; i < gt.pixels(); ++i) {
        gt.u[i] = rng.uniform() - 0.5;
        gt.v[i] = rng.uniform() - 0.5;
    }
    FlowField est = gt;
    for (size_t i = 0; i < est.pixels(); ++i) {
        est.u[i] += 3.0;
        est.v[i] += 4.0;
    }
    CHECK(aee(est, gt) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("aae: unit horizontal flow against zero flow is 45 degrees") {
    const FlowField gt(8, 8, 0.0, 0.0);
    const FlowField est(8, 8, 1.0, 0.0);
    CHECK(aae(est, gt) == doctest::Approx(45.0).epsilon(1e-9));
}

TEST_CASE("aee/aae: permutation invariance over pixels") {
    Rng rng(15);
    const int n = 6;
    FlowField gt(n, n), est(n, n);
    for (size_t i = 0; i < gt.pixels(); ++i) {
        gt.u[i] = rng.uniform();
        gt.v[i] = rng.uniform();
        est.u[i] = rng.uniform();
        est.v[i] = rng.uniform();
    }
    FlowField gtp = gt, estp = est;
    // reverse both fields with the same permutation
    std::reverse(gtp.u.begin(), gtp.u.end());
    std::reverse(gtp.v.begin(), gtp.v.end());
    std::reverse(estp.u.begin(), estp.u.end());
    std::reverse(estp.v.begin(), estp.v.end());
    CHECK(aee(est, gt) == doctest::Approx(aee(estp, gtp)).epsilon(1e-12));
    CHECK(aae(est, gt) == doctest::Approx(aae(estp, gtp)).epsilon(1e-12));
}

TEST_CASE("aee/aae: reject shape mismatch") {
    CHECK_THROWS_AS(aee(FlowField(4, 4), FlowField(5, 4)), std::invalid_argument);
    CHECK_THROWS_AS(aae(FlowField(4, 4), FlowField(5, 4)), std::invalid_argument);
}

TEST_CASE("psnr: identical images are infinite-like, known MSE matches") {
    Image a(8, 8, 1, 0.5), b(8, 8, 1, 0.6);
    // MSE = 0.01 -> PSNR = 10 log10(1/0.01) = 20 dB
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-9));
    CHECK(psnr(a, a) >= 99.0);  // zero-MSE sentinel
}

TEST_CASE("make_case: blurred frames equal noise(kernel * sharp)") {
    const BlurKernel k1 = synthetic_base_kernels(1, 7, 16)[0];
    const BlurKernel k2 = synthetic_base_kernels(1, 7, 17)[0];
    const GtCase c = make_case(48, 48, 1.0, 0.5, k1, k2, NoiseKind::Gaussian, 0.01, 21);
    CHECK(c.gt_flow.width == 48);
    // re-derive blurred1 from the stored sharp frame, kernel, and seed
    const Image b1 = add_noise(convolve(c.sharp1, c.k1, Boundary::Replicate), c.noise_kind,
                               c.noise_level, c.seed * 2 + 1);
    const Image b2 = add_noise(convolve(c.sharp2, c.k2, Boundary::Replicate), c.noise_kind,
                               c.noise_level, c.seed * 2 + 2);
    CHECK(oracle::max_abs_diff(b1.data, c.blurred1.data) < 1e-12);
    CHECK(oracle::max_abs_diff(b2.data, c.blurred2.data) < 1e-12);
}

TEST_CASE("write_case/read_case round-trip preserves the case") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "lmof_case_rt";
    fs::remove_all(dir);
    const GtCase c = make_case(32, 32, 2.0, -1.0, synthetic_base_kernels(1, 7, 18)[0],
                               synthetic_base_kernels(1, 7, 19)[0], NoiseKind::SaltPepper, 0.1,
                               33);
    write_case(c, dir.string());
    const GtCase r = read_case(dir.string());
    CHECK(r.noise_kind == c.noise_kind);
    CHECK(r.noise_level == doctest::Approx(c.noise_level).epsilon(1e-12));
    CHECK(r.seed == c.seed);
    CHECK(r.gt_flow.width == c.gt_flow.width);
    // .flo stores float32; kernels are text decimals
    CHECK(oracle::max_abs_diff(r.gt_flow.u, c.gt_flow.u) < 1e-6);
    CHECK(oracle::max_abs_diff(r.gt_flow.v, c.gt_flow.v) < 1e-6);
    CHECK(oracle::max_abs_diff(r.k1.weights, c.k1.weights) < 1e-9);
    CHECK(oracle::max_abs_diff(r.k2.weights, c.k2.weights) < 1e-9);
    // images go through 16-bit quantization
    CHECK(oracle::max_abs_diff(r.blurred1.data, c.blurred1.data) < 1.0 / 65535 + 1e-9);
    fs::remove_all(dir);
}

TEST_CASE("kernel text format round-trip") {
    namespace fs = std::filesystem;
    const fs::path p = fs::temp_directory_path() / "lmof_kernel_rt.txt";
    const BlurKernel k = synthetic_base_kernels(1, 9, 20)[0];
    write_kernel_text(k, p.string());
    const BlurKernel r = read_kernel_text(p.string());
    CHECK(r.side == k.side);
    CHECK(oracle::max_abs_diff(r.weights, k.weights) < 1e-9);
    fs::remove(p);
}

TEST_CASE("make_texture: deterministic, in range, seed-sensitive") {
    const Image a = make_texture(32, 32, 55);
    const Image b = make_texture(32, 32, 55);
    const Image c = make_texture(32, 32, 56);
    CHECK(a.data == b.data);
    CHECK(a.data != c.data);
    for (double v : a.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}
