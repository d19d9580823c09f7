#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "lmof/fftutil.hpp"
#include "lmof/image.hpp"
#include "lmof/rng.hpp"
#include "oracles.hpp"

using namespace lmof;

static Image random_image(int w, int h, uint64_t seed, int channels = 1) {
    Rng rng(seed);
    Image img(w, h, channels);
    for (double& v : img.data) v = rng.uniform();
    return img;
}

static BlurKernel random_kernel(int side, uint64_t seed) {
    Rng rng(seed);
    BlurKernel k(side);
    for (double& v : k.weights) v = rng.uniform();
    k.normalize();
    return k;
}

TEST_CASE("convolve: delta kernel is the identity") {
    const Image img = random_image(17, 11, 1);
    const Image out = convolve(img, BlurKernel::delta(5), Boundary::Replicate);
    for (size_t i = 0; i < img.size(); ++i) CHECK(out.data[i] == doctest::Approx(img.data[i]).epsilon(1e-12));
}

TEST_CASE("convolve: constant image stays constant under replicate boundary") {
    Image img(9, 9, 1, 0.37);
    const Image out = convolve(img, random_kernel(5, 2), Boundary::Replicate);
    for (double v : out.data) CHECK(v == doctest::Approx(0.37).epsilon(1e-10));
}

TEST_CASE("convolve: 5x5 ramp with 3x3 box matches the brute-force oracle") {
    Image img(5, 5, 1);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) img.at(x, y) = (x + 5.0 * y) / 25.0;
    BlurKernel box(3, 1.0 / 9.0);
    for (bool periodic : {false, true}) {
        const Image out = convolve(img, box, periodic ? Boundary::Periodic : Boundary::Replicate);
        const Image ref = oracle::conv_brute(img, box, periodic);
        CHECK(oracle::max_abs_diff(out.data, ref.data) < 1e-6);
    }
}

TEST_CASE("convolve: rejects kernels larger than the image") {
    const Image img = random_image(5, 5, 3);
    CHECK_THROWS_AS(convolve(img, BlurKernel(7), Boundary::Replicate), std::invalid_argument);
}

TEST_CASE("convolve: linear in the image") {
    const Image i1 = random_image(12, 10, 4), i2 = random_image(12, 10, 5);
    const BlurKernel k = random_kernel(5, 6);
    const double a = 0.7, b = -1.3;
    Image mix(12, 10, 1);
    for (size_t i = 0; i < mix.size(); ++i) mix.data[i] = a * i1.data[i] + b * i2.data[i];
    const Image lhs = convolve(mix, k, Boundary::Replicate);
    const Image r1 = convolve(i1, k, Boundary::Replicate);
    const Image r2 = convolve(i2, k, Boundary::Replicate);
    for (size_t i = 0; i < mix.size(); ++i)
        CHECK(lhs.data[i] == doctest::Approx(a * r1.data[i] + b * r2.data[i]).epsilon(1e-9));
}

TEST_CASE("convolve: kernel order commutes in the interior") {
    const Image img = random_image(32, 32, 7);
    const BlurKernel k1 = random_kernel(5, 8), k2 = random_kernel(7, 9);
    const Image a = convolve(convolve(img, k1, Boundary::Replicate), k2, Boundary::Replicate);
    const Image b = convolve(convolve(img, k2, Boundary::Replicate), k1, Boundary::Replicate);
    const int margin = (k1.side + k2.side) / 2;
    for (int y = margin; y < 32 - margin; ++y)
        for (int x = margin; x < 32 - margin; ++x)
            CHECK(a.at(x, y) == doctest::Approx(b.at(x, y)).epsilon(1e-5));
}

TEST_CASE("convolve: spatial and transform-domain paths agree (periodic)") {
    const Image img = random_image(24, 20, 10);
    for (int side : {3, 9, 17}) {  // straddles the FFT crossover of 15
        const BlurKernel k = random_kernel(side, 11 + side);
        const Image spatial = oracle::conv_brute(img, k, true);
        const Image out = convolve(img, k, Boundary::Periodic);
        const Image viaFft = fft::convolve_periodic(img, k);
        CHECK(oracle::max_abs_diff(out.data, spatial.data) < 1e-5);
        CHECK(oracle::max_abs_diff(viaFft.data, spatial.data) < 1e-5);
    }
}

TEST_CASE("derivative: constant image gives zero everywhere") {
    Image img(8, 8, 1, 0.5);
    for (Deriv d : {Deriv::Dx, Deriv::Dy, Deriv::Dxx, Deriv::Dyy, Deriv::Dxy}) {
        const Image out = derivative(img, d);
        for (double v : out.data) CHECK(v == doctest::Approx(0.0).epsilon(1e-14));
    }
}

TEST_CASE("derivative: dx of a linear x-ramp is constant in the interior") {
    const int W = 11, H = 7;
    Image img(W, H, 1);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) img.at(x, y) = static_cast<double>(x) / W;
    const Image out = derivative(img, Deriv::Dx);
    for (int y = 0; y < H; ++y)
        for (int x = 1; x < W - 1; ++x)
            CHECK(out.at(x, y) == doctest::Approx(1.0 / W).epsilon(1e-10));
}

TEST_CASE("derivative: mixed partials commute in the interior") {
    const Image img = random_image(7, 7, 12);
    const Image dxy = derivative(derivative(img, Deriv::Dy), Deriv::Dx);
    const Image dyx = derivative(derivative(img, Deriv::Dx), Deriv::Dy);
    for (int y = 2; y < 5; ++y)
        for (int x = 2; x < 5; ++x) CHECK(std::fabs(dxy.at(x, y) - dyx.at(x, y)) < 1e-10);
}

TEST_CASE("derivative: rejects images smaller than 3x3") {
    CHECK_THROWS_AS(derivative(Image(2, 2, 1), Deriv::Dx), std::invalid_argument);
}

TEST_CASE("warp_bilinear: zero flow is the identity with a full mask") {
    const Image img = random_image(9, 9, 13);
    auto [out, mask] = warp_bilinear(img, FlowField(9, 9, 0.0, 0.0));
    CHECK(oracle::max_abs_diff(out.data, img.data) < 1e-12);
    for (double v : mask.data) CHECK(v == 1.0);
}

TEST_CASE("warp_bilinear: uniform integer flow shifts the interior") {
    const Image img = random_image(12, 8, 14);
    auto [out, mask] = warp_bilinear(img, FlowField(12, 8, 2.0, 0.0));
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 10; ++x) {
            CHECK(out.at(x, y) == doctest::Approx(img.at(x + 2, y)).epsilon(1e-12));
            CHECK(mask.at(x, y) == 1.0);
        }
}

TEST_CASE("warp_bilinear: half-pixel flow equals the analytic midpoint") {
    const int W = 10, H = 6;
    Image img(W, H, 1);
    Rng rng(15);
    for (double& v : img.data) v = rng.uniform();
    auto [out, mask] = warp_bilinear(img, FlowField(W, H, 0.5, 0.0));
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W - 1; ++x)
            CHECK(out.at(x, y) ==
                  doctest::Approx(0.5 * (img.at(x, y) + img.at(x + 1, y))).epsilon(1e-12));
}

TEST_CASE("warp_bilinear: inverse integer shift recovers the interior") {
    const Image img = random_image(16, 16, 16);
    auto [shifted, m1] = warp_bilinear(img, FlowField(16, 16, 3.0, 0.0));
    auto [back, m2] = warp_bilinear(shifted, FlowField(16, 16, -3.0, 0.0));
    for (int y = 0; y < 16; ++y)
        for (int x = 3; x < 13; ++x)
            CHECK(back.at(x, y) == doctest::Approx(img.at(x, y)).epsilon(1e-6));
}

TEST_CASE("warp_bilinear: rejects mismatched dimensions") {
    CHECK_THROWS_AS(warp_bilinear(Image(4, 4, 1), FlowField(5, 4)), std::invalid_argument);
}

TEST_CASE("resample: unit scale and constants are preserved") {
    const Image img = random_image(10, 10, 17);
    const Image same = resample(img, 1.0);
    CHECK(oracle::max_abs_diff(same.data, img.data) < 1e-12);
    Image flat(10, 10, 1, 0.42);
    const Image small = resample(flat, 0.5);
    for (double v : small.data) CHECK(v == doctest::Approx(0.42).epsilon(1e-9));
}

TEST_CASE("resample_flow: displacement values rescale with the grid") {
    FlowField w(8, 8, 1.0, 1.0);
    const FlowField up = resample_flow(w, 16, 16);
    CHECK(up.width == 16);
    for (size_t i = 0; i < up.pixels(); ++i) {
        CHECK(up.u[i] == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(up.v[i] == doctest::Approx(2.0).epsilon(1e-9));
    }
}

TEST_CASE("resample: down-then-up stays within one smoothing pass of the original") {
    const Image img = random_image(16, 16, 18);
    const Image round = resample(resample(img, 0.5), 2.0);
    // Oracle bound: the round trip must stay within the range spanned by one
    // local 3x3 neighborhood of the original (a bilinear pass cannot create
    // new extrema beyond the local min/max).
    for (int y = 1; y < 15; ++y)
        for (int x = 1; x < 15; ++x) {
            double lo = 1e9, hi = -1e9;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    lo = std::min(lo, img.at(x + dx, y + dy));
                    hi = std::max(hi, img.at(x + dx, y + dy));
                }
            CHECK(round.at(x, y) >= lo - 1e-9);
            CHECK(round.at(x, y) <= hi + 1e-9);
        }
}

TEST_CASE("build_pyramid: documented level-size recurrence") {
    const Pyramid p = build_pyramid(Image(100, 100, 1, 0.1), 0.8, 16);
    const std::vector<int> expect = {17, 21, 26, 33, 41, 51, 64, 80, 100};  // coarsest first
    REQUIRE(p.num_levels() == static_cast<int>(expect.size()));
    for (int l = 0; l < p.num_levels(); ++l) {
        CHECK(p.levels[l].width == expect[l]);
        CHECK(p.levels[l].height == expect[l]);
    }
    CHECK(p.finest().width == 100);
}

TEST_CASE("build_pyramid: degenerate single-level pyramid") {
    const Pyramid p = build_pyramid(Image(20, 20, 1, 0.0), 0.8, 32);
    CHECK(p.num_levels() == 1);
    CHECK(p.coarsest().width == 20);
}

TEST_CASE("build_pyramid: rejects invalid eta") {
    CHECK_THROWS_AS(build_pyramid(Image(20, 20, 1), 1.5, 16), std::invalid_argument);
    CHECK_THROWS_AS(build_pyramid(Image(20, 20, 1), 0.0, 16), std::invalid_argument);
}

TEST_CASE("build_pyramid: level areas strictly decrease coarse-ward") {
    const Pyramid p = build_pyramid(random_image(64, 48, 19), 0.8, 16);
    for (int l = 1; l < p.num_levels(); ++l)
        CHECK(p.levels[l - 1].pixels() < p.levels[l].pixels());
}

TEST_CASE("Image and BlurKernel invariants") {
    CHECK_THROWS_AS(Image(0, 5, 1), std::invalid_argument);
    CHECK_THROWS_AS(BlurKernel(4), std::invalid_argument);
    BlurKernel k = random_kernel(5, 20);
    CHECK(k.valid());
    CHECK(k.sum() == doctest::Approx(1.0).epsilon(1e-9));
}
