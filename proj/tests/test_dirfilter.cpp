#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "lmof/dirfilter.hpp"
#include "lmof/rng.hpp"
#include "oracles.hpp"

using namespace lmof;

TEST_CASE("directional_kernel: theta 0 lives on the center row, symmetric, sum 1") {
    const BlurKernel k = directional_kernel(0.0, 2.0, 9);
    double sum = 0.0;
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x) {
            if (y != 4) CHECK(k.at(x, y) == doctest::Approx(0.0).epsilon(1e-12));
            sum += k.at(x, y);
        }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    for (int x = 0; x < 9; ++x) CHECK(k.at(x, 4) == doctest::Approx(k.at(8 - x, 4)).epsilon(1e-9));
}

TEST_CASE("directional_kernel: theta pi/2 is the transpose of theta 0") {
    const BlurKernel k0 = directional_kernel(0.0, 2.0, 9);
    const BlurKernel k90 = directional_kernel(M_PI / 2, 2.0, 9);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x) CHECK(k90.at(x, y) == doctest::Approx(k0.at(y, x)).epsilon(1e-9));
}

TEST_CASE("directional_kernel: diagonal case matches the dense quadrature oracle") {
    const BlurKernel k = directional_kernel(M_PI / 4, 2.0, 9);
    const BlurKernel ref = oracle::directional_quadrature(M_PI / 4, 2.0, 9);
    for (size_t i = 0; i < k.weights.size(); ++i)
        CHECK(std::fabs(k.weights[i] - ref.weights[i]) < 1e-4);
}

TEST_CASE("directional_kernel: rejects even support") {
    CHECK_THROWS_AS(directional_kernel(0.0, 2.0, 8), std::invalid_argument);
}

TEST_CASE("directional_kernel: BlurKernel invariants hold on a 64-angle sweep") {
    for (int i = 0; i < 64; ++i) {
        const double theta = M_PI * i / 64.0;
        const BlurKernel k = directional_kernel(theta, 2.0, 9);
        CHECK(k.side == 9);
        CHECK(k.valid(1e-6));
        for (double w : k.weights) CHECK(w >= 0.0);
    }
}

TEST_CASE("apply_df_layer: constant image passes through each direction") {
    DirectionalBank bank = DirectionalBank::uniform(8);
    const Image img(16, 16, 1, 0.6);
    const auto outs = apply_df_layer(img, bank);
    REQUIRE(outs.size() == 8);
    for (const Image& o : outs)
        for (double v : o.data) CHECK(v == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("apply_df_layer: filtering along x leaves a y-only image unchanged") {
    DirectionalBank bank;
    bank.directions = {0.0};
    bank.phi = {1.0};
    Image img(16, 16, 1);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) img.at(x, y) = 0.1 + 0.05 * y;
    const auto outs = apply_df_layer(img, bank);
    REQUIRE(outs.size() == 1);
    for (size_t i = 0; i < img.size(); ++i)
        CHECK(outs[0].data[i] == doctest::Approx(img.data[i]).epsilon(1e-9));
}

TEST_CASE("apply_df_layer: white noise loses variance in every direction") {
    DirectionalBank bank = DirectionalBank::uniform(8);
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(100 + seed);
        Image img(32, 32, 1);
        for (double& v : img.data) v = rng.uniform();
        auto var = [](const Image& im) {
            double mean = 0;
            for (double v : im.data) mean += v;
            mean /= im.size();
            double s = 0;
            for (double v : im.data) s += (v - mean) * (v - mean);
            return s / im.size();
        };
        const double v0 = var(img);
        for (const Image& o : apply_df_layer(img, bank)) CHECK(var(o) < v0);
    }
}

TEST_CASE("apply_df_layer: linear in phi") {
    DirectionalBank bank = DirectionalBank::uniform(4);
    Rng rng(7);
    Image img(16, 16, 1);
    for (double& v : img.data) v = rng.uniform();
    const auto base = apply_df_layer(img, bank);
    bank.phi[2] = 3.5;
    const auto scaled = apply_df_layer(img, bank);
    for (size_t i = 0; i < img.size(); ++i) {
        CHECK(scaled[2].data[i] == doctest::Approx(3.5 * base[2].data[i]).epsilon(1e-9));
        CHECK(scaled[1].data[i] == doctest::Approx(base[1].data[i]).epsilon(1e-12));
    }
}

TEST_CASE("directional filtering suppresses noise orthogonal to the signal") {
    // I = S + n with S varying only along y (orthogonal to theta = 0).
    int wins = 0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) {
        Rng rng(500 + t);
        const int W = 32, H = 32;
        Image S(W, H, 1), I(W, H, 1);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                S.at(x, y) = 0.5 + 0.3 * std::sin(2.0 * M_PI * y / 8.0);
                I.at(x, y) = S.at(x, y) + 0.05 * rng.normal();
            }
        DirectionalBank bank;
        bank.directions = {0.0};
        bank.phi = {1.0};
        const Image F = apply_df_layer(I, bank)[0];
        double err_f = 0, err_i = 0;
        for (size_t i = 0; i < S.size(); ++i) {
            err_f += (F.data[i] - S.data[i]) * (F.data[i] - S.data[i]);
            err_i += (I.data[i] - S.data[i]) * (I.data[i] - S.data[i]);
        }
        if (err_f < err_i) ++wins;
    }
    CHECK(wins >= static_cast<int>(0.95 * trials));
}

TEST_CASE("DirectionalBank validation") {
    DirectionalBank bank = DirectionalBank::uniform(8);
    CHECK(bank.count() == 8);
    CHECK_NOTHROW(bank.validate());
    for (int i = 1; i < 8; ++i) CHECK(bank.directions[i] > bank.directions[i - 1]);
    CHECK(bank.directions.front() >= 0.0);
    CHECK(bank.directions.back() < M_PI);
    DirectionalBank bad = bank;
    bad.support = 8;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    DirectionalBank bad2 = bank;
    bad2.phi.pop_back();
    CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
}
