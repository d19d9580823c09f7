#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmof/dirfilter.hpp"
#include "lmof/image.hpp"

namespace lmof {

/// Architecture dimensions. LMoF is 8 DFs / 8 CFs / 8 hidden; LMoF-Deep
/// (24/48/30) is reachable through the same fields.
struct NetArch {
    int num_dirs = 8;    // DF directions over [0, pi)
    int num_cf = 8;      // convolution filters
    int hidden = 8;      // hidden maps per combination stage
    int outputs = 2;     // feature images per head
    int cf_side = 13;    // conv filter side, odd
    double df_sigma = 2.0;
    int df_support = 9;
    int iterations = 3;  // network iterations N, one parameter stage each
    bool use_df = true;  // false: skip the directional-filtering layer

    int depth(int stage) const { return stage == 0 ? 1 : 2; }
    int dirs_effective() const { return use_df ? num_dirs : 1; }
    // map index m = (c * D + d) * J + j
    int num_maps(int stage) const { return depth(stage) * dirs_effective() * num_cf; }
};

/// Parameters of one network iteration.
struct StageParams {
    std::vector<double> phi;                        // D (empty when !use_df)
    std::vector<std::vector<double>> conv_filters;  // J x (cf_side^2)
    std::vector<double> w1;                         // hidden x num_maps, row-major
    std::vector<double> lambda;                     // outputs x hidden, I-hat head
    std::vector<double> delta;                      // outputs x hidden, l-hat head
};

struct NetParams {
    NetArch arch;
    std::vector<StageParams> stages;  // arch.iterations entries

    DirectionalBank bank(int stage) const;
    void validate() const;
    /// Structured initialization: derivative/unsharp-like conv filters,
    /// identity-flavored combinations, all perturbed by N(0, 0.01).
    static NetParams initialize(const NetArch& arch, uint64_t seed);
    static NetParams zero_like(const NetParams& p);
};

struct TrainSample {
    Image blurred;
    Image sharp;
    BlurKernel kernel;  // ground truth, diagnostics only
};

struct HeadOutputs {
    std::vector<Image> I_hat;  // blur features
    std::vector<Image> l_hat;  // latent features
};

/// Intermediate activations kept for backpropagation.
struct ForwardCache {
    Image input;                   // channels = stage depth
    std::vector<Image> df_raw;     // depth*D planes before phi scaling
    std::vector<Image> conv_out;   // M maps (pre-tanh)
    std::vector<Image> tanh1;      // M maps
    std::vector<Image> hidden;     // H maps (pre-tanh)
    std::vector<Image> tanh2;      // H maps
};

HeadOutputs net_forward(const Image& input_stack, const NetParams& params, int stage,
                        ForwardCache* cache = nullptr);

/// Backpropagates head cotangents into the given stage's parameter gradient.
void net_backward(const std::vector<Image>& dI_hat, const std::vector<Image>& dl_hat,
                  const NetParams& params, int stage, const ForwardCache& cache,
                  StageParams& grad);

// --- NetParams file format -------------------------------------------------
// Binary: magic "LMOF", u32 version, u32 arch dims, then little-endian f64
// weights in declaration order. Text export mirrors the same ordering.
void save_params(const NetParams& p, const std::string& path);
NetParams load_params(const std::string& path);
void export_params_text(const NetParams& p, const std::string& path);

}  // namespace lmof
