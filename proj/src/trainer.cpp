#include "lmof/trainer.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include "lmof/fftutil.hpp"

namespace lmof {

static int worker_count(size_t jobs) {
    unsigned n = std::thread::hardware_concurrency();
    if (const char* env = std::getenv("LMOF_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) n = static_cast<unsigned>(v);
    }
    if (n == 0) n = 1;
    if (n > jobs) n = static_cast<unsigned>(jobs);
    return static_cast<int>(n);
}

template <typename Fn>
static void parallel_for(size_t jobs, Fn&& fn) {
    const int workers = worker_count(jobs);
    if (workers <= 1) {
        for (size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t)
        pool.emplace_back([&, t] {
            for (size_t i = static_cast<size_t>(t); i < jobs; i += workers) fn(i);
        });
    for (auto& th : pool) th.join();
}

// Input stack for `stage`: the blurred luminance alone at stage 0, otherwise
// stacked with the latent produced by the earlier frozen iterations.
static Image stage_input(const TrainSample& s, const NetParams& params, int stage,
                         const DeconvConfig& cfg) {
    const Image lum = to_luminance(s.blurred);
    if (params.arch.depth(stage) == 1) return lum;
    DeconvConfig sub = cfg;
    sub.iterations = stage;
    auto [latent, kernel] = deblur_iterate(s.blurred, params, sub);
    const Image lat = to_luminance(latent);
    Image input(lum.width, lum.height, 2);
    for (size_t i = 0; i < lum.pixels(); ++i) {
        input.data[2 * i] = lum.data[i];
        input.data[2 * i + 1] = lat.data[i];
    }
    return input;
}

// Inputs for a whole batch; the expensive part of training, and constant while
// the earlier stages stay frozen, so train_stage computes them once.
static std::vector<Image> stage_inputs(const std::vector<TrainSample>& batch,
                                       const NetParams& params, int stage,
                                       const DeconvConfig& cfg) {
    std::vector<Image> inputs(batch.size());
    parallel_for(batch.size(),
                 [&](size_t i) { inputs[i] = stage_input(batch[i], params, stage, cfg); });
    return inputs;
}

static std::vector<BlurKernel> kernels_from_inputs(const std::vector<Image>& inputs,
                                                   const NetParams& params, int stage,
                                                   const DeconvConfig& cfg) {
    std::vector<BlurKernel> out(inputs.size(), BlurKernel(1));
    parallel_for(inputs.size(), [&](size_t i) {
        const HeadOutputs heads = net_forward(inputs[i], params, stage);
        out[i] = estimate_kernel(heads.I_hat, heads.l_hat, cfg);
    });
    return out;
}

std::vector<BlurKernel> compute_stage_kernels(const std::vector<TrainSample>& batch,
                                              const NetParams& params, int stage,
                                              const DeconvConfig& cfg) {
    return kernels_from_inputs(stage_inputs(batch, params, stage, cfg), params, stage, cfg);
}

// Loss (and optional gradient) for one sample with its kernel held fixed.
static double sample_loss(const TrainSample& s, const Image& input, const NetParams& params,
                          int stage, const BlurKernel& kernel, const DeconvConfig& cfg,
                          double aux_weight, size_t batch_size, StageParams* grad) {
    if (!s.blurred.same_shape(s.sharp))
        throw std::invalid_argument("loss_with_kernels: blurred/sharp shape mismatch");
    const int O = params.arch.outputs;
    const Image sharp = to_luminance(s.sharp);
    const int W = sharp.width, H = sharp.height;
    const size_t N = sharp.pixels();

    ForwardCache cache;
    const HeadOutputs heads = net_forward(input, params, stage, grad ? &cache : nullptr);

    // Latent from the blur features, kernel held fixed:
    //   l = F^-1[ conj(K) sum_o F(I_hat_o) / (O |K|^2 + beta_l P) ]
    const fft::Spectrum otf = fft::psf_otf(kernel, W, H);
    const std::vector<double> gp = fft::gradient_power(W, H);
    std::vector<double> denom(otf.c.size());
    for (size_t i = 0; i < denom.size(); ++i)
        denom[i] = O * std::norm(otf.c[i]) + cfg.beta_l * gp[i] + 1e-12;
    fft::Spectrum acc;
    acc.w = W;
    acc.h = H;
    acc.c.assign(otf.c.size(), 0.0);
    for (int o = 0; o < O; ++o) {
        const fft::Spectrum is = fft::forward(heads.I_hat[o].data, W, H);
        for (size_t i = 0; i < acc.c.size(); ++i)
            acc.c[i] += std::conj(otf.c[i]) * is.c[i] / denom[i];
    }
    const std::vector<double> latent = fft::inverse(acc);

    double main = 0.0;
    std::vector<double> resid(N);
    for (size_t i = 0; i < N; ++i) {
        resid[i] = latent[i] - sharp.data[i];
        main += resid[i] * resid[i];
    }
    main /= static_cast<double>(N);

    double aux = 0.0;
    for (int o = 0; o < O; ++o)
        for (size_t i = 0; i < N; ++i) {
            const double d = heads.l_hat[o].data[i] - sharp.data[i];
            aux += d * d;
        }
    aux /= static_cast<double>(N) * O;

    if (grad) {
        // d main / d I_hat_o : adjoint of the per-frequency filter.
        fft::Spectrum rs = fft::forward(resid, W, H);
        std::vector<Image> dI(O, Image(W, H, 1)), dl(O, Image(W, H, 1));
        fft::Spectrum back;
        back.w = W;
        back.h = H;
        back.c.resize(rs.c.size());
        for (size_t i = 0; i < rs.c.size(); ++i) back.c[i] = otf.c[i] * rs.c[i] / denom[i];
        const std::vector<double> dI_common = fft::inverse(back);
        const double scale_main = 2.0 / (static_cast<double>(N) * batch_size);
        const double scale_aux = 2.0 * aux_weight / (static_cast<double>(N) * O * batch_size);
        for (int o = 0; o < O; ++o)
            for (size_t i = 0; i < N; ++i) {
                dI[o].data[i] = scale_main * dI_common[i];
                dl[o].data[i] = scale_aux * (heads.l_hat[o].data[i] - sharp.data[i]);
            }
        net_backward(dI, dl, params, stage, cache, *grad);
    }
    return main + aux_weight * aux;
}

static void accumulate(StageParams& into, const StageParams& g) {
    for (size_t i = 0; i < into.phi.size(); ++i) into.phi[i] += g.phi[i];
    for (size_t j = 0; j < into.conv_filters.size(); ++j)
        for (size_t i = 0; i < into.conv_filters[j].size(); ++i)
            into.conv_filters[j][i] += g.conv_filters[j][i];
    for (size_t i = 0; i < into.w1.size(); ++i) into.w1[i] += g.w1[i];
    for (size_t i = 0; i < into.lambda.size(); ++i) into.lambda[i] += g.lambda[i];
    for (size_t i = 0; i < into.delta.size(); ++i) into.delta[i] += g.delta[i];
}

// Per-sample losses/gradients run in parallel; the reduction over samples is
// a fixed-order serial sum so results are deterministic.
static double batch_loss(const std::vector<TrainSample>& batch, const std::vector<Image>& inputs,
                         const NetParams& params, int stage,
                         const std::vector<BlurKernel>& kernels, const DeconvConfig& cfg,
                         double aux_weight, StageParams* grad) {
    std::vector<double> losses(batch.size(), 0.0);
    std::vector<StageParams> grads;
    if (grad) {
        NetParams z = NetParams::zero_like(params);
        grads.assign(batch.size(), z.stages[stage]);
    }
    parallel_for(batch.size(), [&](size_t i) {
        losses[i] = sample_loss(batch[i], inputs[i], params, stage, kernels[i], cfg, aux_weight,
                                batch.size(), grad ? &grads[i] : nullptr);
    });
    double total = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
        total += losses[i];
        if (grad) accumulate(*grad, grads[i]);
    }
    return total / static_cast<double>(batch.size());
}

double loss_with_kernels(const std::vector<TrainSample>& batch, const NetParams& params,
                         int stage, const std::vector<BlurKernel>& kernels,
                         const DeconvConfig& cfg, double aux_weight, StageParams* grad) {
    if (batch.empty()) throw std::invalid_argument("loss_with_kernels: empty batch");
    if (kernels.size() != batch.size())
        throw std::invalid_argument("loss_with_kernels: one kernel per sample required");
    const std::vector<Image> inputs = stage_inputs(batch, params, stage, cfg);
    return batch_loss(batch, inputs, params, stage, kernels, cfg, aux_weight, grad);
}

std::pair<double, NetParams> loss_and_gradient(const std::vector<TrainSample>& batch,
                                               const NetParams& params,
                                               const std::vector<bool>& stage_mask,
                                               const DeconvConfig& cfg, double aux_weight) {
    if (batch.empty()) throw std::invalid_argument("loss_and_gradient: empty batch");
    params.validate();
    int stage = -1;
    for (size_t s = 0; s < stage_mask.size() && s < params.stages.size(); ++s)
        if (stage_mask[s]) stage = static_cast<int>(s);
    NetParams grad = NetParams::zero_like(params);
    const int eval_stage = stage >= 0 ? stage : params.arch.iterations - 1;
    const std::vector<Image> inputs = stage_inputs(batch, params, eval_stage, cfg);
    const std::vector<BlurKernel> kernels = kernels_from_inputs(inputs, params, eval_stage, cfg);
    const double loss = batch_loss(batch, inputs, params, eval_stage, kernels, cfg, aux_weight,
                                   stage >= 0 ? &grad.stages[eval_stage] : nullptr);
    return {loss, grad};
}

NetParams train_stage(const std::vector<TrainSample>& dataset, const NetParams& params,
                      int stage, double lr, double decay, int steps, const DeconvConfig& cfg,
                      double aux_weight, std::vector<double>* loss_trace) {
    if (stage < 0 || stage >= params.arch.iterations)
        throw std::invalid_argument("train_stage: invalid stage index");
    if (dataset.empty()) throw std::invalid_argument("train_stage: empty dataset");
    NetParams p = params;
    // Earlier stages are frozen, so the per-sample inputs never change.
    const std::vector<Image> inputs = stage_inputs(dataset, p, stage, cfg);
    double rate = lr;
    for (int step = 0; step < steps; ++step) {
        const std::vector<BlurKernel> kernels = kernels_from_inputs(inputs, p, stage, cfg);
        NetParams grad = NetParams::zero_like(p);
        const double loss = batch_loss(dataset, inputs, p, stage, kernels, cfg, aux_weight,
                                       &grad.stages[stage]);
        if (loss_trace) loss_trace->push_back(loss);
        StageParams& sp = p.stages[stage];
        const StageParams& g = grad.stages[stage];
        for (size_t i = 0; i < sp.phi.size(); ++i) sp.phi[i] -= rate * g.phi[i];
        for (size_t j = 0; j < sp.conv_filters.size(); ++j)
            for (size_t i = 0; i < sp.conv_filters[j].size(); ++i)
                sp.conv_filters[j][i] -= rate * g.conv_filters[j][i];
        for (size_t i = 0; i < sp.w1.size(); ++i) sp.w1[i] -= rate * g.w1[i];
        for (size_t i = 0; i < sp.lambda.size(); ++i) sp.lambda[i] -= rate * g.lambda[i];
        for (size_t i = 0; i < sp.delta.size(); ++i) sp.delta[i] -= rate * g.delta[i];
        rate *= decay;
    }
    return p;
}

}  // namespace lmof
