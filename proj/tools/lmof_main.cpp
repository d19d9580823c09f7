// lmof command-line tool: flow, deblur, bench-gen, bench-eval, train, viz.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "lmof/bench.hpp"
#include "lmof/deconv.hpp"
#include "lmof/featurenet.hpp"
#include "lmof/flowsolve.hpp"
#include "lmof/io.hpp"
#include "lmof/rng.hpp"
#include "lmof/trainer.hpp"

namespace fs = std::filesystem;
using namespace lmof;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

int thread_count() {
    if (const char* env = std::getenv("LMOF_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

// key=value config file; unknown keys rejected against the accepted set.
std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("config line missing '=': " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

DeblurMode parse_deblur_mode(const std::string& s) {
    if (s == "per_level") return DeblurMode::PerLevel;
    if (s == "independent") return DeblurMode::Independent;
    if (s == "off") return DeblurMode::Off;
    throw CLI::ValidationError("--deblur", "expected per_level|independent|off, got " + s);
}

const char* deblur_mode_name(DeblurMode m) {
    switch (m) {
        case DeblurMode::PerLevel: return "per_level";
        case DeblurMode::Independent: return "independent";
        default: return "off";
    }
}

struct FlowFlags {
    std::string frame1, frame2, out, params, diag, config, deblur = "per_level",
                blur_match = "on";
    double gamma = 2.0, alpha = 0.9, epsilon = 5e-2, eta = 0.8;
    int cg_iters = 60, outer_iters = 5, kernel_side = 15;
    bool dump_config = false;
};

// Applies config-file values for options the user did not pass on the
// command line (flag > config file > default).
void apply_config_file(CLI::App* cmd, const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (!opt) throw FormatError("unknown config key: " + key);
        if (opt->count() == 0) opt->add_result(value);
    }
    for (const auto& [key, value] : kv) {
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (opt && !opt->get_callback_run()) opt->run_callback();
    }
}

FlowConfig make_flow_config(const FlowFlags& f) {
    FlowConfig cfg;
    cfg.gamma = f.gamma;
    cfg.alpha = f.alpha;
    cfg.epsilon = f.epsilon;
    cfg.eta = f.eta;
    cfg.cg_iters = f.cg_iters;
    cfg.outer_iters = f.outer_iters;
    cfg.deblur_mode = parse_deblur_mode(f.deblur);
    cfg.blur_match = f.blur_match == "on";
    cfg.deconv.kernel_side = f.kernel_side;
    if (!f.params.empty()) cfg.net = load_params(f.params);
    cfg.validate();
    return cfg;
}

void dump_flow_config(const FlowFlags& f) {
    std::printf("gamma=%g\nalpha=%g\nepsilon=%g\neta=%g\ncg-iters=%d\nouter-iters=%d\n",
                f.gamma, f.alpha, f.epsilon, f.eta, f.cg_iters, f.outer_iters);
    std::printf("deblur=%s\nblur-match=%s\nkernel-side=%d\nparams=%s\nthreads=%d\n",
                f.deblur.c_str(), f.blur_match.c_str(), f.kernel_side,
                f.params.empty() ? "(built-in)" : f.params.c_str(), thread_count());
}

int cmd_flow(const FlowFlags& f) {
    if (f.dump_config) {
        dump_flow_config(f);
        return kExitOk;
    }
    FlowConfig cfg = make_flow_config(f);
    Image I1 = read_image(f.frame1);
    Image I2 = read_image(f.frame2);
    FlowDiagnostics diag;
    FlowField w = estimate_flow(I1, I2, cfg, f.diag.empty() ? nullptr : &diag);
    write_flo(f.out, w);
    if (!f.diag.empty()) {
        std::ofstream out(f.diag);
        out << diag.to_text();
    }
    return kExitOk;
}

struct DeblurFlags {
    std::string input, out_latent, out_kernel, params, config;
    int iterations = 3, kernel_side = 15;
    bool dump_config = false;
};

int cmd_deblur(const DeblurFlags& f) {
    if (f.dump_config) {
        std::printf("iterations=%d\nkernel-side=%d\nparams=%s\n", f.iterations, f.kernel_side,
                    f.params.empty() ? "(built-in)" : f.params.c_str());
        return kExitOk;
    }
    DeconvConfig cfg;
    cfg.iterations = f.iterations;
    cfg.kernel_side = f.kernel_side;
    cfg.validate();
    NetParams net = f.params.empty() ? NetParams::initialize(NetArch{}, 0x1a0fULL)
                                     : load_params(f.params);
    Image img = read_image(f.input);
    auto [latent, kernel] = deblur_iterate(img, net, cfg);
    for (double& v : latent.data) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    write_image(f.out_latent, latent);
    write_kernel_text(kernel, f.out_kernel);
    return kExitOk;
}

struct BenchGenFlags {
    std::string out_dir, noise = "gaussian:0.01", config;
    int cases = 10, width = 96, height = 96, kernel_side = 9;
    uint64_t seed = 1;
    bool dump_config = false;
};

std::pair<NoiseKind, double> parse_noise(const std::string& s) {
    auto colon = s.find(':');
    if (colon == std::string::npos)
        throw CLI::ValidationError("--noise", "expected kind:level, got " + s);
    NoiseKind kind = parse_noise_kind(s.substr(0, colon));
    double level = std::stod(s.substr(colon + 1));
    if (level < 0.0 || level > 1.0)
        throw CLI::ValidationError("--noise", "level must be in [0,1]");
    return {kind, level};
}

int cmd_bench_gen(const BenchGenFlags& f) {
    if (f.dump_config) {
        std::printf("cases=%d\nwidth=%d\nheight=%d\nkernel-side=%d\nnoise=%s\nseed=%llu\n",
                    f.cases, f.width, f.height, f.kernel_side, f.noise.c_str(),
                    static_cast<unsigned long long>(f.seed));
        return kExitOk;
    }
    auto [kind, level] = parse_noise(f.noise);
    fs::create_directories(f.out_dir);
    auto base = synthetic_base_kernels(4, f.kernel_side, f.seed * 977 + 3);
    KernelBank bank = build_kernel_bank(base, 8, {f.kernel_side});
    for (int i = 0; i < f.cases; ++i) {
        uint64_t cs = f.seed + static_cast<uint64_t>(i);
        Rng pick(cs * 0x9e3779b97f4a7c15ULL + 11);
        const BlurKernel& k1 = bank.variations[pick.below(bank.variations.size())];
        const BlurKernel& k2 = bank.variations[pick.below(bank.variations.size())];
        double fu = pick.uniform(-3.0, 3.0), fv = pick.uniform(-3.0, 3.0);
        GtCase c = make_case(f.width, f.height, fu, fv, k1, k2, kind, level, cs);
        write_case(c, (fs::path(f.out_dir) / c.id).string());
    }
    return kExitOk;
}

struct BenchEvalFlags {
    std::string dir, params, deblur = "per_level", blur_match = "on", config;
    double eta = 0.8;
    int cg_iters = 60;
    bool no_timing = false, dump_config = false;
};

int cmd_bench_eval(const BenchEvalFlags& f) {
    if (f.dump_config) {
        std::printf("dir=%s\ndeblur=%s\nblur-match=%s\neta=%g\ncg-iters=%d\nthreads=%d\n",
                    f.dir.c_str(), f.deblur.c_str(), f.blur_match.c_str(), f.eta, f.cg_iters,
                    thread_count());
        return kExitOk;
    }
    FlowConfig cfg;
    cfg.eta = f.eta;
    cfg.cg_iters = f.cg_iters;
    cfg.deblur_mode = parse_deblur_mode(f.deblur);
    cfg.blur_match = f.blur_match == "on";
    if (!f.params.empty()) cfg.net = load_params(f.params);
    cfg.validate();

    std::vector<std::string> case_ids;
    for (const auto& entry : fs::directory_iterator(f.dir))
        if (entry.is_directory()) case_ids.push_back(entry.path().filename().string());
    std::sort(case_ids.begin(), case_ids.end());
    if (case_ids.empty()) throw FormatError("no case directories under " + f.dir);

    struct Row {
        double aee = 0, aae = 0, secs = 0;
    };
    std::vector<Row> rows(case_ids.size());
    std::atomic<size_t> next{0};
    std::atomic<bool> numerical_failure{false};
    auto worker = [&] {
        for (size_t i = next.fetch_add(1); i < case_ids.size(); i = next.fetch_add(1)) {
            try {
                GtCase c = read_case((fs::path(f.dir) / case_ids[i]).string());
                auto t0 = std::chrono::steady_clock::now();
                FlowField w = estimate_flow(c.blurred1, c.blurred2, cfg);
                auto t1 = std::chrono::steady_clock::now();
                rows[i].aee = aee(w, c.gt_flow);
                rows[i].aae = aae(w, c.gt_flow);
                rows[i].secs =
                    f.no_timing ? 0.0 : std::chrono::duration<double>(t1 - t0).count();
            } catch (const NumericalError&) {
                numerical_failure = true;
            }
        }
    };
    int nthreads = std::min<int>(thread_count(), static_cast<int>(case_ids.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (numerical_failure) throw NumericalError("flow solver failed on a benchmark case");

    double sum_aee = 0, sum_aae = 0, sum_secs = 0;
    for (size_t i = 0; i < case_ids.size(); ++i) {
        std::printf("%s %.6f %.6f %.3f\n", case_ids[i].c_str(), rows[i].aee, rows[i].aae,
                    rows[i].secs);
        sum_aee += rows[i].aee;
        sum_aae += rows[i].aae;
        sum_secs += rows[i].secs;
    }
    double n = static_cast<double>(case_ids.size());
    std::printf("mean %.6f %.6f %.3f\n", sum_aee / n, sum_aae / n, sum_secs / n);
    return kExitOk;
}

struct TrainFlags {
    std::string data, out, config;
    int stages = 3, steps = 20;
    double lr = 0.01, decay = 0.95;
    uint64_t seed = 7;
    bool dump_config = false;
};

int cmd_train(const TrainFlags& f) {
    if (f.dump_config) {
        std::printf("stages=%d\nsteps=%d\nlr=%g\ndecay=%g\nseed=%llu\n", f.stages, f.steps,
                    f.lr, f.decay, static_cast<unsigned long long>(f.seed));
        return kExitOk;
    }
    std::vector<std::string> case_ids;
    for (const auto& entry : fs::directory_iterator(f.data))
        if (entry.is_directory()) case_ids.push_back(entry.path().filename().string());
    std::sort(case_ids.begin(), case_ids.end());
    if (case_ids.empty()) throw FormatError("no case directories under " + f.data);
    std::vector<TrainSample> dataset;
    for (const auto& id : case_ids) {
        GtCase c = read_case((fs::path(f.data) / id).string());
        dataset.push_back({to_luminance(c.blurred1), to_luminance(c.sharp1), c.k1});
        dataset.push_back({to_luminance(c.blurred2), to_luminance(c.sharp2), c.k2});
    }
    NetArch arch;
    arch.iterations = f.stages;
    NetParams params = NetParams::initialize(arch, f.seed);
    DeconvConfig cfg;
    cfg.iterations = f.stages;
    for (int s = 0; s < f.stages; ++s) {
        std::vector<double> trace;
        params = train_stage(dataset, params, s, f.lr, f.decay, f.steps, cfg, 1.0, &trace);
        std::printf("stage %d: loss %.6g -> %.6g\n", s, trace.front(), trace.back());
    }
    save_params(params, f.out);
    return kExitOk;
}

struct VizFlags {
    std::string flo, out, config;
    double max_mag = 0.0;  // 0 => auto
    bool dump_config = false;
};

int cmd_viz(const VizFlags& f) {
    if (f.dump_config) {
        std::printf("flo=%s\nout=%s\nmax-mag=%s\n", f.flo.c_str(), f.out.c_str(),
                    f.max_mag > 0.0 ? std::to_string(f.max_mag).c_str() : "auto");
        return kExitOk;
    }
    FlowField w = read_flo(f.flo);
    Image img = flow_to_color(
        w, f.max_mag > 0.0 ? std::optional<double>(f.max_mag) : std::nullopt);
    write_image(f.out, img, 8);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Blur-robust optical flow with learned deblurring"};
    app.require_subcommand(1);

    FlowFlags ff;
    CLI::App* flow = app.add_subcommand("flow", "Estimate flow between two frames");
    flow->add_option("--frame1", ff.frame1);
    flow->add_option("--frame2", ff.frame2);
    flow->add_option("--out", ff.out);
    flow->add_option("--params", ff.params);
    flow->add_option("--gamma", ff.gamma);
    flow->add_option("--alpha", ff.alpha);
    flow->add_option("--epsilon", ff.epsilon);
    flow->add_option("--eta", ff.eta);
    flow->add_option("--cg-iters", ff.cg_iters);
    flow->add_option("--outer-iters", ff.outer_iters);
    flow->add_option("--kernel-side", ff.kernel_side);
    flow->add_option("--deblur", ff.deblur);
    flow->add_option("--blur-match", ff.blur_match);
    flow->add_option("--diag", ff.diag);
    flow->add_option("--config", ff.config);
    flow->add_flag("--dump-config", ff.dump_config);

    DeblurFlags df;
    CLI::App* deblur = app.add_subcommand("deblur", "Blind-deblur a single image");
    deblur->add_option("--input", df.input);
    deblur->add_option("--out-latent", df.out_latent);
    deblur->add_option("--out-kernel", df.out_kernel);
    deblur->add_option("--iterations", df.iterations);
    deblur->add_option("--kernel-side", df.kernel_side);
    deblur->add_option("--params", df.params);
    deblur->add_option("--config", df.config);
    deblur->add_flag("--dump-config", df.dump_config);

    BenchGenFlags bg;
    CLI::App* bench_gen = app.add_subcommand("bench-gen", "Generate synthetic benchmark cases");
    bench_gen->add_option("--out-dir", bg.out_dir);
    bench_gen->add_option("--cases", bg.cases);
    bench_gen->add_option("--width", bg.width);
    bench_gen->add_option("--height", bg.height);
    bench_gen->add_option("--kernel-side", bg.kernel_side);
    bench_gen->add_option("--noise", bg.noise);
    bench_gen->add_option("--seed", bg.seed);
    bench_gen->add_option("--config", bg.config);
    bench_gen->add_flag("--dump-config", bg.dump_config);

    BenchEvalFlags be;
    CLI::App* bench_eval = app.add_subcommand("bench-eval", "Evaluate flow on a case directory");
    bench_eval->add_option("--dir", be.dir);
    bench_eval->add_option("--params", be.params);
    bench_eval->add_option("--deblur", be.deblur);
    bench_eval->add_option("--blur-match", be.blur_match);
    bench_eval->add_option("--eta", be.eta);
    bench_eval->add_option("--cg-iters", be.cg_iters);
    bench_eval->add_flag("--no-timing", be.no_timing);
    bench_eval->add_option("--config", be.config);
    bench_eval->add_flag("--dump-config", be.dump_config);

    TrainFlags tf;
    CLI::App* train = app.add_subcommand("train", "Stage-wise network training");
    train->add_option("--data", tf.data);
    train->add_option("--stages", tf.stages);
    train->add_option("--steps", tf.steps);
    train->add_option("--lr", tf.lr);
    train->add_option("--decay", tf.decay);
    train->add_option("--seed", tf.seed);
    train->add_option("--out", tf.out);
    train->add_option("--config", tf.config);
    train->add_flag("--dump-config", tf.dump_config);

    VizFlags vf;
    CLI::App* viz = app.add_subcommand("viz", "Render a .flo field as a color image");
    viz->add_option("--flo", vf.flo);
    viz->add_option("--out", vf.out);
    viz->add_option("--max-mag", vf.max_mag);
    viz->add_option("--config", vf.config);
    viz->add_flag("--dump-config", vf.dump_config);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*flow) {
            if (!ff.config.empty()) apply_config_file(flow, read_config_file(ff.config));
            if (!ff.dump_config && (ff.frame1.empty() || ff.frame2.empty() || ff.out.empty())) {
                std::cerr << "flow: --frame1, --frame2 and --out are required\n";
                return kExitUsage;
            }
            return cmd_flow(ff);
        }
        if (*deblur) {
            if (!df.config.empty()) apply_config_file(deblur, read_config_file(df.config));
            if (!df.dump_config &&
                (df.input.empty() || df.out_latent.empty() || df.out_kernel.empty())) {
                std::cerr << "deblur: --input, --out-latent and --out-kernel are required\n";
                return kExitUsage;
            }
            return cmd_deblur(df);
        }
        if (*bench_gen) {
            if (!bg.config.empty()) apply_config_file(bench_gen, read_config_file(bg.config));
            if (!bg.dump_config && bg.out_dir.empty()) {
                std::cerr << "bench-gen: --out-dir is required\n";
                return kExitUsage;
            }
            return cmd_bench_gen(bg);
        }
        if (*bench_eval) {
            if (!be.config.empty()) apply_config_file(bench_eval, read_config_file(be.config));
            if (!be.dump_config && be.dir.empty()) {
                std::cerr << "bench-eval: --dir is required\n";
                return kExitUsage;
            }
            return cmd_bench_eval(be);
        }
        if (*train) {
            if (!tf.config.empty()) apply_config_file(train, read_config_file(tf.config));
            if (!tf.dump_config && (tf.data.empty() || tf.out.empty())) {
                std::cerr << "train: --data and --out are required\n";
                return kExitUsage;
            }
            return cmd_train(tf);
        }
        if (*viz) {
            if (!vf.config.empty()) apply_config_file(viz, read_config_file(vf.config));
            if (!vf.dump_config && (vf.flo.empty() || vf.out.empty())) {
                std::cerr << "viz: --flo and --out are required\n";
                return kExitUsage;
            }
            return cmd_viz(vf);
        }
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const FormatError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitData;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
