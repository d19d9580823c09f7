// Python bindings for the main operations: flow estimation, blind/non-blind
// deblurring, kernel estimation, synthetic benchmark cases, metrics, and
// .flo interchange. All image arrays are float64; grayscale arrays are
// (H, W), multi-channel arrays (H, W, C). Flow fields are (H, W, 2) with
// (u, v) in the last axis.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lmof/bench.hpp"
#include "lmof/deconv.hpp"
#include "lmof/featurenet.hpp"
#include "lmof/flowsolve.hpp"
#include "lmof/io.hpp"

namespace py = pybind11;
using namespace lmof;

namespace {

Image image_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 && a.ndim() != 3)
        throw std::invalid_argument("expected a (H, W) or (H, W, C) array");
    const int h = static_cast<int>(a.shape(0));
    const int w = static_cast<int>(a.shape(1));
    const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
    Image img(w, h, c);
    std::copy(a.data(), a.data() + img.size(), img.data.begin());
    return img;
}

py::array_t<double> array_from_image(const Image& img) {
    py::array_t<double> a(img.channels == 1
                              ? std::vector<py::ssize_t>{img.height, img.width}
                              : std::vector<py::ssize_t>{img.height, img.width, img.channels});
    std::copy(img.data.begin(), img.data.end(), a.mutable_data());
    return a;
}

BlurKernel kernel_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 || a.shape(0) != a.shape(1))
        throw std::invalid_argument("expected a square (side, side) kernel array");
    BlurKernel k(static_cast<int>(a.shape(0)));
    std::copy(a.data(), a.data() + k.weights.size(), k.weights.begin());
    return k;
}

py::array_t<double> array_from_kernel(const BlurKernel& k) {
    py::array_t<double> a({static_cast<py::ssize_t>(k.side), static_cast<py::ssize_t>(k.side)});
    std::copy(k.weights.begin(), k.weights.end(), a.mutable_data());
    return a;
}

FlowField flow_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 3 || a.shape(2) != 2)
        throw std::invalid_argument("expected a (H, W, 2) flow array");
    const int h = static_cast<int>(a.shape(0));
    const int w = static_cast<int>(a.shape(1));
    FlowField f(w, h);
    const double* p = a.data();
    for (size_t i = 0; i < f.pixels(); ++i) {
        f.u[i] = p[2 * i];
        f.v[i] = p[2 * i + 1];
    }
    return f;
}

py::array_t<double> array_from_flow(const FlowField& f) {
    py::array_t<double> a({static_cast<py::ssize_t>(f.height), static_cast<py::ssize_t>(f.width),
                           static_cast<py::ssize_t>(2)});
    double* p = a.mutable_data();
    for (size_t i = 0; i < f.pixels(); ++i) {
        p[2 * i] = f.u[i];
        p[2 * i + 1] = f.v[i];
    }
    return a;
}

FlowConfig flow_config(double gamma, double alpha, double epsilon, double eta, int cg_iters,
                       int outer_iters, const std::string& deblur, bool blur_match,
                       int kernel_side, const std::string& params_path) {
    FlowConfig cfg;
    cfg.gamma = gamma;
    cfg.alpha = alpha;
    cfg.epsilon = epsilon;
    cfg.eta = eta;
    cfg.cg_iters = cg_iters;
    cfg.outer_iters = outer_iters;
    if (deblur == "per_level")
        cfg.deblur_mode = DeblurMode::PerLevel;
    else if (deblur == "independent")
        cfg.deblur_mode = DeblurMode::Independent;
    else if (deblur == "off")
        cfg.deblur_mode = DeblurMode::Off;
    else
        throw std::invalid_argument("deblur must be per_level|independent|off");
    cfg.blur_match = blur_match;
    cfg.deconv.kernel_side = kernel_side;
    if (!params_path.empty()) cfg.net = load_params(params_path);
    cfg.validate();
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_lmof, m) {
    m.doc() = "Blur-robust optical flow: deblurring-in-the-loop variational solver";

    py::register_exception<NumericalError>(m, "NumericalError");
    py::register_exception<FormatError>(m, "FormatError");

    m.def(
        "estimate_flow",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> frame1,
           py::array_t<double, py::array::c_style | py::array::forcecast> frame2, double gamma,
           double alpha, double epsilon, double eta, int cg_iters, int outer_iters,
           const std::string& deblur, bool blur_match, int kernel_side,
           const std::string& params) {
            const FlowConfig cfg = flow_config(gamma, alpha, epsilon, eta, cg_iters, outer_iters,
                                               deblur, blur_match, kernel_side, params);
            return array_from_flow(
                estimate_flow(image_from_array(frame1), image_from_array(frame2), cfg));
        },
        py::arg("frame1"), py::arg("frame2"), py::kw_only(), py::arg("gamma") = 2.0,
        py::arg("alpha") = 0.9, py::arg("epsilon") = 5e-2, py::arg("eta") = 0.8,
        py::arg("cg_iters") = 60, py::arg("outer_iters") = 5, py::arg("deblur") = "per_level",
        py::arg("blur_match") = true, py::arg("kernel_side") = 15, py::arg("params") = "",
        "Coarse-to-fine flow between two frames; returns an (H, W, 2) array.");

    m.def(
        "deblur",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> image, int iterations,
           int kernel_side, const std::string& params) {
            DeconvConfig cfg;
            cfg.iterations = iterations;
            cfg.kernel_side = kernel_side;
            cfg.validate();
            const NetParams net = params.empty() ? NetParams::initialize(NetArch{}, 0x1a0fULL)
                                                 : load_params(params);
            auto [latent, kernel] = deblur_iterate(image_from_array(image), net, cfg);
            return py::make_tuple(array_from_image(latent), array_from_kernel(kernel));
        },
        py::arg("image"), py::kw_only(), py::arg("iterations") = 3, py::arg("kernel_side") = 15,
        py::arg("params") = "",
        "Blind deblurring loop; returns (latent, kernel). The latent is not clipped.");

    m.def(
        "estimate_kernel",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> blurred,
           py::array_t<double, py::array::c_style | py::array::forcecast> latent, int kernel_side,
           double beta_k) {
            DeconvConfig cfg;
            cfg.kernel_side = kernel_side;
            cfg.beta_k = beta_k;
            cfg.validate();
            return array_from_kernel(
                estimate_kernel({image_from_array(blurred)}, {image_from_array(latent)}, cfg));
        },
        py::arg("blurred"), py::arg("latent"), py::kw_only(), py::arg("kernel_side") = 15,
        py::arg("beta_k") = 1e-2,
        "Least-squares blur kernel relating a latent image to its blurred observation.");

    m.def(
        "nonblind_deconv",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> image,
           py::array_t<double, py::array::c_style | py::array::forcecast> kernel, double beta_l) {
            return array_from_image(
                nonblind_deconv(image_from_array(image), kernel_from_array(kernel), beta_l));
        },
        py::arg("image"), py::arg("kernel"), py::kw_only(), py::arg("beta_l") = 2e-3,
        "Tikhonov-regularized deconvolution with a known kernel.");

    m.def(
        "blur_match",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> frame1,
           py::array_t<double, py::array::c_style | py::array::forcecast> frame2,
           py::array_t<double, py::array::c_style | py::array::forcecast> k1,
           py::array_t<double, py::array::c_style | py::array::forcecast> k2) {
            auto [B1, B2] = blur_match(image_from_array(frame1), image_from_array(frame2),
                                       kernel_from_array(k1), kernel_from_array(k2));
            return py::make_tuple(array_from_image(B1), array_from_image(B2));
        },
        py::arg("frame1"), py::arg("frame2"), py::arg("k1"), py::arg("k2"),
        "Cross-convolve the frames so both carry the same compound blur.");

    m.def(
        "make_case",
        [](int width, int height, double flow_u, double flow_v, int kernel_side,
           const std::string& noise, double noise_level, uint64_t seed) {
            const auto base = synthetic_base_kernels(2, kernel_side, seed ^ 0x5bd1e995u);
            const GtCase c = make_case(width, height, flow_u, flow_v, base[0], base[1],
                                       parse_noise_kind(noise), noise_level, seed);
            py::dict d;
            d["sharp1"] = array_from_image(c.sharp1);
            d["sharp2"] = array_from_image(c.sharp2);
            d["blurred1"] = array_from_image(c.blurred1);
            d["blurred2"] = array_from_image(c.blurred2);
            d["gt_flow"] = array_from_flow(c.gt_flow);
            d["k1"] = array_from_kernel(c.k1);
            d["k2"] = array_from_kernel(c.k2);
            return d;
        },
        py::arg("width"), py::arg("height"), py::arg("flow_u"), py::arg("flow_v"), py::kw_only(),
        py::arg("kernel_side") = 9, py::arg("noise") = "gaussian", py::arg("noise_level") = 0.0,
        py::arg("seed") = 1,
        "Synthetic ground-truth case: textured pair, known flow, oriented blur kernels.");

    m.def(
        "aee",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> est,
           py::array_t<double, py::array::c_style | py::array::forcecast> gt) {
            return aee(flow_from_array(est), flow_from_array(gt));
        },
        py::arg("est"), py::arg("gt"), "Average endpoint error in pixels.");

    m.def(
        "aae",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> est,
           py::array_t<double, py::array::c_style | py::array::forcecast> gt) {
            return aae(flow_from_array(est), flow_from_array(gt));
        },
        py::arg("est"), py::arg("gt"), "Average angular error in degrees, (u, v, 1) convention.");

    m.def(
        "psnr",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> a,
           py::array_t<double, py::array::c_style | py::array::forcecast> b) {
            return psnr(image_from_array(a), image_from_array(b));
        },
        py::arg("a"), py::arg("b"), "PSNR in dB for unit-peak images.");

    m.def(
        "read_flo", [](const std::string& path) { return array_from_flow(read_flo(path)); },
        py::arg("path"), "Read a Middlebury .flo file as an (H, W, 2) array.");

    m.def(
        "write_flo",
        [](const std::string& path,
           py::array_t<double, py::array::c_style | py::array::forcecast> flow) {
            write_flo(path, flow_from_array(flow));
        },
        py::arg("path"), py::arg("flow"), "Write an (H, W, 2) array as a Middlebury .flo file.");

    m.def(
        "flow_to_color",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> flow,
           std::optional<double> max_mag) {
            return array_from_image(flow_to_color(flow_from_array(flow), max_mag));
        },
        py::arg("flow"), py::arg("max_mag") = py::none(),
        "Render a flow field with the standard color wheel; zero flow is white.");
}
