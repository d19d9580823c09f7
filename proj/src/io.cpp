#include "lmof/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

namespace lmof {

static constexpr float kFloTag = 202021.25f;

FlowField read_flo(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path);
    float tag = 0.0f;
    f.read(reinterpret_cast<char*>(&tag), 4);
    if (!f || tag != kFloTag)
        throw FormatError(path + ": bad flo tag at offset 0");
    int32_t w = 0, h = 0;
    f.read(reinterpret_cast<char*>(&w), 4);
    f.read(reinterpret_cast<char*>(&h), 4);
    if (!f) throw FormatError(path + ": truncated header at offset 4");
    if (w <= 0 || h <= 0)
        throw FormatError(path + ": nonpositive dimensions at offset 4");
    FlowField out(w, h);
    std::vector<float> buf(static_cast<size_t>(w) * h * 2);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    if (!f)
        throw FormatError(path + ": truncated data at offset " +
                          std::to_string(12 + f.gcount()));
    for (size_t i = 0; i < out.pixels(); ++i) {
        out.u[i] = buf[2 * i];
        out.v[i] = buf[2 * i + 1];
    }
    return out;
}

void write_flo(const std::string& path, const FlowField& w) {
    for (size_t i = 0; i < w.pixels(); ++i)
        if (!std::isfinite(w.u[i]) || !std::isfinite(w.v[i]))
            throw std::invalid_argument("write_flo: non-finite flow value");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(&kFloTag), 4);
    const int32_t iw = w.width, ih = w.height;
    f.write(reinterpret_cast<const char*>(&iw), 4);
    f.write(reinterpret_cast<const char*>(&ih), 4);
    std::vector<float> buf(w.pixels() * 2);
    for (size_t i = 0; i < w.pixels(); ++i) {
        buf[2 * i] = static_cast<float>(w.u[i]);
        buf[2 * i + 1] = static_cast<float>(w.v[i]);
    }
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    if (!f) throw FormatError(path + ": write failed");
}

static void hsv_to_rgb(double h, double s, double v, double* rgb) {
    h = h - std::floor(h / (2.0 * M_PI)) * 2.0 * M_PI;  // [0, 2pi)
    const double hh = h * 3.0 / M_PI;                   // [0, 6)
    const int i = static_cast<int>(hh) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (i) {
        case 0: rgb[0] = v; rgb[1] = t; rgb[2] = p; break;
        case 1: rgb[0] = q; rgb[1] = v; rgb[2] = p; break;
        case 2: rgb[0] = p; rgb[1] = v; rgb[2] = t; break;
        case 3: rgb[0] = p; rgb[1] = q; rgb[2] = v; break;
        case 4: rgb[0] = t; rgb[1] = p; rgb[2] = v; break;
        default: rgb[0] = v; rgb[1] = p; rgb[2] = q; break;
    }
}

Image flow_to_color(const FlowField& w, std::optional<double> max_mag) {
    for (size_t i = 0; i < w.pixels(); ++i)
        if (!std::isfinite(w.u[i]) || !std::isfinite(w.v[i]))
            throw std::invalid_argument("flow_to_color: non-finite flow");
    double norm;
    if (max_mag && *max_mag > 0.0) {
        norm = *max_mag;
    } else {
        std::vector<double> mags(w.pixels());
        for (size_t i = 0; i < w.pixels(); ++i)
            mags[i] = std::hypot(w.u[i], w.v[i]);
        std::sort(mags.begin(), mags.end());
        norm = mags[static_cast<size_t>(0.99 * (mags.size() - 1))];
        if (norm <= 0.0) norm = 1.0;
    }
    Image out(w.width, w.height, 3);
    for (int y = 0; y < w.height; ++y)
        for (int x = 0; x < w.width; ++x) {
            const size_t i = w.idx(x, y);
            const double mag = std::hypot(w.u[i], w.v[i]);
            const double hue = std::atan2(w.v[i], w.u[i]);
            double rgb[3];
            hsv_to_rgb(hue, std::min(1.0, mag / norm), 1.0, rgb);
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = rgb[c];
        }
    return out;
}

// ---------------------------------------------------------------------------
// PNM

static void skip_pnm_ws(std::istream& f) {
    int c;
    while ((c = f.peek()) != EOF) {
        if (c == '#') {
            std::string line;
            std::getline(f, line);
        } else if (std::isspace(c)) {
            f.get();
        } else {
            break;
        }
    }
}

static Image read_pnm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path);
    char p, n;
    f.get(p);
    f.get(n);
    if (p != 'P' || (n != '5' && n != '6')) throw FormatError(path + ": not a binary PGM/PPM");
    const int channels = n == '5' ? 1 : 3;
    int w, h, maxval;
    skip_pnm_ws(f);
    f >> w;
    skip_pnm_ws(f);
    f >> h;
    skip_pnm_ws(f);
    f >> maxval;
    if (!f || w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw FormatError(path + ": bad PNM header");
    f.get();  // single whitespace after maxval
    Image img(w, h, channels);
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(static_cast<size_t>(w) * h * channels * bytes);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw FormatError(path + ": truncated pixel data");
    for (size_t i = 0; i < img.data.size(); ++i) {
        const unsigned v = bytes == 2 ? (buf[2 * i] << 8) | buf[2 * i + 1] : buf[i];
        img.data[i] = static_cast<double>(v) / maxval;
    }
    return img;
}

static void write_pnm(const std::string& path, const Image& img, int bit_depth) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    const int maxval = bit_depth > 8 ? 65535 : 255;
    f << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n"
      << maxval << "\n";
    for (double v : img.data) {
        const unsigned q =
            static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
        if (maxval > 255) f.put(static_cast<char>(q >> 8));
        f.put(static_cast<char>(q & 0xff));
    }
    if (!f) throw FormatError(path + ": write failed");
}

// ---------------------------------------------------------------------------
// PNG

static Image read_png_file(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw FormatError("cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw FormatError(path + ": PNG decode error");
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    const int w = png_get_image_width(png, info);
    const int h = png_get_image_height(png, info);
    int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);  // little-endian reads below
    png_read_update_info(png, info);
    depth = png_get_bit_depth(png, info);
    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw FormatError(path + ": unsupported channel count");
    }
    std::vector<unsigned char> row(png_get_rowbytes(png, info));
    Image img(w, h, channels);
    const double maxval = depth == 16 ? 65535.0 : 255.0;
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w * channels; ++x) {
            const unsigned v = depth == 16
                                   ? row[2 * x] | (row[2 * x + 1] << 8)
                                   : row[x];
            img.data[static_cast<size_t>(y) * w * channels + x] = v / maxval;
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

static void write_png_file(const std::string& path, const Image& img, int bit_depth) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw FormatError("cannot open " + path + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw FormatError(path + ": PNG encode error");
    }
    png_init_io(png, fp);
    const int depth = bit_depth > 8 ? 16 : 8;
    png_set_IHDR(png, info, img.width, img.height, depth,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const unsigned maxval = depth == 16 ? 65535 : 255;
    std::vector<unsigned char> row(static_cast<size_t>(img.width) * img.channels *
                                   (depth == 16 ? 2 : 1));
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width * img.channels; ++x) {
            const double v = img.data[static_cast<size_t>(y) * img.width * img.channels + x];
            const unsigned q =
                static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
            if (depth == 16) {
                row[2 * x] = static_cast<unsigned char>(q >> 8);
                row[2 * x + 1] = static_cast<unsigned char>(q & 0xff);
            } else {
                row[x] = static_cast<unsigned char>(q);
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

static bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

Image read_image(const std::string& path) {
    if (has_suffix(path, ".png")) return read_png_file(path);
    if (has_suffix(path, ".pgm") || has_suffix(path, ".ppm") || has_suffix(path, ".pnm"))
        return read_pnm(path);
    throw FormatError(path + ": unsupported image format (png/pgm/ppm)");
}

void write_image(const std::string& path, const Image& img, int bit_depth) {
    if (has_suffix(path, ".png")) {
        write_png_file(path, img, bit_depth);
    } else if (has_suffix(path, ".pgm") || has_suffix(path, ".ppm") || has_suffix(path, ".pnm")) {
        write_pnm(path, img, bit_depth);
    } else {
        throw FormatError(path + ": unsupported image format (png/pgm/ppm)");
    }
}

}  // namespace lmof
