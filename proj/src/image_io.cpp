#include "rotadapt/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "rotadapt/errors.hpp"

namespace rotadapt {

namespace {

// Next whitespace-delimited token, skipping '#' comments.
std::string ppm_token(std::istream& in) {
    std::string tok;
    char c;
    while (in.get(c)) {
        if (c == '#') {
            while (in.get(c) && c != '\n') {}
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(c);
    }
    return tok;
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read image " + path.string());
    if (ppm_token(f) != "P6")
        throw DataError("image " + path.string() + ": not a binary PPM (P6)");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(ppm_token(f));
        h = std::stoi(ppm_token(f));
        maxval = std::stoi(ppm_token(f));
    } catch (const std::exception&) {
        throw DataError("image " + path.string() + ": malformed PPM header");
    }
    if (w < 1 || h < 1) throw DataError("image " + path.string() + ": bad dimensions");
    if (maxval != 255)
        throw DataError("image " + path.string() + ": only maxval 255 is supported");

    std::vector<unsigned char> raw(static_cast<size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(f.gcount()) != raw.size())
        throw DataError("image " + path.string() + ": truncated pixel data");

    Image img(h, w, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = raw[(static_cast<size_t>(y) * w + x) * 3 + c] / 255.0;
    return img;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
    if (img.c != 3) throw InputError("write_ppm: expected a 3-channel image");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write image " + path.string());
    f << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> raw(static_cast<size_t>(img.w) * img.h * 3);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
                raw[(static_cast<size_t>(y) * img.w + x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
    f.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
    if (!f) throw DataError("failed writing image " + path.string());
}

Image center_crop_square(const Image& img) {
    if (img.h == img.w) return img;
    const int s = std::min(img.h, img.w);
    const int y0 = (img.h - s) / 2, x0 = (img.w - s) / 2;
    Image out(s, s, img.c);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
    return out;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw InputError("resize_bilinear: bad output size");
    if (img.h == out_h && img.w == out_w) return img;
    Image out(out_h, out_w, img.c);
    const double sy = static_cast<double>(img.h) / out_h;
    const double sx = static_cast<double>(img.w) / out_w;
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < out_h; ++y) {
            const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.h - 1.0);
            const int y0 = static_cast<int>(fy);
            const int y1 = std::min(y0 + 1, img.h - 1);
            const double wy = fy - y0;
            for (int x = 0; x < out_w; ++x) {
                const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.w - 1.0);
                const int x0 = static_cast<int>(fx);
                const int x1 = std::min(x0 + 1, img.w - 1);
                const double wx = fx - x0;
                out.at(c, y, x) = (1 - wy) * ((1 - wx) * img.at(c, y0, x0) +
                                              wx * img.at(c, y0, x1)) +
                                  wy * ((1 - wx) * img.at(c, y1, x0) +
                                        wx * img.at(c, y1, x1));
            }
        }
    return out;
}

}  // namespace rotadapt
