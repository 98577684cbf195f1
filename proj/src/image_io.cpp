#include "idgen/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace idgen {

static unsigned char to_byte(float v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

void write_ppm(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || image.shape[0] != 3)
        throw std::runtime_error("write_ppm: expects [3,H,W]");
    const int h = image.shape[1], w = image.shape[2];
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_ppm: cannot open " + path);
    f << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                row[static_cast<std::size_t>(x) * 3 + c] =
                    to_byte((*image.data)[(static_cast<std::size_t>(c) * h + y) * w + x]);
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw std::runtime_error("write_ppm: write failed for " + path);
}

static void skip_ws_and_comments(std::istream& in) {
    int c = in.peek();
    while (c == '#' || std::isspace(c)) {
        if (c == '#') in.ignore(1 << 20, '\n');
        else in.get();
        c = in.peek();
    }
}

Tensor read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_ppm: cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P6") throw std::runtime_error("read_ppm: not a binary PPM: " + path);
    int w = 0, h = 0, maxval = 0;
    skip_ws_and_comments(f); f >> w;
    skip_ws_and_comments(f); f >> h;
    skip_ws_and_comments(f); f >> maxval;
    if (w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error("read_ppm: unsupported header in " + path);
    f.get();  // single whitespace after header
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!f) throw std::runtime_error("read_ppm: truncated file " + path);
    Tensor img = Tensor::zeros({3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                (*img.data)[(static_cast<std::size_t>(c) * h + y) * w + x] =
                    static_cast<float>(raw[(static_cast<std::size_t>(y) * w + x) * 3 + c]) / 255.0f;
    return img;
}

void write_pgm(const std::string& path, const Mask& mask, int width, int height) {
    if (static_cast<std::size_t>(width) * height != mask.size())
        throw std::runtime_error("write_pgm: mask size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pgm: cannot open " + path);
    f << "P5\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> buf(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) buf[i] = mask[i] ? 255 : 0;
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("write_pgm: write failed for " + path);
}

}  // namespace idgen
