#include "igtrack/image.hpp"

#include <fstream>
#include <string>

#include "igtrack/errors.hpp"

namespace igtrack {

std::array<double, 3> Image::mean_color() const {
    std::array<double, 3> sum{0, 0, 0};
    const std::size_t n = static_cast<std::size_t>(width) * height;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < 3; ++c) sum[c] += rgb[i * 3 + c];
    }
    for (double& v : sum) v /= static_cast<double>(n == 0 ? 1 : n);
    return sum;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

namespace {

int read_header_int(std::istream& in, const std::filesystem::path& path) {
    in >> std::ws;
    while (in.peek() == '#') {
        std::string comment;
        std::getline(in, comment);
        in >> std::ws;
    }
    int v = -1;
    if (!(in >> v) || v <= 0) throw IoError("malformed PPM header in " + path.string());
    return v;
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P6") throw IoError(path.string() + " is not a binary PPM (P6)");
    const int w = read_header_int(in, path);
    const int h = read_header_int(in, path);
    const int maxval = read_header_int(in, path);
    if (maxval != 255) throw IoError(path.string() + ": only maxval 255 is supported");
    in.get();  // single whitespace before the raster
    Image img(w, h);
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) throw IoError(path.string() + ": truncated raster");
    return img;
}

}  // namespace igtrack
