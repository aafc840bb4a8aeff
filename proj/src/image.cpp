#include "dnp/image.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

namespace dnp {

namespace {

int read_header_int(std::istream& in) {
  int c = in.peek();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else {
      in.get();
    }
    c = in.peek();
  }
  int value = 0;
  if (!(in >> value)) throw std::runtime_error("pnm: malformed header");
  return value;
}

}  // namespace

Image read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image '" + path + "'");
  char magic[2] = {};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
    throw std::runtime_error("'" + path + "' is not a binary PGM/PPM");
  const int channels = magic[1] == '5' ? 1 : 3;
  const int w = read_header_int(in);
  const int h = read_header_int(in);
  const int maxval = read_header_int(in);
  if (w < 1 || h < 1 || maxval != 255)
    throw std::runtime_error("'" + path + "': only 8-bit images with maxval 255 supported");
  in.get();
  Image image(w, h, channels);
  in.read(reinterpret_cast<char*>(image.pixels.data()),
          static_cast<std::streamsize>(image.pixels.size()));
  if (!in) throw std::runtime_error("'" + path + "': truncated pixel data");
  return image;
}

void write_pnm(const std::string& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3)
    throw std::invalid_argument("write_pnm: 1 or 3 channels required");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image '" + path + "'");
  out << (image.channels == 1 ? "P5" : "P6") << '\n'
      << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
}

Tensor to_input(const Image& image, int channels) {
  if (image.channels != 1 && image.channels != channels)
    throw std::invalid_argument("image has " + std::to_string(image.channels) +
                                " channels, net expects " + std::to_string(channels));
  Tensor t(channels, image.height, image.width);
  for (int c = 0; c < channels; ++c) {
    const int src = image.channels == 1 ? 0 : c;
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x)
        t(c, y, x) = static_cast<float>(image.at(x, y, src)) / 255.0f - 0.5f;
  }
  return t;
}

std::vector<float> grayscale(const Image& image) {
  std::vector<float> gray(static_cast<std::size_t>(image.width) * image.height);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      float sum = 0.0f;
      for (int c = 0; c < image.channels; ++c) sum += image.at(x, y, c);
      gray[static_cast<std::size_t>(y) * image.width + x] = sum / image.channels;
    }
  return gray;
}

}  // namespace dnp
