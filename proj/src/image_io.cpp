#include "cris/image_io.hpp"

#include <cctype>
#include <fstream>
#include <iterator>

namespace cris {

namespace {

std::vector<std::uint8_t> header(const char* magic, int w, int h) {
  const std::string s = std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  return {s.begin(), s.end()};
}

// Parses "Px <w> <h> <maxval>" plus the single whitespace byte before the raster.
struct Header {
  int width = 0, height = 0;
  std::size_t offset = 0;
};

Header parse_header(const std::vector<std::uint8_t>& bytes, char kind) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != static_cast<std::uint8_t>(kind)) {
    std::string got = bytes.size() >= 2 ? std::string{static_cast<char>(bytes[0]), static_cast<char>(bytes[1])} : "";
    throw DataError(std::string("unsupported image format '") + got + "', expected P" + kind);
  }
  std::size_t pos = 2;
  auto next_int = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw DataError("malformed netpbm header");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 1 << 20) throw DataError("netpbm header value too large");
    }
    return static_cast<int>(v);
  };
  Header h;
  h.width = next_int();
  h.height = next_int();
  const int maxval = next_int();
  if (h.width <= 0 || h.height <= 0) throw DataError("netpbm image has zero extent");
  if (maxval != 255) throw DataError("unsupported netpbm maxval " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw DataError("malformed netpbm header");
  h.offset = pos + 1;
  return h;
}

}  // namespace

std::vector<std::uint8_t> encode_ppm(const RgbImage& image) {
  auto out = header("P6", image.width, image.height);
  out.insert(out.end(), image.rgb.begin(), image.rgb.end());
  return out;
}

RgbImage decode_ppm(const std::vector<std::uint8_t>& bytes) {
  const Header h = parse_header(bytes, '6');
  RgbImage img(h.height, h.width);
  if (bytes.size() - h.offset != img.rgb.size()) throw DataError("PPM raster size does not match its header");
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(h.offset), bytes.end(), img.rgb.begin());
  return img;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  auto out = header("P5", image.width, image.height);
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes) {
  const Header h = parse_header(bytes, '5');
  GrayImage img;
  img.height = h.height;
  img.width = h.width;
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.offset), bytes.end());
  if (img.pixels.size() != static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height)) {
    throw DataError("PGM raster size does not match its header");
  }
  return img;
}

std::vector<std::uint8_t> encode_mask(const BinaryMask& mask) {
  GrayImage g{mask.height, mask.width, {}};
  g.pixels.reserve(mask.pixels.size());
  for (std::uint8_t p : mask.pixels) g.pixels.push_back(p ? 255 : 0);
  return encode_pgm(g);
}

BinaryMask decode_mask(const std::vector<std::uint8_t>& bytes) {
  const GrayImage g = decode_pgm(bytes);
  BinaryMask m(g.height, g.width);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    if (g.pixels[i] != 0 && g.pixels[i] != 255) throw DataError("mask not binary");
    m.pixels[i] = g.pixels[i] ? 1 : 0;
  }
  return m;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

Tensor image_tensor(const RgbImage& image) {
  const std::size_t plane = static_cast<std::size_t>(image.height) * static_cast<std::size_t>(image.width);
  std::vector<double> data(3 * plane);
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c) data[c * plane + i] = image.rgb[i * 3 + c] / 127.5 - 1.0;
  return Tensor::from({3, image.height, image.width}, std::move(data));
}

}  // namespace cris
