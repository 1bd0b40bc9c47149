#include "dualcnn/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "dualcnn/errors.hpp"

namespace dualcnn {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "sidecar and checkpoint writers assume a little-endian host");

namespace {

std::vector<unsigned char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return bytes;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

// Skips whitespace and '#' comments, then parses an unsigned decimal.
std::size_t pnm_token(const std::vector<unsigned char>& b, std::size_t& pos,
                      const fs::path& path) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= b.size() || !std::isdigit(b[pos])) {
    throw FormatError("malformed PGM header in '" + path.string() + "'");
  }
  std::size_t v = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + (b[pos] - '0');
    if (v > (1u << 30)) throw FormatError("PGM dimension too large in '" + path.string() + "'");
    ++pos;
  }
  return v;
}

}  // namespace

Tensor read_pgm(const fs::path& path) {
  const auto b = slurp(path);
  if (b.size() < 2 || b[0] != 'P' || b[1] != '5') {
    throw FormatError("'" + path.string() + "' is not a binary PGM (P5) file");
  }
  std::size_t pos = 2;
  const std::size_t w = pnm_token(b, pos, path);
  const std::size_t h = pnm_token(b, pos, path);
  const std::size_t maxval = pnm_token(b, pos, path);
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) {
    throw FormatError("invalid PGM geometry or maxval in '" + path.string() + "'");
  }
  ++pos;  // single whitespace byte before the raster
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  if (b.size() < pos + w * h * bpp) {
    throw FormatError("truncated PGM raster in '" + path.string() + "'");
  }
  Tensor img(1, h, w);
  const double inv = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < w * h; ++i) {
    const std::size_t v = bpp == 1 ? b[pos + i] : (b[pos + 2 * i] << 8) | b[pos + 2 * i + 1];
    img[i] = static_cast<double>(v) * inv;
  }
  return img;
}

void write_pgm(const fs::path& path, const Tensor& image, double offset) {
  auto out = open_out(path);
  out << "P5\n" << image.width() << " " << image.height() << "\n255\n";
  std::vector<unsigned char> raster(image.height() * image.width());
  auto plane = image.channel(0);
  for (std::size_t i = 0; i < raster.size(); ++i) {
    const double v = std::clamp(plane[i] + offset, 0.0, 1.0);
    raster[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raster.data()),
            static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

void write_sidecar(const fs::path& path, const Tensor& tensor) {
  auto out = open_out(path);
  const std::uint64_t header[3] = {tensor.channels(), tensor.height(), tensor.width()};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(tensor.data().data()),
            static_cast<std::streamsize>(tensor.size() * sizeof(double)));
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

Tensor read_sidecar(const fs::path& path) {
  const auto b = slurp(path);
  std::uint64_t header[3];
  if (b.size() < sizeof(header)) throw FormatError("truncated sidecar '" + path.string() + "'");
  std::memcpy(header, b.data(), sizeof(header));
  if (header[0] == 0 || header[1] == 0 || header[2] == 0 || header[0] > (1u << 20) ||
      header[1] > (1u << 20) || header[2] > (1u << 20)) {
    throw FormatError("invalid sidecar shape in '" + path.string() + "'");
  }
  const Shape shape{header[0], header[1], header[2]};
  if (b.size() != sizeof(header) + shape.size() * sizeof(double)) {
    throw FormatError("sidecar '" + path.string() + "' has the wrong payload length");
  }
  std::vector<double> data(shape.size());
  std::memcpy(data.data(), b.data() + sizeof(header), data.size() * sizeof(double));
  return Tensor(shape, std::move(data));
}

Tensor read_image(const fs::path& path) {
  const auto ext = path.extension();
  if (ext == ".f64") return read_sidecar(path);
  if (ext == ".pgm" || ext == ".pnm") return read_pgm(path);
  throw ValidationError("unsupported image format '" + ext.string() + "' (expected .pgm or .f64)");
}

void write_image_pair(const fs::path& stem, const Tensor& image, double display_offset) {
  fs::path pgm = stem;
  pgm += ".pgm";
  fs::path raw = stem;
  raw += ".f64";
  write_pgm(pgm, image, display_offset);
  write_sidecar(raw, image);
}

}  // namespace dualcnn
