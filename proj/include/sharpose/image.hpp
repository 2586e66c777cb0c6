#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sharpose {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense H x W x C image, row-major, values nominally in [0, 1].
struct ImageTensor {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<double> data;

  static ImageTensor zeros(int h, int w, int c) {
    ImageTensor img;
    img.h = h;
    img.w = w;
    img.c = c;
    img.data.assign(static_cast<std::size_t>(h) * w * c, 0.0);
    return img;
  }

  double at(int y, int x, int ch) const { return data[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
  double& at(int y, int x, int ch) { return data[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
};

namespace detail {

inline int read_pnm_token(std::istream& in) {
  // Skips whitespace and '#' comments between header tokens.
  while (true) {
    int ch = in.peek();
    if (ch == '#') {
      std::string dummy;
      std::getline(in, dummy);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  int v = 0;
  if (!(in >> v)) throw IoError("pnm: malformed header");
  return v;
}

}  // namespace detail

// Reads binary PGM (P5) or PPM (P6), 8- or 16-bit, scaled to [0, 1].
inline ImageTensor read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("pnm: cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P6") throw IoError("pnm: unsupported magic '" + magic + "' in " + path);
  const int channels = magic == "P6" ? 3 : 1;
  const int w = detail::read_pnm_token(in);
  const int h = detail::read_pnm_token(in);
  const int maxval = detail::read_pnm_token(in);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw IoError("pnm: bad header in " + path);
  in.get();  // single whitespace after maxval
  ImageTensor img = ImageTensor::zeros(h, w, channels);
  const std::size_t n = img.data.size();
  if (maxval < 256) {
    std::vector<unsigned char> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (!in) throw IoError("pnm: truncated pixel data in " + path);
    for (std::size_t i = 0; i < n; ++i) img.data[i] = buf[i] / static_cast<double>(maxval);
  } else {
    std::vector<unsigned char> buf(n * 2);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw IoError("pnm: truncated pixel data in " + path);
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned v = (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1];  // big-endian per PNM
      img.data[i] = v / static_cast<double>(maxval);
    }
  }
  return img;
}

inline void write_ppm(const std::string& path, const ImageTensor& img) {
  if (img.c != 3) throw IoError("ppm: expected 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("ppm: cannot open " + path + " for writing");
  out << "P6\n" << img.w << " " << img.h << "\n255\n";
  std::vector<unsigned char> buf(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    buf[i] = static_cast<unsigned char>(std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("ppm: write failed for " + path);
}

// 16-bit PGM export, min-max normalized: min -> 0, max -> 65535. A constant
// map writes all zeros. Used for heatmaps and masks.
inline void write_pgm16_minmax(const std::string& path, const std::vector<double>& values, int h, int w) {
  if (values.size() != static_cast<std::size_t>(h) * w) throw IoError("pgm16: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("pgm16: cannot open " + path + " for writing");
  out << "P5\n" << w << " " << h << "\n65535\n";
  double lo = values.empty() ? 0.0 : values[0];
  double hi = lo;
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = hi - lo;
  std::vector<unsigned char> buf(values.size() * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double t = range > 0.0 ? (values[i] - lo) / range : 0.0;
    const unsigned v = static_cast<unsigned>(std::lround(t * 65535.0));
    buf[2 * i] = static_cast<unsigned char>(v >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("pgm16: write failed for " + path);
}

}  // namespace sharpose
