#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace chat2map::harness {

// -----------------------------------------------------------------------------
// Minimal deterministic PNG writer. The zlib stream uses stored (uncompressed)
// deflate blocks, so the bytes depend only on the pixels — identical inputs
// give identical files on every platform.
// -----------------------------------------------------------------------------

namespace png_detail {

inline uint32_t crc32(const uint8_t* data, size_t n, uint32_t crc = 0xffffffffu) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  for (size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
  return crc;
}

inline uint32_t adler32(const uint8_t* data, size_t n) {
  uint32_t a = 1, b = 0;
  for (size_t i = 0; i < n; ++i) {
    a = (a + data[i]) % 65521u;
    b = (b + a) % 65521u;
  }
  return (b << 16) | a;
}

inline void put_u32(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(static_cast<uint8_t>(x >> 24));
  v.push_back(static_cast<uint8_t>(x >> 16));
  v.push_back(static_cast<uint8_t>(x >> 8));
  v.push_back(static_cast<uint8_t>(x));
}

inline void put_chunk(std::vector<uint8_t>& out, const char* type,
                      const std::vector<uint8_t>& data) {
  put_u32(out, static_cast<uint32_t>(data.size()));
  size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  put_u32(out, crc32(out.data() + crc_start, out.size() - crc_start) ^ 0xffffffffu);
}

// zlib wrapper around stored deflate blocks.
inline std::vector<uint8_t> zlib_stored(const std::vector<uint8_t>& raw) {
  std::vector<uint8_t> z;
  z.push_back(0x78);
  z.push_back(0x01);
  size_t pos = 0;
  do {
    size_t len = std::min<size_t>(raw.size() - pos, 65535);
    bool final = pos + len == raw.size();
    z.push_back(final ? 1 : 0);
    z.push_back(static_cast<uint8_t>(len & 0xff));
    z.push_back(static_cast<uint8_t>(len >> 8));
    z.push_back(static_cast<uint8_t>(~len & 0xff));
    z.push_back(static_cast<uint8_t>((~len >> 8) & 0xff));
    z.insert(z.end(), raw.begin() + pos, raw.begin() + pos + len);
    pos += len;
  } while (pos < raw.size());
  uint32_t ad = adler32(raw.data(), raw.size());
  put_u32(z, ad);
  return z;
}

}  // namespace png_detail

// RGB image buffer; (0,0) is the top-left corner.
struct Image {
  int width = 0, height = 0;
  std::vector<uint8_t> rgb;  // 3 bytes per pixel, row-major

  static Image make(int w, int h, uint8_t r = 255, uint8_t g = 255, uint8_t b = 255) {
    Image im;
    im.width = w;
    im.height = h;
    im.rgb.resize(static_cast<size_t>(w) * h * 3);
    for (size_t i = 0; i < im.rgb.size(); i += 3) {
      im.rgb[i] = r;
      im.rgb[i + 1] = g;
      im.rgb[i + 2] = b;
    }
    return im;
  }

  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || x >= width || y < 0 || y >= height) return;
    size_t i = (static_cast<size_t>(y) * width + x) * 3;
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
  }
};

inline void write_png(const std::filesystem::path& path, const Image& im) {
  using namespace png_detail;
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(im.height) * (1 + static_cast<size_t>(im.width) * 3));
  for (int y = 0; y < im.height; ++y) {
    raw.push_back(0);  // filter: none
    const uint8_t* row = im.rgb.data() + static_cast<size_t>(y) * im.width * 3;
    raw.insert(raw.end(), row, row + static_cast<size_t>(im.width) * 3);
  }
  std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<uint8_t> ihdr;
  put_u32(ihdr, static_cast<uint32_t>(im.width));
  put_u32(ihdr, static_cast<uint32_t>(im.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", zlib_stored(raw));
  put_chunk(out, "IEND", {});
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_png: cannot open " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

// -----------------------------------------------------------------------------
// Line charts. Each plot is emitted twice: a PNG rendering and a CSV twin with
// the exact numbers, sharing the base path.
// -----------------------------------------------------------------------------

struct Series {
  std::string name;
  std::vector<double> y;
  std::vector<double> y_err;  // optional; drawn as vertical bars when present
};

struct LinePlot {
  std::string title;  // recorded in the CSV header comment
  std::string x_label = "x", y_label = "y";
  std::vector<Series> series;
  int width = 640, height = 400;
};

namespace plot_detail {

// Fixed palette; index wraps.
inline std::array<uint8_t, 3> palette(size_t i) {
  static const std::array<std::array<uint8_t, 3>, 6> colors = {{{31, 119, 180},
                                                                {255, 127, 14},
                                                                {44, 160, 44},
                                                                {214, 39, 40},
                                                                {148, 103, 189},
                                                                {140, 86, 75}}};
  return colors[i % colors.size()];
}

inline void draw_line(Image& im, int x0, int y0, int x1, int y1, uint8_t r, uint8_t g,
                      uint8_t b) {
  int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    im.set(x0, y0, r, g, b);
    if (x0 == x1 && y0 == y1) break;
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

}  // namespace plot_detail

inline Image render_line_plot(const LinePlot& plot) {
  using plot_detail::draw_line;
  Image im = Image::make(plot.width, plot.height);
  const int ml = 50, mr = 20, mt = 20, mb = 40;  // margins
  const int px0 = ml, px1 = plot.width - mr, py0 = plot.height - mb, py1 = mt;

  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  size_t nmax = 0;
  for (const auto& s : plot.series) {
    nmax = std::max(nmax, s.y.size());
    for (size_t i = 0; i < s.y.size(); ++i) {
      double e = i < s.y_err.size() ? s.y_err[i] : 0.0;
      ymin = std::min(ymin, s.y[i] - e);
      ymax = std::max(ymax, s.y[i] + e);
    }
  }
  if (!(ymin < ymax)) {
    ymin = std::isfinite(ymin) ? ymin - 0.5 : 0.0;
    ymax = ymin + 1.0;
  }
  double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  auto sx = [&](size_t i) {
    if (nmax <= 1) return (px0 + px1) / 2;
    return px0 + static_cast<int>(std::lround(static_cast<double>(i) * (px1 - px0) /
                                              static_cast<double>(nmax - 1)));
  };
  auto sy = [&](double v) {
    return py0 - static_cast<int>(std::lround((v - ymin) / (ymax - ymin) * (py0 - py1)));
  };

  // Axes and a light horizontal grid at quarter levels.
  for (int k = 0; k <= 4; ++k) {
    int y = py0 - k * (py0 - py1) / 4;
    draw_line(im, px0, y, px1, y, 230, 230, 230);
  }
  draw_line(im, px0, py0, px1, py0, 60, 60, 60);
  draw_line(im, px0, py0, px0, py1, 60, 60, 60);

  for (size_t si = 0; si < plot.series.size(); ++si) {
    const auto& s = plot.series[si];
    auto [r, g, b] = plot_detail::palette(si);
    for (size_t i = 0; i < s.y.size(); ++i) {
      if (i + 1 < s.y.size())
        draw_line(im, sx(i), sy(s.y[i]), sx(i + 1), sy(s.y[i + 1]), r, g, b);
      if (i < s.y_err.size() && s.y_err[i] > 0)
        draw_line(im, sx(i), sy(s.y[i] - s.y_err[i]), sx(i), sy(s.y[i] + s.y_err[i]), r, g, b);
      // Point marker.
      for (int dy2 = -1; dy2 <= 1; ++dy2)
        for (int dx2 = -1; dx2 <= 1; ++dx2) im.set(sx(i) + dx2, sy(s.y[i]) + dy2, r, g, b);
    }
    // Legend swatch in the top-left plot area, one row per series.
    int ly = py1 + 6 + static_cast<int>(si) * 8;
    draw_line(im, px0 + 6, ly, px0 + 22, ly, r, g, b);
  }
  return im;
}

// Writes `<base>.png` and `<base>.csv`; both depend only on the plot contents.
inline void emit_plot(const std::filesystem::path& base, const LinePlot& plot) {
  write_png(base.string() + ".png", render_line_plot(plot));
  std::ofstream csv(base.string() + ".csv");
  if (!csv) throw std::runtime_error("emit_plot: cannot open " + base.string() + ".csv");
  csv << "# " << plot.title << "\n";
  csv << plot.x_label;
  bool any_err = false;
  for (const auto& s : plot.series) {
    csv << "," << s.name;
    if (!s.y_err.empty()) any_err = true;
  }
  if (any_err)
    for (const auto& s : plot.series) csv << "," << s.name << "_err";
  csv << "\n";
  size_t nmax = 0;
  for (const auto& s : plot.series) nmax = std::max(nmax, s.y.size());
  csv.precision(10);
  for (size_t i = 0; i < nmax; ++i) {
    csv << i;
    for (const auto& s : plot.series) {
      csv << ",";
      if (i < s.y.size()) csv << s.y[i];
    }
    if (any_err)
      for (const auto& s : plot.series) {
        csv << ",";
        if (i < s.y_err.size()) csv << s.y_err[i];
      }
    csv << "\n";
  }
}

}  // namespace chat2map::harness
