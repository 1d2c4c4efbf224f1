#include "mmrx/io.hpp"

#include <cfenv>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace mmrx::io {

namespace detail {

void write_bytes(std::ofstream& out, const void* data, std::size_t bytes,
                 const std::filesystem::path& path) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void read_bytes(std::ifstream& in, void* data, std::size_t bytes,
                const std::filesystem::path& path) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (in.gcount() != static_cast<std::streamsize>(bytes)) {
    throw IoError("unexpected end of file in '" + path.string() + "'");
  }
}

void write_u64_le(std::ofstream& out, std::uint64_t v, const std::filesystem::path& path) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  write_bytes(out, buf, 8, path);
}

std::uint64_t read_u64_le(std::ifstream& in, const std::filesystem::path& path) {
  unsigned char buf[8];
  read_bytes(in, buf, 8, path);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_u16_le(std::ofstream& out, std::uint16_t v, const std::filesystem::path& path) {
  unsigned char buf[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff)};
  write_bytes(out, buf, 2, path);
}

std::uint16_t read_u16_le(std::ifstream& in, const std::filesystem::path& path) {
  unsigned char buf[2];
  read_bytes(in, buf, 2, path);
  return static_cast<std::uint16_t>(buf[0] | (buf[1] << 8));
}

}  // namespace detail

template <class T>
void save_pgm(const std::filesystem::path& path, const Image<T>& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  for (Index i = 0; i < img.size(); ++i) {
    double v = static_cast<double>(img.pixels[i]);
    v = std::min(1.0, std::max(0.0, v));
    // nearbyint honors the default round-to-nearest-even mode
    const auto byte = static_cast<unsigned char>(std::nearbyint(v * 255.0));
    out.put(static_cast<char>(byte));
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

namespace {

int next_pgm_token(std::ifstream& in, const std::filesystem::path& path) {
  // skips whitespace and '#' comments, returns the next integer token
  for (;;) {
    const int c = in.peek();
    if (c == EOF) throw IoError("unexpected end of PGM header in '" + path.string() + "'");
    if (std::isspace(c)) {
      in.get();
      continue;
    }
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    break;
  }
  int value = 0;
  in >> value;
  if (!in) throw IoError("malformed PGM header in '" + path.string() + "'");
  return value;
}

}  // namespace

template <class T>
Image<T> load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '5') throw IoError("'" + path.string() + "' is not a binary PGM (P5)");
  const int width = next_pgm_token(in, path);
  const int height = next_pgm_token(in, path);
  const int maxval = next_pgm_token(in, path);
  if (width < 1 || height < 1) throw IoError("'" + path.string() + "' has invalid dimensions");
  if (maxval != 255) throw IoError("'" + path.string() + "' must use maxval 255");
  in.get();  // single whitespace after header

  Vec<T> pixels(static_cast<Index>(width) * height);
  for (Index i = 0; i < pixels.size(); ++i) {
    const int c = in.get();
    if (c == EOF) throw IoError("unexpected end of pixel data in '" + path.string() + "'");
    pixels[i] = static_cast<T>(c) / T(255);
  }
  return Image<T>::from_pixels(std::move(pixels), width, height);
}

template void save_pgm<float>(const std::filesystem::path&, const Image<float>&);
template void save_pgm<double>(const std::filesystem::path&, const Image<double>&);
template Image<float> load_pgm<float>(const std::filesystem::path&);
template Image<double> load_pgm<double>(const std::filesystem::path&);

std::string csv_field(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_field(float v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

std::string csv_field(long long v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%lld", v);
  return buf;
}

std::string csv_field(unsigned long long v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%llu", v);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
}

void CsvWriter::raw_row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << "\r\n";
  if (!out_) throw IoError("write failed for '" + path_.string() + "'");
}

namespace {

double svg_transform(double v, bool log_scale) {
  if (!log_scale) return v;
  return std::log10(std::max(v, 1e-300));
}

}  // namespace

void save_svg_curves(const std::filesystem::path& path, const std::vector<SvgSeries>& series,
                     const std::string& title, const std::string& x_label,
                     const std::string& y_label, bool log_y) {
  const double width = 640, height = 420;
  const double left = 60, right = 20, top = 36, bottom = 44;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      const double ty = svg_transform(y, log_y);
      if (first) {
        xmin = xmax = x;
        ymin = ymax = ty;
        first = false;
      } else {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, ty);
        ymax = std::max(ymax, ty);
      }
    }
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;

  const auto px = [&](double x) {
    return left + (x - xmin) / (xmax - xmin) * (width - left - right);
  };
  const auto py = [&](double y) {
    const double t = svg_transform(y, log_y);
    return height - bottom - (t - ymin) / (ymax - ymin) * (height - top - bottom);
  };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::string body;
  body += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
          "viewBox=\"0 0 640 420\">\n";
  body += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  body += "<text x=\"320\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n",
                left, height - bottom, width - right, height - bottom);
  body += buf;
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n", left,
                top, left, height - bottom);
  body += buf;
  body += "<text x=\"320\" y=\"412\" text-anchor=\"middle\" font-size=\"12\">" + x_label +
          "</text>\n";
  body += "<text x=\"16\" y=\"210\" text-anchor=\"middle\" font-size=\"12\" "
          "transform=\"rotate(-90 16 210)\">" +
          y_label + (log_y ? " (log10)" : "") + "</text>\n";

  std::size_t color = 0;
  double legend_y = top + 10;
  for (const auto& s : series) {
    std::string pts;
    for (const auto& [x, y] : s.points) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(x), py(y));
      pts += buf;
    }
    body += "<polyline fill=\"none\" stroke=\"" + std::string(palette[color % 6]) +
            "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    if (!s.name.empty()) {
      std::snprintf(buf, sizeof(buf),
                    "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" fill=\"%s\">%s</text>\n",
                    width - right - 150.0, legend_y, palette[color % 6], s.name.c_str());
      body += buf;
      legend_y += 14;
    }
    ++color;
  }
  body += "</svg>\n";
  write_text_file(path, body);
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace mmrx::io
