#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mmrx/image.hpp"
#include "mmrx/mismatch.hpp"
#include "mmrx/types.hpp"

namespace mmrx::io {

// MMRX dense matrix container, designed for bit-exact interchange:
//   magic "MMRX" | version u16 LE | dtype u8 (0 = f32, 1 = f64)
//   | rows u64 LE | cols u64 LE | row-major raw entries.
inline constexpr std::uint16_t kMmrxVersion = 1;
inline constexpr std::size_t kMmrxHeaderBytes = 4 + 2 + 1 + 8 + 8;

inline std::size_t mmrx_file_size(Index rows, Index cols, std::size_t scalar_bytes) {
  return kMmrxHeaderBytes + static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * scalar_bytes;
}

template <class T>
constexpr std::uint8_t mmrx_dtype_tag();
template <>
constexpr std::uint8_t mmrx_dtype_tag<float>() { return 0; }
template <>
constexpr std::uint8_t mmrx_dtype_tag<double>() { return 1; }

namespace detail {

void write_bytes(std::ofstream& out, const void* data, std::size_t bytes, const std::filesystem::path& path);
void read_bytes(std::ifstream& in, void* data, std::size_t bytes, const std::filesystem::path& path);
void write_u64_le(std::ofstream& out, std::uint64_t v, const std::filesystem::path& path);
std::uint64_t read_u64_le(std::ifstream& in, const std::filesystem::path& path);
void write_u16_le(std::ofstream& out, std::uint16_t v, const std::filesystem::path& path);
std::uint16_t read_u16_le(std::ifstream& in, const std::filesystem::path& path);

}  // namespace detail

template <class T>
void save_matrix(const std::filesystem::path& path, const Mat<T>& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  detail::write_bytes(out, "MMRX", 4, path);
  detail::write_u16_le(out, kMmrxVersion, path);
  const std::uint8_t dtype = mmrx_dtype_tag<T>();
  detail::write_bytes(out, &dtype, 1, path);
  detail::write_u64_le(out, static_cast<std::uint64_t>(m.rows()), path);
  detail::write_u64_le(out, static_cast<std::uint64_t>(m.cols()), path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const T v = m(i, j);
      detail::write_bytes(out, &v, sizeof(T), path);
    }
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

template <class T>
Mat<T> load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char magic[4];
  detail::read_bytes(in, magic, 4, path);
  if (std::string(magic, 4) != "MMRX") throw IoError("'" + path.string() + "' is not an MMRX file");
  const std::uint16_t version = detail::read_u16_le(in, path);
  if (version != kMmrxVersion) {
    throw IoError("'" + path.string() + "' has unsupported MMRX version " + std::to_string(version));
  }
  std::uint8_t dtype = 0;
  detail::read_bytes(in, &dtype, 1, path);
  if (dtype != mmrx_dtype_tag<T>()) {
    throw IoError("'" + path.string() + "' holds dtype tag " + std::to_string(int(dtype)) +
                  ", which does not match the requested precision");
  }
  const auto rows = static_cast<Index>(detail::read_u64_le(in, path));
  const auto cols = static_cast<Index>(detail::read_u64_le(in, path));
  if (rows < 0 || cols < 0 || rows > (1 << 24) || cols > (1 << 24)) {
    throw IoError("'" + path.string() + "' declares implausible dimensions");
  }
  Mat<T> m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      T v;
      detail::read_bytes(in, &v, sizeof(T), path);
      m(i, j) = v;
    }
  }
  return m;
}

// A factored recovery A_recv = L * R persists as two MMRX files: L columns
// are the scale-folded left factors, R rows the right factors.
template <class T>
void save_factored(const std::filesystem::path& left_path, const std::filesystem::path& right_path,
                   const FactoredRecvMatrix<T>& recv) {
  const Index r = recv.term_count();
  Mat<T> lefts(recv.rows(), r);
  Mat<T> rights(r, recv.cols());
  for (Index t = 0; t < r; ++t) {
    const auto& term = recv.terms()[static_cast<std::size_t>(t)];
    lefts.col(t) = term.scale * term.left;
    rights.row(t) = term.right.transpose();
  }
  save_matrix(left_path, lefts);
  save_matrix(right_path, rights);
}

template <class T>
FactoredRecvMatrix<T> load_factored(const std::filesystem::path& left_path,
                                    const std::filesystem::path& right_path) {
  const Mat<T> lefts = load_matrix<T>(left_path);
  const Mat<T> rights = load_matrix<T>(right_path);
  if (lefts.cols() != rights.rows()) {
    throw IoError("factored operator files disagree on the term count");
  }
  FactoredRecvMatrix<T> recv(lefts.rows(), rights.cols());
  for (Index t = 0; t < lefts.cols(); ++t) {
    recv.add_term(MismatchTerm<T>{T(1), lefts.col(t), rights.row(t).transpose()});
  }
  return recv;
}

// 8-bit binary PGM. Loads normalize to [0, 1]; saves clamp to [0, 1], scale
// by 255 and round half to even.
template <class T>
void save_pgm(const std::filesystem::path& path, const Image<T>& img);
template <class T>
Image<T> load_pgm(const std::filesystem::path& path);

// CSV with 17 significant digits for doubles, 9 for singles, CRLF records.
std::string csv_field(double v);
std::string csv_field(float v);
std::string csv_field(long long v);
std::string csv_field(unsigned long long v);
inline std::string csv_field(int v) { return csv_field(static_cast<long long>(v)); }
inline std::string csv_field(long v) { return csv_field(static_cast<long long>(v)); }
inline std::string csv_field(unsigned long v) { return csv_field(static_cast<unsigned long long>(v)); }
inline std::string csv_field(const std::string& s) { return s; }
inline std::string csv_field(const char* s) { return s; }

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);
  void raw_row(const std::vector<std::string>& cells);

  template <class... Cells>
  void row(const Cells&... cells) {
    raw_row({csv_field(cells)...});
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

struct SvgSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

// Minimal self-contained polyline plot; no timestamps or external assets, so
// re-runs are byte-identical.
void save_svg_curves(const std::filesystem::path& path, const std::vector<SvgSeries>& series,
                     const std::string& title, const std::string& x_label,
                     const std::string& y_label, bool log_y);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace mmrx::io
