#include "rankshrink/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>

#include "rankshrink/errors.hpp"

namespace rankshrink::io {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string where(const std::string& path, std::size_t line_no) {
  return path + ":" + std::to_string(line_no);
}

double parse_double(std::string_view field, const std::string& path, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw Error(ErrorKind::ParseError, where(path, line_no) + ": not a number: '" + std::string(field) + "'");
  return v;
}

Index parse_index(std::string_view field, bool one_based, const std::string& path, std::size_t line_no) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw Error(ErrorKind::ParseError, where(path, line_no) + ": not an integer index: '" + std::string(field) + "'");
  if (one_based) --v;
  if (v < 0) throw Error(ErrorKind::IndexOutOfRange, where(path, line_no) + ": negative index");
  return static_cast<Index>(v);
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

// Lines of a CSV file with the header dropped, paired with 1-based line numbers.
std::vector<std::pair<std::size_t, std::string>> data_lines(const std::string& path, bool has_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::vector<std::pair<std::size_t, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = !has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    out.emplace_back(line_no, line);
  }
  return out;
}

std::string header(std::size_t order) {
  std::string h;
  for (std::size_t d = 0; d < order; ++d) h += "i" + std::to_string(d + 1) + ",";
  return h + "value\n";
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path + " for writing");
  return out;
}

void close_output(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path);
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ObservedTensor read_observations(const std::string& path, std::size_t order, const std::vector<Index>& dims,
                                 bool one_based) {
  std::vector<Entry> entries;
  for (const auto& [line_no, line] : data_lines(path, true)) {
    const auto fields = split_fields(line);
    if (fields.size() != order + 1)
      throw Error(ErrorKind::ParseError, where(path, line_no) + ": expected " + std::to_string(order + 1) + " fields");
    Entry e;
    for (std::size_t d = 0; d < order; ++d) e.index.push_back(parse_index(fields[d], one_based, path, line_no));
    e.value = parse_double(fields[order], path, line_no);
    entries.push_back(std::move(e));
  }
  return ObservedTensor::build(order, dims, entries);
}

void write_observations(const ObservedTensor& obs, const std::string& path, bool one_based) {
  auto out = open_output(path);
  out << header(obs.order());
  const Index shift = one_based ? 1 : 0;
  for (std::size_t pos : obs.lexicographic_order()) {
    for (Index i : obs.index(pos)) out << (i + shift) << ',';
    out << format_double(obs.value(pos)) << '\n';
  }
  close_output(out, path);
}

void write_dense_csv(const DenseTensor& t, const std::string& path) {
  if (t.order() != 2) throw Error(ErrorKind::InvalidParameter, "dense CSV holds matrices only");
  auto out = open_output(path);
  const Index rows = t.dims()[0];
  const Index cols = t.dims()[1];
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      if (j > 0) out << ',';
      out << format_double(t.data()[i * cols + j]);
    }
    out << '\n';
  }
  close_output(out, path);
}

DenseTensor read_dense_csv(const std::string& path) {
  std::vector<double> values;
  Index rows = 0;
  Index cols = 0;
  for (const auto& [line_no, line] : data_lines(path, false)) {
    const auto fields = split_fields(line);
    if (rows == 0) cols = fields.size();
    if (fields.size() != cols) throw Error(ErrorKind::ParseError, where(path, line_no) + ": ragged row");
    for (auto f : fields) values.push_back(parse_double(f, path, line_no));
    ++rows;
  }
  if (rows == 0) throw Error(ErrorKind::ParseError, path + ": no rows");
  DenseTensor t({rows, cols});
  std::copy(values.begin(), values.end(), t.data().begin());
  return t;
}

void write_coordinate_csv(const DenseTensor& t, const std::string& path, bool one_based) {
  auto out = open_output(path);
  out << header(t.order());
  const Index shift = one_based ? 1 : 0;
  std::vector<Index> idx(t.order());
  for (std::size_t flat = 0; flat < t.size(); ++flat) {
    t.unravel(flat, idx);
    for (Index i : idx) out << (i + shift) << ',';
    out << format_double(t.data()[flat]) << '\n';
  }
  close_output(out, path);
}

DenseTensor read_coordinate_csv(const std::string& path, const std::vector<Index>& dims, bool one_based) {
  DenseTensor t(dims);
  for (const auto& [line_no, line] : data_lines(path, true)) {
    const auto fields = split_fields(line);
    if (fields.size() != dims.size() + 1) throw Error(ErrorKind::ParseError, where(path, line_no) + ": wrong field count");
    std::vector<Index> idx;
    for (std::size_t d = 0; d < dims.size(); ++d) {
      idx.push_back(parse_index(fields[d], one_based, path, line_no));
      if (idx.back() >= dims[d]) throw Error(ErrorKind::IndexOutOfRange, where(path, line_no) + ": index out of range");
    }
    t.at(idx) = parse_double(fields[dims.size()], path, line_no);
  }
  return t;
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string ppm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      if (!tok.empty()) break;
    } else {
      tok.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  return tok;
}

Index ppm_number(std::istream& in, const std::string& path) {
  const std::string tok = ppm_token(in);
  Index v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
    throw Error(ErrorKind::ParseError, path + ": malformed PPM header");
  return v;
}

}  // namespace

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  const std::string magic = ppm_token(in);
  if (magic != "P6") throw Error(ErrorKind::UnsupportedFormat, path + ": only binary P6 images are supported, got '" + magic + "'");
  Image img;
  img.width = ppm_number(in, path);
  img.height = ppm_number(in, path);
  const Index maxval = ppm_number(in, path);
  if (maxval != 255) throw Error(ErrorKind::UnsupportedFormat, path + ": only 8-bit images (maxval 255) are supported");
  if (img.width == 0 || img.height == 0) throw Error(ErrorKind::ParseError, path + ": empty image");
  img.pixels.resize(img.width * img.height * 3);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw Error(ErrorKind::ParseError, path + ": truncated pixel data");
  return img;
}

void write_ppm(const Image& image, const std::string& path) {
  auto out = open_output(path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  close_output(out, path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  close_output(out, path);
}

}  // namespace rankshrink::io
