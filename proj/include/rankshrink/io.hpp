#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rankshrink/dense_tensor.hpp"
#include "rankshrink/sparse_store.hpp"

namespace rankshrink::io {

/// Observation CSV: header i1,...,iD,value then one entry per line.
ObservedTensor read_observations(const std::string& path, std::size_t order, const std::vector<Index>& dims,
                                 bool one_based);
void write_observations(const ObservedTensor& obs, const std::string& path, bool one_based);

/// One line per row, comma separated, 17 significant digits. Order 2 only.
void write_dense_csv(const DenseTensor& t, const std::string& path);
DenseTensor read_dense_csv(const std::string& path);

/// Header i1,...,iD,value, every index in row-major order.
void write_coordinate_csv(const DenseTensor& t, const std::string& path, bool one_based);
DenseTensor read_coordinate_csv(const std::string& path, const std::vector<Index>& dims, bool one_based);

std::string format_double(double v);

/// 8-bit RGB image, interleaved, row-major.
struct Image {
  Index height = 0;
  Index width = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3

  std::uint8_t& at(Index row, Index col, Index channel) { return pixels[(row * width + col) * 3 + channel]; }
  std::uint8_t at(Index row, Index col, Index channel) const { return pixels[(row * width + col) * 3 + channel]; }
};

/// Binary P6 with maxval 255 only; anything else is UnsupportedFormat.
Image read_ppm(const std::string& path);
void write_ppm(const Image& image, const std::string& path);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace rankshrink::io
