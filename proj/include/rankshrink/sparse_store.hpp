#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "rankshrink/dense_tensor.hpp"

namespace rankshrink {

struct Entry {
  std::vector<Index> index;
  double value = 0.0;
};

/// Per-level observation lists along one dimension, CSR layout. Positions
/// index into ObservedTensor entries; within a level they follow the
/// lexicographic order of the full index tuple.
class SliceIndex {
 public:
  SliceIndex() = default;
  SliceIndex(std::vector<std::size_t> offsets, std::vector<std::size_t> positions)
      : offsets_(std::move(offsets)), positions_(std::move(positions)) {}

  std::size_t levels() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::span<const std::size_t> level(Index l) const {
    return {positions_.data() + offsets_[l], offsets_[l + 1] - offsets_[l]};
  }
  std::size_t count(Index l) const { return offsets_[l + 1] - offsets_[l]; }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> positions_;
};

/// Coordinate store of the observed entries of an order-D array. Immutable
/// after construction; the slice indices of every dimension are built once.
class ObservedTensor {
 public:
  /// Validates and indexes the entries. Throws Error with kind
  /// EmptyObservations, IndexOutOfRange or DuplicateEntry.
  static ObservedTensor build(std::size_t order, std::vector<Index> dims,
                              const std::vector<Entry>& entries);

  /// A store with no observations. Only produced as the test half of a
  /// holdout split; samplers reject it.
  static ObservedTensor empty(std::vector<Index> dims);

  std::size_t order() const noexcept { return dims_.size(); }
  const std::vector<Index>& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool is_empty() const noexcept { return values_.empty(); }

  std::span<const Index> index(std::size_t pos) const {
    return {indices_.data() + pos * order(), order()};
  }
  double value(std::size_t pos) const { return values_[pos]; }
  std::span<const double> values() const noexcept { return values_; }

  const SliceIndex& slices(std::size_t dim) const { return slices_.at(dim); }

  /// Positions in lexicographic order of the index tuple.
  std::span<const std::size_t> lexicographic_order() const noexcept { return lex_order_; }

  std::vector<Entry> entries() const;

  double mean() const;
  /// Population variance of the observed values.
  double variance() const;

 private:
  std::vector<Index> dims_;
  std::vector<Index> indices_;
  std::vector<double> values_;
  std::vector<std::size_t> lex_order_;
  std::vector<SliceIndex> slices_;
};

/// Convenience wrapper over ObservedTensor::build.
ObservedTensor build(std::size_t order, std::vector<Index> dims, const std::vector<Entry>& entries);

const SliceIndex& slice_index(const ObservedTensor& obs, std::size_t dim);

struct Level {
  std::size_t dim;
  Index level;
  bool operator==(const Level&) const = default;
};

/// Every (dimension, level) with no observation, in dimension-major order.
std::vector<Level> coverage_check(const ObservedTensor& obs);

/// Throws UncoveredLevels naming the first few uncovered levels.
void require_coverage(const ObservedTensor& obs);

struct HoldoutSplit {
  ObservedTensor train;
  ObservedTensor test;  // may be empty
};

/// Holds out one uniformly chosen entry from each of floor(fraction * m_1)
/// distinct rows drawn uniformly among rows with at least two entries.
/// When fewer rows are eligible than requested, every eligible row is used.
HoldoutSplit holdout_split(const ObservedTensor& obs, double user_fraction, std::uint64_t seed);

}  // namespace rankshrink
