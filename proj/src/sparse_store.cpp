#include "rankshrink/sparse_store.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "rankshrink/errors.hpp"
#include "rankshrink/random.hpp"

namespace rankshrink {

namespace {

constexpr std::uint64_t kHoldoutStream = 0x686f6c646f7574ULL;

SliceIndex make_slice_index(const std::vector<Index>& indices, std::size_t order, std::size_t dim,
                            Index levels, std::span<const std::size_t> lex_order) {
  std::vector<std::size_t> offsets(levels + 1, 0);
  for (std::size_t pos : lex_order) ++offsets[indices[pos * order + dim] + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  std::vector<std::size_t> positions(lex_order.size());
  for (std::size_t pos : lex_order) positions[cursor[indices[pos * order + dim]]++] = pos;
  return SliceIndex(std::move(offsets), std::move(positions));
}

}  // namespace

ObservedTensor ObservedTensor::build(std::size_t order, std::vector<Index> dims, const std::vector<Entry>& entries) {
  if (order < 2) throw Error(ErrorKind::InvalidParameter, "order must be at least 2");
  if (dims.size() != order) throw Error(ErrorKind::InvalidParameter, "dims length differs from order");
  for (Index m : dims)
    if (m == 0) throw Error(ErrorKind::InvalidParameter, "every dimension must be positive");
  if (entries.empty()) throw Error(ErrorKind::EmptyObservations, "no observed entries");

  ObservedTensor t;
  t.dims_ = std::move(dims);
  t.indices_.reserve(entries.size() * order);
  t.values_.reserve(entries.size());
  for (std::size_t pos = 0; pos < entries.size(); ++pos) {
    const Entry& e = entries[pos];
    if (e.index.size() != order) {
      std::ostringstream msg;
      msg << "entry " << pos << " has " << e.index.size() << " indices, expected " << order;
      throw Error(ErrorKind::IndexOutOfRange, msg.str());
    }
    for (std::size_t d = 0; d < order; ++d) {
      if (e.index[d] >= t.dims_[d]) {
        std::ostringstream msg;
        msg << "entry " << pos << " index " << e.index[d] << " out of range for dimension " << d << " of size "
            << t.dims_[d];
        throw Error(ErrorKind::IndexOutOfRange, msg.str());
      }
      t.indices_.push_back(e.index[d]);
    }
    t.values_.push_back(e.value);
  }

  t.lex_order_.resize(entries.size());
  std::iota(t.lex_order_.begin(), t.lex_order_.end(), std::size_t{0});
  const auto tuple_less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(t.indices_.begin() + a * order, t.indices_.begin() + (a + 1) * order,
                                        t.indices_.begin() + b * order, t.indices_.begin() + (b + 1) * order);
  };
  std::stable_sort(t.lex_order_.begin(), t.lex_order_.end(), tuple_less);
  for (std::size_t k = 1; k < t.lex_order_.size(); ++k) {
    if (!tuple_less(t.lex_order_[k - 1], t.lex_order_[k])) {
      std::ostringstream msg;
      msg << "entries " << t.lex_order_[k - 1] << " and " << t.lex_order_[k] << " share an index";
      throw Error(ErrorKind::DuplicateEntry, msg.str());
    }
  }

  t.slices_.reserve(order);
  for (std::size_t d = 0; d < order; ++d)
    t.slices_.push_back(make_slice_index(t.indices_, order, d, t.dims_[d], t.lex_order_));
  return t;
}

ObservedTensor ObservedTensor::empty(std::vector<Index> dims) {
  ObservedTensor t;
  t.dims_ = std::move(dims);
  for (std::size_t d = 0; d < t.dims_.size(); ++d)
    t.slices_.emplace_back(std::vector<std::size_t>(t.dims_[d] + 1, 0), std::vector<std::size_t>{});
  return t;
}

std::vector<Entry> ObservedTensor::entries() const {
  std::vector<Entry> out;
  out.reserve(size());
  for (std::size_t pos = 0; pos < size(); ++pos) {
    auto idx = index(pos);
    out.push_back({std::vector<Index>(idx.begin(), idx.end()), values_[pos]});
  }
  return out;
}

double ObservedTensor::mean() const {
  double sum = 0.0;
  for (double v : values_) sum += v;
  return sum / static_cast<double>(values_.size());
}

double ObservedTensor::variance() const {
  const double m = mean();
  double ss = 0.0;
  for (double v : values_) ss += (v - m) * (v - m);
  return ss / static_cast<double>(values_.size());
}

ObservedTensor build(std::size_t order, std::vector<Index> dims, const std::vector<Entry>& entries) {
  return ObservedTensor::build(order, std::move(dims), entries);
}

const SliceIndex& slice_index(const ObservedTensor& obs, std::size_t dim) {
  if (dim >= obs.order()) throw Error(ErrorKind::InvalidParameter, "dimension out of range");
  return obs.slices(dim);
}

std::vector<Level> coverage_check(const ObservedTensor& obs) {
  std::vector<Level> missing;
  for (std::size_t d = 0; d < obs.order(); ++d) {
    const SliceIndex& s = obs.slices(d);
    for (Index l = 0; l < obs.dims()[d]; ++l)
      if (s.count(l) == 0) missing.push_back({d, l});
  }
  return missing;
}

void require_coverage(const ObservedTensor& obs) {
  if (obs.is_empty()) throw Error(ErrorKind::EmptyObservations, "no observed entries");
  const auto missing = coverage_check(obs);
  if (missing.empty()) return;
  std::ostringstream msg;
  msg << missing.size() << " levels have no observations:";
  for (std::size_t k = 0; k < std::min<std::size_t>(missing.size(), 5); ++k)
    msg << " (dim " << missing[k].dim << ", level " << missing[k].level << ")";
  if (missing.size() > 5) msg << " ...";
  throw Error(ErrorKind::UncoveredLevels, msg.str());
}

HoldoutSplit holdout_split(const ObservedTensor& obs, double user_fraction, std::uint64_t seed) {
  if (obs.order() != 2) throw Error(ErrorKind::InvalidParameter, "holdout split is defined for matrices");
  if (!(user_fraction >= 0.0 && user_fraction <= 1.0))
    throw Error(ErrorKind::InvalidParameter, "user fraction must lie in [0, 1]");
  if (user_fraction == 0.0) return {obs, ObservedTensor::empty(obs.dims())};

  const SliceIndex& rows = obs.slices(0);
  std::vector<Index> eligible;
  for (Index i = 0; i < obs.dims()[0]; ++i)
    if (rows.count(i) >= 2) eligible.push_back(i);
  if (eligible.empty()) throw Error(ErrorKind::NoEligibleRows, "no row has two or more observations");

  RngStream rng(seed, kHoldoutStream);
  const auto wanted = static_cast<std::size_t>(std::floor(user_fraction * static_cast<double>(obs.dims()[0])));
  const std::size_t n_select = std::min(wanted, eligible.size());
  // Partial Fisher-Yates: the first n_select slots become the selection.
  for (std::size_t k = 0; k < n_select; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, eligible.size() - 1);
    std::swap(eligible[k], eligible[pick(rng)]);
  }
  std::vector<Index> selected(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(n_select));
  std::sort(selected.begin(), selected.end());

  std::vector<char> held(obs.size(), 0);
  for (Index row : selected) {
    auto positions = rows.level(row);
    std::uniform_int_distribution<std::size_t> pick(0, positions.size() - 1);
    held[positions[pick(rng)]] = 1;
  }

  std::vector<Entry> train;
  std::vector<Entry> test;
  for (std::size_t pos = 0; pos < obs.size(); ++pos) {
    auto idx = obs.index(pos);
    Entry e{std::vector<Index>(idx.begin(), idx.end()), obs.value(pos)};
    (held[pos] ? test : train).push_back(std::move(e));
  }
  HoldoutSplit split{ObservedTensor::build(2, obs.dims(), train),
                     test.empty() ? ObservedTensor::empty(obs.dims()) : ObservedTensor::build(2, obs.dims(), test)};
  return split;
}

}  // namespace rankshrink
