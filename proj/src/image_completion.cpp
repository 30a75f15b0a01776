#include "rankshrink/image_completion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rankshrink/errors.hpp"
#include "rankshrink/random.hpp"
#include "rankshrink/sparse_store.hpp"
#include "rankshrink/tensor_completer.hpp"

namespace rankshrink::io {

namespace {

constexpr std::uint64_t kImageMaskStream = 0x696d6d61736b;

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

// 1 marks a missing entry of the height x width x 3 array.
std::vector<char> draw_missing(const Image& image, const ImageOptions& options) {
  const std::size_t pixels = image.height * image.width;
  const std::size_t units = options.per_channel_mask ? pixels * 3 : pixels;
  const auto n_missing = static_cast<std::size_t>(std::llround(options.missing * static_cast<double>(units)));
  std::vector<std::size_t> order(units);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream rng(options.seed, kImageMaskStream);
  for (std::size_t k = 0; k < n_missing; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, units - 1);
    std::swap(order[k], order[pick(rng)]);
  }
  std::vector<char> missing(pixels * 3, 0);
  for (std::size_t k = 0; k < n_missing; ++k) {
    if (options.per_channel_mask) {
      missing[order[k]] = 1;
    } else {
      for (std::size_t c = 0; c < 3; ++c) missing[order[k] * 3 + c] = 1;
    }
  }
  return missing;
}

}  // namespace

ImageCompletion complete_image(const Image& image, const ImageOptions& options) {
  if (!(options.missing >= 0.0 && options.missing < 1.0))
    throw Error(ErrorKind::InvalidParameter, "missing fraction must lie in [0, 1)");
  if (image.pixels.size() != image.height * image.width * 3)
    throw Error(ErrorKind::ShapeMismatch, "pixel buffer does not match the image size");

  const std::vector<char> missing = draw_missing(image, options);
  ImageCompletion out;
  out.masked = image;
  std::vector<Entry> entries;
  for (Index r = 0; r < image.height; ++r)
    for (Index c = 0; c < image.width; ++c)
      for (Index ch = 0; ch < 3; ++ch) {
        const std::size_t flat = (r * image.width + c) * 3 + ch;
        if (missing[flat]) {
          out.masked.pixels[flat] = 0;
        } else {
          entries.push_back({{r, c, ch}, image.pixels[flat] / 255.0});
        }
      }
  const ObservedTensor obs = ObservedTensor::build(3, {image.height, image.width, 3}, entries);

  ChainConfig chain = options.chain;
  chain.use_intercepts = true;
  const PosteriorEstimate est = tensor::run(obs, chain, options.spec);
  out.floor_events = est.floor_events;

  out.completed = image;
  for (std::size_t flat = 0; flat < image.pixels.size(); ++flat) out.completed.pixels[flat] = to_byte(est.y_hat.data()[flat]);

  // Column-mean fill per channel; a column with no observation takes the channel mean.
  std::vector<std::uint8_t> baseline(image.pixels.size());
  for (Index ch = 0; ch < 3; ++ch) {
    double channel_sum = 0.0;
    std::size_t channel_n = 0;
    std::vector<double> col_sum(image.width, 0.0);
    std::vector<std::size_t> col_n(image.width, 0);
    for (Index r = 0; r < image.height; ++r)
      for (Index c = 0; c < image.width; ++c) {
        const std::size_t flat = (r * image.width + c) * 3 + ch;
        if (missing[flat]) continue;
        col_sum[c] += image.pixels[flat];
        ++col_n[c];
        channel_sum += image.pixels[flat];
        ++channel_n;
      }
    const double channel_mean = channel_n > 0 ? channel_sum / static_cast<double>(channel_n) : 0.0;
    for (Index r = 0; r < image.height; ++r)
      for (Index c = 0; c < image.width; ++c) {
        const std::size_t flat = (r * image.width + c) * 3 + ch;
        const double fill = col_n[c] > 0 ? col_sum[c] / static_cast<double>(col_n[c]) : channel_mean;
        baseline[flat] = missing[flat] ? to_byte(fill / 255.0) : image.pixels[flat];
      }
  }

  const std::size_t pixels = image.height * image.width;
  for (Index ch = 0; ch < 3; ++ch) {
    ChannelReport rep;
    double ss_all = 0.0, ss_missing = 0.0, abs_all = 0.0, base_all = 0.0, base_missing = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) {
      const std::size_t flat = p * 3 + ch;
      const double e = static_cast<double>(out.completed.pixels[flat]) - image.pixels[flat];
      const double b = static_cast<double>(baseline[flat]) - image.pixels[flat];
      ss_all += e * e;
      abs_all += std::abs(e);
      base_all += b * b;
      if (missing[flat]) {
        ss_missing += e * e;
        base_missing += b * b;
        ++rep.n_missing;
      }
    }
    const auto n = static_cast<double>(pixels);
    rep.rmse_all = std::sqrt(ss_all / n);
    rep.mae_all = abs_all / n;
    rep.baseline_rmse_all = std::sqrt(base_all / n);
    rep.se_missing = std::sqrt(ss_missing);
    if (rep.n_missing > 0) {
      rep.rmse_missing = std::sqrt(ss_missing / static_cast<double>(rep.n_missing));
      rep.baseline_rmse_missing = std::sqrt(base_missing / static_cast<double>(rep.n_missing));
    }
    out.channels.push_back(rep);
  }
  return out;
}

}  // namespace rankshrink::io
