#pragma once

#include <cstdint>
#include <vector>

#include "rankshrink/chain.hpp"
#include "rankshrink/io.hpp"
#include "rankshrink/priors.hpp"

namespace rankshrink::io {

struct ImageOptions {
  double missing = 0.8;
  bool per_channel_mask = false;  // mask channels independently instead of whole pixels
  std::uint64_t seed = 0;
  ChainConfig chain;              // use_intercepts is forced on
  PriorSpec spec = PriorSpec::horseshoe_plus();
};

/// Errors in 8-bit intensity units, completed image vs original.
struct ChannelReport {
  double rmse_all = 0.0;
  double rmse_missing = 0.0;
  double se_missing = 0.0;  // sqrt of the summed squared error over missing entries
  double mae_all = 0.0;
  double baseline_rmse_all = 0.0;  // column-mean fill
  double baseline_rmse_missing = 0.0;
  std::size_t n_missing = 0;
};

struct ImageCompletion {
  Image masked;     // missing entries rendered black
  Image completed;  // posterior mean of Y, clamped to [0, 255]
  std::vector<ChannelReport> channels;
  std::uint64_t floor_events = 0;
};

/// Masks the image, runs the tensor sampler on the height x width x 3 array of
/// intensities scaled to [0, 1] and scores the reconstruction.
ImageCompletion complete_image(const Image& image, const ImageOptions& options);

}  // namespace rankshrink::io
