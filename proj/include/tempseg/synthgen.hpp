#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tempseg/core.hpp"
#include "tempseg/error.hpp"
#include "tempseg/rng.hpp"

namespace tempseg {

enum class ObjectShape { rectangle, disc };

// One moving object on a quiet background, with injected detection faults.
// Identical (config, seed) pairs generate bit-identical output; see
// generate() for the pinned draw order.
struct SynthConfig {
  int height = 0;
  int width = 0;
  int channels = 0;
  int frames = 0;
  ObjectShape shape = ObjectShape::rectangle;
  int size = 0;         // side of the object's bounding box, pixels
  int velocity_dx = 0;  // columns per frame
  int velocity_dy = 0;  // rows per frame
  // Bounding-box top-left at frame 0; defaults center the object.
  std::optional<int> start_row;
  std::optional<int> start_col;
  int target_category = 1;
  // Fault injection: an explicit frame list wins over the per-frame
  // probability. On a dropout frame the logits look object-free while the
  // mask stays truthful.
  double dropout_probability = 0.0;
  std::vector<int> dropout_frames;
  // Fraction of the object suppressed on dropout frames (row-major prefix
  // of its pixels); absent means the whole object.
  std::optional<double> partial_occlusion;
  double logit_contrast = 4.0;
  double noise_sigma = 0.5;
  std::uint64_t seed = 0;

  int start_row_value() const { return start_row ? *start_row : (height - size) / 2; }
  int start_col_value() const { return start_col ? *start_col : (width - size) / 2; }

  // The channel that wins off-object; 0 unless the target is 0.
  int background_category() const { return target_category == 0 ? 1 : 0; }

  void validate() const {
    if (height < 1 || width < 1) {
      throw ConfigError("frame size must be >= 1x1, got " + std::to_string(height) + "x" +
                        std::to_string(width));
    }
    if (channels < 2 || channels > 256) {
      throw ConfigError("channels must be in 2..256, got " + std::to_string(channels));
    }
    if (frames < 1) throw ConfigError("frames must be >= 1, got " + std::to_string(frames));
    if (size < 1) throw ConfigError("object size must be >= 1, got " + std::to_string(size));
    if (target_category < 0 || target_category >= channels) {
      throw ConfigError("target_category " + std::to_string(target_category) + " outside 0.." +
                        std::to_string(channels - 1));
    }
    if (dropout_probability < 0.0 || dropout_probability > 1.0) {
      throw ConfigError("dropout probability must be in [0,1], got " +
                        std::to_string(dropout_probability));
    }
    for (int f : dropout_frames) {
      if (f < 0 || f >= frames) {
        throw ConfigError("dropout frame " + std::to_string(f) + " outside 0.." +
                          std::to_string(frames - 1));
      }
    }
    if (partial_occlusion && (*partial_occlusion < 0.0 || *partial_occlusion > 1.0)) {
      throw ConfigError("partial_occlusion must be in [0,1], got " +
                        std::to_string(*partial_occlusion));
    }
    if (!(logit_contrast > 0.0)) {
      throw ConfigError("logit_contrast must be > 0, got " + std::to_string(logit_contrast));
    }
    if (noise_sigma < 0.0) {
      throw ConfigError("noise_sigma must be >= 0, got " + std::to_string(noise_sigma));
    }
    for (int t = 0; t < frames; ++t) {
      const int top = start_row_value() + t * velocity_dy;
      const int left = start_col_value() + t * velocity_dx;
      if (top < 0 || left < 0 || top + size > height || left + size > width) {
        throw ConfigError("object leaves the " + std::to_string(height) + "x" +
                          std::to_string(width) + " frame at frame " + std::to_string(t));
      }
    }
  }
};

struct SynthSequence {
  std::vector<LogitMap> frames;
  std::vector<BinaryMask> masks;
  std::vector<int> dropped_frames;  // realized dropout, ascending
};

namespace detail {

inline BinaryMask object_mask(const SynthConfig& config, int frame_index) {
  BinaryMask mask(config.height, config.width);
  const int top = config.start_row_value() + frame_index * config.velocity_dy;
  const int left = config.start_col_value() + frame_index * config.velocity_dx;
  if (config.shape == ObjectShape::rectangle) {
    for (int row = top; row < top + config.size; ++row) {
      for (int col = left; col < left + config.size; ++col) {
        mask.set(row, col, true);
      }
    }
  } else {
    const double center_row = top + (config.size - 1) / 2.0;
    const double center_col = left + (config.size - 1) / 2.0;
    const double radius = config.size / 2.0;
    for (int row = top; row < top + config.size; ++row) {
      for (int col = left; col < left + config.size; ++col) {
        const double dr = row - center_row;
        const double dc = col - center_col;
        if (dr * dr + dc * dc <= radius * radius) mask.set(row, col, true);
      }
    }
  }
  return mask;
}

}  // namespace detail

// Draw order, pinned so reruns and ports agree byte for byte: frames in
// order; per frame first the dropout decision (exactly one uniform draw per
// frame in probability mode, none in list mode), then one Gaussian draw per
// (row, col, channel) in storage order -- skipped entirely when noise_sigma
// is zero.
inline SynthSequence generate(const SynthConfig& config) {
  config.validate();
  Xoshiro256ss rng(config.seed);
  const float contrast = static_cast<float>(config.logit_contrast);
  const int target = config.target_category;
  const int background = config.background_category();
  const bool use_list = !config.dropout_frames.empty();

  SynthSequence out;
  out.frames.reserve(config.frames);
  out.masks.reserve(config.frames);
  for (int t = 0; t < config.frames; ++t) {
    bool dropped;
    if (use_list) {
      dropped = std::find(config.dropout_frames.begin(), config.dropout_frames.end(), t) !=
                config.dropout_frames.end();
    } else {
      dropped = rng.next_double() < config.dropout_probability;
    }
    if (dropped) out.dropped_frames.push_back(t);

    BinaryMask mask = detail::object_mask(config, t);

    // Detected region: the object minus whatever the fault suppresses.
    BinaryMask detected = mask;
    if (dropped) {
      std::size_t to_suppress = mask.count();
      if (config.partial_occlusion) {
        to_suppress = static_cast<std::size_t>(
            std::ceil(*config.partial_occlusion * static_cast<double>(mask.count())));
      }
      for (int row = 0; row < config.height && to_suppress > 0; ++row) {
        for (int col = 0; col < config.width && to_suppress > 0; ++col) {
          if (detected.at(row, col)) {
            detected.set(row, col, false);
            --to_suppress;
          }
        }
      }
    }

    LogitMap frame(config.height, config.width, config.channels);
    for (int row = 0; row < config.height; ++row) {
      for (int col = 0; col < config.width; ++col) {
        const bool on_object = detected.at(row, col) != 0;
        const std::span<float> px = frame.pixel(row, col);
        for (int ch = 0; ch < config.channels; ++ch) {
          float base = 0.0f;
          if (ch == target) {
            base = on_object ? contrast : -contrast;
          } else if (ch == background) {
            base = on_object ? -contrast : contrast;
          }
          if (config.noise_sigma > 0.0) {
            px[ch] = static_cast<float>(base + rng.next_normal(0.0, config.noise_sigma));
          } else {
            px[ch] = base;
          }
        }
      }
    }
    out.frames.push_back(std::move(frame));
    out.masks.push_back(std::move(mask));
  }
  return out;
}

// Category table matching generate()'s channel conventions: the target is
// "object" (flagged), the background channel "background", the rest
// "class_<i>".
inline CategoryTable synth_categories(const SynthConfig& config) {
  std::vector<Category> entries;
  entries.reserve(config.channels);
  for (int i = 0; i < config.channels; ++i) {
    Category cat{i, "class_" + std::to_string(i), false};
    if (i == config.target_category) {
      cat.name = "object";
      cat.is_target = true;
    } else if (i == config.background_category()) {
      cat.name = "background";
    }
    entries.push_back(std::move(cat));
  }
  return CategoryTable(std::move(entries));
}

}  // namespace tempseg
