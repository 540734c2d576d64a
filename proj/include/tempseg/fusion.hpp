#pragma once

#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tempseg/core.hpp"
#include "tempseg/error.hpp"
#include "tempseg/parallel.hpp"

namespace tempseg {

// Temporal fusion parameters. Index 0 of `weights` belongs to the present
// frame. Defaults are the published values: four frames weighted 4,3,2,1
// with threshold 1.
struct FusionConfig {
  int buffer_size = 4;
  std::vector<double> weights = {4.0, 3.0, 2.0, 1.0};
  double threshold = 1.0;
  // Category indices receiving temporal augmentation. When empty, the
  // category table's own target flags apply instead.
  std::vector<int> targets;

  // Descending buffer_size..1; reproduces the published 4,3,2,1 at N=4.
  static std::vector<double> default_weights(int buffer_size) {
    std::vector<double> w;
    w.reserve(buffer_size > 0 ? buffer_size : 0);
    for (int n = buffer_size; n >= 1; --n) w.push_back(static_cast<double>(n));
    return w;
  }

  void validate() const {
    if (buffer_size < 1) {
      throw ConfigError("buffer_size must be >= 1, got " + std::to_string(buffer_size));
    }
    if (static_cast<int>(weights.size()) != buffer_size) {
      throw ConfigError("weights has " + std::to_string(weights.size()) +
                        " entries, buffer_size is " + std::to_string(buffer_size));
    }
    bool any_positive = false;
    for (std::size_t n = 0; n < weights.size(); ++n) {
      if (weights[n] < 0.0) {
        throw ConfigError("weight I" + std::to_string(n) + " is negative (" +
                          std::to_string(weights[n]) + ")");
      }
      if (weights[n] > 0.0) any_positive = true;
    }
    if (!any_positive) throw ConfigError("all weights are zero");
    if (threshold < 0.0) {
      throw ConfigError("threshold must be >= 0, got " + std::to_string(threshold));
    }
    for (int t : targets) {
      if (t < 0) throw ConfigError("target category index " + std::to_string(t) + " is negative");
    }
  }
};

// FIFO history of the most recent frames; slot(0) is the newest.
template <typename Frame>
class FrameBuffer {
 public:
  explicit FrameBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) {
      throw ConfigError("frame buffer capacity must be >= 1, got " + std::to_string(capacity));
    }
  }

  int capacity() const { return capacity_; }
  int fill() const { return static_cast<int>(slots_.size()); }
  bool empty() const { return slots_.empty(); }

  void push(Frame frame) {
    if (!slots_.empty() && !frame.shape_equals(slots_.front())) {
      throw ShapeError("frame shape " + frame.shape_string() + " does not match buffer shape " +
                       slots_.front().shape_string());
    }
    slots_.push_front(std::move(frame));
    if (fill() > capacity_) slots_.pop_back();
  }

  // age 0 = present frame, age 1 = one frame back, ...
  const Frame& slot(int age) const { return slots_.at(age); }

 private:
  int capacity_;
  std::deque<Frame> slots_;
};

namespace detail {

// Per-label target lookup. Config targets win when given, otherwise the
// table's own flags; indices are range-checked against the table.
inline std::vector<char> effective_target_mask(const FusionConfig& config,
                                               const CategoryTable& categories) {
  std::vector<char> mask(categories.size(), 0);
  const std::vector<int>& targets =
      config.targets.empty() ? categories.target_indices() : config.targets;
  for (int t : targets) {
    if (t < 0 || t >= categories.size()) {
      throw ConfigError("target category " + std::to_string(t) + " outside 0.." +
                        std::to_string(categories.size() - 1));
    }
    mask[t] = 1;
  }
  return mask;
}

}  // namespace detail

// Image Buffer fusion: the present label map, with every pixel that any
// buffered frame labels as a target overridden by that target label. When
// distinct target labels compete, the most recent frame wins; equal recency
// falls back to the lower table position (unreachable with one label per
// pixel per frame, but the rule is fixed for determinism).
inline LabelMap fuse_image_buffer(const FrameBuffer<LabelMap>& buffer, const FusionConfig& config,
                                  const CategoryTable& categories) {
  if (buffer.empty()) throw Error("image-buffer fusion on an empty frame buffer");
  const std::vector<char> is_target = detail::effective_target_mask(config, categories);
  LabelMap fused = buffer.slot(0);
  for (int row = 0; row < fused.height(); ++row) {
    for (int col = 0; col < fused.width(); ++col) {
      for (int age = 0; age < buffer.fill(); ++age) {
        const std::uint8_t label = buffer.slot(age).at(row, col);
        if (label < is_target.size() && is_target[label]) {
          fused.at(row, col) = label;
          break;
        }
      }
    }
  }
  return fused;
}

// Attention Module fusion over a buffer of probability maps:
//
//   aug_c = I0*p_c(t) + I1*p_c(t-1) + ... over the buffered frames,
//
// for target channels, accumulated newest-first in 64-bit and stored as
// 32-bit; stored values below the threshold become exactly 0. Non-target
// channels carry the present frame's probability unweighted. During warm-up
// only the available frames and their weights take part.
inline std::pair<AugmentedScoreMap, LabelMap> fuse_attention(const FrameBuffer<ProbMap>& buffer,
                                                             const FusionConfig& config,
                                                             const CategoryTable& categories) {
  if (buffer.empty()) throw Error("attention fusion on an empty frame buffer");
  if (buffer.fill() > static_cast<int>(config.weights.size())) {
    throw ConfigError("buffer holds " + std::to_string(buffer.fill()) + " frames but only " +
                      std::to_string(config.weights.size()) + " weights are configured");
  }
  const ProbMap& present = buffer.slot(0);
  if (present.channels() != categories.size()) {
    throw ShapeError("probability map has " + std::to_string(present.channels()) +
                     " channels, category table has " + std::to_string(categories.size()));
  }
  const std::vector<char> is_target = detail::effective_target_mask(config, categories);

  AugmentedScoreMap aug(present.height(), present.width(), present.channels());
  const int channels = present.channels();
  const int fill = buffer.fill();
  detail::parallel_rows(present.height(), [&](int row_begin, int row_end) {
    for (int row = row_begin; row < row_end; ++row) {
      for (int col = 0; col < present.width(); ++col) {
        const std::span<float> out = aug.pixel(row, col);
        const std::span<const float> now = present.pixel(row, col);
        for (int ch = 0; ch < channels; ++ch) {
          if (!is_target[ch]) {
            out[ch] = now[ch];
            continue;
          }
          double sum = 0.0;
          for (int age = 0; age < fill; ++age) {
            sum += config.weights[age] * static_cast<double>(buffer.slot(age).at(row, col, ch));
          }
          float stored = static_cast<float>(sum);
          if (stored < config.threshold) stored = 0.0f;
          out[ch] = stored;
        }
      }
    }
  });
  LabelMap labels = argmax_labels(aug, categories);
  return {std::move(aug), std::move(labels)};
}

enum class FusionMethod { baseline, image_buffer, attention };

inline std::string_view to_string(FusionMethod method) {
  switch (method) {
    case FusionMethod::baseline: return "baseline";
    case FusionMethod::image_buffer: return "image_buffer";
    case FusionMethod::attention: return "attention";
  }
  return "?";
}

inline FusionMethod parse_method(std::string_view name) {
  if (name == "baseline") return FusionMethod::baseline;
  if (name == "image_buffer") return FusionMethod::image_buffer;
  if (name == "attention") return FusionMethod::attention;
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (expected baseline, image_buffer or attention)");
}

// Streaming post-processor: feed frames in order, get one fused label map
// per frame. One instance per stream; instances share no state.
class Pipeline {
 public:
  Pipeline(FusionMethod method, FusionConfig config, CategoryTable categories)
      : method_(method), config_(std::move(config)), categories_(std::move(categories)) {
    config_.validate();
    if (method_ == FusionMethod::image_buffer) {
      label_history_.emplace(config_.buffer_size);
    } else if (method_ == FusionMethod::attention) {
      prob_history_.emplace(config_.buffer_size);
    }
  }

  LabelMap push(const LogitMap& frame) {
    ++frames_seen_;
    switch (method_) {
      case FusionMethod::baseline: return argmax_labels(frame, categories_);
      case FusionMethod::image_buffer: return step_image_buffer(argmax_labels(frame, categories_));
      case FusionMethod::attention: return step_attention(softmax_pixelwise(frame));
    }
    throw Error("unreachable fusion method");
  }

  // Pre-normalized inputs skip the softmax.
  LabelMap push(const ProbMap& frame) {
    ++frames_seen_;
    switch (method_) {
      case FusionMethod::baseline: return argmax_labels(frame, categories_);
      case FusionMethod::image_buffer: return step_image_buffer(argmax_labels(frame, categories_));
      case FusionMethod::attention: return step_attention(frame);
    }
    throw Error("unreachable fusion method");
  }

  FusionMethod method() const { return method_; }
  const FusionConfig& config() const { return config_; }
  const CategoryTable& categories() const { return categories_; }
  int frames_seen() const { return frames_seen_; }

 private:
  LabelMap step_image_buffer(LabelMap baseline) {
    label_history_->push(std::move(baseline));
    return fuse_image_buffer(*label_history_, config_, categories_);
  }

  LabelMap step_attention(ProbMap probs) {
    prob_history_->push(std::move(probs));
    return fuse_attention(*prob_history_, config_, categories_).second;
  }

  FusionMethod method_;
  FusionConfig config_;
  CategoryTable categories_;
  std::optional<FrameBuffer<LabelMap>> label_history_;
  std::optional<FrameBuffer<ProbMap>> prob_history_;
  int frames_seen_ = 0;
};

// Whole-sequence convenience wrapper around Pipeline.
inline std::vector<LabelMap> run_pipeline(std::span<const LogitMap> frames, FusionMethod method,
                                          const FusionConfig& config,
                                          const CategoryTable& categories) {
  if (frames.empty()) throw Error("run_pipeline needs at least one frame");
  Pipeline pipeline(method, config, categories);
  std::vector<LabelMap> outputs;
  outputs.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!frames[i].shape_equals(frames[0])) {
      throw ShapeError("frame " + std::to_string(i) + " has shape " + frames[i].shape_string() +
                       ", sequence started with " + frames[0].shape_string());
    }
    outputs.push_back(pipeline.push(frames[i]));
  }
  return outputs;
}

}  // namespace tempseg
