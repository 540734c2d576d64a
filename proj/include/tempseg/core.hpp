#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tempseg/error.hpp"
#include "tempseg/parallel.hpp"

namespace tempseg {

struct GridShape {
  int height = 0;
  int width = 0;
  int channels = 0;

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

inline std::string to_string(const GridShape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" +
         std::to_string(s.channels);
}

enum class ScoreKind : std::uint8_t {
  logits = 0,         // unbounded finite reals
  probabilities = 1,  // [0,1], per-pixel channel sum == 1 within 1e-6
  augmented = 2,      // fused pre-argmax scores, >= 0
};

// Dense H x W x C float32 grid, row-major with the channel index fastest.
// The zero-filled constructor is the trusted path for code that builds a
// valid map in place (softmax, fusion, synthgen); the vector constructor
// is the boundary for external data and runs the kind-specific checks.
template <ScoreKind Kind>
class DenseScoreMap {
 public:
  DenseScoreMap(int height, int width, int channels) : shape_{height, width, channels} {
    check_shape(shape_);
    values_.resize(value_count(), 0.0f);
  }

  DenseScoreMap(int height, int width, int channels, std::vector<float> values)
      : shape_{height, width, channels}, values_(std::move(values)) {
    check_shape(shape_);
    if (values_.size() != value_count()) {
      throw ShapeError("value buffer holds " + std::to_string(values_.size()) +
                       " floats, shape " + to_string(shape_) + " needs " +
                       std::to_string(value_count()));
    }
    validate();
  }

  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  int channels() const { return shape_.channels; }
  GridShape shape() const { return shape_; }
  std::size_t value_count() const {
    return static_cast<std::size_t>(shape_.height) * shape_.width * shape_.channels;
  }

  float at(int row, int col, int channel) const { return values_[offset(row, col, channel)]; }
  float& at(int row, int col, int channel) { return values_[offset(row, col, channel)]; }

  std::span<const float> pixel(int row, int col) const {
    return {values_.data() + offset(row, col, 0), static_cast<std::size_t>(shape_.channels)};
  }
  std::span<float> pixel(int row, int col) {
    return {values_.data() + offset(row, col, 0), static_cast<std::size_t>(shape_.channels)};
  }

  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  bool shape_equals(const DenseScoreMap& other) const { return shape_ == other.shape_; }
  std::string shape_string() const { return to_string(shape_); }

  // Kind-specific invariant check; throws ValidationError naming the first
  // offending (row, col, channel).
  void validate() const {
    const int c = shape_.channels;
    std::size_t i = 0;
    for (int row = 0; row < shape_.height; ++row) {
      for (int col = 0; col < shape_.width; ++col) {
        double sum = 0.0;
        for (int ch = 0; ch < c; ++ch, ++i) {
          const float v = values_[i];
          if constexpr (Kind == ScoreKind::logits) {
            if (!std::isfinite(v)) throw bad_value("non-finite logit", row, col, ch);
          } else if constexpr (Kind == ScoreKind::probabilities) {
            if (!(v >= 0.0f && v <= 1.0f)) {
              throw bad_value("probability outside [0,1]", row, col, ch);
            }
            sum += v;
          } else {
            if (!(v >= 0.0f) || !std::isfinite(v)) {
              throw bad_value("negative or non-finite score", row, col, ch);
            }
          }
        }
        if constexpr (Kind == ScoreKind::probabilities) {
          if (std::abs(sum - 1.0) > 1e-6) {
            throw ValidationError("probabilities at (" + std::to_string(row) + ", " +
                                  std::to_string(col) + ") sum to " + std::to_string(sum));
          }
        }
      }
    }
  }

  friend bool operator==(const DenseScoreMap&, const DenseScoreMap&) = default;

 private:
  static void check_shape(const GridShape& s) {
    if (s.height < 1 || s.width < 1) {
      throw ShapeError("map needs height and width >= 1, got " + to_string(s));
    }
    if (s.channels < 2) {
      throw ShapeError("map needs at least 2 channels, got " + to_string(s));
    }
  }

  std::size_t offset(int row, int col, int channel) const {
    return (static_cast<std::size_t>(row) * shape_.width + col) * shape_.channels + channel;
  }

  static ValidationError bad_value(const char* what, int row, int col, int ch) {
    return ValidationError(std::string(what) + " at (" + std::to_string(row) + ", " +
                           std::to_string(col) + ", " + std::to_string(ch) + ")");
  }

  GridShape shape_;
  std::vector<float> values_;
};

using LogitMap = DenseScoreMap<ScoreKind::logits>;
using ProbMap = DenseScoreMap<ScoreKind::probabilities>;
using AugmentedScoreMap = DenseScoreMap<ScoreKind::augmented>;

// One category index per pixel, 8 bits each.
class LabelMap {
 public:
  LabelMap(int height, int width) : height_(height), width_(width) {
    if (height < 1 || width < 1) {
      throw ShapeError("label map needs height and width >= 1, got " + shape_string());
    }
    labels_.resize(static_cast<std::size_t>(height) * width, 0);
  }

  int height() const { return height_; }
  int width() const { return width_; }

  std::uint8_t at(int row, int col) const { return labels_[offset(row, col)]; }
  std::uint8_t& at(int row, int col) { return labels_[offset(row, col)]; }

  std::span<const std::uint8_t> labels() const { return labels_; }
  std::span<std::uint8_t> labels() { return labels_; }

  bool shape_equals(const LabelMap& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  std::string shape_string() const {
    return std::to_string(height_) + "x" + std::to_string(width_);
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::size_t offset(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }

  int height_;
  int width_;
  std::vector<std::uint8_t> labels_;
};

// Ground-truth style mask: 1 inside the object, 0 outside.
class BinaryMask {
 public:
  BinaryMask(int height, int width) : height_(height), width_(width) {
    if (height < 1 || width < 1) {
      throw ShapeError("mask needs height and width >= 1, got " + shape_string());
    }
    bits_.resize(static_cast<std::size_t>(height) * width, 0);
  }

  int height() const { return height_; }
  int width() const { return width_; }

  std::uint8_t at(int row, int col) const { return bits_[offset(row, col)]; }
  void set(int row, int col, bool on) { bits_[offset(row, col)] = on ? 1 : 0; }

  std::span<const std::uint8_t> bits() const { return bits_; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }

  bool shape_equals(const BinaryMask& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  std::string shape_string() const {
    return std::to_string(height_) + "x" + std::to_string(width_);
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t offset(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }

  int height_;
  int width_;
  std::vector<std::uint8_t> bits_;
};

struct Category {
  int index = 0;
  std::string name;
  bool is_target = false;
};

// Ordered category list. Indices must be exactly 0..C-1 (any listing order);
// the listing order is the tie priority used by the fusion rules. Labels are
// stored in 8 bits, so at most 256 entries.
class CategoryTable {
 public:
  explicit CategoryTable(std::vector<Category> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw ConfigError("category table needs at least one entry");
    if (entries_.size() > 256) {
      throw ConfigError("category table holds " + std::to_string(entries_.size()) +
                        " entries, labels are 8-bit so at most 256 are allowed");
    }
    const int count = static_cast<int>(entries_.size());
    priority_of_index_.assign(count, -1);
    for (int pos = 0; pos < count; ++pos) {
      const Category& cat = entries_[pos];
      if (cat.index < 0 || cat.index >= count) {
        throw ConfigError("category index " + std::to_string(cat.index) +
                          " outside 0.." + std::to_string(count - 1));
      }
      if (priority_of_index_[cat.index] != -1) {
        throw ConfigError("duplicate category index " + std::to_string(cat.index));
      }
      if (cat.name.empty()) {
        throw ConfigError("category " + std::to_string(cat.index) + " has an empty name");
      }
      priority_of_index_[cat.index] = pos;
      if (cat.is_target) targets_.push_back(cat.index);
    }
  }

  // Entries 0..count-1 named "class_<i>"; `targets` flags a subset.
  static CategoryTable numbered(int count, const std::vector<int>& targets = {}) {
    std::vector<Category> entries;
    entries.reserve(count > 0 ? count : 0);
    for (int i = 0; i < count; ++i) {
      entries.push_back({i, "class_" + std::to_string(i), false});
    }
    CategoryTable table((std::move(entries)));
    return table.with_targets(targets);
  }

  int size() const { return static_cast<int>(entries_.size()); }
  const std::vector<Category>& entries() const { return entries_; }

  bool is_target(int index) const { return entries_[priority(index)].is_target; }
  const std::vector<int>& target_indices() const { return targets_; }
  bool has_targets() const { return !targets_.empty(); }

  // Position in the entries list; lower wins ties.
  int priority(int index) const {
    if (index < 0 || index >= size()) {
      throw ConfigError("category index " + std::to_string(index) + " outside 0.." +
                        std::to_string(size() - 1));
    }
    return priority_of_index_[index];
  }

  const Category& entry(int index) const { return entries_[priority(index)]; }

  // -1 when no entry carries the name.
  int index_of(std::string_view name) const {
    for (const Category& cat : entries_) {
      if (cat.name == name) return cat.index;
    }
    return -1;
  }

  // Copy with the is_target flags replaced by `targets`.
  CategoryTable with_targets(const std::vector<int>& targets) const {
    std::vector<Category> entries = entries_;
    for (Category& cat : entries) cat.is_target = false;
    for (int t : targets) {
      if (t < 0 || t >= size()) {
        throw ConfigError("target category " + std::to_string(t) + " outside 0.." +
                          std::to_string(size() - 1));
      }
      entries[priority_of_index_[t]].is_target = true;
    }
    return CategoryTable(std::move(entries));
  }

 private:
  std::vector<Category> entries_;
  std::vector<int> priority_of_index_;
  std::vector<int> targets_;
};

// Per-pixel softmax with max subtraction. Exponentials and the channel sum
// run in 64-bit, the stored probabilities are 32-bit.
inline ProbMap softmax_pixelwise(const LogitMap& logits) {
  ProbMap probs(logits.height(), logits.width(), logits.channels());
  const int channels = logits.channels();
  detail::parallel_rows(logits.height(), [&](int row_begin, int row_end) {
    std::vector<double> exps(channels);
    for (int row = row_begin; row < row_end; ++row) {
      for (int col = 0; col < logits.width(); ++col) {
        const std::span<const float> in = logits.pixel(row, col);
        float max_logit = in[0];
        for (int ch = 0; ch < channels; ++ch) {
          if (!std::isfinite(in[ch])) {
            throw ValidationError("non-finite logit at (" + std::to_string(row) + ", " +
                                  std::to_string(col) + ", " + std::to_string(ch) + ")");
          }
          if (in[ch] > max_logit) max_logit = in[ch];
        }
        double sum = 0.0;
        for (int ch = 0; ch < channels; ++ch) {
          exps[ch] = std::exp(static_cast<double>(in[ch]) - max_logit);
          sum += exps[ch];
        }
        const std::span<float> out = probs.pixel(row, col);
        for (int ch = 0; ch < channels; ++ch) {
          out[ch] = static_cast<float>(exps[ch] / sum);
        }
      }
    }
  });
  return probs;
}

// Index of the maximum channel per pixel, ties to the lowest index.
template <ScoreKind Kind>
LabelMap argmax_labels(const DenseScoreMap<Kind>& scores, const CategoryTable& categories) {
  if (scores.channels() != categories.size()) {
    throw ShapeError("score map has " + std::to_string(scores.channels()) +
                     " channels, category table has " + std::to_string(categories.size()));
  }
  LabelMap labels(scores.height(), scores.width());
  detail::parallel_rows(scores.height(), [&](int row_begin, int row_end) {
    for (int row = row_begin; row < row_end; ++row) {
      for (int col = 0; col < scores.width(); ++col) {
        const std::span<const float> px = scores.pixel(row, col);
        int best = 0;
        for (int ch = 1; ch < scores.channels(); ++ch) {
          if (px[ch] > px[best]) best = ch;
        }
        labels.at(row, col) = static_cast<std::uint8_t>(best);
      }
    }
  });
  return labels;
}

// Every label must index into the table.
inline void check_labels(const LabelMap& labels, const CategoryTable& categories) {
  for (int row = 0; row < labels.height(); ++row) {
    for (int col = 0; col < labels.width(); ++col) {
      if (labels.at(row, col) >= categories.size()) {
        throw ValidationError("label " + std::to_string(labels.at(row, col)) + " at (" +
                              std::to_string(row) + ", " + std::to_string(col) +
                              ") outside category table of size " +
                              std::to_string(categories.size()));
      }
    }
  }
}

}  // namespace tempseg
