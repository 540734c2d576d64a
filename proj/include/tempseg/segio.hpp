#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "tempseg/core.hpp"
#include "tempseg/error.hpp"
#include "tempseg/fusion.hpp"
#include "tempseg/metrics.hpp"
#include "tempseg/synthgen.hpp"

namespace tempseg {

// ---------------------------------------------------------------------------
// raw file helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path.string());
  return data;
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failure on " + path.string());
}

inline void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SGT1 tensor container
//
//   bytes 0..3   magic "SGT1"
//   byte  4      kind: 0 = logits, 1 = probabilities
//   bytes 5..16  height, width, channels as uint32 little-endian
//   bytes 17..   height*width*channels IEEE-754 binary32 little-endian,
//                row-major, channel index fastest
//
// The payload must match the header exactly; missing or trailing bytes are
// errors. kind=1 payloads must satisfy the probability-map invariants.
// ---------------------------------------------------------------------------

using TensorVariant = std::variant<LogitMap, ProbMap>;

namespace detail {

template <ScoreKind Kind>
void write_tensor_impl(const std::filesystem::path& path, const DenseScoreMap<Kind>& map,
                       std::uint8_t kind_byte) {
  std::string out;
  out.reserve(17 + map.value_count() * 4);
  out += "SGT1";
  out.push_back(static_cast<char>(kind_byte));
  put_u32le(out, static_cast<std::uint32_t>(map.height()));
  put_u32le(out, static_cast<std::uint32_t>(map.width()));
  put_u32le(out, static_cast<std::uint32_t>(map.channels()));
  for (float v : map.values()) {
    put_u32le(out, std::bit_cast<std::uint32_t>(v));
  }
  write_file(path, out);
}

}  // namespace detail

inline void write_tensor(const std::filesystem::path& path, const LogitMap& map) {
  detail::write_tensor_impl(path, map, 0);
}

inline void write_tensor(const std::filesystem::path& path, const ProbMap& map) {
  detail::write_tensor_impl(path, map, 1);
}

inline TensorVariant read_tensor(const std::filesystem::path& path) {
  const std::string data = detail::read_file(path);
  if (data.size() < 17) throw IoError(path.string() + ": truncated header");
  if (data.compare(0, 4, "SGT1") != 0) {
    throw IoError(path.string() + ": bad magic (not an SGT1 tensor file)");
  }
  const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
  const std::uint8_t kind = bytes[4];
  if (kind > 1) {
    throw IoError(path.string() + ": unknown tensor kind " + std::to_string(kind));
  }
  const std::uint64_t height = detail::get_u32le(bytes + 5);
  const std::uint64_t width = detail::get_u32le(bytes + 9);
  const std::uint64_t channels = detail::get_u32le(bytes + 13);
  if (height < 1 || width < 1 || channels < 2) {
    throw IoError(path.string() + ": invalid dimensions " + std::to_string(height) + "x" +
                  std::to_string(width) + "x" + std::to_string(channels));
  }
  const std::uint64_t count = height * width * channels;
  if (count > (std::uint64_t{1} << 32)) {
    throw IoError(path.string() + ": dimension overflow, " + std::to_string(count) +
                  " values declared");
  }
  if (data.size() - 17 < count * 4) throw IoError(path.string() + ": truncated payload");
  if (data.size() - 17 > count * 4) throw IoError(path.string() + ": trailing bytes after payload");

  std::vector<float> values(count);
  const unsigned char* p = bytes + 17;
  for (std::uint64_t i = 0; i < count; ++i, p += 4) {
    values[i] = std::bit_cast<float>(detail::get_u32le(p));
  }
  const int h = static_cast<int>(height);
  const int w = static_cast<int>(width);
  const int c = static_cast<int>(channels);
  if (kind == 0) return LogitMap(h, w, c, std::move(values));
  return ProbMap(h, w, c, std::move(values));
}

// ---------------------------------------------------------------------------
// PGM (binary P5, maxval 255)
//
// Label maps store the category index per byte. Masks store 0 or 255 on
// disk and 0/1 in memory.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string pgm_header(int height, int width) {
  return "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
}

struct PgmImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bytes;
};

inline PgmImage read_pgm(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  if (data.size() < 2 || data[0] != 'P') throw IoError(path.string() + ": not a PGM file");
  if (data[1] != '5') {
    throw IoError(path.string() + ": unsupported PGM type 'P" + std::string(1, data[1]) +
                  "' (binary P5 required)");
  }
  std::size_t pos = 2;
  auto next_token = [&]() -> std::string {
    while (pos < data.size()) {
      const char c = data[pos];
      if (c == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    if (start == pos) throw IoError(path.string() + ": truncated PGM header");
    return data.substr(start, pos - start);
  };
  auto parse_dim = [&](const std::string& token) {
    int value = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size() || value < 1) {
      throw IoError(path.string() + ": bad PGM header field '" + token + "'");
    }
    return value;
  };
  PgmImage img;
  img.width = parse_dim(next_token());
  img.height = parse_dim(next_token());
  const std::string maxval = next_token();
  if (maxval != "255") throw IoError(path.string() + ": PGM maxval " + maxval + ", expected 255");
  // Exactly one whitespace byte separates the header from the raster.
  if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos]))) {
    throw IoError(path.string() + ": malformed PGM header");
  }
  ++pos;
  const std::size_t count = static_cast<std::size_t>(img.width) * img.height;
  if (data.size() - pos < count) throw IoError(path.string() + ": truncated PGM raster");
  if (data.size() - pos > count) throw IoError(path.string() + ": trailing bytes in PGM file");
  img.bytes.assign(data.begin() + static_cast<std::ptrdiff_t>(pos), data.end());
  return img;
}

}  // namespace detail

inline void write_labelmap(const std::filesystem::path& path, const LabelMap& labels) {
  std::string out = detail::pgm_header(labels.height(), labels.width());
  out.append(reinterpret_cast<const char*>(labels.labels().data()), labels.labels().size());
  detail::write_file(path, out);
}

inline LabelMap read_labelmap(const std::filesystem::path& path) {
  detail::PgmImage img = detail::read_pgm(path);
  LabelMap labels(img.height, img.width);
  std::copy(img.bytes.begin(), img.bytes.end(), labels.labels().begin());
  return labels;
}

inline LabelMap read_labelmap(const std::filesystem::path& path, const CategoryTable& categories) {
  LabelMap labels = read_labelmap(path);
  try {
    check_labels(labels, categories);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return labels;
}

inline void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  std::string out = detail::pgm_header(mask.height(), mask.width());
  for (std::uint8_t bit : mask.bits()) out.push_back(bit ? '\xff' : '\0');
  detail::write_file(path, out);
}

inline BinaryMask read_mask(const std::filesystem::path& path) {
  detail::PgmImage img = detail::read_pgm(path);
  BinaryMask mask(img.height, img.width);
  std::size_t i = 0;
  for (int row = 0; row < img.height; ++row) {
    for (int col = 0; col < img.width; ++col, ++i) {
      mask.set(row, col, img.bytes[i] != 0);
    }
  }
  return mask;
}

// ---------------------------------------------------------------------------
// metrics CSV
//
// Header: frame,area,area_diff,iou,iou_diff
// One row per frame; diff cells are blank on frame 0, iou cells are blank
// throughout when no ground truth was available. A final row with frame
// "__std__" carries the variation STD of each series in its diff column.
// Numbers are the shortest round-trip decimal form; lines end in LF.
// ---------------------------------------------------------------------------

struct FrameMetrics {
  SeriesReport area;
  std::optional<SeriesReport> iou;

  friend bool operator==(const FrameMetrics&, const FrameMetrics&) = default;
};

namespace detail {

inline std::string csv_field(std::string_view raw) {
  if (raw.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(raw);
  std::string out = "\"";
  for (char c : raw) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

// One CSV record; handles RFC-4180 quoting.
inline std::vector<std::string> split_csv_record(std::string_view line,
                                                 const std::string& context) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"' && current.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (quoted) throw IoError(context + ": unterminated quote");
  fields.push_back(std::move(current));
  return fields;
}

inline double parse_csv_double(const std::string& field, const std::string& context) {
  double value = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    throw IoError(context + ": bad number '" + field + "'");
  }
  return value;
}

}  // namespace detail

inline void write_metrics_csv(const std::filesystem::path& path, const FrameMetrics& metrics) {
  const std::size_t frames = metrics.area.per_frame.size();
  if (metrics.iou && metrics.iou->per_frame.size() != frames) {
    throw AlignmentError("area series has " + std::to_string(frames) + " frames, iou series has " +
                         std::to_string(metrics.iou->per_frame.size()));
  }
  std::string out = "frame,area,area_diff,iou,iou_diff\n";
  for (std::size_t i = 0; i < frames; ++i) {
    out += std::to_string(i);
    out += ',';
    out += detail::format_double(metrics.area.per_frame[i]);
    out += ',';
    if (i > 0) out += detail::format_double(metrics.area.diffs[i - 1]);
    out += ',';
    if (metrics.iou) {
      out += detail::format_double(metrics.iou->per_frame[i]);
      out += ',';
      if (i > 0) out += detail::format_double(metrics.iou->diffs[i - 1]);
    } else {
      out += ',';
    }
    out += '\n';
  }
  out += "__std__,,";
  out += detail::format_double(metrics.area.variation_std);
  out += ",,";
  if (metrics.iou) out += detail::format_double(metrics.iou->variation_std);
  out += '\n';
  detail::write_file(path, out);
}

inline FrameMetrics read_metrics_csv(const std::filesystem::path& path) {
  const std::string data = detail::read_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < data.size()) {
    std::size_t end = data.find('\n', start);
    if (end == std::string::npos) end = data.size();
    lines.push_back(data.substr(start, end - start));
    start = end + 1;
  }
  if (lines.empty()) throw IoError(path.string() + ": empty metrics file");
  if (lines[0] != "frame,area,area_diff,iou,iou_diff") {
    throw IoError(path.string() + ": unexpected header '" + lines[0] + "'");
  }
  if (lines.size() < 2) throw IoError(path.string() + ": missing summary row");

  SeriesReport area;
  SeriesReport iou;
  bool any_iou = false;
  const std::size_t data_rows = lines.size() - 2;
  for (std::size_t i = 0; i < data_rows; ++i) {
    const std::string context = path.string() + " line " + std::to_string(i + 2);
    const std::vector<std::string> fields = detail::split_csv_record(lines[i + 1], context);
    if (fields.size() != 5) throw IoError(context + ": expected 5 fields");
    if (fields[0] != std::to_string(i)) {
      throw IoError(context + ": expected frame " + std::to_string(i) + ", got '" + fields[0] +
                    "'");
    }
    area.per_frame.push_back(detail::parse_csv_double(fields[1], context));
    if (i == 0) {
      if (!fields[2].empty()) throw IoError(context + ": frame 0 must have a blank diff");
    } else {
      area.diffs.push_back(detail::parse_csv_double(fields[2], context));
    }
    const bool has_iou = !fields[3].empty();
    if (i == 0) {
      any_iou = has_iou;
    } else if (has_iou != any_iou) {
      throw IoError(context + ": iou column must be fully present or fully blank");
    }
    if (has_iou) {
      iou.per_frame.push_back(detail::parse_csv_double(fields[3], context));
      if (i > 0) iou.diffs.push_back(detail::parse_csv_double(fields[4], context));
    }
  }

  const std::string context = path.string() + " summary row";
  const std::vector<std::string> fields = detail::split_csv_record(lines.back(), context);
  if (fields.size() != 5 || fields[0] != "__std__") {
    throw IoError(context + ": expected a __std__ row");
  }
  area.variation_std = detail::parse_csv_double(fields[2], context);
  FrameMetrics metrics;
  metrics.area = std::move(area);
  if (any_iou) {
    iou.variation_std = detail::parse_csv_double(fields[4], context);
    metrics.iou = std::move(iou);
  }
  return metrics;
}

// ---------------------------------------------------------------------------
// plain-text config: `key = value` lines, '#' starts a comment. Unknown and
// duplicate keys are errors; missing keys fall back to defaults.
// ---------------------------------------------------------------------------

namespace detail {

struct ConfigLine {
  std::string key;
  std::string value;
  int line_number = 0;
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<ConfigLine> parse_config_lines(std::string_view text) {
  std::vector<ConfigLine> out;
  int line_number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_number;
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_number) + ": expected 'key = value', got '" +
                        std::string(line) + "'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_number) + ": empty key");
    if (value.empty()) {
      throw ConfigError("line " + std::to_string(line_number) + ": empty value for '" +
                        std::string(key) + "'");
    }
    out.push_back({std::string(key), std::string(value), line_number});
    if (end == text.size()) break;
  }
  return out;
}

inline std::string key_context(const ConfigLine& kv) {
  return "'" + kv.key + "' (line " + std::to_string(kv.line_number) + ")";
}

inline long long parse_int_value(const ConfigLine& kv) {
  long long value = 0;
  const std::string_view s = kv.value;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ConfigError(key_context(kv) + ": expected an integer, got '" + kv.value + "'");
  }
  return value;
}

inline std::uint64_t parse_u64_value(const ConfigLine& kv) {
  std::uint64_t value = 0;
  const std::string_view s = kv.value;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ConfigError(key_context(kv) + ": expected an unsigned integer, got '" + kv.value + "'");
  }
  return value;
}

inline double parse_double_value(const ConfigLine& kv) {
  double value = 0.0;
  const std::string_view s = kv.value;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ConfigError(key_context(kv) + ": expected a number, got '" + kv.value + "'");
  }
  return value;
}

inline std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    std::size_t end = value.find(',', start);
    if (end == std::string_view::npos) end = value.size();
    out.emplace_back(trim(value.substr(start, end - start)));
    if (end == value.size()) break;
    start = end + 1;
  }
  return out;
}

template <typename Parse>
auto parse_list(const ConfigLine& kv, Parse&& parse) {
  std::vector<decltype(parse(std::string{}))> out;
  for (const std::string& token : split_list(kv.value)) {
    if (token.empty()) {
      throw ConfigError(key_context(kv) + ": empty element in list '" + kv.value + "'");
    }
    out.push_back(parse(token));
  }
  return out;
}

inline std::vector<double> parse_double_list(const ConfigLine& kv) {
  return parse_list(kv, [&](const std::string& token) {
    double v = 0.0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
      throw ConfigError(key_context(kv) + ": expected a number, got '" + token + "'");
    }
    return v;
  });
}

inline std::vector<int> parse_int_list(const ConfigLine& kv) {
  return parse_list(kv, [&](const std::string& token) {
    int v = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
      throw ConfigError(key_context(kv) + ": expected an integer, got '" + token + "'");
    }
    return v;
  });
}

inline void reject_duplicates(const std::vector<ConfigLine>& lines) {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      if (lines[i].key == lines[j].key) {
        throw ConfigError("duplicate key '" + lines[i].key + "' (lines " +
                          std::to_string(lines[i].line_number) + " and " +
                          std::to_string(lines[j].line_number) + ")");
      }
    }
  }
}

}  // namespace detail

// Target tokens may be category indices, or names when a table is given.
inline std::vector<int> resolve_targets(const std::vector<std::string>& tokens,
                                        const CategoryTable* categories) {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const std::string& token : tokens) {
    int index = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), index);
    if (res.ec == std::errc{} && res.ptr == token.data() + token.size()) {
      out.push_back(index);
      continue;
    }
    if (!categories) {
      throw ConfigError("target '" + token + "' is not an index and no category table is loaded");
    }
    index = categories->index_of(token);
    if (index < 0) throw ConfigError("unknown target category '" + token + "'");
    out.push_back(index);
  }
  return out;
}

// Fusion settings as written, before defaulting. The CLI merges a file and
// flag overrides at this level, key by key.
struct FusionSettings {
  std::optional<int> buffer_size;
  std::optional<std::vector<double>> weights;
  std::optional<double> threshold;
  std::optional<std::vector<std::string>> target_tokens;
};

// Keys: buffer_size, weights, threshold, targets.
inline FusionSettings parse_fusion_settings(std::string_view text) {
  const std::vector<detail::ConfigLine> lines = detail::parse_config_lines(text);
  detail::reject_duplicates(lines);
  FusionSettings settings;
  for (const detail::ConfigLine& kv : lines) {
    if (kv.key == "buffer_size") {
      const long long n = detail::parse_int_value(kv);
      if (n < 1) throw ConfigError(detail::key_context(kv) + ": buffer_size must be >= 1");
      settings.buffer_size = static_cast<int>(n);
    } else if (kv.key == "weights") {
      settings.weights = detail::parse_double_list(kv);
    } else if (kv.key == "threshold") {
      settings.threshold = detail::parse_double_value(kv);
    } else if (kv.key == "targets") {
      settings.target_tokens = detail::split_list(kv.value);
    } else {
      throw ConfigError("unknown key " + detail::key_context(kv));
    }
  }
  return settings;
}

// Unset keys take the published defaults: buffer size 4, weights 4,3,2,1,
// threshold 1. `weights` alone implies buffer_size = its length; a set
// buffer_size without weights gets descending buffer_size..1.
inline FusionConfig resolve_fusion_config(const FusionSettings& settings,
                                          const CategoryTable* categories = nullptr) {
  FusionConfig config;
  if (settings.buffer_size) config.buffer_size = *settings.buffer_size;
  if (settings.weights) {
    config.weights = *settings.weights;
    if (!settings.buffer_size) config.buffer_size = static_cast<int>(config.weights.size());
  } else if (settings.buffer_size) {
    config.weights = FusionConfig::default_weights(config.buffer_size);
  }
  if (settings.threshold) config.threshold = *settings.threshold;
  if (settings.target_tokens) config.targets = resolve_targets(*settings.target_tokens, categories);
  config.validate();
  return config;
}

inline FusionConfig parse_fusion_config(std::string_view text,
                                        const CategoryTable* categories = nullptr) {
  return resolve_fusion_config(parse_fusion_settings(text), categories);
}

// Keys: height, width, channels, frames, shape, size, velocity, start,
// target_category, dropout (probability), dropout_frames (list),
// partial_occlusion, logit_contrast, noise_sigma, seed.
inline SynthConfig parse_synth_config(std::string_view text) {
  const std::vector<detail::ConfigLine> lines = detail::parse_config_lines(text);
  detail::reject_duplicates(lines);
  SynthConfig config;
  bool saw_dropout = false;
  bool saw_dropout_frames = false;
  std::vector<std::string> missing = {"height", "width", "channels", "frames", "size"};
  auto mark_seen = [&](const std::string& key) {
    std::erase(missing, key);
  };
  for (const detail::ConfigLine& kv : lines) {
    if (kv.key == "height") {
      config.height = static_cast<int>(detail::parse_int_value(kv));
    } else if (kv.key == "width") {
      config.width = static_cast<int>(detail::parse_int_value(kv));
    } else if (kv.key == "channels") {
      config.channels = static_cast<int>(detail::parse_int_value(kv));
    } else if (kv.key == "frames") {
      config.frames = static_cast<int>(detail::parse_int_value(kv));
    } else if (kv.key == "shape") {
      if (kv.value == "rectangle") config.shape = ObjectShape::rectangle;
      else if (kv.value == "disc") config.shape = ObjectShape::disc;
      else throw ConfigError(detail::key_context(kv) + ": expected rectangle or disc");
    } else if (kv.key == "size") {
      config.size = static_cast<int>(detail::parse_int_value(kv));
    } else if (kv.key == "velocity") {
      const std::vector<int> v = detail::parse_int_list(kv);
      if (v.size() != 2) throw ConfigError(detail::key_context(kv) + ": expected 'dx,dy'");
      config.velocity_dx = v[0];
      config.velocity_dy = v[1];
    } else if (kv.key == "start") {
      const std::vector<int> v = detail::parse_int_list(kv);
      if (v.size() != 2) throw ConfigError(detail::key_context(kv) + ": expected 'row,col'");
      config.start_row = v[0];
      config.start_col = v[1];
    } else if (kv.key == "target_category") {
      config.target_category = static_cast<int>(detail::parse_int_value(kv));
    } else if (kv.key == "dropout") {
      config.dropout_probability = detail::parse_double_value(kv);
      saw_dropout = true;
    } else if (kv.key == "dropout_frames") {
      config.dropout_frames = detail::parse_int_list(kv);
      saw_dropout_frames = true;
    } else if (kv.key == "partial_occlusion") {
      config.partial_occlusion = detail::parse_double_value(kv);
    } else if (kv.key == "logit_contrast") {
      config.logit_contrast = detail::parse_double_value(kv);
    } else if (kv.key == "noise_sigma") {
      config.noise_sigma = detail::parse_double_value(kv);
    } else if (kv.key == "seed") {
      config.seed = detail::parse_u64_value(kv);
    } else {
      throw ConfigError("unknown key " + detail::key_context(kv));
    }
    mark_seen(kv.key);
  }
  if (!missing.empty()) {
    std::string what = "missing required key(s):";
    for (const std::string& key : missing) what += " " + key;
    throw ConfigError(what);
  }
  if (saw_dropout && saw_dropout_frames) {
    throw ConfigError("dropout and dropout_frames are mutually exclusive");
  }
  config.validate();
  return config;
}

inline FusionConfig load_fusion_config(const std::filesystem::path& path,
                                       const CategoryTable* categories = nullptr) {
  return parse_fusion_config(detail::read_file(path), categories);
}

inline SynthConfig load_synth_config(const std::filesystem::path& path) {
  return parse_synth_config(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// sequence manifest
//
//   category = <index>,<name>,<0|1>      one per category, 1 = target
//   frame = <tensor path>[,<mask path>]  one per frame, in order
//
// Paths are relative to the manifest's directory. Mask paths are all
// present or all absent. Referenced files must exist.
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::filesystem::path frame;
  std::optional<std::filesystem::path> mask;
};

struct SequenceManifest {
  CategoryTable categories;
  std::vector<ManifestEntry> entries;
  std::filesystem::path directory;  // resolution base for relative paths

  bool has_masks() const { return !entries.empty() && entries.front().mask.has_value(); }

  std::filesystem::path frame_path(std::size_t i) const { return directory / entries[i].frame; }
  std::filesystem::path mask_path(std::size_t i) const { return directory / *entries[i].mask; }
};

inline void write_manifest(const std::filesystem::path& path, const SequenceManifest& manifest) {
  std::string out;
  for (const Category& cat : manifest.categories.entries()) {
    if (cat.name.find(',') != std::string::npos) {
      throw ConfigError("category name '" + cat.name + "' may not contain a comma");
    }
    out += "category = " + std::to_string(cat.index) + "," + cat.name + "," +
           (cat.is_target ? "1" : "0") + "\n";
  }
  for (const ManifestEntry& entry : manifest.entries) {
    out += "frame = " + entry.frame.generic_string();
    if (entry.mask) out += "," + entry.mask->generic_string();
    out += "\n";
  }
  detail::write_file(path, out);
}

inline SequenceManifest read_manifest(const std::filesystem::path& path) {
  std::vector<detail::ConfigLine> lines;
  try {
    lines = detail::parse_config_lines(detail::read_file(path));
  } catch (const ConfigError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  std::vector<Category> categories;
  std::vector<ManifestEntry> entries;
  for (const detail::ConfigLine& kv : lines) {
    if (kv.key == "category") {
      const std::vector<std::string> parts = detail::split_list(kv.value);
      if (parts.size() != 3 || parts[2].size() != 1 || (parts[2] != "0" && parts[2] != "1")) {
        throw IoError(path.string() + " line " + std::to_string(kv.line_number) +
                      ": expected 'category = index,name,0|1'");
      }
      int index = 0;
      const auto res = std::from_chars(parts[0].data(), parts[0].data() + parts[0].size(), index);
      if (res.ec != std::errc{} || res.ptr != parts[0].data() + parts[0].size()) {
        throw IoError(path.string() + " line " + std::to_string(kv.line_number) +
                      ": bad category index '" + parts[0] + "'");
      }
      categories.push_back({index, parts[1], parts[2] == "1"});
    } else if (kv.key == "frame") {
      const std::vector<std::string> parts = detail::split_list(kv.value);
      if (parts.empty() || parts.size() > 2 || parts[0].empty()) {
        throw IoError(path.string() + " line " + std::to_string(kv.line_number) +
                      ": expected 'frame = tensor[,mask]'");
      }
      ManifestEntry entry;
      entry.frame = parts[0];
      if (parts.size() == 2) entry.mask = parts[1];
      entries.push_back(std::move(entry));
    } else {
      throw IoError(path.string() + " line " + std::to_string(kv.line_number) + ": unknown key '" +
                    kv.key + "'");
    }
  }
  if (entries.empty()) throw IoError(path.string() + ": manifest lists no frames");
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].mask.has_value() != entries[0].mask.has_value()) {
      throw IoError(path.string() + ": mask paths must be present for all frames or none");
    }
  }

  CategoryTable table = [&] {
    try {
      return CategoryTable(std::move(categories));
    } catch (const ConfigError& e) {
      throw IoError(path.string() + ": " + e.what());
    }
  }();
  SequenceManifest manifest{std::move(table), std::move(entries),
                            std::filesystem::absolute(path).parent_path()};
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (!std::filesystem::exists(manifest.frame_path(i))) {
      throw IoError(path.string() + ": missing frame file " + manifest.frame_path(i).string());
    }
    if (manifest.has_masks() && !std::filesystem::exists(manifest.mask_path(i))) {
      throw IoError(path.string() + ": missing mask file " + manifest.mask_path(i).string());
    }
  }
  return manifest;
}

struct LoadedSequence {
  std::vector<TensorVariant> frames;
  std::vector<BinaryMask> masks;  // empty when the manifest has no masks
};

// Reads every referenced file and checks that shapes agree across the
// sequence and against the category table.
inline LoadedSequence load_sequence(const SequenceManifest& manifest) {
  LoadedSequence seq;
  seq.frames.reserve(manifest.entries.size());
  GridShape first_shape;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    TensorVariant frame = read_tensor(manifest.frame_path(i));
    const GridShape shape = std::visit([](const auto& m) { return m.shape(); }, frame);
    if (i == 0) {
      first_shape = shape;
      if (shape.channels != manifest.categories.size()) {
        throw ShapeError("frames carry " + std::to_string(shape.channels) +
                         " channels, manifest lists " + std::to_string(manifest.categories.size()) +
                         " categories");
      }
    } else if (shape != first_shape) {
      throw ShapeError("frame " + std::to_string(i) + " has shape " + to_string(shape) +
                       ", sequence started with " + to_string(first_shape));
    }
    if (manifest.has_masks()) {
      BinaryMask mask = read_mask(manifest.mask_path(i));
      if (mask.height() != shape.height || mask.width() != shape.width) {
        throw ShapeError("mask " + std::to_string(i) + " is " + mask.shape_string() +
                         ", frames are " + to_string(first_shape));
      }
      seq.masks.push_back(std::move(mask));
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

}  // namespace tempseg
