// tempseg: generate synthetic segmentation sequences, fuse them with the
// temporal post-processing methods, and evaluate the results.
//
// Exit codes: 0 ok, 2 configuration, 3 I/O or bad data file, 4 shape
// mismatch, 5 sequence misalignment, 1 anything else.

#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "tempseg/tempseg.hpp"

namespace fs = std::filesystem;

namespace {

std::string frame_name(std::size_t index, const char* stem, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05zu.%s", stem, index, ext);
  return buf;
}

std::string sanitize_name(std::string name) {
  for (char& c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return name.empty() ? std::string("method") : name;
}

struct SynthArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& args) {
  tempseg::SynthConfig config = tempseg::load_synth_config(args.config_path);
  if (args.seed) config.seed = *args.seed;

  const tempseg::SynthSequence sequence = tempseg::generate(config);
  const tempseg::CategoryTable categories = tempseg::synth_categories(config);

  const fs::path out(args.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw tempseg::IoError("cannot create " + out.string() + ": " + ec.message());

  tempseg::SequenceManifest manifest{categories, {}, out};
  for (std::size_t i = 0; i < sequence.frames.size(); ++i) {
    const std::string frame_file = frame_name(i, "frame", "sgt");
    const std::string mask_file = frame_name(i, "mask", "pgm");
    tempseg::write_tensor(out / frame_file, sequence.frames[i]);
    tempseg::write_mask(out / mask_file, sequence.masks[i]);
    manifest.entries.push_back({frame_file, mask_file});
  }
  const fs::path manifest_path = out / "manifest.txt";
  tempseg::write_manifest(manifest_path, manifest);

  std::cerr << "generated " << sequence.frames.size() << " frames, " << sequence.dropped_frames.size()
            << " with injected dropout\n";
  std::cout << manifest_path.string() << "\n";
  return 0;
}

struct FuseArgs {
  std::string manifest_path;
  std::string method;
  std::string out_dir;
  std::string config_path;
  std::optional<int> buffer_size;
  std::optional<std::vector<double>> weights;
  std::optional<double> threshold;
  std::optional<std::vector<std::string>> targets;
};

int cmd_fuse(const FuseArgs& args) {
  const tempseg::FusionMethod method = tempseg::parse_method(args.method);
  const tempseg::SequenceManifest manifest = tempseg::read_manifest(args.manifest_path);

  tempseg::FusionSettings settings;
  if (!args.config_path.empty()) {
    settings = tempseg::parse_fusion_settings(tempseg::detail::read_file(args.config_path));
  }
  // Precedence: flag > config file > published default.
  if (args.buffer_size) settings.buffer_size = args.buffer_size;
  if (args.weights) settings.weights = args.weights;
  if (args.threshold) settings.threshold = args.threshold;
  if (args.targets) settings.target_tokens = args.targets;
  const tempseg::FusionConfig config =
      tempseg::resolve_fusion_config(settings, &manifest.categories);

  const tempseg::LoadedSequence sequence = tempseg::load_sequence(manifest);

  bool saw_logits = false;
  bool saw_probs = false;
  for (const tempseg::TensorVariant& frame : sequence.frames) {
    (std::holds_alternative<tempseg::LogitMap>(frame) ? saw_logits : saw_probs) = true;
  }
  std::cerr << "input kind: "
            << (saw_logits && saw_probs ? "mixed" : (saw_probs ? "probabilities" : "logits"))
            << "\n";

  const fs::path out(args.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw tempseg::IoError("cannot create " + out.string() + ": " + ec.message());

  tempseg::Pipeline pipeline(method, config, manifest.categories);
  for (std::size_t i = 0; i < sequence.frames.size(); ++i) {
    const tempseg::LabelMap labels =
        std::visit([&](const auto& frame) { return pipeline.push(frame); }, sequence.frames[i]);
    tempseg::write_labelmap(out / frame_name(i, "frame", "pgm"), labels);
  }
  std::cerr << "fused " << sequence.frames.size() << " frames with method " << args.method << "\n";
  return 0;
}

struct EvalArgs {
  std::string manifest_path;
  std::vector<std::string> preds;  // "dir" or "name=dir"
  std::string category;
  std::string out_dir = ".";
};

int cmd_eval(const EvalArgs& args) {
  const tempseg::SequenceManifest manifest = tempseg::read_manifest(args.manifest_path);
  const int category = tempseg::resolve_targets({args.category}, &manifest.categories).at(0);
  if (category < 0 || category >= manifest.categories.size()) {
    throw tempseg::ConfigError("category index " + std::to_string(category) + " outside 0.." +
                               std::to_string(manifest.categories.size() - 1));
  }

  std::vector<tempseg::BinaryMask> truths;
  if (manifest.has_masks()) {
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
      truths.push_back(tempseg::read_mask(manifest.mask_path(i)));
    }
  } else {
    std::cerr << "manifest has no ground-truth masks; reporting area metrics only\n";
  }

  const fs::path out(args.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw tempseg::IoError("cannot create " + out.string() + ": " + ec.message());

  const std::size_t frames = manifest.entries.size();
  std::vector<tempseg::MethodSeries> reports;
  for (const std::string& spec : args.preds) {
    std::string name;
    fs::path dir;
    if (const std::size_t eq = spec.find('='); eq != std::string::npos) {
      name = spec.substr(0, eq);
      dir = spec.substr(eq + 1);
    } else {
      dir = spec;
      name = fs::path(spec).filename().string();
    }
    name = sanitize_name(name);

    std::vector<tempseg::LabelMap> preds;
    preds.reserve(frames);
    for (std::size_t i = 0; i < frames; ++i) {
      const fs::path frame_path = dir / frame_name(i, "frame", "pgm");
      if (!fs::exists(frame_path)) {
        throw tempseg::IoError("missing prediction frame " + frame_path.string());
      }
      preds.push_back(tempseg::read_labelmap(frame_path, manifest.categories));
    }
    if (fs::exists(dir / frame_name(frames, "frame", "pgm"))) {
      throw tempseg::AlignmentError("prediction directory " + dir.string() + " has more than " +
                                    std::to_string(frames) + " frames listed in the manifest");
    }

    tempseg::MethodSeries series;
    series.method = name;
    series.area = tempseg::area_series(preds, category, manifest.categories);
    if (!truths.empty()) series.iou = tempseg::iou_series(preds, truths, category);
    tempseg::write_metrics_csv(out / ("metrics_" + name + ".csv"),
                               {series.area, series.iou});
    reports.push_back(std::move(series));
  }

  std::cout << tempseg::format_comparison(tempseg::compare_methods(reports));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal consistency post-processing for per-frame semantic segmentation"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic sequence with injected faults");
  synth->add_option("--config", synth_args.config_path, "Synthesis config file")->required();
  synth->add_option("--out", synth_args.out_dir, "Output directory")->required();
  std::uint64_t synth_seed = 0;
  CLI::Option* seed_opt = synth->add_option("--seed", synth_seed, "Override the config seed");

  FuseArgs fuse_args;
  CLI::App* fuse = app.add_subcommand("fuse", "Run a fusion method over a sequence");
  fuse->add_option("--manifest", fuse_args.manifest_path, "Sequence manifest")->required();
  fuse->add_option("--method", fuse_args.method, "baseline, image_buffer or attention")->required();
  fuse->add_option("--out", fuse_args.out_dir, "Output directory for label maps")->required();
  fuse->add_option("--config", fuse_args.config_path, "Fusion config file");
  int buffer_size = 0;
  CLI::Option* buffer_opt = fuse->add_option("--buffer-size", buffer_size, "History length");
  std::vector<double> weights;
  CLI::Option* weights_opt =
      fuse->add_option("--weights", weights, "Frame weights, newest first")->delimiter(',');
  double threshold = 0.0;
  CLI::Option* threshold_opt = fuse->add_option("--threshold", threshold, "Augmented-score floor");
  std::vector<std::string> targets;
  CLI::Option* targets_opt =
      fuse->add_option("--targets", targets, "Target categories (names or indices)")
          ->delimiter(',');

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Score prediction directories against a manifest");
  eval->add_option("--manifest", eval_args.manifest_path, "Sequence manifest")->required();
  eval->add_option("--pred", eval_args.preds, "Prediction directory, optionally name=dir")
      ->required()
      ->take_all();
  eval->add_option("--category", eval_args.category, "Category to score (name or index)")
      ->required();
  eval->add_option("--out", eval_args.out_dir, "Directory for metrics CSV files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      if (*seed_opt) synth_args.seed = synth_seed;
      return cmd_synth(synth_args);
    }
    if (fuse->parsed()) {
      if (*buffer_opt) fuse_args.buffer_size = buffer_size;
      if (*weights_opt) fuse_args.weights = weights;
      if (*threshold_opt) fuse_args.threshold = threshold;
      if (*targets_opt) fuse_args.targets = targets;
      return cmd_fuse(fuse_args);
    }
    if (eval->parsed()) return cmd_eval(eval_args);
  } catch (const tempseg::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const tempseg::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const tempseg::AlignmentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const tempseg::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const tempseg::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
