#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "semhash/conceptsim.hpp"
#include "semhash/datastore.hpp"
#include "semhash/hashnet.hpp"

namespace semhash::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumerical = 3,
};

/// Softmax temperature: either a multiple of the current concept count ("3m")
/// or an absolute value ("243").
struct TauSetting {
  bool per_concept = true;
  double value = 3.0;

  double resolve(std::size_t concepts) const {
    return per_concept ? value * static_cast<double>(concepts) : value;
  }
  static TauSetting parse(const std::string& text);
};

/// Flat key=value run configuration (see README for the key list).
struct RunConfig {
  hashnet::TrainConfig train;
  std::vector<std::filesystem::path> scores_paths;
  std::vector<std::filesystem::path> distributions_paths;
  std::optional<std::filesystem::path> features_path;
  std::vector<std::filesystem::path> labels_paths;
  conceptsim::SimilarityMode sim_mode = conceptsim::SimilarityMode::kConcept;
  TauSetting tau;
  conceptsim::SecondPassTemperature second_pass = conceptsim::SecondPassTemperature::kScaled;
  std::filesystem::path output_dir = ".";
};

/// Relative paths resolve against `base_dir`. Throws UsageError on unknown or
/// repeated keys, bad values, or referenced input files that do not exist.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

struct SynthOptions {
  std::size_t clusters = 10;
  std::size_t per_cluster = 50;
  std::size_t concepts = 20;
  std::size_t dim = 64;
  std::uint64_t seed = 1;
  double noise = 0.05;
  std::size_t queries_per_cluster = 0;
};

struct SynthSplit {
  ScoreMatrix scores;
  FeatureMatrix features;
  LabelTable labels;
};

struct SynthData {
  SynthSplit db;
  std::optional<SynthSplit> queries;  ///< present when queries_per_cluster > 0
};

/// Well-separated Gaussian clusters around random unit-norm centers; cluster c
/// elevates concept column c. Deterministic in the seed.
SynthData generate_synthetic(const SynthOptions& opts);

/// Writes scores.uhsm, features.uhsf, labels.tsv (and query_* files).
void write_synthetic(const std::filesystem::path& dir, const SynthData& data);

/// Builds the training similarity source described by a run config. When the
/// config asks for denoising from raw scores, the report is returned too.
struct PreparedSource {
  conceptsim::SimilaritySource source;
  std::optional<conceptsim::DenoiseReport> report;
};
PreparedSource prepare_similarity(const RunConfig& cfg, const FeatureMatrix* features);

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace semhash::cli
