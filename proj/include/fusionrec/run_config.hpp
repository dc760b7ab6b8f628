#pragma once

// Flat key=value run configuration with an explicit schema version.
//
//   # comment
//   schema_version=1
//   dataset_dir=data/ml-100k
//   lr=0.0005
//
// Values given on the command line override the file. Validation collects
// every problem and reports them together.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "fusionrec/fusion.hpp"
#include "fusionrec/movielens.hpp"
#include "fusionrec/training.hpp"

namespace fusionrec::cli {

inline constexpr int kRunConfigSchema = 1;

/// Build identifier from git describe at configure time.
const char* version();

using KeyValues = std::map<std::string, std::string>;

struct RunConfig {
  std::filesystem::path dataset_dir;
  data::Format format = data::Format::ml100k;
  data::SplitRatios split;
  std::uint64_t split_seed = data::kDefaultSplitSeed;
  std::filesystem::path manifest;  // empty: split on the fly

  std::filesystem::path store_title, store_intro, store_poster;
  bool synthetic_stores = false;  // seeded N(0,1) vectors for stores without a path
  std::uint64_t store_seed = 7;

  model::EncoderConfig encoder;
  std::size_t id_dim = 64;
  std::size_t hidden_dim = 256;
  std::size_t zip_buckets = 1000;
  std::uint64_t model_seed = 1;

  train::TrainConfig trainer;
  std::filesystem::path output_dir = "runs/default";
};

/// Parses lines into a map; malformed lines and duplicate keys are errors.
KeyValues parse_key_values(std::istream& in, const std::string& source);
KeyValues read_key_values(const std::filesystem::path& path);

/// Builds a config from keys (schema_version required). Throws ConfigError
/// listing every unknown key, bad value and invariant violation.
RunConfig config_from_key_values(const KeyValues& kv);

/// File, then overrides; `path` may be empty to start from overrides alone.
RunConfig load_run_config(const std::filesystem::path& path, const KeyValues& overrides);

KeyValues to_key_values(const RunConfig& config);
std::string format_key_values(const KeyValues& kv);

/// Problems with referenced paths (dataset files, stores, manifest).
std::vector<std::string> missing_paths(const RunConfig& config);

/// Writes <dir>/config.txt holding the resolved config plus the build version.
void write_run_record(const std::filesystem::path& dir, const RunConfig& config);

}  // namespace fusionrec::cli
