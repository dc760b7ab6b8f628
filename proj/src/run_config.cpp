#include "fusionrec/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "fusionrec/errors.hpp"

#ifndef FUSIONREC_VERSION
#define FUSIONREC_VERSION "unknown"
#endif

namespace fusionrec::cli {

const char* version() { return FUSIONREC_VERSION; }

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

// Reads typed values out of a KeyValues map, collecting errors instead of throwing.
class Reader {
 public:
  explicit Reader(const KeyValues& kv) : kv_(kv) {}

  template <typename Fn>
  void field(const std::string& key, Fn&& assign) {
    seen_.push_back(key);
    const auto it = kv_.find(key);
    if (it == kv_.end()) return;
    try {
      assign(it->second);
    } catch (const std::exception& e) {
      errors_.push_back(key + ": " + e.what());
    }
  }

  void size(const std::string& key, std::size_t& out) {
    field(key, [&](const std::string& v) { out = parse_uint(v); });
  }
  void u64(const std::string& key, std::uint64_t& out) {
    field(key, [&](const std::string& v) { out = parse_uint(v); });
  }
  void real(const std::string& key, double& out) {
    field(key, [&](const std::string& v) { out = parse_double(v); });
  }
  void path(const std::string& key, std::filesystem::path& out) {
    field(key, [&](const std::string& v) { out = v; });
  }
  void flag(const std::string& key, bool& out) {
    field(key, [&](const std::string& v) {
      if (v == "true" || v == "1") {
        out = true;
      } else if (v == "false" || v == "0") {
        out = false;
      } else {
        throw std::invalid_argument("expected true or false, got '" + v + "'");
      }
    });
  }

  void error(std::string message) { errors_.push_back(std::move(message)); }

  void unknown_keys() {
    for (const auto& [key, value] : kv_) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) errors_.push_back("unknown key '" + key + "'");
    }
  }

  const std::vector<std::string>& errors() const { return errors_; }

  static std::uint64_t parse_uint(const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
    return out;
  }
  static double parse_double(const std::string& v) {
    double out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
      throw std::invalid_argument("expected a finite number, got '" + v + "'");
    }
    return out;
  }

 private:
  const KeyValues& kv_;
  std::vector<std::string> seen_;
  std::vector<std::string> errors_;
};

}  // namespace

KeyValues parse_key_values(std::istream& in, const std::string& source) {
  KeyValues kv;
  std::vector<std::string> errors;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) {
      errors.push_back(where + "expected key=value");
      continue;
    }
    auto key = trim(std::string_view(text).substr(0, eq));
    auto value = trim(std::string_view(text).substr(eq + 1));
    if (key.empty()) {
      errors.push_back(where + "empty key");
    } else if (!kv.emplace(key, value).second) {
      errors.push_back(where + "duplicate key '" + key + "'");
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_key_values(in, path.string());
}

RunConfig config_from_key_values(const KeyValues& kv) {
  RunConfig c;
  Reader r(kv);
  std::size_t schema = 0;
  r.size("schema_version", schema);
  if (!kv.contains("schema_version")) {
    r.error("schema_version is required");
  } else if (schema != static_cast<std::size_t>(kRunConfigSchema)) {
    r.error("schema_version " + std::to_string(schema) + " is not supported (expected " +
            std::to_string(kRunConfigSchema) + ")");
  }

  r.path("dataset_dir", c.dataset_dir);
  r.field("format", [&](const std::string& v) { c.format = data::parse_format(v); });
  r.real("split_train", c.split.train);
  r.real("split_val", c.split.val);
  r.real("split_test", c.split.test);
  r.u64("split_seed", c.split_seed);
  r.path("manifest", c.manifest);
  r.path("store_title", c.store_title);
  r.path("store_intro", c.store_intro);
  r.path("store_poster", c.store_poster);
  r.flag("synthetic_stores", c.synthetic_stores);
  r.u64("store_seed", c.store_seed);
  r.size("d_model", c.encoder.d_model);
  r.size("n_layers", c.encoder.n_layers);
  r.size("n_heads", c.encoder.n_heads);
  r.size("ffn_dim", c.encoder.ffn_dim);
  r.real("dropout", c.encoder.dropout);
  r.size("id_dim", c.id_dim);
  r.size("hidden_dim", c.hidden_dim);
  r.size("zip_buckets", c.zip_buckets);
  r.u64("model_seed", c.model_seed);
  r.real("lr", c.trainer.lr);
  r.size("batch_size", c.trainer.batch_size);
  r.size("epochs", c.trainer.max_epochs);
  r.size("patience", c.trainer.patience);
  r.u64("seed", c.trainer.seed);
  r.field("mode", [&](const std::string& v) { c.trainer.mode = train::parse_modality_mode(v); });
  r.path("output_dir", c.output_dir);
  r.unknown_keys();

  auto errors = r.errors();
  const auto check = [&](const auto& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      errors.push_back(e.what());
    }
  };
  if (c.dataset_dir.empty()) errors.push_back("dataset_dir is required");
  if (c.output_dir.empty()) errors.push_back("output_dir must not be empty");
  const double total = c.split.train + c.split.val + c.split.test;
  if (c.split.train <= 0 || c.split.val < 0 || c.split.test < 0 || std::abs(total - 1.0) > 1e-9) {
    errors.push_back("split ratios must be non-negative with train > 0 and sum to 1");
  }
  check([&] { c.encoder.validate(); });
  if (c.id_dim == 0 || c.hidden_dim == 0 || c.zip_buckets == 0) {
    errors.push_back("id_dim, hidden_dim and zip_buckets must be positive");
  }
  check([&] { c.trainer.validate(); });
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, const KeyValues& overrides) {
  KeyValues kv;
  if (!path.empty()) kv = read_key_values(path);
  for (const auto& [k, v] : overrides) kv[k] = v;
  if (path.empty() && !kv.contains("schema_version")) kv["schema_version"] = std::to_string(kRunConfigSchema);
  return config_from_key_values(kv);
}

KeyValues to_key_values(const RunConfig& c) {
  return {
      {"schema_version", std::to_string(kRunConfigSchema)},
      {"dataset_dir", c.dataset_dir.string()},
      {"format", std::string(data::format_name(c.format))},
      {"split_train", format_double(c.split.train)},
      {"split_val", format_double(c.split.val)},
      {"split_test", format_double(c.split.test)},
      {"split_seed", std::to_string(c.split_seed)},
      {"manifest", c.manifest.string()},
      {"store_title", c.store_title.string()},
      {"store_intro", c.store_intro.string()},
      {"store_poster", c.store_poster.string()},
      {"synthetic_stores", c.synthetic_stores ? "true" : "false"},
      {"store_seed", std::to_string(c.store_seed)},
      {"d_model", std::to_string(c.encoder.d_model)},
      {"n_layers", std::to_string(c.encoder.n_layers)},
      {"n_heads", std::to_string(c.encoder.n_heads)},
      {"ffn_dim", std::to_string(c.encoder.ffn_dim)},
      {"dropout", format_double(c.encoder.dropout)},
      {"id_dim", std::to_string(c.id_dim)},
      {"hidden_dim", std::to_string(c.hidden_dim)},
      {"zip_buckets", std::to_string(c.zip_buckets)},
      {"model_seed", std::to_string(c.model_seed)},
      {"lr", format_double(c.trainer.lr)},
      {"batch_size", std::to_string(c.trainer.batch_size)},
      {"epochs", std::to_string(c.trainer.max_epochs)},
      {"patience", std::to_string(c.trainer.patience)},
      {"seed", std::to_string(c.trainer.seed)},
      {"mode", std::string(train::modality_mode_name(c.trainer.mode))},
      {"output_dir", c.output_dir.string()},
  };
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::vector<std::string> missing_paths(const RunConfig& c) {
  std::vector<std::string> out;
  std::error_code ec;
  if (!std::filesystem::is_directory(c.dataset_dir, ec)) {
    out.push_back("dataset_dir " + c.dataset_dir.string() + " does not exist");
  }
  for (const auto* p : {&c.manifest, &c.store_title, &c.store_intro, &c.store_poster}) {
    if (!p->empty() && !std::filesystem::exists(*p, ec)) out.push_back(p->string() + " does not exist");
  }
  return out;
}

void write_run_record(const std::filesystem::path& dir, const RunConfig& config) {
  std::filesystem::create_directories(dir);
  const auto path = dir / "config.txt";
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# fusionrec " << version() << '\n' << format_key_values(to_key_values(config));
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace fusionrec::cli
