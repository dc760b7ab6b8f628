#pragma once

// MovieLens 100K / 1M ingestion, corpus statistics and seeded splits.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fusionrec::data {

enum class Format { ml100k, ml1m };

Format parse_format(std::string_view name);
std::string_view format_name(Format f);

struct RatingRecord {
  std::uint32_t user_id = 0;
  std::uint32_t movie_id = 0;
  std::uint8_t rating = 0;  // 1..5
  std::int64_t timestamp = 0;

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

/// `age` is years for 100K and the published bucket code (1, 18, ..., 56) for
/// 1M. `occupation` is the name (100K) or the numeric code as text (1M).
struct UserProfile {
  std::uint32_t user_id = 0;
  int age = 0;
  char gender = 'M';
  std::string occupation;
  std::string zip;
};

struct MovieMeta {
  std::uint32_t movie_id = 0;
  std::string title;               // UTF-8
  std::vector<int> genres;         // indices into genre_names(format), ascending
  std::optional<int> release_year;
};

struct DatasetStats {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t n_ratings = 0;
  double sparsity = 0.0;
};

/// 19 names with "unknown" first for 100K; 18 for 1M.
const std::vector<std::string>& genre_names(Format f);
/// Order of the published u.occupation file.
const std::vector<std::string>& occupation_names_100k();
/// Published 1M age bucket codes.
const std::vector<int>& age_codes_1m();

std::vector<RatingRecord> parse_ratings(const std::filesystem::path& path, Format f);
std::vector<RatingRecord> parse_ratings(std::istream& in, Format f, const std::string& source = "<stream>");
std::vector<UserProfile> parse_users(const std::filesystem::path& path, Format f);
std::vector<UserProfile> parse_users(std::istream& in, Format f, const std::string& source = "<stream>");
std::vector<MovieMeta> parse_movies(const std::filesystem::path& path, Format f);
std::vector<MovieMeta> parse_movies(std::istream& in, Format f, const std::string& source = "<stream>");

/// One line in the format's native layout (no newline).
std::string format_rating(const RatingRecord& r, Format f);
void write_ratings(const std::filesystem::path& path, const std::vector<RatingRecord>& records, Format f);

/// Counts distinct users/items; declared catalogue sizes (when non-zero) take
/// precedence if larger. sparsity = 1 - n_ratings / (n_users * n_items).
DatasetStats compute_stats(const std::vector<RatingRecord>& records, std::size_t declared_users = 0,
                           std::size_t declared_items = 0);

struct SplitRatios {
  double train = 0.9;
  double val = 0.05;
  double test = 0.05;
};

inline constexpr std::uint64_t kDefaultSplitSeed = 20240607;

struct Split {
  std::vector<RatingRecord> train;
  std::vector<RatingRecord> val;
  std::vector<RatingRecord> test;
};

/// Uniform per-interaction partition: seeded Fisher-Yates shuffle, then the
/// first round(n*train) records go to train and the next round(n*val) to val.
Split split_dataset(const std::vector<RatingRecord>& records, const SplitRatios& ratios,
                    std::uint64_t seed = kDefaultSplitSeed);

/// Manifest lines: user,movie,rating,timestamp,{train|val|test}
void write_manifest(const std::filesystem::path& path, const Split& split);
Split read_manifest(const std::filesystem::path& path);

struct Dataset {
  Format format = Format::ml100k;
  std::vector<RatingRecord> ratings;
  std::vector<UserProfile> users;
  std::vector<MovieMeta> movies;

  DatasetStats stats() const { return compute_stats(ratings, users.size(), movies.size()); }
};

struct DatasetFiles {
  std::filesystem::path ratings, users, movies;
};
DatasetFiles dataset_files(const std::filesystem::path& dir, Format f);
Dataset load_dataset(const std::filesystem::path& dir, Format f);

/// Latin-1 bytes to UTF-8.
std::string latin1_to_utf8(std::string_view bytes);

}  // namespace fusionrec::data
