#include "fusionrec/movielens.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "fusionrec/errors.hpp"
#include "fusionrec/rng.hpp"

namespace fusionrec::data {

namespace {

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

std::vector<std::string_view> split_fields(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
}

std::string_view separator(Format f, bool ratings) {
  if (f == Format::ml1m) return "::";
  return ratings ? "\t" : "|";
}

template <typename Int>
Int parse_int(std::string_view field, const std::string& ctx, const char* what) {
  Int value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw DataError(ctx + "non-numeric " + what + " '" + std::string(field) + "'");
  }
  return value;
}

/// Runs `fn(line, ctx)` on each non-empty line, stripping a trailing CR.
template <typename Fn>
void for_each_line(std::istream& in, const std::string& source, Fn fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(std::string_view(line), where(source, number));
  }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::optional<int> year_from_title(std::string_view title) {
  // titles end in "(YYYY)"
  const auto close = title.rfind(')');
  if (close == std::string_view::npos || close < 5 || title[close - 5] != '(') return std::nullopt;
  int year = 0;
  const auto digits = title.substr(close - 4, 4);
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + 4, year);
  if (ec != std::errc() || ptr != digits.data() + 4) return std::nullopt;
  return year;
}

}  // namespace

Format parse_format(std::string_view name) {
  if (name == "ml100k" || name == "ml-100k") return Format::ml100k;
  if (name == "ml1m" || name == "ml-1m") return Format::ml1m;
  throw ConfigError("unknown dataset format '" + std::string(name) + "' (expected ml100k or ml1m)");
}

std::string_view format_name(Format f) { return f == Format::ml100k ? "ml100k" : "ml1m"; }

const std::vector<std::string>& genre_names(Format f) {
  static const std::vector<std::string> k100{"unknown", "Action", "Adventure", "Animation", "Children's",
                                             "Comedy", "Crime", "Documentary", "Drama", "Fantasy",
                                             "Film-Noir", "Horror", "Musical", "Mystery", "Romance",
                                             "Sci-Fi", "Thriller", "War", "Western"};
  static const std::vector<std::string> k1m(k100.begin() + 1, k100.end());
  return f == Format::ml100k ? k100 : k1m;
}

const std::vector<std::string>& occupation_names_100k() {
  static const std::vector<std::string> names{
      "administrator", "artist",    "doctor",     "educator", "engineer", "entertainment", "executive",
      "healthcare",    "homemaker", "lawyer",     "librarian", "marketing", "none",          "other",
      "programmer",    "retired",   "salesman",   "scientist", "student",  "technician",    "writer"};
  return names;
}

const std::vector<int>& age_codes_1m() {
  static const std::vector<int> codes{1, 18, 25, 35, 45, 50, 56};
  return codes;
}

std::string latin1_to_utf8(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size());
  for (const char ch : bytes) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<RatingRecord> parse_ratings(std::istream& in, Format f, const std::string& source) {
  std::vector<RatingRecord> out;
  const auto sep = separator(f, true);
  for_each_line(in, source, [&](std::string_view line, const std::string& ctx) {
    const auto fields = split_fields(line, sep);
    if (fields.size() != 4) {
      throw DataError(ctx + "expected 4 fields, got " + std::to_string(fields.size()));
    }
    RatingRecord r;
    r.user_id = parse_int<std::uint32_t>(fields[0], ctx, "user id");
    r.movie_id = parse_int<std::uint32_t>(fields[1], ctx, "movie id");
    const int rating = parse_int<int>(fields[2], ctx, "rating");
    r.timestamp = parse_int<std::int64_t>(fields[3], ctx, "timestamp");
    if (r.user_id == 0 || r.movie_id == 0) throw DataError(ctx + "ids must be positive");
    if (rating < 1 || rating > 5) throw DataError(ctx + "rating " + std::to_string(rating) + " outside 1..5");
    r.rating = static_cast<std::uint8_t>(rating);
    out.push_back(r);
  });
  return out;
}

std::vector<RatingRecord> parse_ratings(const std::filesystem::path& path, Format f) {
  auto in = open_or_throw(path);
  return parse_ratings(in, f, path.string());
}

std::vector<UserProfile> parse_users(std::istream& in, Format f, const std::string& source) {
  std::vector<UserProfile> out;
  std::unordered_set<std::uint32_t> seen;
  const auto sep = separator(f, false);
  for_each_line(in, source, [&](std::string_view line, const std::string& ctx) {
    const auto fields = split_fields(line, sep);
    if (fields.size() != 5) throw DataError(ctx + "expected 5 fields, got " + std::to_string(fields.size()));
    UserProfile u;
    u.user_id = parse_int<std::uint32_t>(fields[0], ctx, "user id");
    if (u.user_id == 0) throw DataError(ctx + "user id must be positive");
    const auto gender = f == Format::ml100k ? fields[2] : fields[1];
    const auto age = f == Format::ml100k ? fields[1] : fields[2];
    if (gender != "M" && gender != "F") throw DataError(ctx + "gender must be M or F");
    u.gender = gender[0];
    u.age = parse_int<int>(age, ctx, "age");
    if (f == Format::ml100k) {
      if (u.age <= 0) throw DataError(ctx + "age must be positive");
      u.occupation = std::string(fields[3]);
      if (u.occupation.empty()) throw DataError(ctx + "empty occupation");
    } else {
      const auto& codes = age_codes_1m();
      if (std::find(codes.begin(), codes.end(), u.age) == codes.end()) {
        throw DataError(ctx + "unknown age bucket " + std::to_string(u.age));
      }
      const int occ = parse_int<int>(fields[3], ctx, "occupation");
      if (occ < 0 || occ > 20) throw DataError(ctx + "occupation code out of range");
      u.occupation = std::to_string(occ);
    }
    u.zip = std::string(fields[4]);
    if (!seen.insert(u.user_id).second) throw DataError(ctx + "duplicate user id " + std::to_string(u.user_id));
    out.push_back(std::move(u));
  });
  return out;
}

std::vector<UserProfile> parse_users(const std::filesystem::path& path, Format f) {
  auto in = open_or_throw(path);
  return parse_users(in, f, path.string());
}

std::vector<MovieMeta> parse_movies(std::istream& in, Format f, const std::string& source) {
  std::vector<MovieMeta> out;
  std::unordered_set<std::uint32_t> seen;
  const auto& names = genre_names(f);
  for_each_line(in, source, [&](std::string_view line, const std::string& ctx) {
    MovieMeta m;
    if (f == Format::ml100k) {
      const auto fields = split_fields(line, "|");
      if (fields.size() != 5 + names.size()) {
        throw DataError(ctx + "expected " + std::to_string(5 + names.size()) + " fields, got " +
                        std::to_string(fields.size()));
      }
      m.movie_id = parse_int<std::uint32_t>(fields[0], ctx, "movie id");
      m.title = latin1_to_utf8(fields[1]);
      // release date looks like 01-Jan-1995
      if (fields[2].size() >= 4) {
        int year = 0;
        const auto y = fields[2].substr(fields[2].size() - 4);
        if (std::from_chars(y.data(), y.data() + 4, year).ec == std::errc()) m.release_year = year;
      }
      if (!m.release_year) m.release_year = year_from_title(fields[1]);
      for (std::size_t g = 0; g < names.size(); ++g) {
        const int flag = parse_int<int>(fields[5 + g], ctx, "genre flag");
        if (flag != 0 && flag != 1) throw DataError(ctx + "genre flag must be 0 or 1");
        if (flag == 1) m.genres.push_back(static_cast<int>(g));
      }
    } else {
      const auto fields = split_fields(line, "::");
      if (fields.size() != 3) throw DataError(ctx + "expected 3 fields, got " + std::to_string(fields.size()));
      m.movie_id = parse_int<std::uint32_t>(fields[0], ctx, "movie id");
      m.title = latin1_to_utf8(fields[1]);
      m.release_year = year_from_title(fields[1]);
      for (const auto name : split_fields(fields[2], "|")) {
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw DataError(ctx + "unknown genre '" + std::string(name) + "'");
        m.genres.push_back(static_cast<int>(it - names.begin()));
      }
      std::sort(m.genres.begin(), m.genres.end());
      m.genres.erase(std::unique(m.genres.begin(), m.genres.end()), m.genres.end());
    }
    if (m.movie_id == 0) throw DataError(ctx + "movie id must be positive");
    if (m.genres.empty()) throw DataError(ctx + "movie has no genre and no unknown flag");
    if (!seen.insert(m.movie_id).second) throw DataError(ctx + "duplicate movie id " + std::to_string(m.movie_id));
    out.push_back(std::move(m));
  });
  return out;
}

std::vector<MovieMeta> parse_movies(const std::filesystem::path& path, Format f) {
  auto in = open_or_throw(path);
  return parse_movies(in, f, path.string());
}

std::string format_rating(const RatingRecord& r, Format f) {
  const std::string sep(separator(f, true));
  return std::to_string(r.user_id) + sep + std::to_string(r.movie_id) + sep + std::to_string(r.rating) + sep +
         std::to_string(r.timestamp);
}

void write_ratings(const std::filesystem::path& path, const std::vector<RatingRecord>& records, Format f) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) out << format_rating(r, f) << '\n';
}

// ---------------------------------------------------------------------------

DatasetStats compute_stats(const std::vector<RatingRecord>& records, std::size_t declared_users,
                           std::size_t declared_items) {
  if (records.empty()) throw DataError("compute_stats: no ratings");
  std::unordered_set<std::uint32_t> users, items;
  for (const auto& r : records) {
    users.insert(r.user_id);
    items.insert(r.movie_id);
  }
  DatasetStats s;
  s.n_users = std::max(users.size(), declared_users);
  s.n_items = std::max(items.size(), declared_items);
  s.n_ratings = records.size();
  s.sparsity = 1.0 - static_cast<double>(s.n_ratings) / (static_cast<double>(s.n_users) * static_cast<double>(s.n_items));
  if (s.sparsity < 0.0) s.sparsity = 0.0;  // repeated (user, item) pairs
  return s;
}

Split split_dataset(const std::vector<RatingRecord>& records, const SplitRatios& ratios, std::uint64_t seed) {
  const double total = ratios.train + ratios.val + ratios.test;
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 || std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1 (got " + std::to_string(total) + ")");
  }
  const std::size_t n = records.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order, rng);

  const auto n_train = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(n * ratios.train)));
  const auto n_val = std::min<std::size_t>(n - n_train, static_cast<std::size_t>(std::llround(n * ratios.val)));
  Split s;
  s.train.reserve(n_train);
  s.val.reserve(n_val);
  s.test.reserve(n - n_train - n_val);
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = i < n_train ? s.train : (i < n_train + n_val ? s.val : s.test);
    dst.push_back(records[order[i]]);
  }
  return s;
}

void write_manifest(const std::filesystem::path& path, const Split& split) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  auto emit = [&](const std::vector<RatingRecord>& part, const char* tag) {
    for (const auto& r : part) {
      out << r.user_id << ',' << r.movie_id << ',' << int(r.rating) << ',' << r.timestamp << ',' << tag << '\n';
    }
  };
  emit(split.train, "train");
  emit(split.val, "val");
  emit(split.test, "test");
}

Split read_manifest(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  Split s;
  for_each_line(in, path.string(), [&](std::string_view line, const std::string& ctx) {
    const auto fields = split_fields(line, ",");
    if (fields.size() != 5) throw DataError(ctx + "expected 5 manifest fields");
    RatingRecord r;
    r.user_id = parse_int<std::uint32_t>(fields[0], ctx, "user id");
    r.movie_id = parse_int<std::uint32_t>(fields[1], ctx, "movie id");
    const int rating = parse_int<int>(fields[2], ctx, "rating");
    if (rating < 1 || rating > 5) throw DataError(ctx + "rating outside 1..5");
    r.rating = static_cast<std::uint8_t>(rating);
    r.timestamp = parse_int<std::int64_t>(fields[3], ctx, "timestamp");
    if (fields[4] == "train") s.train.push_back(r);
    else if (fields[4] == "val") s.val.push_back(r);
    else if (fields[4] == "test") s.test.push_back(r);
    else throw DataError(ctx + "unknown split '" + std::string(fields[4]) + "'");
  });
  return s;
}

DatasetFiles dataset_files(const std::filesystem::path& dir, Format f) {
  if (f == Format::ml100k) return {dir / "u.data", dir / "u.user", dir / "u.item"};
  return {dir / "ratings.dat", dir / "users.dat", dir / "movies.dat"};
}

Dataset load_dataset(const std::filesystem::path& dir, Format f) {
  const auto files = dataset_files(dir, f);
  for (const auto& p : {files.ratings, files.users, files.movies}) {
    if (!std::filesystem::exists(p)) throw DataError("missing dataset file " + p.string());
  }
  Dataset d;
  d.format = f;
  d.ratings = parse_ratings(files.ratings, f);
  d.users = parse_users(files.users, f);
  d.movies = parse_movies(files.movies, f);
  return d;
}

}  // namespace fusionrec::data
