#include "fusionrec/features.hpp"

#include <algorithm>
#include <limits>

namespace fusionrec::features {

std::vector<FeatureSpec> feature_specs(data::Format format, std::size_t user_capacity,
                                       std::size_t movie_capacity, std::size_t zip_buckets) {
  const bool ml100k = format == data::Format::ml100k;
  return {
      {"user_id", FeatureKind::id_lookup, user_capacity, 1},
      {"gender", FeatureKind::one_hot, 2, 2},
      ml100k ? FeatureSpec{"age", FeatureKind::scalar, 1, 3}
             : FeatureSpec{"age", FeatureKind::one_hot, data::age_codes_1m().size(), 3},
      {"occupation", FeatureKind::one_hot, 21, 4},
      {"zip", FeatureKind::hashed, zip_buckets, 5},
      {"movie_id", FeatureKind::id_lookup, movie_capacity, 6},
      {"genres", FeatureKind::multi_hot, data::genre_names(format).size(), 7},
      {"title", FeatureKind::store, kStoreDim, 8},
      {"intro", FeatureKind::store, kStoreDim, 9},
      {"poster", FeatureKind::store, kStoreDim, 10},
  };
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> encode_low(const FeatureSpec& spec, const RawFeature& raw) {
  std::vector<double> out(spec.kind == FeatureKind::scalar ? 1 : spec.cardinality, 0.0);
  switch (spec.kind) {
    case FeatureKind::one_hot: {
      const auto* idx = std::get_if<std::int64_t>(&raw);
      if (!idx) throw std::invalid_argument(spec.name + ": one-hot expects a category index");
      if (*idx < 0 || static_cast<std::size_t>(*idx) >= spec.cardinality) {
        throw std::out_of_range(spec.name + ": unknown category " + std::to_string(*idx));
      }
      out[static_cast<std::size_t>(*idx)] = 1.0;
      break;
    }
    case FeatureKind::multi_hot: {
      const auto* idx = std::get_if<std::vector<int>>(&raw);
      if (!idx) throw std::invalid_argument(spec.name + ": multi-hot expects an index list");
      if (idx->empty()) throw std::invalid_argument(spec.name + ": empty multi-hot without unknown flag");
      for (const int i : *idx) {
        if (i < 0 || static_cast<std::size_t>(i) >= spec.cardinality) {
          throw std::out_of_range(spec.name + ": index " + std::to_string(i) + " out of range");
        }
        out[static_cast<std::size_t>(i)] = 1.0;
      }
      break;
    }
    case FeatureKind::hashed: {
      const auto* text = std::get_if<std::string>(&raw);
      if (!text) throw std::invalid_argument(spec.name + ": hashed feature expects a string");
      out[fnv1a64(*text) % spec.cardinality] = 1.0;
      break;
    }
    case FeatureKind::scalar: {
      const auto* v = std::get_if<double>(&raw);
      if (!v) throw std::invalid_argument(spec.name + ": scalar feature expects a number");
      out[0] = *v;
      break;
    }
    case FeatureKind::id_lookup:
    case FeatureKind::store:
      throw std::invalid_argument(spec.name + ": no low-dimensional encoding for this feature kind");
  }
  return out;
}

std::size_t occupation_index(const data::UserProfile& user, data::Format format) {
  if (format == data::Format::ml1m) return static_cast<std::size_t>(std::stoi(user.occupation));
  const auto& names = data::occupation_names_100k();
  const auto it = std::find(names.begin(), names.end(), user.occupation);
  if (it == names.end()) throw DataError("unknown occupation '" + user.occupation + "'");
  return static_cast<std::size_t>(it - names.begin());
}

FeatureTable::FeatureTable(const data::Dataset& dataset, std::size_t zip_buckets) : format_(dataset.format) {
  if (zip_buckets == 0) throw std::invalid_argument("zip_buckets must be positive");
  int age_min = std::numeric_limits<int>::max();
  int age_max = std::numeric_limits<int>::min();
  for (const auto& u : dataset.users) {
    age_min = std::min(age_min, u.age);
    age_max = std::max(age_max, u.age);
  }
  const double span = age_max > age_min ? static_cast<double>(age_max - age_min) : 1.0;
  const auto& codes = data::age_codes_1m();
  for (const auto& u : dataset.users) {
    UserFeatures f;
    f.gender = u.gender == 'F' ? 1 : 0;
    if (format_ == data::Format::ml100k) {
      f.age_scalar = (u.age - age_min) / span;
    } else {
      f.age_bucket = static_cast<std::size_t>(std::find(codes.begin(), codes.end(), u.age) - codes.begin());
    }
    f.occupation = occupation_index(u, format_);
    f.zip_bucket = fnv1a64(u.zip) % zip_buckets;
    f.zip = u.zip;
    users_.emplace(u.user_id, f);
    max_user_ = std::max(max_user_, u.user_id);
  }
  for (const auto& m : dataset.movies) {
    movies_.emplace(m.movie_id, MovieFeatures{m.genres});
    max_movie_ = std::max(max_movie_, m.movie_id);
  }
}

const UserFeatures& FeatureTable::user(std::uint32_t id) const {
  const auto it = users_.find(id);
  if (it == users_.end()) throw DataError("no profile for user " + std::to_string(id));
  return it->second;
}

const MovieFeatures& FeatureTable::movie(std::uint32_t id) const {
  const auto it = movies_.find(id);
  if (it == movies_.end()) throw DataError("no metadata for movie " + std::to_string(id));
  return it->second;
}

std::vector<std::uint32_t> FeatureTable::movie_ids() const {
  std::vector<std::uint32_t> out;
  out.reserve(movies_.size());
  for (const auto& [id, m] : movies_) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
ad::Var<T> upsample(ad::Tape<T>& tape, ad::Var<T> low, Upsampler<T>& params) {
  if (low.cols() != params.in_dim()) {
    throw ShapeError("upsample: input width " + std::to_string(low.cols()) + ", expected " +
                     std::to_string(params.in_dim()));
  }
  auto hidden = ad::relu(params.first.forward(tape, low));
  return ad::relu(params.second.forward(tape, hidden));
}

template <typename T>
ad::Var<T> id_embed(ad::Tape<T>& tape, ad::Parameter<T>& table, const std::vector<std::uint32_t>& ids) {
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  for (const auto r : rows) {
    if (r >= table.value.rows()) {
      throw std::out_of_range("id_embed: id " + std::to_string(r) + " >= capacity " +
                              std::to_string(table.value.rows()));
    }
  }
  return ad::gather_rows(tape.parameter(table), std::move(rows));
}

template <typename T>
ad::Var<T> lookup(ad::Tape<T>& tape, const EmbeddingStore* store, ad::Parameter<T>& missing,
                  const std::vector<std::uint32_t>& ids) {
  const std::size_t dim = missing.value.cols();
  if (missing.value.rows() != 1) throw ShapeError("lookup: missing token must be a single row");
  if (store && store->dim() != dim) throw ShapeError("lookup: store dim does not match missing token");
  std::vector<T> stored;
  std::vector<std::size_t> index(ids.size());
  std::size_t n_stored = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto* v = store ? store->find(ids[i]) : nullptr;
    if (v) {
      stored.insert(stored.end(), v->begin(), v->end());
      index[i] = n_stored++;
    } else {
      index[i] = std::numeric_limits<std::size_t>::max();
    }
  }
  for (auto& i : index) {
    if (i == std::numeric_limits<std::size_t>::max()) i = n_stored;  // the missing row follows the stored block
  }
  auto miss = tape.parameter(missing);
  if (n_stored == 0) return ad::gather_rows(miss, std::vector<std::size_t>(ids.size(), 0));
  auto block = tape.constant(Matrix<T>(n_stored, dim, std::move(stored)));
  return ad::gather_rows(ad::concat_rows<T>({block, miss}), std::move(index));
}

template <typename T>
Matrix<T> encode_batch(const FeatureSpec& spec, const std::vector<RawFeature>& raws) {
  const std::size_t width = spec.kind == FeatureKind::scalar ? 1 : spec.cardinality;
  Matrix<T> out(raws.size(), width);
  for (std::size_t i = 0; i < raws.size(); ++i) {
    const auto enc = encode_low(spec, raws[i]);
    for (std::size_t c = 0; c < width; ++c) out(i, c) = static_cast<T>(enc[c]);
  }
  return out;
}

#define FUSIONREC_FEATURES_INSTANTIATE(T)                                                              \
  template ad::Var<T> upsample(ad::Tape<T>&, ad::Var<T>, Upsampler<T>&);                               \
  template ad::Var<T> id_embed(ad::Tape<T>&, ad::Parameter<T>&, const std::vector<std::uint32_t>&);    \
  template ad::Var<T> lookup(ad::Tape<T>&, const EmbeddingStore*, ad::Parameter<T>&,                   \
                             const std::vector<std::uint32_t>&);                                       \
  template Matrix<T> encode_batch(const FeatureSpec&, const std::vector<RawFeature>&);

FUSIONREC_FEATURES_INSTANTIATE(float)
FUSIONREC_FEATURES_INSTANTIATE(double)

#undef FUSIONREC_FEATURES_INSTANTIATE

}  // namespace fusionrec::features
