#pragma once

// Structured-feature encoding and the trainable embedders that lift every
// feature slot to a d_model-wide token.
//
// Slot order (fixed): 1 user_id, 2 gender, 3 age, 4 occupation, 5 zip,
// 6 movie_id, 7 genres, 8 title, 9 intro, 10 poster.

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "fusionrec/autodiff.hpp"
#include "fusionrec/embedding_store.hpp"
#include "fusionrec/movielens.hpp"
#include "fusionrec/rng.hpp"

namespace fusionrec::features {

inline constexpr std::size_t kFeatureSlots = 10;

enum class FeatureKind { id_lookup, one_hot, multi_hot, hashed, scalar, store };

struct FeatureSpec {
  std::string name;
  FeatureKind kind;
  std::size_t cardinality;  // low-dim width (ids: table capacity; stores: vector dim)
  std::size_t slot;         // 1..10
};

std::vector<FeatureSpec> feature_specs(data::Format format, std::size_t user_capacity,
                                       std::size_t movie_capacity, std::size_t zip_buckets);

std::uint64_t fnv1a64(std::string_view text);

/// Category index, genre index list, zip string, or normalised scalar.
using RawFeature = std::variant<std::int64_t, std::vector<int>, std::string, double>;

/// Low-dimensional encoding of one raw value.
std::vector<double> encode_low(const FeatureSpec& spec, const RawFeature& raw);

/// Index of a user's occupation (100K name order, or the 1M code).
std::size_t occupation_index(const data::UserProfile& user, data::Format format);

struct UserFeatures {
  std::size_t gender = 0;      // 0 = M, 1 = F
  double age_scalar = 0.0;     // 100K: min-max normalised years
  std::size_t age_bucket = 0;  // 1M: index into age_codes_1m()
  std::size_t occupation = 0;
  std::size_t zip_bucket = 0;
  std::string zip;
};

struct MovieFeatures {
  std::vector<int> genres;
};

/// Precomputed encodings for every user and movie of a dataset.
class FeatureTable {
 public:
  FeatureTable(const data::Dataset& dataset, std::size_t zip_buckets);

  data::Format format() const { return format_; }
  const UserFeatures& user(std::uint32_t id) const;
  const MovieFeatures& movie(std::uint32_t id) const;
  std::uint32_t max_user_id() const { return max_user_; }
  std::uint32_t max_movie_id() const { return max_movie_; }
  std::vector<std::uint32_t> movie_ids() const;

 private:
  data::Format format_;
  std::unordered_map<std::uint32_t, UserFeatures> users_;
  std::unordered_map<std::uint32_t, MovieFeatures> movies_;
  std::uint32_t max_user_ = 0;
  std::uint32_t max_movie_ = 0;
};

// ---------------------------------------------------------------------------
// trainable embedders
// ---------------------------------------------------------------------------

template <typename T>
void init_uniform(Matrix<T>& m, Rng& rng, double limit) {
  for (auto& v : m.values()) v = static_cast<T>(uniform(rng, -limit, limit));
}

/// y = x W + b, W is in x out.
template <typename T>
struct Linear {
  ad::Parameter<T> weight;
  ad::Parameter<T> bias;

  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out)
      : weight(name + ".weight", Matrix<T>(in, out)), bias(name + ".bias", Matrix<T>(1, out)) {}

  ad::Var<T> forward(ad::Tape<T>& tape, ad::Var<T> x) {
    return ad::add_row(ad::matmul(x, tape.parameter(weight)), tape.parameter(bias));
  }
  void collect(std::vector<ad::Parameter<T>*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

/// low -> hidden -> d_model, ReLU after both layers.
template <typename T>
struct Upsampler {
  Linear<T> first;
  Linear<T> second;

  Upsampler() = default;
  Upsampler(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out)
      : first(name + ".up1", in, hidden), second(name + ".up2", hidden, out) {}

  std::size_t in_dim() const { return first.weight.value.rows(); }
  std::size_t out_dim() const { return second.weight.value.cols(); }
  void collect(std::vector<ad::Parameter<T>*>& out) {
    first.collect(out);
    second.collect(out);
  }
};

template <typename T>
ad::Var<T> upsample(ad::Tape<T>& tape, ad::Var<T> low, Upsampler<T>& params);

/// Trainable id -> row lookup; ids must be < capacity.
template <typename T>
ad::Var<T> id_embed(ad::Tape<T>& tape, ad::Parameter<T>& table, const std::vector<std::uint32_t>& ids);

/// Stacks one row per id: the stored vector if present, otherwise the shared
/// trainable `missing` row. A null store means every id is missing and the
/// store is never consulted.
template <typename T>
ad::Var<T> lookup(ad::Tape<T>& tape, const EmbeddingStore* store, ad::Parameter<T>& missing,
                  const std::vector<std::uint32_t>& ids);

/// Dense matrix whose rows are encode_low() of each raw value.
template <typename T>
Matrix<T> encode_batch(const FeatureSpec& spec, const std::vector<RawFeature>& raws);

}  // namespace fusionrec::features
