#include "fusionrec/fusion.hpp"

#include <cmath>
#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>

namespace fusionrec::model {

using ad::Parameter;
using ad::Tape;
using ad::Var;

void EncoderConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || ffn_dim == 0) throw ConfigError("encoder dimensions must be positive");
  if (d_model % 2 != 0) throw ConfigError("d_model must be even for sinusoidal positions");
  if (head_dim() * n_heads != d_model) throw ConfigError("n_heads must divide d_model");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

void ModelConfig::validate() const {
  encoder.validate();
  if (user_capacity == 0 || movie_capacity == 0) throw ConfigError("id capacities must be positive");
  if (id_dim == 0 || hidden_dim == 0 || zip_buckets == 0 || store_dim == 0) {
    throw ConfigError("embedder dimensions must be positive");
  }
}

template <typename T>
EncoderLayerParams<T>::EncoderLayerParams(const std::string& name, const EncoderConfig& cfg)
    : wq(name + ".wq", Matrix<T>(cfg.d_model, cfg.d_model)),
      wk(name + ".wk", Matrix<T>(cfg.d_model, cfg.d_model)),
      wv(name + ".wv", Matrix<T>(cfg.d_model, cfg.d_model)),
      wo(name + ".wo", Matrix<T>(cfg.d_model, cfg.d_model)),
      ffn1(name + ".ffn1", cfg.d_model, cfg.ffn_dim),
      ffn2(name + ".ffn2", cfg.ffn_dim, cfg.d_model),
      ln1_gain(name + ".ln1.gain", Matrix<T>(1, cfg.d_model, T(1))),
      ln1_bias(name + ".ln1.bias", Matrix<T>(1, cfg.d_model)),
      ln2_gain(name + ".ln2.gain", Matrix<T>(1, cfg.d_model, T(1))),
      ln2_bias(name + ".ln2.bias", Matrix<T>(1, cfg.d_model)) {}

template <typename T>
void EncoderLayerParams<T>::collect(std::vector<Parameter<T>*>& out) {
  for (auto* p : {&wq, &wk, &wv, &wo}) out.push_back(p);
  ffn1.collect(out);
  ffn2.collect(out);
  for (auto* p : {&ln1_gain, &ln1_bias, &ln2_gain, &ln2_bias}) out.push_back(p);
}

template <typename T>
Matrix<T> positional_encoding(std::size_t seq_len, std::size_t d) {
  if (d % 2 != 0) throw std::invalid_argument("positional_encoding: d must be even");
  Matrix<T> p(seq_len, d);
  for (std::size_t pos = 0; pos < seq_len; ++pos) {
    for (std::size_t i = 0; 2 * i < d; ++i) {
      const double angle = static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d));
      p(pos, 2 * i) = static_cast<T>(std::sin(angle));
      p(pos, 2 * i + 1) = static_cast<T>(std::cos(angle));
    }
  }
  return p;
}

namespace {

template <typename T>
Var<T> add_positions(Var<T> seq, const Matrix<T>& positions) {
  const std::size_t L = positions.rows();
  if (positions.cols() != seq.cols() || seq.rows() % L != 0) {
    throw ShapeError("positions " + shape_str(positions) + " do not tile sequence " + shape_str(seq.value()));
  }
  Matrix<T> tiled(seq.rows(), seq.cols());
  for (std::size_t r = 0; r < seq.rows(); ++r) {
    const auto src = positions.row(r % L);
    std::copy(src.begin(), src.end(), tiled.row(r).begin());
  }
  return ad::add(seq, seq.tape()->constant(std::move(tiled)));
}

}  // namespace

template <typename T>
Var<T> build_sequences(const std::vector<Var<T>>& slots, Var<T> cls, Var<T> sep, const Matrix<T>* positions) {
  if (slots.size() != features::kFeatureSlots) {
    throw ShapeError("build_sequences: expected " + std::to_string(features::kFeatureSlots) + " feature slots, got " +
                     std::to_string(slots.size()));
  }
  const std::size_t batch = slots.front().rows();
  const std::size_t d = cls.cols();
  if (cls.rows() != 1 || sep.rows() != 1 || sep.cols() != d) throw ShapeError("build_sequences: cls/sep must be 1 x d");
  for (const auto& s : slots) {
    if (s.rows() != batch || s.cols() != d) throw ShapeError("build_sequences: slot tokens must all be batch x d");
  }
  std::vector<Var<T>> parts;
  parts.reserve(slots.size() + 2);
  parts.push_back(cls);
  parts.insert(parts.end(), slots.begin(), slots.end());
  parts.push_back(sep);
  auto stacked = ad::concat_rows(parts);
  // stacked rows: cls | slot0 (batch rows) | ... | slot9 | sep
  std::vector<std::size_t> order;
  order.reserve(batch * kSeqLen);
  const std::size_t sep_row = 1 + features::kFeatureSlots * batch;
  for (std::size_t b = 0; b < batch; ++b) {
    order.push_back(0);
    for (std::size_t k = 0; k < features::kFeatureSlots; ++k) order.push_back(1 + k * batch + b);
    order.push_back(sep_row);
  }
  auto seq = ad::gather_rows(stacked, std::move(order));
  return positions ? add_positions(seq, *positions) : seq;
}

template <typename T>
Var<T> build_sequence(Var<T> tokens, Var<T> cls, Var<T> sep, const Matrix<T>* positions) {
  if (tokens.rows() != features::kFeatureSlots) {
    throw ShapeError("build_sequence: expected " + std::to_string(features::kFeatureSlots) + " tokens, got " +
                     std::to_string(tokens.rows()));
  }
  if (cls.rows() != 1 || sep.rows() != 1 || cls.cols() != tokens.cols() || sep.cols() != tokens.cols()) {
    throw ShapeError("build_sequence: cls/sep must be 1 x d");
  }
  auto seq = ad::concat_rows<T>({cls, tokens, sep});
  return positions ? add_positions(seq, *positions) : seq;
}

template <typename T>
HeadOutput<T> self_attention(Tape<T>& tape, Var<T> x, EncoderLayerParams<T>& layer, const EncoderConfig& cfg,
                             std::size_t head) {
  if (head >= cfg.n_heads) throw std::out_of_range("self_attention: head index out of range");
  if (x.cols() != cfg.d_model) throw ShapeError("self_attention: input width must be d_model");
  const std::size_t hd = cfg.head_dim();
  auto q = ad::matmul(x, ad::slice_cols(tape.parameter(layer.wq), head * hd, hd));
  auto k = ad::matmul(x, ad::slice_cols(tape.parameter(layer.wk), head * hd, hd));
  auto v = ad::matmul(x, ad::slice_cols(tape.parameter(layer.wv), head * hd, hd));
  auto scores = ad::scale(ad::matmul_nt(q, k), T(1) / std::sqrt(static_cast<T>(hd)));
  auto weights = ad::softmax_rows(scores);
  return {ad::matmul(weights, v), weights.value()};
}

template <typename T>
Matrix<T> dropout_mask(std::size_t rows, std::size_t cols, double p, Rng& rng) {
  Matrix<T> m(rows, cols);
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  for (auto& v : m.values()) v = uniform01(rng) >= p ? keep : T(0);
  return m;
}

namespace {
bool dropout_active(const ForwardContext& ctx, double p) { return ctx.training && ctx.rng != nullptr && p > 0.0; }
}  // namespace

template <typename T>
Var<T> multi_head(Tape<T>& tape, Var<T> x, EncoderLayerParams<T>& layer, const EncoderConfig& cfg,
                  std::size_t seq_len, const ForwardContext& ctx, Matrix<T>* weights_out) {
  if (x.cols() != cfg.d_model || seq_len == 0 || x.rows() % seq_len != 0) {
    throw ShapeError("multi_head: input " + shape_str(x.value()) + " is not a stack of length-" +
                     std::to_string(seq_len) + " sequences of width " + std::to_string(cfg.d_model));
  }
  kernels::AttentionShape shape{x.rows() / seq_len, seq_len, cfg.n_heads, cfg.head_dim()};
  auto q = ad::matmul(x, tape.parameter(layer.wq));
  auto k = ad::matmul(x, tape.parameter(layer.wk));
  auto v = ad::matmul(x, tape.parameter(layer.wv));
  std::optional<Matrix<T>> keep;
  if (dropout_active(ctx, cfg.dropout)) keep = dropout_mask<T>(shape.prob_rows(), seq_len, cfg.dropout, *ctx.rng);
  auto heads = ad::attention(q, k, v, shape, keep ? &*keep : nullptr, weights_out);
  return ad::matmul(heads, tape.parameter(layer.wo));
}

template <typename T>
Var<T> encoder_layer(Tape<T>& tape, Var<T> x, EncoderLayerParams<T>& layer, const EncoderConfig& cfg,
                     std::size_t seq_len, const ForwardContext& ctx, Matrix<T>* weights_out) {
  auto attn = multi_head(tape, x, layer, cfg, seq_len, ctx, weights_out);
  auto h = ad::layer_norm(ad::add(x, attn), tape.parameter(layer.ln1_gain), tape.parameter(layer.ln1_bias));
  auto ff = layer.ffn2.forward(tape, ad::relu(layer.ffn1.forward(tape, h)));
  if (dropout_active(ctx, cfg.dropout)) ff = ad::mul_constant(ff, dropout_mask<T>(ff.rows(), ff.cols(), cfg.dropout, *ctx.rng));
  return ad::layer_norm(ad::add(h, ff), tape.parameter(layer.ln2_gain), tape.parameter(layer.ln2_bias));
}

template <typename T>
Var<T> encoder_forward(Tape<T>& tape, Var<T> seq, std::span<EncoderLayerParams<T>> layers, const EncoderConfig& cfg,
                       std::size_t seq_len, const ForwardContext& ctx) {
  auto x = seq;
  for (auto& layer : layers) x = encoder_layer(tape, x, layer, cfg, seq_len, ctx);
  return x;
}

template <typename T>
Var<T> extract_cls(Var<T> h, std::size_t seq_len) {
  if (seq_len == 0 || h.rows() == 0 || h.rows() % seq_len != 0) {
    throw ShapeError("extract_cls: " + std::to_string(h.rows()) + " rows is not a stack of length-" +
                     std::to_string(seq_len) + " sequences");
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < h.rows(); r += seq_len) rows.push_back(r);
  return ad::gather_rows(h, std::move(rows));
}

template <typename T>
Var<T> classify(Tape<T>& tape, Var<T> h_cls, features::Linear<T>& head) {
  if (h_cls.cols() != head.weight.value.rows()) {
    throw ShapeError("classify: h_cls width " + std::to_string(h_cls.cols()) + ", head expects " +
                     std::to_string(head.weight.value.rows()));
  }
  return ad::softmax_rows(head.forward(tape, h_cls));
}

namespace {
template <typename T>
double predict_impl(std::span<const T> probs, PredictionMode mode) {
  if (probs.size() != kRatingClasses) throw std::invalid_argument("predict_rating: expected 5 probabilities");
  double total = 0.0;
  for (const T p : probs) {
    if (!(p >= T(-1e-6) && p <= T(1) + T(1e-6))) throw std::invalid_argument("predict_rating: probability out of [0,1]");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-4) throw std::invalid_argument("predict_rating: probabilities do not sum to 1");
  if (mode == PredictionMode::argmax) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < probs.size(); ++r) {
      if (probs[r] > probs[best]) best = r;
    }
    return static_cast<double>(best + 1);
  }
  double expected = 0.0;
  for (std::size_t r = 0; r < probs.size(); ++r) expected += static_cast<double>(r + 1) * probs[r];
  return std::clamp(expected / total, 1.0, 5.0);
}
}  // namespace

double predict_rating(std::span<const double> probs, PredictionMode mode) { return predict_impl(probs, mode); }
double predict_rating(std::span<const float> probs, PredictionMode mode) { return predict_impl(probs, mode); }

// ---------------------------------------------------------------------------
// FusionModel
// ---------------------------------------------------------------------------

template <typename T>
FusionModel<T>::FusionModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  const auto& enc = config_.encoder;
  const std::size_t d = enc.d_model;
  const std::size_t hidden = config_.hidden_dim;
  specs_ = features::feature_specs(config_.format, config_.user_capacity, config_.movie_capacity, config_.zip_buckets);
  auto width = [&](std::size_t slot) {
    const auto& s = specs_[slot - 1];
    return s.kind == features::FeatureKind::scalar ? std::size_t{1} : s.cardinality;
  };

  user_table_ = Parameter<T>("embed.user_id.table", Matrix<T>(config_.user_capacity, config_.id_dim));
  user_up_ = features::Upsampler<T>("embed.user_id", config_.id_dim, hidden, d);
  gender_up_ = features::Upsampler<T>("embed.gender", width(2), hidden, d);
  age_up_ = features::Upsampler<T>("embed.age", width(3), hidden, d);
  occupation_up_ = features::Upsampler<T>("embed.occupation", width(4), hidden, d);
  zip_up_ = features::Upsampler<T>("embed.zip", width(5), hidden, d);
  movie_table_ = Parameter<T>("embed.movie_id.table", Matrix<T>(config_.movie_capacity, config_.id_dim));
  movie_up_ = features::Upsampler<T>("embed.movie_id", config_.id_dim, hidden, d);
  genre_up_ = features::Upsampler<T>("embed.genres", width(7), hidden, d);
  for (const auto m : {features::Modality::title, features::Modality::intro, features::Modality::poster}) {
    const std::string name = "embed." + std::string(features::modality_name(m));
    adapters_.emplace_back(name + ".adapter", config_.store_dim, d);
    missing_.emplace_back(name + ".missing", Matrix<T>(1, config_.store_dim));
  }
  cls_ = Parameter<T>("encoder.cls", Matrix<T>(1, d));
  sep_ = Parameter<T>("encoder.sep", Matrix<T>(1, d));
  for (std::size_t l = 0; l < enc.n_layers; ++l) layers_.emplace_back("encoder.layer" + std::to_string(l), enc);
  head_ = features::Linear<T>("head", d, kRatingClasses);
  positions_ = positional_encoding<T>(kSeqLen, d);

  Rng rng(seed);
  for (auto* p : parameters()) {
    const auto& n = p->name;
    const auto ends_with = [&](std::string_view suffix) {
      return n.size() >= suffix.size() && n.compare(n.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".gain")) {
      p->value.fill(T(1));
    } else if (ends_with(".bias")) {
      p->value.fill(T(0));
    } else if (n.starts_with("encoder.layer") || n == "head.weight") {
      // Xavier uniform
      const double limit = std::sqrt(6.0 / static_cast<double>(p->value.rows() + p->value.cols()));
      features::init_uniform(p->value, rng, limit);
    } else {
      features::init_uniform(p->value, rng, config_.embed_init);
    }
  }
}

template <typename T>
std::vector<Parameter<T>*> FusionModel<T>::parameters() {
  std::vector<Parameter<T>*> out;
  out.push_back(&user_table_);
  user_up_.collect(out);
  gender_up_.collect(out);
  age_up_.collect(out);
  occupation_up_.collect(out);
  zip_up_.collect(out);
  out.push_back(&movie_table_);
  movie_up_.collect(out);
  genre_up_.collect(out);
  for (std::size_t k = 0; k < adapters_.size(); ++k) {
    adapters_[k].collect(out);
    out.push_back(&missing_[k]);
  }
  out.push_back(&cls_);
  out.push_back(&sep_);
  for (auto& layer : layers_) layer.collect(out);
  head_.collect(out);
  return out;
}

template <typename T>
std::size_t FusionModel<T>::parameter_count() {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->value.size();
  return n;
}

template <typename T>
std::vector<Var<T>> FusionModel<T>::feature_tokens(Tape<T>& tape, const features::FeatureTable& table,
                                                   const ModalityStores& stores,
                                                   std::span<const data::RatingRecord> batch) {
  using features::RawFeature;
  const std::size_t n = batch.size();
  std::vector<std::uint32_t> uids(n), mids(n);
  std::vector<RawFeature> gender(n), age(n), occupation(n), zip(n), genres(n);
  const bool ml100k = config_.format == data::Format::ml100k;
  for (std::size_t i = 0; i < n; ++i) {
    uids[i] = batch[i].user_id;
    mids[i] = batch[i].movie_id;
    const auto& u = table.user(uids[i]);
    gender[i] = static_cast<std::int64_t>(u.gender);
    age[i] = ml100k ? RawFeature(u.age_scalar) : RawFeature(static_cast<std::int64_t>(u.age_bucket));
    occupation[i] = static_cast<std::int64_t>(u.occupation);
    zip[i] = u.zip;
    genres[i] = table.movie(mids[i]).genres;
  }
  auto encoded = [&](std::size_t slot, const std::vector<RawFeature>& raws) {
    return tape.constant(features::encode_batch<T>(specs_[slot - 1], raws));
  };
  std::vector<Var<T>> tokens;
  tokens.reserve(features::kFeatureSlots);
  tokens.push_back(features::upsample(tape, features::id_embed(tape, user_table_, uids), user_up_));
  tokens.push_back(features::upsample(tape, encoded(2, gender), gender_up_));
  tokens.push_back(features::upsample(tape, encoded(3, age), age_up_));
  tokens.push_back(features::upsample(tape, encoded(4, occupation), occupation_up_));
  tokens.push_back(features::upsample(tape, encoded(5, zip), zip_up_));
  tokens.push_back(features::upsample(tape, features::id_embed(tape, movie_table_, mids), movie_up_));
  tokens.push_back(features::upsample(tape, encoded(7, genres), genre_up_));
  const features::EmbeddingStore* store_for[] = {stores.title, stores.intro, stores.poster};
  for (std::size_t k = 0; k < 3; ++k) {
    tokens.push_back(adapters_[k].forward(tape, features::lookup(tape, store_for[k], missing_[k], mids)));
  }
  return tokens;
}

template <typename T>
Var<T> FusionModel<T>::forward(Tape<T>& tape, const features::FeatureTable& table, const ModalityStores& stores,
                               std::span<const data::RatingRecord> batch, const ForwardContext& ctx) {
  if (batch.empty()) throw std::invalid_argument("forward: empty batch");
  auto tokens = feature_tokens(tape, table, stores, batch);
  auto seq = build_sequences(tokens, tape.parameter(cls_), tape.parameter(sep_),
                             config_.positional ? &positions_ : nullptr);
  auto h = encoder_forward(tape, seq, std::span<EncoderLayerParams<T>>(layers_), config_.encoder, kSeqLen, ctx);
  return classify(tape, extract_cls(h, kSeqLen), head_);
}

#define FUSIONREC_FUSION_INSTANTIATE(T)                                                                      \
  template struct EncoderLayerParams<T>;                                                                     \
  template class FusionModel<T>;                                                                             \
  template Matrix<T> positional_encoding<T>(std::size_t, std::size_t);                                       \
  template Var<T> build_sequences(const std::vector<Var<T>>&, Var<T>, Var<T>, const Matrix<T>*);             \
  template Var<T> build_sequence(Var<T>, Var<T>, Var<T>, const Matrix<T>*);                                  \
  template HeadOutput<T> self_attention(Tape<T>&, Var<T>, EncoderLayerParams<T>&, const EncoderConfig&,     \
                                        std::size_t);                                                        \
  template Var<T> multi_head(Tape<T>&, Var<T>, EncoderLayerParams<T>&, const EncoderConfig&, std::size_t,   \
                             const ForwardContext&, Matrix<T>*);                                             \
  template Var<T> encoder_layer(Tape<T>&, Var<T>, EncoderLayerParams<T>&, const EncoderConfig&, std::size_t, \
                                const ForwardContext&, Matrix<T>*);                                          \
  template Var<T> encoder_forward(Tape<T>&, Var<T>, std::span<EncoderLayerParams<T>>, const EncoderConfig&,  \
                                  std::size_t, const ForwardContext&);                                       \
  template Var<T> extract_cls(Var<T>, std::size_t);                                                          \
  template Var<T> classify(Tape<T>&, Var<T>, features::Linear<T>&);                                          \
  template Matrix<T> dropout_mask<T>(std::size_t, std::size_t, double, Rng&);

FUSIONREC_FUSION_INSTANTIATE(float)
FUSIONREC_FUSION_INSTANTIATE(double)

#undef FUSIONREC_FUSION_INSTANTIATE

}  // namespace fusionrec::model
