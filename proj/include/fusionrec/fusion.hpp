#pragma once

// Transformer fusion of the ten feature tokens.
//
// Each interaction becomes a 12-token sequence [CLS, V1..V10, SEP] of width
// d_model; fixed sinusoidal positions are added, a post-norm encoder stack
// mixes the tokens, and the final CLS state feeds a softmax over the five
// rating classes. Batches are stacked row-wise: row b*12 + t is token t of
// interaction b.

#include <cstdint>
#include <span>
#include <vector>

#include "fusionrec/autodiff.hpp"
#include "fusionrec/embedding_store.hpp"
#include "fusionrec/features.hpp"
#include "fusionrec/movielens.hpp"
#include "fusionrec/rng.hpp"

namespace fusionrec::model {

inline constexpr std::size_t kSeqLen = features::kFeatureSlots + 2;
inline constexpr std::size_t kRatingClasses = 5;

struct EncoderConfig {
  std::size_t d_model = 768;
  std::size_t n_layers = 2;
  std::size_t n_heads = 8;
  std::size_t ffn_dim = 1024;
  double dropout = 0.1;

  std::size_t head_dim() const { return n_heads == 0 ? 0 : d_model / n_heads; }
  void validate() const;
};

struct ModelConfig {
  EncoderConfig encoder;
  data::Format format = data::Format::ml100k;
  std::size_t user_capacity = 0;   // max user id + 1
  std::size_t movie_capacity = 0;  // max movie id + 1
  std::size_t id_dim = 64;
  std::size_t hidden_dim = 256;
  std::size_t zip_buckets = 1000;
  std::size_t store_dim = features::kStoreDim;
  bool positional = true;  // off only in tests
  double embed_init = 0.02;

  void validate() const;
};

/// Dropout is active only when training with an rng.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;
};

/// Stores for slots 8-10; a null entry routes every movie to the missing token.
struct ModalityStores {
  const features::EmbeddingStore* title = nullptr;
  const features::EmbeddingStore* intro = nullptr;
  const features::EmbeddingStore* poster = nullptr;
};

template <typename T>
struct EncoderLayerParams {
  ad::Parameter<T> wq, wk, wv, wo;  // d x d; head h owns columns [h*hd, (h+1)*hd) of wq/wk/wv
  features::Linear<T> ffn1, ffn2;
  ad::Parameter<T> ln1_gain, ln1_bias, ln2_gain, ln2_bias;

  EncoderLayerParams() = default;
  EncoderLayerParams(const std::string& name, const EncoderConfig& cfg);
  void collect(std::vector<ad::Parameter<T>*>& out);
};

/// P[pos][2i] = sin(pos / 10000^(2i/d)), P[pos][2i+1] = cos(same); d must be even.
template <typename T>
Matrix<T> positional_encoding(std::size_t seq_len, std::size_t d);

/// [cls; slots[0] row b; ...; slots[9] row b; sep] for every b, plus positions
/// tiled per sequence when given. Each slot is batch x d; cls/sep are 1 x d.
template <typename T>
ad::Var<T> build_sequences(const std::vector<ad::Var<T>>& slots, ad::Var<T> cls, ad::Var<T> sep,
                           const Matrix<T>* positions);

/// Single-sequence form: tokens is 10 x d.
template <typename T>
ad::Var<T> build_sequence(ad::Var<T> tokens, ad::Var<T> cls, ad::Var<T> sep, const Matrix<T>* positions);

template <typename T>
struct HeadOutput {
  ad::Var<T> output;   // n x head_dim
  Matrix<T> weights;   // n x n, row-stochastic
};

/// One head over one sequence, composed from primitive ops:
/// softmax((X Wq_h)(X Wk_h)^T / sqrt(head_dim)) (X Wv_h).
template <typename T>
HeadOutput<T> self_attention(ad::Tape<T>& tape, ad::Var<T> x, EncoderLayerParams<T>& layer,
                             const EncoderConfig& cfg, std::size_t head);

/// Concat(head_1..head_h) Wo over stacked sequences of length seq_len (fused
/// kernel). Dropout on the attention weights when ctx is training.
template <typename T>
ad::Var<T> multi_head(ad::Tape<T>& tape, ad::Var<T> x, EncoderLayerParams<T>& layer, const EncoderConfig& cfg,
                      std::size_t seq_len, const ForwardContext& ctx, Matrix<T>* weights_out = nullptr);

/// x = LN(x + MHA(x)); x = LN(x + Dropout(FFN(x)))
template <typename T>
ad::Var<T> encoder_layer(ad::Tape<T>& tape, ad::Var<T> x, EncoderLayerParams<T>& layer, const EncoderConfig& cfg,
                         std::size_t seq_len, const ForwardContext& ctx, Matrix<T>* weights_out = nullptr);

template <typename T>
ad::Var<T> encoder_forward(ad::Tape<T>& tape, ad::Var<T> seq, std::span<EncoderLayerParams<T>> layers,
                           const EncoderConfig& cfg, std::size_t seq_len, const ForwardContext& ctx);

/// Row 0 of every 12-row sequence.
template <typename T>
ad::Var<T> extract_cls(ad::Var<T> h, std::size_t seq_len = kSeqLen);

/// softmax(h W + b) over the rating classes.
template <typename T>
ad::Var<T> classify(ad::Tape<T>& tape, ad::Var<T> h_cls, features::Linear<T>& head);

enum class PredictionMode { expectation, argmax };

/// Expected rating sum_r r * p_r (or the argmax class) for one probability row.
double predict_rating(std::span<const double> probs, PredictionMode mode = PredictionMode::expectation);
double predict_rating(std::span<const float> probs, PredictionMode mode = PredictionMode::expectation);

template <typename T>
Matrix<T> dropout_mask(std::size_t rows, std::size_t cols, double p, Rng& rng);

template <typename T>
class FusionModel {
 public:
  FusionModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  /// Deterministic order: embedders by slot, encoder, head.
  std::vector<ad::Parameter<T>*> parameters();
  std::size_t parameter_count();

  /// Ten slot tokens, each batch x d_model.
  std::vector<ad::Var<T>> feature_tokens(ad::Tape<T>& tape, const features::FeatureTable& table,
                                         const ModalityStores& stores,
                                         std::span<const data::RatingRecord> batch);

  /// Rating-class probabilities, batch x 5.
  ad::Var<T> forward(ad::Tape<T>& tape, const features::FeatureTable& table, const ModalityStores& stores,
                     std::span<const data::RatingRecord> batch, const ForwardContext& ctx = {});

  ad::Parameter<T>& cls() { return cls_; }
  ad::Parameter<T>& sep() { return sep_; }
  std::span<EncoderLayerParams<T>> layers() { return layers_; }
  features::Linear<T>& head() { return head_; }
  ad::Parameter<T>& missing_token(features::Modality m) { return missing_[static_cast<std::size_t>(m)]; }
  const Matrix<T>& positions() const { return positions_; }

 private:
  ModelConfig config_;
  ad::Parameter<T> user_table_, movie_table_;
  features::Upsampler<T> user_up_, gender_up_, age_up_, occupation_up_, zip_up_, movie_up_, genre_up_;
  std::vector<features::Linear<T>> adapters_;  // title, intro, poster
  std::vector<ad::Parameter<T>> missing_;      // title, intro, poster
  ad::Parameter<T> cls_, sep_;
  std::vector<EncoderLayerParams<T>> layers_;
  features::Linear<T> head_;
  Matrix<T> positions_;
  std::vector<features::FeatureSpec> specs_;
};

}  // namespace fusionrec::model
