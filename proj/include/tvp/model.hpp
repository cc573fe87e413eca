#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tvp/image.hpp"
#include "tvp/nn.hpp"
#include "tvp/prompt.hpp"

namespace tvp {

struct ModelConfig {
  int image_size = 64;
  int patch_size = 8;
  int d_vis = 128;
  int encoder_blocks = 2;
  int d_model = 128;
  int decoder_blocks = 4;
  int heads = 4;
  int mlp_ratio = 4;
  int vocab_size = 0;
  int max_seq_len = 256;
  double dropout = 0.0;

  int visual_tokens() const {
    const int side = image_size / patch_size;
    return side * side;
  }
  int patch_dim() const { return patch_size * patch_size * Image::channels; }
  // Throws invalid_config.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Parameter groups, used for reporting and for end-to-end update checks.
enum class ParamGroup { encoder, projection_context, projection_region, embeddings, decoder };
std::string_view to_string(ParamGroup group);

// One sequence fed to the decoder: token ids, supervision mask and the images behind each
// visual slot range.
struct SequenceExample {
  std::vector<int> tokens;
  std::vector<std::uint8_t> loss_mask;
  std::vector<VisualSlot> slots;
};

// Rows may differ in length; positions past a row's length are padding and never computed.
struct SequenceBatch {
  std::vector<SequenceExample> rows;
};

SequenceExample make_example(const TokenizedPrompt& prompt);

template <typename T>
class Model {
 public:
  using Mat = nn::Mat<T>;

  Model() = default;
  Model(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // Patchify, embed, add positions, run the encoder blocks and the final norm.
  Mat encode_image(const Image& img) const;
  // tokens x d_vis -> tokens x d_model through the stream's own projection.
  Mat project_visual(const Mat& tokens, Stream stream) const;

  // Logits for every position of the row (length x vocab).
  Mat forward(const SequenceExample& row) const;
  std::vector<Mat> forward(const SequenceBatch& batch) const;

  // Decoder-only pass with precomputed visual embeddings (one matrix per slot).
  Mat decode(const std::vector<int>& tokens, const std::vector<VisualSlot>& slots,
             const std::vector<Mat>& visual_embeddings) const;
  std::vector<Mat> embed_visuals(const std::vector<VisualSlot>& slots) const;

  // Mean over rows of the per-row summed answer NLL; accumulates gradients (scaled to the
  // mean) into every parameter. Returns the loss.
  T forward_backward(const SequenceBatch& batch, std::mt19937_64* dropout_rng = nullptr);

  void zero_grad();

  // Visits (name, group, tensor) in a fixed order.
  void for_each_param(const std::function<void(const std::string&, ParamGroup, nn::Tensor<T>&)>& fn);
  void for_each_param(
      const std::function<void(const std::string&, ParamGroup, const nn::Tensor<T>&)>& fn) const;
  std::size_t parameter_count() const;

  template <typename U>
  Model<U> cast() const;

 private:
  template <typename U>
  friend class Model;

  struct EncoderCache {
    Mat patches;
    Mat embedded;  // after patch linear + positions
    std::vector<typename nn::Block<T>::Cache> blocks;
    std::vector<Mat> block_inputs;
    typename nn::LayerNorm<T>::Cache ln;
    Mat output;
  };

  struct DecoderCache {
    std::vector<typename nn::Block<T>::Cache> blocks;
    std::vector<Mat> block_inputs;
    Mat final_in;
    typename nn::LayerNorm<T>::Cache ln;
    Mat ln_out;
  };

  Mat patchify(const Image& img) const;
  Mat encode(const Image& img, EncoderCache* cache, std::mt19937_64* rng) const;
  void encode_backward(const Mat& dout, EncoderCache& cache);
  Mat embed_tokens(const std::vector<int>& tokens, const std::vector<VisualSlot>& slots,
                   const std::vector<Mat>& visual) const;
  Mat run_decoder(const Mat& x, DecoderCache* cache, std::mt19937_64* rng) const;
  T row_forward_backward(const SequenceExample& row, T scale, std::mt19937_64* rng);

  const nn::Tensor<T>& projection(Stream s) const { return s == Stream::context ? proj_context_ : proj_region_; }
  nn::Tensor<T>& projection(Stream s) { return s == Stream::context ? proj_context_ : proj_region_; }

  ModelConfig cfg_;
  // vision encoder
  nn::Linear<T> patch_embed_;
  nn::Tensor<T> vis_pos_;
  std::vector<nn::Block<T>> enc_blocks_;
  nn::LayerNorm<T> enc_ln_;
  // projections into the decoder width
  nn::Tensor<T> proj_context_;
  nn::Tensor<T> proj_region_;
  // decoder
  nn::Tensor<T> tok_emb_;
  nn::Tensor<T> pos_emb_;
  std::vector<nn::Block<T>> dec_blocks_;
  nn::LayerNorm<T> dec_ln_;
  nn::Linear<T> head_;
};

// Summed negative log-likelihood of the supervised tokens of one row. logits row t predicts
// token t + 1. Throws empty_loss_mask when the row supervises nothing.
template <typename T>
T sequence_nll(const nn::Mat<T>& logits, const std::vector<int>& tokens,
               const std::vector<std::uint8_t>& loss_mask, nn::Mat<T>* dlogits = nullptr,
               T grad_scale = T(1));

// Mean over rows of sequence_nll.
template <typename T>
T compute_loss(const std::vector<nn::Mat<T>>& logits, const SequenceBatch& batch);

}  // namespace tvp
