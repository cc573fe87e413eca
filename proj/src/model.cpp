#include "tvp/model.hpp"

#include <cmath>

#include "tvp/error.hpp"

namespace tvp {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_config, msg); };
  if (patch_size < 1 || image_size < patch_size || image_size % patch_size != 0) {
    fail("image_size must be a positive multiple of patch_size");
  }
  if (heads < 1 || d_vis % heads != 0 || d_model % heads != 0) {
    fail("d_vis and d_model must be divisible by heads");
  }
  if (encoder_blocks < 0 || decoder_blocks < 1) fail("block counts are invalid");
  if (mlp_ratio < 1) fail("mlp_ratio must be >= 1");
  if (vocab_size <= 0) fail("vocab_size must be positive");
  if (max_seq_len < 2) fail("max_seq_len must be >= 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
}

std::string_view to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::encoder: return "encoder";
    case ParamGroup::projection_context: return "projection_context";
    case ParamGroup::projection_region: return "projection_region";
    case ParamGroup::embeddings: return "embeddings";
    case ParamGroup::decoder: return "decoder";
  }
  return "decoder";
}

SequenceExample make_example(const TokenizedPrompt& prompt) {
  return {prompt.tokens, prompt.loss_mask, prompt.slots};
}

template <typename T>
Model<T>::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  nn::Gaussian g(seed);
  patch_embed_.init(cfg_.patch_dim(), cfg_.d_vis, g);
  vis_pos_.resize(cfg_.visual_tokens(), cfg_.d_vis);
  nn::init_normal(vis_pos_, g, 0.02);
  enc_blocks_.resize(static_cast<std::size_t>(cfg_.encoder_blocks));
  for (auto& b : enc_blocks_) {
    b.init(cfg_.d_vis, cfg_.heads, cfg_.mlp_ratio, false, std::max(1, cfg_.encoder_blocks), g);
  }
  enc_ln_.init(cfg_.d_vis);
  const double proj_std = 1.0 / std::sqrt(static_cast<double>(cfg_.d_vis));
  proj_context_.resize(cfg_.d_vis, cfg_.d_model);
  proj_region_.resize(cfg_.d_vis, cfg_.d_model);
  nn::init_normal(proj_context_, g, proj_std);
  nn::init_normal(proj_region_, g, proj_std);
  tok_emb_.resize(cfg_.vocab_size, cfg_.d_model);
  nn::init_normal(tok_emb_, g, 0.02);
  pos_emb_.resize(cfg_.max_seq_len, cfg_.d_model);
  nn::init_normal(pos_emb_, g, 0.02);
  dec_blocks_.resize(static_cast<std::size_t>(cfg_.decoder_blocks));
  for (auto& b : dec_blocks_) b.init(cfg_.d_model, cfg_.heads, cfg_.mlp_ratio, true, cfg_.decoder_blocks, g);
  dec_ln_.init(cfg_.d_model);
  head_.init(cfg_.d_model, cfg_.vocab_size, g);
}

template <typename T>
void Model<T>::for_each_param(
    const std::function<void(const std::string&, ParamGroup, nn::Tensor<T>&)>& fn) {
  auto block = [&](const std::string& prefix, ParamGroup g, nn::Block<T>& b) {
    fn(prefix + ".ln1.gamma", g, b.ln1.gamma);
    fn(prefix + ".ln1.beta", g, b.ln1.beta);
    fn(prefix + ".attn.qkv.weight", g, b.attn.qkv.weight);
    fn(prefix + ".attn.out.weight", g, b.attn.out.weight);
    fn(prefix + ".attn.out.bias", g, b.attn.out.bias);
    fn(prefix + ".ln2.gamma", g, b.ln2.gamma);
    fn(prefix + ".ln2.beta", g, b.ln2.beta);
    fn(prefix + ".fc.weight", g, b.fc.weight);
    fn(prefix + ".fc.bias", g, b.fc.bias);
    fn(prefix + ".proj.weight", g, b.proj.weight);
    fn(prefix + ".proj.bias", g, b.proj.bias);
  };
  const auto E = ParamGroup::encoder;
  fn("encoder.patch.weight", E, patch_embed_.weight);
  fn("encoder.patch.bias", E, patch_embed_.bias);
  fn("encoder.pos", E, vis_pos_);
  for (std::size_t i = 0; i < enc_blocks_.size(); ++i) block("encoder.block" + std::to_string(i), E, enc_blocks_[i]);
  fn("encoder.ln.gamma", E, enc_ln_.gamma);
  fn("encoder.ln.beta", E, enc_ln_.beta);
  fn("projection.context", ParamGroup::projection_context, proj_context_);
  fn("projection.region", ParamGroup::projection_region, proj_region_);
  fn("embeddings.token", ParamGroup::embeddings, tok_emb_);
  fn("embeddings.position", ParamGroup::embeddings, pos_emb_);
  const auto D = ParamGroup::decoder;
  for (std::size_t i = 0; i < dec_blocks_.size(); ++i) block("decoder.block" + std::to_string(i), D, dec_blocks_[i]);
  fn("decoder.ln.gamma", D, dec_ln_.gamma);
  fn("decoder.ln.beta", D, dec_ln_.beta);
  fn("decoder.head.weight", D, head_.weight);
  fn("decoder.head.bias", D, head_.bias);
}

template <typename T>
void Model<T>::for_each_param(
    const std::function<void(const std::string&, ParamGroup, const nn::Tensor<T>&)>& fn) const {
  const_cast<Model<T>*>(this)->for_each_param(
      [&](const std::string& name, ParamGroup g, nn::Tensor<T>& t) { fn(name, g, t); });
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  std::size_t n = 0;
  for_each_param([&](const std::string&, ParamGroup, const nn::Tensor<T>& t) {
    n += static_cast<std::size_t>(t.value.size());
  });
  return n;
}

template <typename T>
void Model<T>::zero_grad() {
  for_each_param([](const std::string&, ParamGroup, nn::Tensor<T>& t) { t.zero_grad(); });
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  Model<U> out(cfg_, 0);
  std::vector<nn::Tensor<U>*> dst;
  out.for_each_param([&](const std::string&, ParamGroup, nn::Tensor<U>& t) { dst.push_back(&t); });
  std::size_t i = 0;
  for_each_param([&](const std::string&, ParamGroup, const nn::Tensor<T>& t) {
    dst[i]->value = t.value.template cast<U>();
    dst[i]->grad.setZero();
    ++i;
  });
  return out;
}

// ---------------------------------------------------------------- vision

template <typename T>
typename Model<T>::Mat Model<T>::patchify(const Image& img) const {
  if (img.height != cfg_.image_size || img.width != cfg_.image_size) {
    throw Error(ErrorCode::dimension_mismatch,
                "image is " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                    ", model expects " + std::to_string(cfg_.image_size));
  }
  const int p = cfg_.patch_size;
  const int side = cfg_.image_size / p;
  Mat patches(cfg_.visual_tokens(), cfg_.patch_dim());
  for (int py = 0; py < side; ++py) {
    for (int px = 0; px < side; ++px) {
      const int row = py * side + px;
      int col = 0;
      for (int y = 0; y < p; ++y) {
        for (int x = 0; x < p; ++x) {
          for (int c = 0; c < Image::channels; ++c) {
            patches(row, col++) = static_cast<T>(img.at(py * p + y, px * p + x, c)) / T(127.5) - T(1);
          }
        }
      }
    }
  }
  return patches;
}

template <typename T>
typename Model<T>::Mat Model<T>::encode(const Image& img, EncoderCache* cache,
                                        std::mt19937_64* rng) const {
  EncoderCache local;
  EncoderCache& c = cache ? *cache : local;
  c.patches = patchify(img);
  patch_embed_.forward(c.patches, c.embedded);
  c.embedded += vis_pos_.value;
  c.blocks.resize(enc_blocks_.size());
  c.block_inputs.resize(enc_blocks_.size());
  Mat x = c.embedded;
  for (std::size_t i = 0; i < enc_blocks_.size(); ++i) {
    c.block_inputs[i] = x;
    enc_blocks_[i].forward(c.block_inputs[i], x, c.blocks[i], cfg_.dropout, rng);
  }
  enc_ln_.forward(x, c.output, c.ln);
  return c.output;
}

template <typename T>
void Model<T>::encode_backward(const Mat& dout, EncoderCache& c) {
  Mat d;
  enc_ln_.backward(dout, c.ln, d);
  for (std::size_t i = enc_blocks_.size(); i-- > 0;) {
    Mat dx;
    enc_blocks_[i].backward(c.block_inputs[i], d, c.blocks[i], dx);
    d = std::move(dx);
  }
  vis_pos_.grad += d;
  patch_embed_.backward(c.patches, d, nullptr);
}

template <typename T>
typename Model<T>::Mat Model<T>::encode_image(const Image& img) const {
  return encode(img, nullptr, nullptr);
}

template <typename T>
typename Model<T>::Mat Model<T>::project_visual(const Mat& tokens, Stream stream) const {
  return tokens * projection(stream).value;
}

template <typename T>
std::vector<typename Model<T>::Mat> Model<T>::embed_visuals(const std::vector<VisualSlot>& slots) const {
  std::vector<Mat> out;
  out.reserve(slots.size());
  for (const auto& s : slots) {
    if (!s.image) throw Error(ErrorCode::invalid_config, "visual slot without an image");
    out.push_back(project_visual(encode_image(*s.image), s.stream));
  }
  return out;
}

// ---------------------------------------------------------------- decoder

template <typename T>
typename Model<T>::Mat Model<T>::embed_tokens(const std::vector<int>& tokens,
                                              const std::vector<VisualSlot>& slots,
                                              const std::vector<Mat>& visual) const {
  const auto n = static_cast<Eigen::Index>(tokens.size());
  if (n > cfg_.max_seq_len) {
    throw Error(ErrorCode::sequence_too_long,
                std::to_string(n) + " tokens exceed max_seq_len " + std::to_string(cfg_.max_seq_len));
  }
  Mat x(n, cfg_.d_model);
  for (Eigen::Index t = 0; t < n; ++t) {
    const int id = tokens[static_cast<std::size_t>(t)];
    if (id < 0 || id >= cfg_.vocab_size) {
      throw Error(ErrorCode::dimension_mismatch, "token id " + std::to_string(id) + " out of range");
    }
    x.row(t) = tok_emb_.value.row(id);
  }
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const VisualSlot& slot = slots[s];
    if (slot.count != cfg_.visual_tokens() || slot.start < 0 || slot.start + slot.count > n) {
      throw Error(ErrorCode::dimension_mismatch, "visual slot range does not fit the sequence");
    }
    x.middleRows(slot.start, slot.count) = visual[s];
  }
  x += pos_emb_.value.topRows(n);
  return x;
}

template <typename T>
typename Model<T>::Mat Model<T>::run_decoder(const Mat& x0, DecoderCache* cache,
                                             std::mt19937_64* rng) const {
  DecoderCache local;
  DecoderCache& c = cache ? *cache : local;
  c.blocks.resize(dec_blocks_.size());
  c.block_inputs.resize(dec_blocks_.size());
  Mat x = x0;
  for (std::size_t i = 0; i < dec_blocks_.size(); ++i) {
    c.block_inputs[i] = x;
    dec_blocks_[i].forward(c.block_inputs[i], x, c.blocks[i], cfg_.dropout, rng);
  }
  c.final_in = x;
  dec_ln_.forward(c.final_in, c.ln_out, c.ln);
  Mat logits;
  head_.forward(c.ln_out, logits);
  return logits;
}

template <typename T>
typename Model<T>::Mat Model<T>::decode(const std::vector<int>& tokens,
                                        const std::vector<VisualSlot>& slots,
                                        const std::vector<Mat>& visual_embeddings) const {
  return run_decoder(embed_tokens(tokens, slots, visual_embeddings), nullptr, nullptr);
}

template <typename T>
typename Model<T>::Mat Model<T>::forward(const SequenceExample& row) const {
  return decode(row.tokens, row.slots, embed_visuals(row.slots));
}

template <typename T>
std::vector<typename Model<T>::Mat> Model<T>::forward(const SequenceBatch& batch) const {
  std::vector<Mat> out;
  out.reserve(batch.rows.size());
  for (const auto& row : batch.rows) out.push_back(forward(row));
  return out;
}

template <typename T>
T Model<T>::row_forward_backward(const SequenceExample& row, T scale, std::mt19937_64* rng) {
  std::vector<EncoderCache> enc(row.slots.size());
  std::vector<Mat> encoded(row.slots.size());
  std::vector<Mat> visual(row.slots.size());
  for (std::size_t s = 0; s < row.slots.size(); ++s) {
    encoded[s] = encode(*row.slots[s].image, &enc[s], rng);
    visual[s] = project_visual(encoded[s], row.slots[s].stream);
  }
  const Mat x0 = embed_tokens(row.tokens, row.slots, visual);
  DecoderCache dc;
  const Mat logits = run_decoder(x0, &dc, rng);
  Mat dlogits;
  const T loss = sequence_nll<T>(logits, row.tokens, row.loss_mask, &dlogits, scale);

  Mat d;
  head_.backward(dc.ln_out, dlogits, &d);
  Mat dx;
  dec_ln_.backward(d, dc.ln, dx);
  for (std::size_t i = dec_blocks_.size(); i-- > 0;) {
    Mat dprev;
    dec_blocks_[i].backward(dc.block_inputs[i], dx, dc.blocks[i], dprev);
    dx = std::move(dprev);
  }
  const auto n = static_cast<Eigen::Index>(row.tokens.size());
  pos_emb_.grad.topRows(n) += dx;
  std::vector<std::uint8_t> is_slot(row.tokens.size(), 0);
  for (const auto& slot : row.slots) {
    std::fill_n(is_slot.begin() + slot.start, slot.count, 1);
  }
  for (Eigen::Index t = 0; t < n; ++t) {
    if (!is_slot[static_cast<std::size_t>(t)]) tok_emb_.grad.row(row.tokens[static_cast<std::size_t>(t)]) += dx.row(t);
  }
  for (std::size_t s = 0; s < row.slots.size(); ++s) {
    const VisualSlot& slot = row.slots[s];
    const Mat dvis = dx.middleRows(slot.start, slot.count);
    nn::Tensor<T>& proj = projection(slot.stream);
    proj.grad.noalias() += encoded[s].transpose() * dvis;
    const Mat denc = dvis * proj.value.transpose();
    encode_backward(denc, enc[s]);
  }
  return loss;
}

template <typename T>
T Model<T>::forward_backward(const SequenceBatch& batch, std::mt19937_64* dropout_rng) {
  if (batch.rows.empty()) throw Error(ErrorCode::invalid_config, "empty batch");
  const T scale = T(1) / static_cast<T>(batch.rows.size());
  T total = 0;
  for (const auto& row : batch.rows) total += row_forward_backward(row, scale, dropout_rng);
  return total * scale;
}

// ---------------------------------------------------------------- loss

template <typename T>
T sequence_nll(const nn::Mat<T>& logits, const std::vector<int>& tokens,
               const std::vector<std::uint8_t>& loss_mask, nn::Mat<T>* dlogits, T grad_scale) {
  if (loss_mask.size() != tokens.size() || logits.rows() != static_cast<Eigen::Index>(tokens.size())) {
    throw Error(ErrorCode::length_mismatch, "logits, tokens and loss mask disagree in length");
  }
  if (dlogits) dlogits->setZero(logits.rows(), logits.cols());
  T loss = 0;
  bool any = false;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    if (!loss_mask[i]) continue;
    any = true;
    const auto row = logits.row(static_cast<Eigen::Index>(i - 1));
    const T mx = row.maxCoeff();
    const T lse = mx + std::log((row.array() - mx).exp().sum());
    loss += lse - row(tokens[i]);
    if (dlogits) {
      auto drow = dlogits->row(static_cast<Eigen::Index>(i - 1));
      drow = (row.array() - lse).exp().matrix() * grad_scale;
      drow(tokens[i]) -= grad_scale;
    }
  }
  if (!any) throw Error(ErrorCode::empty_loss_mask, "row has no supervised tokens");
  return loss;
}

template <typename T>
T compute_loss(const std::vector<nn::Mat<T>>& logits, const SequenceBatch& batch) {
  if (logits.size() != batch.rows.size() || batch.rows.empty()) {
    throw Error(ErrorCode::length_mismatch, "logits and batch disagree in size");
  }
  T total = 0;
  for (std::size_t r = 0; r < logits.size(); ++r) {
    total += sequence_nll<T>(logits[r], batch.rows[r].tokens, batch.rows[r].loss_mask);
  }
  return total / static_cast<T>(logits.size());
}

template class Model<float>;
template class Model<double>;
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template Model<float> Model<float>::cast<float>() const;
template Model<double> Model<double>::cast<double>() const;
template float sequence_nll<float>(const nn::Mat<float>&, const std::vector<int>&,
                                   const std::vector<std::uint8_t>&, nn::Mat<float>*, float);
template double sequence_nll<double>(const nn::Mat<double>&, const std::vector<int>&,
                                     const std::vector<std::uint8_t>&, nn::Mat<double>*, double);
template float compute_loss<float>(const std::vector<nn::Mat<float>>&, const SequenceBatch&);
template double compute_loss<double>(const std::vector<nn::Mat<double>>&, const SequenceBatch&);

}  // namespace tvp
