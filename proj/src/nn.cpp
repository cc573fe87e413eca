#include "tvp/nn.hpp"

#include <cmath>
#include <limits>

namespace tvp::nn {

double Gaussian::operator()() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = static_cast<double>(rng_() >> 11) * (1.0 / 9007199254740992.0);
  } while (u1 <= 0.0);
  const double u2 = static_cast<double>(rng_() >> 11) * (1.0 / 9007199254740992.0);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

template <typename T>
void init_normal(Tensor<T>& t, Gaussian& g, double stddev) {
  for (Eigen::Index i = 0; i < t.value.size(); ++i) {
    t.value.data()[i] = static_cast<T>(g() * stddev);
  }
}

// ---------------------------------------------------------------- Linear

template <typename T>
void Linear<T>::init(int in, int out, Gaussian& g, double stddev, bool with_bias) {
  weight.resize(in, out);
  bias.resize(1, with_bias ? out : 0);
  init_normal(weight, g, stddev);
}

template <typename T>
void Linear<T>::forward(const Mat<T>& x, Mat<T>& y) const {
  y.resize(x.rows(), weight.value.cols());
  y.noalias() = x * weight.value;
  if (has_bias()) y.rowwise() += bias.value.row(0);
}

template <typename T>
void Linear<T>::backward(const Mat<T>& x, const Mat<T>& dy, Mat<T>* dx) {
  weight.grad.noalias() += x.transpose() * dy;
  if (has_bias()) bias.grad.row(0) += dy.colwise().sum();
  if (dx) {
    dx->resize(dy.rows(), weight.value.rows());
    dx->noalias() = dy * weight.value.transpose();
  }
}

// ---------------------------------------------------------------- LayerNorm

template <typename T>
void LayerNorm<T>::init(int dim) {
  gamma.resize(1, dim);
  beta.resize(1, dim);
  gamma.value.setOnes();
}

template <typename T>
void LayerNorm<T>::forward(const Mat<T>& x, Mat<T>& y, Cache& cache) const {
  constexpr T eps = T(1e-5);
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  cache.xhat.resize(n, d);
  cache.rstd.resize(n);
  y.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mean = x.row(i).mean();
    const T var = (x.row(i).array() - mean).square().mean();
    const T rstd = T(1) / std::sqrt(var + eps);
    cache.rstd(i) = rstd;
    cache.xhat.row(i) = (x.row(i).array() - mean) * rstd;
    y.row(i) = cache.xhat.row(i).cwiseProduct(gamma.value.row(0)) + beta.value.row(0);
  }
}

template <typename T>
void LayerNorm<T>::backward(const Mat<T>& dy, const Cache& cache, Mat<T>& dx) {
  const Eigen::Index n = dy.rows();
  const Eigen::Index d = dy.cols();
  gamma.grad.row(0) += dy.cwiseProduct(cache.xhat).colwise().sum();
  beta.grad.row(0) += dy.colwise().sum();
  dx.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto dxhat = (dy.row(i).cwiseProduct(gamma.value.row(0))).eval();
    const T mean_dxhat = dxhat.mean();
    const T mean_dxhat_xhat = dxhat.cwiseProduct(cache.xhat.row(i)).mean();
    dx.row(i) = ((dxhat.array() - mean_dxhat) - cache.xhat.row(i).array() * mean_dxhat_xhat) *
                cache.rstd(i);
  }
}

// ---------------------------------------------------------------- GELU

namespace {
template <typename T>
constexpr T kGeluScale = T(0.7978845608028654);  // sqrt(2/pi)
template <typename T>
constexpr T kGeluCubic = T(0.044715);
}  // namespace

template <typename T>
void gelu_forward(const Mat<T>& x, Mat<T>& y) {
  y.resize(x.rows(), x.cols());
  const T* in = x.data();
  T* out = y.data();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const T v = in[i];
    out[i] = T(0.5) * v * (T(1) + std::tanh(kGeluScale<T> * (v + kGeluCubic<T> * v * v * v)));
  }
}

template <typename T>
void gelu_backward(const Mat<T>& x, const Mat<T>& dy, Mat<T>& dx) {
  dx.resize(x.rows(), x.cols());
  const T* in = x.data();
  const T* g = dy.data();
  T* out = dx.data();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const T v = in[i];
    const T t = std::tanh(kGeluScale<T> * (v + kGeluCubic<T> * v * v * v));
    const T dt = (T(1) - t * t) * kGeluScale<T> * (T(1) + T(3) * kGeluCubic<T> * v * v);
    out[i] = g[i] * (T(0.5) * (T(1) + t) + T(0.5) * v * dt);
  }
}

// ---------------------------------------------------------------- SelfAttention

template <typename T>
void SelfAttention<T>::init(int dim, int n_heads, bool is_causal, Gaussian& g, double out_stddev) {
  heads = n_heads;
  causal = is_causal;
  // No key/query/value bias: the key bias cannot change attention weights.
  qkv.init(dim, 3 * dim, g, 0.02, false);
  out.init(dim, dim, g, out_stddev);
}

template <typename T>
void SelfAttention<T>::forward(const Mat<T>& x, Mat<T>& y, Cache& cache) const {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::Index dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  qkv.forward(x, cache.qkv);
  cache.probs.resize(static_cast<std::size_t>(heads));
  cache.merged.resize(n, d);
  for (int h = 0; h < heads; ++h) {
    const auto q = cache.qkv.middleCols(h * dh, dh);
    const auto k = cache.qkv.middleCols(d + h * dh, dh);
    const auto v = cache.qkv.middleCols(2 * d + h * dh, dh);
    Mat<T>& p = cache.probs[static_cast<std::size_t>(h)];
    p.resize(n, n);
    p.noalias() = (q * k.transpose()) * scale;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index visible = causal ? i + 1 : n;
      const T mx = p.row(i).head(visible).maxCoeff();
      p.row(i).head(visible) = (p.row(i).head(visible).array() - mx).exp();
      p.row(i).head(visible) /= p.row(i).head(visible).sum();
      if (visible < n) p.row(i).tail(n - visible).setZero();
    }
    cache.merged.middleCols(h * dh, dh).noalias() = p * v;
  }
  out.forward(cache.merged, y);
}

template <typename T>
void SelfAttention<T>::backward(const Mat<T>& x, const Mat<T>& dy, const Cache& cache, Mat<T>& dx) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::Index dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  Mat<T> dmerged;
  out.backward(cache.merged, dy, &dmerged);
  Mat<T> dqkv(n, 3 * d);
  Mat<T> dp(n, n);
  for (int h = 0; h < heads; ++h) {
    const Mat<T>& p = cache.probs[static_cast<std::size_t>(h)];
    const auto q = cache.qkv.middleCols(h * dh, dh);
    const auto k = cache.qkv.middleCols(d + h * dh, dh);
    const auto v = cache.qkv.middleCols(2 * d + h * dh, dh);
    const auto dout = dmerged.middleCols(h * dh, dh);
    dp.noalias() = dout * v.transpose();
    dqkv.middleCols(2 * d + h * dh, dh).noalias() = p.transpose() * dout;
    // softmax backward: ds = p * (dp - sum(p * dp))
    for (Eigen::Index i = 0; i < n; ++i) {
      const T dot = p.row(i).dot(dp.row(i));
      dp.row(i) = p.row(i).cwiseProduct((dp.row(i).array() - dot).matrix());
    }
    dqkv.middleCols(h * dh, dh).noalias() = (dp * k) * scale;
    dqkv.middleCols(d + h * dh, dh).noalias() = (dp.transpose() * q) * scale;
  }
  qkv.backward(x, dqkv, &dx);
}

// ---------------------------------------------------------------- Block

template <typename T>
void Block<T>::init(int dim, int heads, int mlp_ratio, bool causal, int total_blocks, Gaussian& g) {
  const double residual_std = 0.02 / std::sqrt(2.0 * total_blocks);
  ln1.init(dim);
  attn.init(dim, heads, causal, g, residual_std);
  ln2.init(dim);
  fc.init(dim, mlp_ratio * dim, g);
  proj.init(mlp_ratio * dim, dim, g, residual_std);
}

namespace {
template <typename T>
void make_dropout_mask(Mat<T>& mask, Eigen::Index rows, Eigen::Index cols, double p,
                       std::mt19937_64& rng) {
  mask.resize(rows, cols);
  const T keep_scale = T(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
    mask.data()[i] = u < p ? T(0) : keep_scale;
  }
}
}  // namespace

template <typename T>
void Block<T>::forward(const Mat<T>& x, Mat<T>& y, Cache& c, double dropout,
                       std::mt19937_64* dropout_rng) const {
  const bool drop = dropout > 0.0 && dropout_rng != nullptr;
  ln1.forward(x, c.ln1_out, c.ln1);
  attn.forward(c.ln1_out, c.attn_out, c.attn);
  if (drop) {
    make_dropout_mask(c.drop1, x.rows(), x.cols(), dropout, *dropout_rng);
    c.mid = x + c.attn_out.cwiseProduct(c.drop1);
  } else {
    c.drop1.resize(0, 0);
    c.mid = x + c.attn_out;
  }
  ln2.forward(c.mid, c.ln2_out, c.ln2);
  fc.forward(c.ln2_out, c.fc_out);
  gelu_forward(c.fc_out, c.act);
  proj.forward(c.act, y);
  if (drop) {
    make_dropout_mask(c.drop2, x.rows(), x.cols(), dropout, *dropout_rng);
    y = y.cwiseProduct(c.drop2);
  } else {
    c.drop2.resize(0, 0);
  }
  y += c.mid;
}

template <typename T>
void Block<T>::backward(const Mat<T>& /*x*/, const Mat<T>& dy, const Cache& c, Mat<T>& dx) {
  // MLP branch
  Mat<T> dbranch = c.drop2.size() ? Mat<T>(dy.cwiseProduct(c.drop2)) : dy;
  Mat<T> dact;
  proj.backward(c.act, dbranch, &dact);
  Mat<T> dfc;
  gelu_backward(c.fc_out, dact, dfc);
  Mat<T> dln2;
  fc.backward(c.ln2_out, dfc, &dln2);
  Mat<T> dmid;
  ln2.backward(dln2, c.ln2, dmid);
  dmid += dy;
  // attention branch
  Mat<T> dattn = c.drop1.size() ? Mat<T>(dmid.cwiseProduct(c.drop1)) : dmid;
  Mat<T> dln1;
  attn.backward(c.ln1_out, dattn, c.attn, dln1);
  Mat<T> dx1;
  ln1.backward(dln1, c.ln1, dx1);
  dx = dx1 + dmid;
}

#define TVP_INSTANTIATE(T)                                                     \
  template void init_normal<T>(Tensor<T>&, Gaussian&, double);                 \
  template struct Linear<T>;                                                   \
  template struct LayerNorm<T>;                                                \
  template void gelu_forward<T>(const Mat<T>&, Mat<T>&);                       \
  template void gelu_backward<T>(const Mat<T>&, const Mat<T>&, Mat<T>&);       \
  template struct SelfAttention<T>;                                            \
  template struct Block<T>;

TVP_INSTANTIATE(float)
TVP_INSTANTIATE(double)

#undef TVP_INSTANTIATE

}  // namespace tvp::nn
