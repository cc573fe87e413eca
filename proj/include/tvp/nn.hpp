#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace tvp::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct Tensor {
  Mat<T> value;
  Mat<T> grad;

  void resize(int rows, int cols) {
    value = Mat<T>::Zero(rows, cols);
    grad = Mat<T>::Zero(rows, cols);
  }
  void zero_grad() { grad.setZero(); }
};

// Box-Muller over mt19937_64 so initial weights do not depend on the standard library.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
  double operator()();
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

template <typename T>
void init_normal(Tensor<T>& t, Gaussian& g, double stddev);

template <typename T>
struct Linear {
  Tensor<T> weight;  // in x out
  Tensor<T> bias;    // 1 x out; 1 x 0 when the layer has no bias

  void init(int in, int out, Gaussian& g, double stddev = 0.02, bool with_bias = true);
  bool has_bias() const { return bias.value.cols() != 0; }
  void forward(const Mat<T>& x, Mat<T>& y) const;
  // Accumulates parameter gradients; writes dx when non-null.
  void backward(const Mat<T>& x, const Mat<T>& dy, Mat<T>* dx);
};

template <typename T>
struct LayerNorm {
  Tensor<T> gamma;
  Tensor<T> beta;

  struct Cache {
    Mat<T> xhat;
    Eigen::Matrix<T, Eigen::Dynamic, 1> rstd;
  };

  void init(int dim);
  void forward(const Mat<T>& x, Mat<T>& y, Cache& cache) const;
  void backward(const Mat<T>& dy, const Cache& cache, Mat<T>& dx);
};

// tanh approximation
template <typename T>
void gelu_forward(const Mat<T>& x, Mat<T>& y);
template <typename T>
void gelu_backward(const Mat<T>& x, const Mat<T>& dy, Mat<T>& dx);

template <typename T>
struct SelfAttention {
  Linear<T> qkv;
  Linear<T> out;
  int heads = 1;
  bool causal = true;

  struct Cache {
    Mat<T> qkv;
    std::vector<Mat<T>> probs;  // per head, N x N
    Mat<T> merged;              // N x d, input of the output projection
  };

  void init(int dim, int n_heads, bool is_causal, Gaussian& g, double out_stddev);
  void forward(const Mat<T>& x, Mat<T>& y, Cache& cache) const;
  void backward(const Mat<T>& x, const Mat<T>& dy, const Cache& cache, Mat<T>& dx);
};

// Pre-norm transformer block with a GELU MLP.
template <typename T>
struct Block {
  LayerNorm<T> ln1;
  SelfAttention<T> attn;
  LayerNorm<T> ln2;
  Linear<T> fc;
  Linear<T> proj;

  struct Cache {
    typename LayerNorm<T>::Cache ln1;
    Mat<T> ln1_out;
    typename SelfAttention<T>::Cache attn;
    Mat<T> attn_out;
    Mat<T> mid;  // x + attention branch
    typename LayerNorm<T>::Cache ln2;
    Mat<T> ln2_out;
    Mat<T> fc_out;
    Mat<T> act;
    Mat<T> drop1;  // dropout keep masks (scaled); empty when disabled
    Mat<T> drop2;
  };

  void init(int dim, int heads, int mlp_ratio, bool causal, int total_blocks, Gaussian& g);
  // dropout_rng may be null (no dropout).
  void forward(const Mat<T>& x, Mat<T>& y, Cache& cache, double dropout,
               std::mt19937_64* dropout_rng) const;
  void backward(const Mat<T>& x, const Mat<T>& dy, const Cache& cache, Mat<T>& dx);
};

}  // namespace tvp::nn
