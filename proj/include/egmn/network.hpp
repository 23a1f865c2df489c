#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "egmn/egm_distribution.hpp"
#include "egmn/errors.hpp"

namespace egmn {

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
  double* row(std::size_t r) { return a.data() + r * cols; }
  const double* row(std::size_t r) const { return a.data() + r * cols; }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

enum class DenseNorm { ZScore, None };

struct CategoricalField {
  std::string name;
  std::size_t vocab_size = 1;  // includes the reserved out-of-vocabulary index 0
  std::size_t embedding_dim = 16;
};

struct DenseField {
  std::string name;
  DenseNorm norm = DenseNorm::ZScore;
};

struct FeatureSchema {
  std::vector<CategoricalField> categorical;
  std::vector<DenseField> dense;

  std::size_t input_dim() const;
  // Throws SchemaError: names must be unique, whitespace-free and non-empty;
  // vocabulary sizes and embedding dims >= 1.
  void validate() const;
  bool operator==(const FeatureSchema& o) const;
};

// One example after vocabulary encoding and dense normalization.
struct EncodedFeatures {
  std::vector<std::uint32_t> categorical;  // one in-vocabulary index per field
  std::vector<double> dense;
};

// Every trainable array of the model. Weight gradients and Adagrad
// accumulators reuse this layout so they always mirror the weight shapes.
struct NetworkTensors {
  std::vector<Matrix> embeddings;           // one table per categorical field
  std::vector<Matrix> layer_w;              // backbone affine layers
  std::vector<std::vector<double>> layer_b;
  Matrix rate_w;                            // 1 x h
  Matrix mean_w;                            // k x h
  Matrix var_w;                             // k x h
  Matrix weight_w;                          // mixture-weight logits x h
  std::vector<double> rate_b, mean_b, var_b, weight_b;

  std::size_t total_parameters() const;
};

template <typename Tensors, typename Fn>
void for_each_array(Tensors& t, Fn&& fn) {
  for (auto& m : t.embeddings) fn(m.a);
  for (auto& m : t.layer_w) fn(m.a);
  for (auto& b : t.layer_b) fn(b);
  fn(t.rate_w.a);
  fn(t.rate_b);
  fn(t.mean_w.a);
  fn(t.mean_b);
  fn(t.var_w.a);
  fn(t.var_b);
  fn(t.weight_w.a);
  fn(t.weight_b);
}

// Visits matching arrays of two tensor sets; throws std::invalid_argument on
// any shape mismatch.
template <typename Fn>
void zip_arrays(NetworkTensors& a, const NetworkTensors& b, Fn&& fn) {
  std::vector<std::vector<double>*> lhs;
  std::vector<const std::vector<double>*> rhs;
  for_each_array(a, [&](std::vector<double>& v) { lhs.push_back(&v); });
  for_each_array(const_cast<NetworkTensors&>(b),
                 [&](std::vector<double>& v) { rhs.push_back(&v); });
  if (lhs.size() != rhs.size()) throw std::invalid_argument("tensor structure mismatch");
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    if (lhs[i]->size() != rhs[i]->size()) {
      throw std::invalid_argument("tensor shape mismatch");
    }
    fn(*lhs[i], *rhs[i]);
  }
}

NetworkTensors zeros_like(const NetworkTensors& t);

// Flat view over every parameter entry; the finite-difference checker
// perturbs coordinates through this.
std::vector<double*> all_entries(NetworkTensors& t);

struct NetworkWeights {
  FeatureSchema schema;
  std::vector<std::size_t> hidden_widths;
  std::size_t gaussian_count = 0;
  bool exponential_enabled = true;
  std::uint64_t init_seed = 0;
  NetworkTensors t;

  // Rows of the mixture-weight head: k+1 logits normally, k when the
  // exponential component is disabled (the softmax then spans Gaussians only).
  std::size_t weight_head_rows() const {
    return exponential_enabled ? gaussian_count + 1 : gaussian_count;
  }
};

// Softplus outputs are clamped/floored to keep log densities and the 1/rate
// term finite early in training; occurrences are counted in the trace.
inline constexpr double kRateMin = 1e-4;
inline constexpr double kRateMax = 1e4;
inline constexpr double kVarianceFloor = 1e-6;

struct ForwardTrace {
  EncodedFeatures input;
  std::vector<double> x;                      // embeddings ++ dense values
  std::vector<std::vector<double>> layer_z;   // backbone pre-activations
  std::vector<std::vector<double>> layer_a;   // rectified activations; back() is h
  double rate_z = 0.0;
  std::vector<double> mean_z, var_z, weight_z;
  bool rate_clamped = false;
  std::vector<std::uint8_t> var_floored;
  EgmParams params;
};

struct ForwardResult {
  EgmParams params;
  ForwardTrace trace;
};

// Gradient of a scalar loss with respect to EgmParams fields; weights always
// has k+1 entries (index 0 is ignored when the exponential is disabled).
struct EgmParamGrad {
  double rate = 0.0;
  std::vector<double> means, variances, weights;
};

EgmParamGrad zero_grad_like(const EgmParams& p);

// Embeddings ~ U(-0.01, 0.01), affine weights Glorot-uniform, biases zero.
// Deterministic per seed.
NetworkWeights init_weights(const FeatureSchema& schema,
                            const std::vector<std::size_t>& hidden_widths,
                            std::size_t gaussian_count, std::uint64_t seed,
                            bool exponential_enabled = true);

ForwardResult forward(const NetworkWeights& w, const EncodedFeatures& x);

// Forward pass without trace capture, for evaluation and prediction.
EgmParams forward_params(const NetworkWeights& w, const EncodedFeatures& x);

struct BackwardOptions {
  // The mean heads add 1/rate to their softplus output (identifiability
  // constraint), so the rate head receives a -1/rate^2 term through every
  // Gaussian mean. The gradient checker switches this off as a negative
  // control proving the term is load-bearing.
  bool rate_mean_coupling = true;
};

// Scratch buffers reused across backward calls within a batch.
struct BackwardScratch {
  std::vector<double> dz_weight, dz_mean, dz_var, dh, d_prev, dx;
};

NetworkTensors backward(const NetworkWeights& w, const ForwardTrace& trace,
                        const EgmParamGrad& grad_params,
                        const BackwardOptions& opts = {});

// Accumulating form used by the training loop; adds this example's weight
// gradients into `out`.
void backward_into(const NetworkWeights& w, const ForwardTrace& trace,
                   const EgmParamGrad& grad_params, const BackwardOptions& opts,
                   NetworkTensors& out, BackwardScratch& scratch);

}  // namespace egmn
