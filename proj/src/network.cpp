#include "egmn/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include "egmn/numeric.hpp"

namespace egmn {

namespace {

void check_name(const std::string& name) {
  if (name.empty()) throw SchemaError("schema: field names must be non-empty");
  for (char c : name) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      throw SchemaError("schema: field name '" + name + "' contains whitespace");
    }
  }
}

// y += M * v
void matvec_add(const Matrix& m, const double* v, double* y) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += row[c] * v[c];
    y[r] += acc;
  }
}

// y += M^T * v
void matvec_transpose_add(const Matrix& m, const double* v, double* y) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.row(r);
    const double s = v[r];
    if (s == 0.0) continue;
    for (std::size_t c = 0; c < m.cols; ++c) y[c] += s * row[c];
  }
}

// G += dz * h^T (outer product), b += dz
void affine_grad_add(Matrix& gw, std::vector<double>& gb, const double* dz,
                     const double* h, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double s = dz[r];
    gb[r] += s;
    if (s == 0.0) continue;
    double* grow = gw.row(r);
    for (std::size_t c = 0; c < cols; ++c) grow[c] += s * h[c];
  }
}

void check_finite(const std::vector<double>& v, const char* stage) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string("forward: non-finite activation in ") + stage);
    }
  }
}

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

std::size_t FeatureSchema::input_dim() const {
  std::size_t d = dense.size();
  for (const auto& f : categorical) d += f.embedding_dim;
  return d;
}

void FeatureSchema::validate() const {
  std::set<std::string> names;
  for (const auto& f : categorical) {
    check_name(f.name);
    if (f.vocab_size < 1) throw SchemaError("schema: vocabulary size must be >= 1");
    if (f.embedding_dim < 1) throw SchemaError("schema: embedding dim must be >= 1");
    if (!names.insert(f.name).second) throw SchemaError("schema: duplicate field " + f.name);
  }
  for (const auto& f : dense) {
    check_name(f.name);
    if (!names.insert(f.name).second) throw SchemaError("schema: duplicate field " + f.name);
  }
}

bool FeatureSchema::operator==(const FeatureSchema& o) const {
  if (categorical.size() != o.categorical.size() || dense.size() != o.dense.size()) {
    return false;
  }
  for (std::size_t i = 0; i < categorical.size(); ++i) {
    const auto& a = categorical[i];
    const auto& b = o.categorical[i];
    if (a.name != b.name || a.vocab_size != b.vocab_size ||
        a.embedding_dim != b.embedding_dim) {
      return false;
    }
  }
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i].name != o.dense[i].name || dense[i].norm != o.dense[i].norm) return false;
  }
  return true;
}

std::size_t NetworkTensors::total_parameters() const {
  std::size_t n = 0;
  for_each_array(const_cast<NetworkTensors&>(*this),
                 [&](std::vector<double>& v) { n += v.size(); });
  return n;
}

NetworkTensors zeros_like(const NetworkTensors& t) {
  NetworkTensors z = t;
  for_each_array(z, [](std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); });
  return z;
}

std::vector<double*> all_entries(NetworkTensors& t) {
  std::vector<double*> out;
  for_each_array(t, [&](std::vector<double>& v) {
    for (double& x : v) out.push_back(&x);
  });
  return out;
}

EgmParamGrad zero_grad_like(const EgmParams& p) {
  EgmParamGrad g;
  g.means.assign(p.k(), 0.0);
  g.variances.assign(p.k(), 0.0);
  g.weights.assign(p.k() + 1, 0.0);
  return g;
}

NetworkWeights init_weights(const FeatureSchema& schema,
                            const std::vector<std::size_t>& hidden_widths,
                            std::size_t gaussian_count, std::uint64_t seed,
                            bool exponential_enabled) {
  schema.validate();
  if (!exponential_enabled && gaussian_count == 0) {
    throw std::invalid_argument("init_weights: no mixture components left");
  }
  for (std::size_t wdt : hidden_widths) {
    if (wdt < 1) throw std::invalid_argument("init_weights: hidden width must be >= 1");
  }

  NetworkWeights w;
  w.schema = schema;
  w.hidden_widths = hidden_widths;
  w.gaussian_count = gaussian_count;
  w.exponential_enabled = exponential_enabled;
  w.init_seed = seed;

  std::mt19937_64 rng(seed);
  const auto fill_uniform = [&](std::vector<double>& v, double limit) {
    for (double& x : v) x = uniform_in(rng, -limit, limit);
  };

  for (const auto& f : schema.categorical) {
    Matrix e(f.vocab_size, f.embedding_dim);
    fill_uniform(e.a, 0.01);
    w.t.embeddings.push_back(std::move(e));
  }

  std::size_t prev = schema.input_dim();
  for (std::size_t width : hidden_widths) {
    Matrix lw(width, prev);
    fill_uniform(lw.a, glorot_limit(prev, width));
    w.t.layer_w.push_back(std::move(lw));
    w.t.layer_b.emplace_back(width, 0.0);
    prev = width;
  }

  const std::size_t h = prev;
  const std::size_t k = gaussian_count;
  const std::size_t wr = w.weight_head_rows();
  w.t.rate_w = Matrix(1, h);
  fill_uniform(w.t.rate_w.a, glorot_limit(h, 1));
  w.t.rate_b.assign(1, 0.0);
  w.t.mean_w = Matrix(k, h);
  if (k > 0) fill_uniform(w.t.mean_w.a, glorot_limit(h, k));
  w.t.mean_b.assign(k, 0.0);
  w.t.var_w = Matrix(k, h);
  if (k > 0) fill_uniform(w.t.var_w.a, glorot_limit(h, k));
  w.t.var_b.assign(k, 0.0);
  w.t.weight_w = Matrix(wr, h);
  fill_uniform(w.t.weight_w.a, glorot_limit(h, wr));
  w.t.weight_b.assign(wr, 0.0);
  return w;
}

ForwardResult forward(const NetworkWeights& w, const EncodedFeatures& x) {
  const auto& schema = w.schema;
  if (x.categorical.size() != schema.categorical.size() ||
      x.dense.size() != schema.dense.size()) {
    throw SchemaError("forward: feature count does not match schema");
  }
  for (std::size_t f = 0; f < x.categorical.size(); ++f) {
    if (x.categorical[f] >= schema.categorical[f].vocab_size) {
      throw SchemaError("forward: id out of vocabulary for field " +
                        schema.categorical[f].name);
    }
  }
  for (double d : x.dense) {
    if (!std::isfinite(d)) throw SchemaError("forward: non-finite dense feature");
  }

  ForwardTrace tr;
  tr.input = x;
  tr.x.reserve(schema.input_dim());
  for (std::size_t f = 0; f < x.categorical.size(); ++f) {
    const double* row = w.t.embeddings[f].row(x.categorical[f]);
    tr.x.insert(tr.x.end(), row, row + schema.categorical[f].embedding_dim);
  }
  tr.x.insert(tr.x.end(), x.dense.begin(), x.dense.end());

  const std::vector<double>* act = &tr.x;
  for (std::size_t l = 0; l < w.t.layer_w.size(); ++l) {
    std::vector<double> z = w.t.layer_b[l];
    matvec_add(w.t.layer_w[l], act->data(), z.data());
    check_finite(z, "backbone layer");
    std::vector<double> a(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) a[i] = std::max(z[i], 0.0);
    tr.layer_z.push_back(std::move(z));
    tr.layer_a.push_back(std::move(a));
    act = &tr.layer_a.back();
  }
  const std::vector<double>& h = *act;

  const std::size_t k = w.gaussian_count;
  double rate_z = w.t.rate_b[0];
  {
    const double* row = w.t.rate_w.row(0);
    for (std::size_t c = 0; c < h.size(); ++c) rate_z += row[c] * h[c];
  }
  if (!std::isfinite(rate_z)) throw NumericError("forward: non-finite activation in rate head");
  tr.rate_z = rate_z;

  tr.mean_z = w.t.mean_b;
  matvec_add(w.t.mean_w, h.data(), tr.mean_z.data());
  check_finite(tr.mean_z, "mean head");
  tr.var_z = w.t.var_b;
  matvec_add(w.t.var_w, h.data(), tr.var_z.data());
  check_finite(tr.var_z, "variance head");
  tr.weight_z = w.t.weight_b;
  matvec_add(w.t.weight_w, h.data(), tr.weight_z.data());
  check_finite(tr.weight_z, "mixture-weight head");

  EgmParams p;
  const double sp = stable_softplus(rate_z);
  p.rate = std::clamp(sp, kRateMin, kRateMax);
  tr.rate_clamped = p.rate != sp;

  p.means.resize(k);
  p.variances.resize(k);
  tr.var_floored.assign(k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    p.means[i] = 1.0 / p.rate + stable_softplus(tr.mean_z[i]);
    const double v = stable_softplus(tr.var_z[i]);
    p.variances[i] = std::max(v, kVarianceFloor);
    tr.var_floored[i] = v < kVarianceFloor;
  }

  const std::vector<double> probs = stable_softmax(tr.weight_z);
  if (w.exponential_enabled) {
    p.weights = probs;
  } else {
    p.weights.assign(k + 1, 0.0);
    std::copy(probs.begin(), probs.end(), p.weights.begin() + 1);
  }

  tr.params = p;
  return {std::move(p), std::move(tr)};
}

EgmParams forward_params(const NetworkWeights& w, const EncodedFeatures& x) {
  // Trace capture is cheap relative to the matvecs; reuse the full pass.
  return forward(w, x).params;
}

void backward_into(const NetworkWeights& w, const ForwardTrace& tr,
                   const EgmParamGrad& grad_params, const BackwardOptions& opts,
                   NetworkTensors& out, BackwardScratch& s) {
  const std::size_t k = w.gaussian_count;
  const std::size_t wr = w.weight_head_rows();
  if (grad_params.means.size() != k || grad_params.variances.size() != k ||
      grad_params.weights.size() != k + 1) {
    throw std::invalid_argument("backward: gradient shape does not match network");
  }
  if (tr.mean_z.size() != k || tr.var_z.size() != k || tr.weight_z.size() != wr ||
      tr.layer_z.size() != w.t.layer_w.size() || tr.params.k() != k) {
    throw std::invalid_argument("backward: trace does not match weights");
  }
  const std::vector<double>& h = tr.layer_a.empty() ? tr.x : tr.layer_a.back();
  if (h.size() != w.t.rate_w.cols) {
    throw std::invalid_argument("backward: trace does not match weights");
  }

  // Softmax Jacobian on the emitted logits. When the exponential component is
  // disabled the logits cover Gaussians only and grad_params.weights[0] is
  // inert by construction.
  s.dz_weight.assign(wr, 0.0);
  const std::size_t off = w.exponential_enabled ? 0 : 1;
  double inner = 0.0;
  for (std::size_t i = 0; i < wr; ++i) {
    inner += tr.params.weights[i + off] * grad_params.weights[i + off];
  }
  for (std::size_t i = 0; i < wr; ++i) {
    s.dz_weight[i] = tr.params.weights[i + off] * (grad_params.weights[i + off] - inner);
  }

  s.dz_var.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    if (!tr.var_floored[i]) {
      s.dz_var[i] = grad_params.variances[i] * sigmoid(tr.var_z[i]);
    }
  }

  double d_rate = grad_params.rate;
  s.dz_mean.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    s.dz_mean[i] = grad_params.means[i] * sigmoid(tr.mean_z[i]);
    if (opts.rate_mean_coupling) {
      d_rate -= grad_params.means[i] / (tr.params.rate * tr.params.rate);
    }
  }
  const double dz_rate = tr.rate_clamped ? 0.0 : d_rate * sigmoid(tr.rate_z);

  s.dh.assign(h.size(), 0.0);
  affine_grad_add(out.weight_w, out.weight_b, s.dz_weight.data(), h.data(), wr, h.size());
  matvec_transpose_add(w.t.weight_w, s.dz_weight.data(), s.dh.data());
  affine_grad_add(out.var_w, out.var_b, s.dz_var.data(), h.data(), k, h.size());
  matvec_transpose_add(w.t.var_w, s.dz_var.data(), s.dh.data());
  affine_grad_add(out.mean_w, out.mean_b, s.dz_mean.data(), h.data(), k, h.size());
  matvec_transpose_add(w.t.mean_w, s.dz_mean.data(), s.dh.data());
  affine_grad_add(out.rate_w, out.rate_b, &dz_rate, h.data(), 1, h.size());
  matvec_transpose_add(w.t.rate_w, &dz_rate, s.dh.data());

  for (std::size_t l = w.t.layer_w.size(); l-- > 0;) {
    std::vector<double>& dz = s.dh;  // rectifier gate applied in place
    const std::vector<double>& z = tr.layer_z[l];
    for (std::size_t i = 0; i < dz.size(); ++i) {
      if (z[i] <= 0.0) dz[i] = 0.0;
    }
    const std::vector<double>& prev = l == 0 ? tr.x : tr.layer_a[l - 1];
    affine_grad_add(out.layer_w[l], out.layer_b[l], dz.data(), prev.data(), dz.size(),
                    prev.size());
    s.d_prev.assign(prev.size(), 0.0);
    matvec_transpose_add(w.t.layer_w[l], dz.data(), s.d_prev.data());
    std::swap(s.dh, s.d_prev);
  }

  // s.dh now holds dL/dx; scatter the embedding segments.
  std::size_t offset = 0;
  for (std::size_t f = 0; f < w.schema.categorical.size(); ++f) {
    const std::size_t dim = w.schema.categorical[f].embedding_dim;
    double* grow = out.embeddings[f].row(tr.input.categorical[f]);
    for (std::size_t c = 0; c < dim; ++c) grow[c] += s.dh[offset + c];
    offset += dim;
  }
}

NetworkTensors backward(const NetworkWeights& w, const ForwardTrace& trace,
                        const EgmParamGrad& grad_params, const BackwardOptions& opts) {
  NetworkTensors out = zeros_like(w.t);
  BackwardScratch scratch;
  backward_into(w, trace, grad_params, opts, out, scratch);
  return out;
}

}  // namespace egmn
