// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "gapnet/nn.hpp"

#include <cmath>

namespace gapnet::nn {

namespace {

template <typename T>
BasicTensor<T> he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  BasicTensor<T> t(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-limit, limit));
  return t;
}

[[noreturn]] void no_cache(std::string_view kind) {
  fail(ErrorCode::kNoCachedForward,
       std::string(kind) + " backward called without a cached training forward");
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const Shape& expected, const char* where) {
  if (a.shape() != expected) {
    fail(ErrorCode::kShapeMismatch, std::string(where) + ": expected " +
                                        shape_to_string(expected) + ", got " +
                                        shape_to_string(a.shape()));
  }
}

template <typename T>
std::optional<BasicTensor<double>> cast_opt(const std::optional<BasicTensor<T>>& t) {
  if (!t) return std::nullopt;
  return t->template cast<double>();
}

}  // namespace

// ---------------------------------------------------------------- Dense

template <typename T>
DenseLayer<T>::DenseLayer(std::size_t din, std::size_t dout, Rng& rng)
    : weight_("W", he_uniform<T>({dout, din}, din, rng)), bias_("b", BasicTensor<T>({dout})) {}

template <typename T>
DenseLayer<T>::DenseLayer(BasicTensor<T> weight, BasicTensor<T> bias)
    : weight_("W", std::move(weight)), bias_("b", std::move(bias)) {
  if (weight_.value.rank() != 2 || bias_.value.rank() != 1 ||
      bias_.value.size() != weight_.value.extent(0)) {
    fail(ErrorCode::kShapeMismatch, "dense weight " + shape_to_string(weight_.value.shape()) +
                                        " incompatible with bias " +
                                        shape_to_string(bias_.value.shape()));
  }
}

template <typename T>
BasicTensor<T> DenseLayer<T>::forward(const BasicTensor<T>& x, Mode mode) {
  const std::size_t din = in_features();
  require_same_shape(x, {din}, "dense_forward");
  auto z = matmul(weight_.value, x.reshaped({din, 1})).reshaped({out_features()});
  z = zip_elementwise(z, bias_.value, BinaryOp::kAdd);
  if (mode == Mode::kTrain) cached_input_ = x;
  return z;
}

template <typename T>
BasicTensor<T> DenseLayer<T>::backward(const BasicTensor<T>& grad_out) {
  if (!cached_input_) no_cache(kind());
  const std::size_t din = in_features(), dout = out_features();
  require_same_shape(grad_out, {dout}, "dense_backward");
  const BasicTensor<T> x = std::move(*cached_input_);
  cached_input_.reset();

  auto dw = weight_.grad.data();
  auto db = bias_.grad.data();
  const auto w = weight_.value.data();
  BasicTensor<T> grad_in({din});
  auto gi = grad_in.data();
  for (std::size_t o = 0; o < dout; ++o) {
    const T g = grad_out[o];
    if (g == T(0)) continue;
    db[o] += g;
    T* dw_row = dw.data() + o * din;
    const T* w_row = w.data() + o * din;
    for (std::size_t i = 0; i < din; ++i) {
      dw_row[i] += g * x[i];
      gi[i] += w_row[i] * g;
    }
  }
  return grad_in;
}

template <typename T>
std::unique_ptr<Layer<double>> DenseLayer<T>::clone_f64() const {
  auto out = std::make_unique<DenseLayer<double>>(weight_.value.template cast<double>(),
                                                  bias_.value.template cast<double>());
  out->weight().grad = weight_.grad.template cast<double>();
  out->bias().grad = bias_.grad.template cast<double>();
  return out;
}

// ---------------------------------------------------------------- ReLU

template <typename T>
BasicTensor<T> ReluLayer<T>::forward(const BasicTensor<T>& x, Mode mode) {
  if (mode == Mode::kTrain) cached_input_ = x;
  return map_elementwise(x, UnaryOp::kRelu);
}

template <typename T>
BasicTensor<T> ReluLayer<T>::backward(const BasicTensor<T>& grad_out) {
  if (!cached_input_) no_cache(kind());
  require_same_shape(grad_out, cached_input_->shape(), "relu_backward");
  auto gate = map_elementwise(*cached_input_, UnaryOp::kReluGrad);
  cached_input_.reset();
  return zip_elementwise(grad_out, gate, BinaryOp::kMul);
}

template <typename T>
std::unique_ptr<Layer<double>> ReluLayer<T>::clone_f64() const {
  auto out = std::make_unique<ReluLayer<double>>();
  return out;
}

// ---------------------------------------------------------------- Sigmoid

template <typename T>
BasicTensor<T> SigmoidLayer<T>::forward(const BasicTensor<T>& x, Mode mode) {
  auto s = map_elementwise(x, UnaryOp::kSigmoid);
  if (mode == Mode::kTrain) cached_output_ = s;
  return s;
}

template <typename T>
BasicTensor<T> SigmoidLayer<T>::backward(const BasicTensor<T>& grad_out) {
  if (!cached_output_) no_cache(kind());
  require_same_shape(grad_out, cached_output_->shape(), "sigmoid_backward");
  BasicTensor<T> grad_in = grad_out;
  const auto s = cached_output_->data();
  auto g = grad_in.data();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s[i] * (T(1) - s[i]);
  cached_output_.reset();
  return grad_in;
}

template <typename T>
std::unique_ptr<Layer<double>> SigmoidLayer<T>::clone_f64() const {
  return std::make_unique<SigmoidLayer<double>>();
}

// ---------------------------------------------------------------- Dropout

template <typename T>
DropoutLayer<T>::DropoutLayer(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    fail(ErrorCode::kInvalidRate, "dropout rate " + std::to_string(rate) + " not in [0, 1)");
  }
}

template <typename T>
void DropoutLayer<T>::set_fixed_mask(BasicTensor<T> keep) {
  for (T v : keep.data()) {
    if (v != T(0) && v != T(1)) fail(ErrorCode::kInvalidRate, "keep-mask entries must be 0 or 1");
  }
  fixed_keep_ = std::move(keep);
}

template <typename T>
BasicTensor<T> DropoutLayer<T>::forward(const BasicTensor<T>& x, Mode mode) {
  if (mode == Mode::kEval) return x;
  const T scale = static_cast<T>(1.0 / (1.0 - rate_));
  BasicTensor<T> mask = BasicTensor<T>::zeros_like(x);
  auto m = mask.data();
  if (fixed_keep_) {
    require_same_shape(x, fixed_keep_->shape(), "dropout_forward");
    const auto keep = fixed_keep_->data();
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = keep[i] * scale;
  } else if (rate_ == 0.0) {
    mask.fill(T(1));
  } else {
    for (auto& v : m) v = rng_.uniform() < rate_ ? T(0) : scale;
  }
  auto y = zip_elementwise(x, mask, BinaryOp::kMul);
  cached_mask_ = std::move(mask);
  return y;
}

template <typename T>
BasicTensor<T> DropoutLayer<T>::backward(const BasicTensor<T>& grad_out) {
  if (!cached_mask_) no_cache(kind());
  auto g = zip_elementwise(grad_out, *cached_mask_, BinaryOp::kMul);
  cached_mask_.reset();
  return g;
}

template <typename T>
std::unique_ptr<Layer<double>> DropoutLayer<T>::clone_f64() const {
  auto out = std::make_unique<DropoutLayer<double>>(rate_, 0);
  out->rng_ = rng_;
  out->fixed_keep_ = cast_opt(fixed_keep_);
  return out;
}

// ---------------------------------------------------------------- GAP

template <typename T>
BasicTensor<T> GapLayer<T>::forward(const BasicTensor<T>& x, Mode mode) {
  auto y = mean_over_spatial(x);
  if (mode == Mode::kTrain) cached_shape_ = x.shape();
  return y;
}

template <typename T>
BasicTensor<T> GapLayer<T>::backward(const BasicTensor<T>& grad_out) {
  if (!cached_shape_) no_cache(kind());
  const Shape shape = std::move(*cached_shape_);
  cached_shape_.reset();
  const std::size_t positions = shape[0] * shape[1], c = shape[2];
  require_same_shape(grad_out, {c}, "gap_backward");
  BasicTensor<T> grad_in(shape);
  auto gi = grad_in.data();
  const T inv = T(1) / static_cast<T>(positions);
  for (std::size_t p = 0; p < positions; ++p)
    for (std::size_t k = 0; k < c; ++k) gi[p * c + k] = grad_out[k] * inv;
  return grad_in;
}

template <typename T>
std::unique_ptr<Layer<double>> GapLayer<T>::clone_f64() const {
  return std::make_unique<GapLayer<double>>();
}

// ---------------------------------------------------------------- Conv1d

template <typename T>
Conv1dLayer<T>::Conv1dLayer(std::size_t in_channels, std::size_t filters,
                            std::size_t kernel_size, Rng& rng)
    : kernels_("W", he_uniform<T>({filters, in_channels, kernel_size},
                                  in_channels * kernel_size, rng)),
      bias_("b", BasicTensor<T>({filters})) {}

template <typename T>
Conv1dLayer<T>::Conv1dLayer(BasicTensor<T> kernels, BasicTensor<T> bias)
    : kernels_("W", std::move(kernels)), bias_("b", std::move(bias)) {
  if (kernels_.value.rank() != 3 || bias_.value.rank() != 1 ||
      bias_.value.size() != kernels_.value.extent(0)) {
    fail(ErrorCode::kShapeMismatch, "conv1d kernels must be [filters x Cin x K] with bias [filters]");
  }
}

template <typename T>
BasicTensor<T> Conv1dLayer<T>::forward(const BasicTensor<T>& x, Mode mode) {
  const std::size_t cin = in_channels(), nf = filters(), taps = kernel_size();
  std::size_t n = 0;
  if (x.rank() == 1 && cin == 1) {
    n = x.size();
  } else if (x.rank() == 2 && x.extent(0) == cin) {
    n = x.extent(1);
  } else {
    fail(ErrorCode::kShapeMismatch, "conv1d expects [" + std::to_string(cin) + " x n], got " +
                                        shape_to_string(x.shape()));
  }
  if (taps > n) {
    fail(ErrorCode::kKernelTooLong, "kernel length " + std::to_string(taps) +
                                        " exceeds input length " + std::to_string(n));
  }
  const std::size_t len = n - taps + 1;
  BasicTensor<T> out({nf, len});
  const auto xv = x.data();
  const auto kv = kernels_.value.data();
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      BasicTensor<T> channel({n}, std::vector<T>(xv.begin() + ci * n, xv.begin() + (ci + 1) * n));
      BasicTensor<T> kernel(
          {taps}, std::vector<T>(kv.begin() + (f * cin + ci) * taps,
                                 kv.begin() + (f * cin + ci + 1) * taps));
      const T b = ci == 0 ? bias_.value[f] : T(0);
      const auto partial = conv1d_valid(channel, kernel, b);
      for (std::size_t t = 0; t < len; ++t) out.at(f, t) += partial[t];
    }
  }
  if (mode == Mode::kTrain) cached_input_ = x;
  return out;
}

template <typename T>
BasicTensor<T> Conv1dLayer<T>::backward(const BasicTensor<T>& grad_out) {
  if (!cached_input_) no_cache(kind());
  const BasicTensor<T> x = std::move(*cached_input_);
  cached_input_.reset();
  const std::size_t cin = in_channels(), nf = filters(), taps = kernel_size();
  const std::size_t n = x.size() / cin, len = n - taps + 1;
  require_same_shape(grad_out, {nf, len}, "conv1d_backward");

  BasicTensor<T> grad_in(x.shape());
  auto gi = grad_in.data();
  auto dk = kernels_.grad.data();
  const auto kv = kernels_.value.data();
  const auto xv = x.data();
  for (std::size_t f = 0; f < nf; ++f) {
    T db = T(0);
    for (std::size_t t = 0; t < len; ++t) db += grad_out.at(f, t);
    bias_.grad[f] += db;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* xc = xv.data() + ci * n;
      T* gc = gi.data() + ci * n;
      const std::size_t kbase = (f * cin + ci) * taps;
      for (std::size_t k = 0; k < taps; ++k) {
        T acc = T(0);
        const T w = kv[kbase + k];
        for (std::size_t t = 0; t < len; ++t) {
          const T g = grad_out.at(f, t);
          acc += g * xc[t + k];
          gc[t + k] += g * w;
        }
        dk[kbase + k] += acc;
      }
    }
  }
  return grad_in;
}

template <typename T>
std::unique_ptr<Layer<double>> Conv1dLayer<T>::clone_f64() const {
  auto out = std::make_unique<Conv1dLayer<double>>(kernels_.value.template cast<double>(),
                                                   bias_.value.template cast<double>());
  auto params = out->parameters();
  params[0]->grad = kernels_.grad.template cast<double>();
  params[1]->grad = bias_.grad.template cast<double>();
  return out;
}

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2dLayer<T>::Conv2dLayer(std::size_t in_channels, std::size_t out_channels,
                            std::size_t kernel_size, std::size_t stride, Rng& rng)
    : kernels_("W", he_uniform<T>({kernel_size, kernel_size, in_channels, out_channels},
                                  kernel_size * kernel_size * in_channels, rng)),
      bias_("b", BasicTensor<T>({out_channels})),
      stride_(stride) {
  if (stride == 0) fail(ErrorCode::kInvalidExtent, "conv2d stride must be positive");
}

template <typename T>
Conv2dLayer<T>::Conv2dLayer(BasicTensor<T> kernels, BasicTensor<T> bias, std::size_t stride)
    : kernels_("W", std::move(kernels)), bias_("b", std::move(bias)), stride_(stride) {
  if (kernels_.value.rank() != 4 || bias_.value.rank() != 1 ||
      bias_.value.size() != kernels_.value.extent(3)) {
    fail(ErrorCode::kShapeMismatch, "conv2d kernels must be [kh x kw x Cin x Cout] with bias [Cout]");
  }
  if (stride == 0) fail(ErrorCode::kInvalidExtent, "conv2d stride must be positive");
}

template <typename T>
BasicTensor<T> Conv2dLayer<T>::forward(const BasicTensor<T>& x, Mode mode) {
  auto y = conv2d(x, kernels_.value, bias_.value, stride_);
  if (mode == Mode::kTrain) cached_input_ = x;
  return y;
}

template <typename T>
BasicTensor<T> Conv2dLayer<T>::backward(const BasicTensor<T>& grad_out) {
  if (!cached_input_) no_cache(kind());
  const BasicTensor<T> x = std::move(*cached_input_);
  cached_input_.reset();
  const auto& ks = kernels_.value.shape();
  const std::size_t kh = ks[0], kw = ks[1], cin = ks[2], cout = ks[3];
  const std::size_t w = x.extent(1);
  const std::size_t oh = conv_output_extent(x.extent(0), kh, stride_);
  const std::size_t ow = conv_output_extent(w, kw, stride_);
  require_same_shape(grad_out, {oh, ow, cout}, "conv2d_backward");

  BasicTensor<T> grad_in(x.shape());
  auto gi = grad_in.data();
  auto dk = kernels_.grad.data();
  auto db = bias_.grad.data();
  const auto kv = kernels_.value.data();
  const auto xv = x.data();
  const auto gv = grad_out.data();
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      const T* g = gv.data() + (i * ow + j) * cout;
      for (std::size_t co = 0; co < cout; ++co) db[co] += g[co];
      for (std::size_t di = 0; di < kh; ++di) {
        for (std::size_t dj = 0; dj < kw; ++dj) {
          const std::size_t xoff = ((i * stride_ + di) * w + (j * stride_ + dj)) * cin;
          const std::size_t koff = (di * kw + dj) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const T xval = xv[xoff + ci];
            const T* krow = kv.data() + koff + ci * cout;
            T* dkrow = dk.data() + koff + ci * cout;
            T acc = T(0);
            for (std::size_t co = 0; co < cout; ++co) {
              dkrow[co] += g[co] * xval;
              acc += g[co] * krow[co];
            }
            gi[xoff + ci] += acc;
          }
        }
      }
    }
  }
  return grad_in;
}

template <typename T>
std::unique_ptr<Layer<double>> Conv2dLayer<T>::clone_f64() const {
  auto out = std::make_unique<Conv2dLayer<double>>(kernels_.value.template cast<double>(),
                                                   bias_.value.template cast<double>(), stride_);
  auto params = out->parameters();
  params[0]->grad = kernels_.grad.template cast<double>();
  params[1]->grad = bias_.grad.template cast<double>();
  return out;
}

// ---------------------------------------------------------------- Flatten

template <typename T>
BasicTensor<T> FlattenLayer<T>::forward(const BasicTensor<T>& x, Mode mode) {
  if (mode == Mode::kTrain) cached_shape_ = x.shape();
  return x.reshaped({x.size()});
}

template <typename T>
BasicTensor<T> FlattenLayer<T>::backward(const BasicTensor<T>& grad_out) {
  if (!cached_shape_) no_cache(kind());
  Shape shape = std::move(*cached_shape_);
  cached_shape_.reset();
  return grad_out.reshaped(std::move(shape));
}

template <typename T>
std::unique_ptr<Layer<double>> FlattenLayer<T>::clone_f64() const {
  return std::make_unique<FlattenLayer<double>>();
}

// ---------------------------------------------------------------- Sequential

template <typename T>
BasicTensor<T> Sequential<T>::forward(const BasicTensor<T>& x, Mode mode) {
  BasicTensor<T> a = x;
  for (auto& layer : layers_) a = layer->forward(a, mode);
  return a;
}

template <typename T>
BasicTensor<T> Sequential<T>::backward(const BasicTensor<T>& grad_out) {
  BasicTensor<T> g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename T>
std::vector<std::pair<std::string, Parameter<T>*>> Sequential<T>::named_parameters() {
  std::vector<std::pair<std::string, Parameter<T>*>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (auto* p : layers_[i]->parameters()) out.emplace_back(std::to_string(i) + "." + p->name, p);
  }
  return out;
}

template <typename T>
std::size_t Sequential<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    for (const auto* p : layer->parameters()) n += p->value.size();
  }
  return n;
}

template <typename T>
void Sequential<T>::zero_grad() {
  for (auto& layer : layers_) layer->zero_grad();
}

template <typename T>
Sequential<double> Sequential<T>::clone_f64() const {
  Sequential<double> out;
  for (const auto& layer : layers_) out.push_back(layer->clone_f64());
  return out;
}

#define GAPNET_INSTANTIATE_NN(T)  \
  template class DenseLayer<T>;   \
  template class ReluLayer<T>;    \
  template class SigmoidLayer<T>; \
  template class DropoutLayer<T>; \
  template class GapLayer<T>;     \
  template class Conv1dLayer<T>;  \
  template class Conv2dLayer<T>;  \
  template class FlattenLayer<T>; \
  template class Sequential<T>;

GAPNET_INSTANTIATE_NN(float)
GAPNET_INSTANTIATE_NN(double)

#undef GAPNET_INSTANTIATE_NN

}  // namespace gapnet::nn
