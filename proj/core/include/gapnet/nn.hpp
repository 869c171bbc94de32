// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gapnet/rng.hpp"
#include "gapnet/tensor.hpp"

namespace gapnet::nn {

enum class Mode { kTrain, kEval };

/// One trainable tensor and its same-shaped gradient accumulator.
template <typename T>
struct Parameter {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;

  Parameter(std::string n, BasicTensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(BasicTensor<T>::zeros_like(value)) {}
};

/// A layer with a hand-derived backward pass.
///
/// forward() in kTrain mode caches what backward() needs; backward() consumes
/// that cache, so a second backward without an intervening training forward
/// throws NoCachedForward. Parameter gradients accumulate until zero_grad().
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string_view kind() const = 0;
  virtual BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) = 0;
  virtual BasicTensor<T> backward(const BasicTensor<T>& grad_out) = 0;
  virtual bool has_cache() const = 0;

  /// Deep copy re-typed to 64-bit, including parameters, masks and RNG state.
  virtual std::unique_ptr<Layer<double>> clone_f64() const = 0;

  virtual std::vector<Parameter<T>*> parameters() { return {}; }

  void zero_grad() {
    for (auto* p : parameters()) p->grad.fill(T(0));
  }
};

template <typename T>
class DenseLayer final : public Layer<T> {
 public:
  /// He-uniform weights U(-sqrt(6/din), sqrt(6/din)), zero bias.
  DenseLayer(std::size_t din, std::size_t dout, Rng& rng);
  /// Explicit weights [dout x din] and bias [dout].
  DenseLayer(BasicTensor<T> weight, BasicTensor<T> bias);

  std::string_view kind() const override { return "dense"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  bool has_cache() const override { return cached_input_.has_value(); }
  std::unique_ptr<Layer<double>> clone_f64() const override;
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }

  std::size_t in_features() const { return weight_.value.extent(1); }
  std::size_t out_features() const { return weight_.value.extent(0); }
  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  Parameter<T> weight_;
  Parameter<T> bias_;
  std::optional<BasicTensor<T>> cached_input_;
};

template <typename T>
class ReluLayer final : public Layer<T> {
 public:
  std::string_view kind() const override { return "relu"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  bool has_cache() const override { return cached_input_.has_value(); }
  std::unique_ptr<Layer<double>> clone_f64() const override;

 private:
  std::optional<BasicTensor<T>> cached_input_;
};

/// sigma(x) = 1 / (1 + e^-x), clamped strictly inside (0, 1).
template <typename T>
class SigmoidLayer final : public Layer<T> {
 public:
  std::string_view kind() const override { return "sigmoid"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  bool has_cache() const override { return cached_output_.has_value(); }
  std::unique_ptr<Layer<double>> clone_f64() const override;

 private:
  std::optional<BasicTensor<T>> cached_output_;
};

/// Inverted dropout. kEval is the exact identity; kTrain zeroes each element
/// with probability `rate` and scales survivors by 1 / (1 - rate).
template <typename T>
class DropoutLayer final : public Layer<T> {
 public:
  DropoutLayer(double rate, std::uint64_t seed);

  std::string_view kind() const override { return "dropout"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  bool has_cache() const override { return cached_mask_.has_value(); }
  std::unique_ptr<Layer<double>> clone_f64() const override;

  double rate() const { return rate_; }

  /// Pins the keep-mask (entries 0 or 1) used by every kTrain forward until
  /// cleared. Gradient checks rely on this to make kTrain deterministic.
  void set_fixed_mask(BasicTensor<T> keep);
  void clear_fixed_mask() { fixed_keep_.reset(); }

 private:
  template <typename U>
  friend class DropoutLayer;

  double rate_;
  Rng rng_;
  std::optional<BasicTensor<T>> fixed_keep_;
  std::optional<BasicTensor<T>> cached_mask_;
};

/// Global average pooling [H x W x C] -> [C].
template <typename T>
class GapLayer final : public Layer<T> {
 public:
  std::string_view kind() const override { return "gap"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  bool has_cache() const override { return cached_shape_.has_value(); }
  std::unique_ptr<Layer<double>> clone_f64() const override;

 private:
  std::optional<Shape> cached_shape_;
};

/// Multi-filter valid 1D convolution. Input is [n] (one channel) or
/// [Cin x n]; output is [filters x (n - K + 1)]. Kernels are [filters x Cin x K].
template <typename T>
class Conv1dLayer final : public Layer<T> {
 public:
  Conv1dLayer(std::size_t in_channels, std::size_t filters, std::size_t kernel_size, Rng& rng);
  Conv1dLayer(BasicTensor<T> kernels, BasicTensor<T> bias);

  std::string_view kind() const override { return "conv1d"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  bool has_cache() const override { return cached_input_.has_value(); }
  std::unique_ptr<Layer<double>> clone_f64() const override;
  std::vector<Parameter<T>*> parameters() override { return {&kernels_, &bias_}; }

  std::size_t filters() const { return kernels_.value.extent(0); }
  std::size_t in_channels() const { return kernels_.value.extent(1); }
  std::size_t kernel_size() const { return kernels_.value.extent(2); }

 private:
  Parameter<T> kernels_;
  Parameter<T> bias_;
  std::optional<BasicTensor<T>> cached_input_;
};

/// Valid 2D cross-correlation over [H x W x Cin] with [kh x kw x Cin x Cout] kernels.
template <typename T>
class Conv2dLayer final : public Layer<T> {
 public:
  Conv2dLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size,
              std::size_t stride, Rng& rng);
  Conv2dLayer(BasicTensor<T> kernels, BasicTensor<T> bias, std::size_t stride);

  std::string_view kind() const override { return "conv2d"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  bool has_cache() const override { return cached_input_.has_value(); }
  std::unique_ptr<Layer<double>> clone_f64() const override;
  std::vector<Parameter<T>*> parameters() override { return {&kernels_, &bias_}; }

  std::size_t stride() const { return stride_; }

 private:
  Parameter<T> kernels_;
  Parameter<T> bias_;
  std::size_t stride_;
  std::optional<BasicTensor<T>> cached_input_;
};

template <typename T>
class FlattenLayer final : public Layer<T> {
 public:
  std::string_view kind() const override { return "flatten"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  bool has_cache() const override { return cached_shape_.has_value(); }
  std::unique_ptr<Layer<double>> clone_f64() const override;

 private:
  std::optional<Shape> cached_shape_;
};

/// Ordered stack of owned layers.
template <typename T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }
  void push_back(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode);
  BasicTensor<T> backward(const BasicTensor<T>& grad_out);

  /// Parameters in layer order, named "<layer index>.<param name>".
  std::vector<std::pair<std::string, Parameter<T>*>> named_parameters();
  std::size_t parameter_count() const;
  void zero_grad();

  Sequential<double> clone_f64() const;

  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  Layer<T>& operator[](std::size_t i) { return *layers_[i]; }
  const Layer<T>& operator[](std::size_t i) const { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace gapnet::nn
