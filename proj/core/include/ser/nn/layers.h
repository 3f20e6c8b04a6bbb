#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ser/nn/batch.h"
#include "ser/random.h"

namespace ser::nn {

/// A layer maps a SeqBatch to a SeqBatch and caches what its backward pass
/// needs. Outputs are zero at padded steps and padded inputs are never read,
/// so appending padding cannot change any valid output.
///
/// A frozen layer keeps its parameters (and batchnorm running statistics)
/// fixed and runs its stochastic/statistical parts in inference mode.
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const std::string& name() const { return name_; }
  virtual std::string_view kind() const = 0;

  virtual SeqBatch forward(const SeqBatch& x, Mode mode) = 0;
  /// Accumulates parameter gradients and returns d(loss)/d(input).
  virtual SeqBatch backward(const SeqBatch& grad_out) = 0;

  /// Trainable tensors.
  virtual std::vector<Param*> params() { return {}; }
  /// Non-trainable persistent tensors (running statistics).
  virtual std::vector<Param*> buffers() { return {}; }

  bool frozen() const { return frozen_; }
  void set_frozen(bool frozen);

  /// When false, backward may skip d(loss)/d(input) and return zeros (the
  /// layer sits at the bottom of the trainable part of the graph).
  void set_input_grad_needed(bool needed) { input_grad_needed_ = needed; }
  bool input_grad_needed() const { return input_grad_needed_; }

 protected:
  bool training(Mode mode) const { return mode == Mode::kTrain && !frozen_; }

 private:
  std::string name_;
  bool frozen_ = false;
  bool input_grad_needed_ = true;
};

/// Affine map applied independently to every valid step: y = x W (+ b).
class Dense final : public Layer {
 public:
  Dense(std::string name, std::size_t in, std::size_t out, bool bias);
  std::string_view kind() const override { return "dense"; }
  SeqBatch forward(const SeqBatch& x, Mode mode) override;
  SeqBatch backward(const SeqBatch& grad_out) override;
  std::vector<Param*> params() override;
  void init_xavier(Rng& rng);

  std::size_t in_dim() const { return in_; }
  std::size_t out_dim() const { return out_; }
  Param& weight() { return weight_; }  // in x out
  Param& bias() { return bias_; }
  bool has_bias() const { return has_bias_; }

 private:
  std::size_t in_, out_;
  bool has_bias_;
  Param weight_, bias_;
  SeqBatch input_;
};

/// Same-length cross-correlation over time with an odd kernel; steps
/// outside a row's valid prefix read as zero.
class Conv1d final : public Layer {
 public:
  Conv1d(std::string name, std::size_t in, std::size_t out, std::size_t kernel, bool bias);
  std::string_view kind() const override { return "conv1d"; }
  SeqBatch forward(const SeqBatch& x, Mode mode) override;
  SeqBatch backward(const SeqBatch& grad_out) override;
  std::vector<Param*> params() override;
  void init_xavier(Rng& rng);

  std::size_t kernel() const { return kernel_; }
  Param& weight() { return weight_; }  // kernel x in x out
  Param& bias() { return bias_; }

 private:
  std::size_t in_, out_, kernel_;
  bool has_bias_;
  Param weight_, bias_;
  SeqBatch input_;
  std::vector<double> cols_;  // valid rows x (kernel * in), im2col of the last input
};

/// Per-channel normalization with statistics over all valid steps of the
/// batch. Running statistics follow
/// running = momentum * running + (1 - momentum) * batch.
class BatchNorm final : public Layer {
 public:
  static constexpr double kDefaultMomentum = 0.9;
  static constexpr double kDefaultEpsilon = 1e-3;

  BatchNorm(std::string name, std::size_t channels, double momentum = kDefaultMomentum,
            double epsilon = kDefaultEpsilon);
  std::string_view kind() const override { return "batchnorm"; }
  SeqBatch forward(const SeqBatch& x, Mode mode) override;
  SeqBatch backward(const SeqBatch& grad_out) override;
  std::vector<Param*> params() override;
  std::vector<Param*> buffers() override;

  Param& gamma() { return gamma_; }
  Param& beta() { return beta_; }
  Param& running_mean() { return running_mean_; }
  Param& running_var() { return running_var_; }

 private:
  std::size_t channels_;
  double momentum_, epsilon_;
  Param gamma_, beta_, running_mean_, running_var_;
  SeqBatch xhat_;
  std::vector<double> inv_std_;
  bool used_batch_stats_ = false;
};

class Relu final : public Layer {
 public:
  explicit Relu(std::string name) : Layer(std::move(name)) {}
  std::string_view kind() const override { return "relu"; }
  SeqBatch forward(const SeqBatch& x, Mode mode) override;
  SeqBatch backward(const SeqBatch& grad_out) override;

 private:
  SeqBatch output_;
};

/// Inverted dropout: survivors are scaled by 1 / (1 - rate) in training;
/// identity at inference.
class Dropout final : public Layer {
 public:
  Dropout(std::string name, double rate, std::uint64_t seed = 0);
  std::string_view kind() const override { return "dropout"; }
  SeqBatch forward(const SeqBatch& x, Mode mode) override;
  SeqBatch backward(const SeqBatch& grad_out) override;

  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }
  double rate() const { return rate_; }
  void set_enabled(bool enabled) { enabled_ = enabled; }

 private:
  double rate_;
  bool enabled_ = true;
  Rng rng_;
  std::vector<double> scale_;  // per element: 0 or 1 / (1 - rate); empty when inactive
};

/// Mean over each row's valid steps; output has steps == 1.
class MaskedMeanPool final : public Layer {
 public:
  explicit MaskedMeanPool(std::string name) : Layer(std::move(name)) {}
  std::string_view kind() const override { return "pool"; }
  SeqBatch forward(const SeqBatch& x, Mode mode) override;
  SeqBatch backward(const SeqBatch& grad_out) override;

 private:
  std::size_t steps_ = 0;
  std::vector<std::size_t> lengths_;
};

/// Late-fusion alternative to a dense head: one scalar weight per modality.
/// Input is [logits_a (C), logits_b (C)]; y_c = w_a * a_c + w_b * b_c + bias_c.
class ScalarMix final : public Layer {
 public:
  ScalarMix(std::string name, std::size_t classes);
  std::string_view kind() const override { return "scalar_mix"; }
  SeqBatch forward(const SeqBatch& x, Mode mode) override;
  SeqBatch backward(const SeqBatch& grad_out) override;
  std::vector<Param*> params() override;
  Param& weight() { return weight_; }

 private:
  std::size_t classes_;
  Param weight_, bias_;
  SeqBatch input_;
};

}  // namespace ser::nn
