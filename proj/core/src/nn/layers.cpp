#include "ser/nn/layers.h"

#include <algorithm>
#include <cmath>
#include <Eigen/Core>

#include "ser/error.h"
#include "ser/nn/init.h"

namespace ser::nn {

namespace {

void check_width(const Layer& layer, const SeqBatch& x, std::size_t expected) {
  if (x.dim != expected) {
    throw Error("layer '" + layer.name() + "' expects width " + std::to_string(expected) + ", got " +
                std::to_string(x.dim));
  }
}

void check_same_shape(const Layer& layer, const SeqBatch& cached, const SeqBatch& grad, std::size_t width) {
  if (grad.batch != cached.batch || grad.steps != cached.steps || grad.dim != width) {
    throw Error("layer '" + layer.name() + "': gradient shape does not match the last forward pass");
  }
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<RowMat>;
using ConstMap = Eigen::Map<const RowMat>;
using ConstRowVec = Eigen::Map<const Eigen::RowVectorXd>;
using RowVecMap = Eigen::Map<Eigen::RowVectorXd>;

// Valid steps of every row, stacked (sum of lengths) x dim.
std::vector<double> gather_valid(const SeqBatch& x) {
  std::vector<double> out;
  out.reserve(x.valid_count() * x.dim);
  for (std::size_t b = 0; b < x.batch; ++b) {
    out.insert(out.end(), x.row(b, 0), x.row(b, 0) + x.lengths[b] * x.dim);
  }
  return out;
}

void scatter_valid(const double* rows, SeqBatch& y) {
  for (std::size_t b = 0; b < y.batch; ++b) {
    const std::size_t n = y.lengths[b] * y.dim;
    std::copy_n(rows, n, y.row(b, 0));
    rows += n;
  }
}

}  // namespace

void Layer::set_frozen(bool frozen) {
  frozen_ = frozen;
  for (Param* p : params()) p->frozen = frozen;
}

// ---------------------------------------------------------------- Dense

Dense::Dense(std::string name, std::size_t in, std::size_t out, bool bias)
    : Layer(std::move(name)), in_(in), out_(out), has_bias_(bias), weight_(this->name() + "/weight", {in, out}),
      bias_(this->name() + "/bias", {bias ? out : 0}) {}

std::vector<Param*> Dense::params() {
  if (has_bias_) return {&weight_, &bias_};
  return {&weight_};
}

void Dense::init_xavier(Rng& rng) {
  weight_.value = xavier_uniform_init(in_, out_, in_ * out_, rng);
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
}

SeqBatch Dense::forward(const SeqBatch& x, Mode) {
  check_width(*this, x, in_);
  input_ = x;
  SeqBatch y = SeqBatch::like(x, out_);
  const auto rows = gather_valid(x);
  RowMat out = ConstMap(rows.data(), static_cast<Eigen::Index>(rows.size() / in_), static_cast<Eigen::Index>(in_)) *
               ConstMap(weight_.value.data(), static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(out_));
  if (has_bias_) out.rowwise() += ConstRowVec(bias_.value.data(), static_cast<Eigen::Index>(out_));
  scatter_valid(out.data(), y);
  return y;
}

SeqBatch Dense::backward(const SeqBatch& g) {
  check_same_shape(*this, input_, g, out_);
  SeqBatch dx = SeqBatch::like(input_, in_);
  const auto xs = gather_valid(input_);
  const auto gs = gather_valid(g);
  const auto n = static_cast<Eigen::Index>(gs.size() / out_);
  const auto in = static_cast<Eigen::Index>(in_), out = static_cast<Eigen::Index>(out_);
  const ConstMap G(gs.data(), n, out);
  Map(weight_.grad.data(), in, out).noalias() += ConstMap(xs.data(), n, in).transpose() * G;
  if (has_bias_) RowVecMap(bias_.grad.data(), out) += G.colwise().sum();
  if (input_grad_needed()) {
    RowMat d = G * ConstMap(weight_.value.data(), in, out).transpose();
    scatter_valid(d.data(), dx);
  }
  return dx;
}

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(std::string name, std::size_t in, std::size_t out, std::size_t kernel, bool bias)
    : Layer(std::move(name)), in_(in), out_(out), kernel_(kernel), has_bias_(bias),
      weight_(this->name() + "/weight", {kernel, in, out}), bias_(this->name() + "/bias", {bias ? out : 0}) {
  if (kernel_ % 2 == 0) throw Error("conv1d '" + this->name() + "': kernel size must be odd");
}

std::vector<Param*> Conv1d::params() {
  if (has_bias_) return {&weight_, &bias_};
  return {&weight_};
}

void Conv1d::init_xavier(Rng& rng) {
  weight_.value = xavier_uniform_init(kernel_ * in_, kernel_ * out_, kernel_ * in_ * out_, rng);
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
}

SeqBatch Conv1d::forward(const SeqBatch& x, Mode) {
  check_width(*this, x, in_);
  input_ = x;
  SeqBatch y = SeqBatch::like(x, out_);
  // im2col over valid steps: row (b, t) holds x[b, t + k - half] for every
  // tap k, zero outside the row's valid prefix.
  const std::size_t width = kernel_ * in_;
  const std::size_t n = x.valid_count();
  cols_.assign(n * width, 0.0);
  const auto half = static_cast<std::ptrdiff_t>(kernel_ / 2);
  std::size_t r = 0;
  for (std::size_t b = 0; b < x.batch; ++b) {
    const auto len = static_cast<std::ptrdiff_t>(x.lengths[b]);
    for (std::ptrdiff_t t = 0; t < len; ++t, ++r) {
      double* dst = cols_.data() + r * width;
      for (std::size_t k = 0; k < kernel_; ++k) {
        const std::ptrdiff_t s = t + static_cast<std::ptrdiff_t>(k) - half;
        if (s < 0 || s >= len) continue;
        std::copy_n(x.row(b, static_cast<std::size_t>(s)), in_, dst + k * in_);
      }
    }
  }
  const auto rows = static_cast<Eigen::Index>(n), w = static_cast<Eigen::Index>(width),
             out = static_cast<Eigen::Index>(out_);
  RowMat res = ConstMap(cols_.data(), rows, w) * ConstMap(weight_.value.data(), w, out);
  if (has_bias_) res.rowwise() += ConstRowVec(bias_.value.data(), out);
  scatter_valid(res.data(), y);
  return y;
}

SeqBatch Conv1d::backward(const SeqBatch& g) {
  check_same_shape(*this, input_, g, out_);
  SeqBatch dx = SeqBatch::like(input_, in_);
  const std::size_t width = kernel_ * in_;
  const auto gs = gather_valid(g);
  const auto n = static_cast<Eigen::Index>(gs.size() / out_);
  const auto w = static_cast<Eigen::Index>(width), out = static_cast<Eigen::Index>(out_);
  const ConstMap G(gs.data(), n, out);
  Map(weight_.grad.data(), w, out).noalias() += ConstMap(cols_.data(), n, w).transpose() * G;
  if (has_bias_) RowVecMap(bias_.grad.data(), out) += G.colwise().sum();
  if (!input_grad_needed()) return dx;

  const RowMat dcols = G * ConstMap(weight_.value.data(), w, out).transpose();
  const auto half = static_cast<std::ptrdiff_t>(kernel_ / 2);
  std::size_t r = 0;
  for (std::size_t b = 0; b < dx.batch; ++b) {
    const auto len = static_cast<std::ptrdiff_t>(dx.lengths[b]);
    for (std::ptrdiff_t t = 0; t < len; ++t, ++r) {
      const double* src = dcols.data() + r * width;
      for (std::size_t k = 0; k < kernel_; ++k) {
        const std::ptrdiff_t s = t + static_cast<std::ptrdiff_t>(k) - half;
        if (s < 0 || s >= len) continue;
        double* dst = dx.row(b, static_cast<std::size_t>(s));
        for (std::size_t d = 0; d < in_; ++d) dst[d] += src[k * in_ + d];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(std::string name, std::size_t channels, double momentum, double epsilon)
    : Layer(std::move(name)), channels_(channels), momentum_(momentum), epsilon_(epsilon),
      gamma_(this->name() + "/gamma", {channels}), beta_(this->name() + "/beta", {channels}), running_mean_(this->name() + "/running_mean", {channels}),
      running_var_(this->name() + "/running_var", {channels}) {
  std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0);
  std::fill(running_var_.value.begin(), running_var_.value.end(), 1.0);
}

std::vector<Param*> BatchNorm::params() { return {&gamma_, &beta_}; }
std::vector<Param*> BatchNorm::buffers() { return {&running_mean_, &running_var_}; }

SeqBatch BatchNorm::forward(const SeqBatch& x, Mode mode) {
  check_width(*this, x, channels_);
  const std::size_t n = x.valid_count();
  if (n == 0) throw Error("batchnorm '" + name() + "': no valid elements");
  used_batch_stats_ = training(mode);

  std::vector<double> mean(channels_, 0.0), var(channels_, 0.0);
  if (used_batch_stats_) {
    for (std::size_t b = 0; b < x.batch; ++b) {
      for (std::size_t t = 0; t < x.lengths[b]; ++t) {
        const double* xr = x.row(b, t);
        for (std::size_t c = 0; c < channels_; ++c) mean[c] += xr[c];
      }
    }
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t b = 0; b < x.batch; ++b) {
      for (std::size_t t = 0; t < x.lengths[b]; ++t) {
        const double* xr = x.row(b, t);
        for (std::size_t c = 0; c < channels_; ++c) {
          const double d = xr[c] - mean[c];
          var[c] += d * d;
        }
      }
    }
    for (auto& v : var) v /= static_cast<double>(n);
    for (std::size_t c = 0; c < channels_; ++c) {
      running_mean_.value[c] = momentum_ * running_mean_.value[c] + (1.0 - momentum_) * mean[c];
      running_var_.value[c] = momentum_ * running_var_.value[c] + (1.0 - momentum_) * var[c];
    }
  } else {
    mean = running_mean_.value;
    var = running_var_.value;
  }

  inv_std_.resize(channels_);
  for (std::size_t c = 0; c < channels_; ++c) inv_std_[c] = 1.0 / std::sqrt(var[c] + epsilon_);

  xhat_ = SeqBatch::like(x, channels_);
  SeqBatch y = SeqBatch::like(x, channels_);
  for (std::size_t b = 0; b < x.batch; ++b) {
    for (std::size_t t = 0; t < x.lengths[b]; ++t) {
      const double* xr = x.row(b, t);
      double* hr = xhat_.row(b, t);
      double* yr = y.row(b, t);
      for (std::size_t c = 0; c < channels_; ++c) {
        hr[c] = (xr[c] - mean[c]) * inv_std_[c];
        yr[c] = gamma_.value[c] * hr[c] + beta_.value[c];
      }
    }
  }
  return y;
}

SeqBatch BatchNorm::backward(const SeqBatch& g) {
  check_same_shape(*this, xhat_, g, channels_);
  const auto n = static_cast<double>(xhat_.valid_count());
  std::vector<double> sum_g(channels_, 0.0), sum_gx(channels_, 0.0);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t t = 0; t < xhat_.lengths[b]; ++t) {
      const double* gr = g.row(b, t);
      const double* hr = xhat_.row(b, t);
      for (std::size_t c = 0; c < channels_; ++c) {
        sum_g[c] += gr[c];
        sum_gx[c] += gr[c] * hr[c];
      }
    }
  }
  for (std::size_t c = 0; c < channels_; ++c) {
    beta_.grad[c] += sum_g[c];
    gamma_.grad[c] += sum_gx[c];
  }

  SeqBatch dx = SeqBatch::like(xhat_, channels_);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t t = 0; t < xhat_.lengths[b]; ++t) {
      const double* gr = g.row(b, t);
      const double* hr = xhat_.row(b, t);
      double* dr = dx.row(b, t);
      for (std::size_t c = 0; c < channels_; ++c) {
        const double scale = gamma_.value[c] * inv_std_[c];
        if (used_batch_stats_) {
          dr[c] = scale * (gr[c] - sum_g[c] / n - hr[c] * sum_gx[c] / n);
        } else {
          dr[c] = scale * gr[c];
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- Relu

SeqBatch Relu::forward(const SeqBatch& x, Mode) {
  output_ = x;
  for (auto& v : output_.values) v = v > 0.0 ? v : 0.0;
  return output_;
}

SeqBatch Relu::backward(const SeqBatch& g) {
  check_same_shape(*this, output_, g, output_.dim);
  SeqBatch dx = g;
  for (std::size_t i = 0; i < dx.values.size(); ++i) {
    if (output_.values[i] <= 0.0) dx.values[i] = 0.0;
  }
  dx.zero_padding();
  return dx;
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(std::string name, double rate, std::uint64_t seed) : Layer(std::move(name)), rate_(rate), rng_(seed) {
  if (rate < 0.0 || rate >= 1.0) throw Error("dropout rate must lie in [0, 1)");
}

SeqBatch Dropout::forward(const SeqBatch& x, Mode mode) {
  scale_.clear();
  if (!training(mode) || !enabled_ || rate_ == 0.0) return x;
  SeqBatch y = x;
  scale_.resize(x.values.size());
  const double keep_scale = 1.0 / (1.0 - rate_);
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    scale_[i] = rng_.uniform() < rate_ ? 0.0 : keep_scale;
    y.values[i] *= scale_[i];
  }
  return y;
}

SeqBatch Dropout::backward(const SeqBatch& g) {
  if (scale_.empty()) return g;
  if (g.values.size() != scale_.size()) throw Error("dropout '" + name() + "': gradient shape mismatch");
  SeqBatch dx = g;
  for (std::size_t i = 0; i < dx.values.size(); ++i) dx.values[i] *= scale_[i];
  dx.zero_padding();
  return dx;
}

// ---------------------------------------------------------------- MaskedMeanPool

SeqBatch MaskedMeanPool::forward(const SeqBatch& x, Mode) {
  x.validate();
  steps_ = x.steps;
  lengths_ = x.lengths;
  SeqBatch y(x.batch, 1, x.dim);
  for (std::size_t b = 0; b < x.batch; ++b) {
    double* yr = y.row(b, 0);
    for (std::size_t t = 0; t < x.lengths[b]; ++t) {
      const double* xr = x.row(b, t);
      for (std::size_t d = 0; d < x.dim; ++d) yr[d] += xr[d];
    }
    const double inv = 1.0 / static_cast<double>(x.lengths[b]);
    for (std::size_t d = 0; d < x.dim; ++d) yr[d] *= inv;
  }
  return y;
}

SeqBatch MaskedMeanPool::backward(const SeqBatch& g) {
  if (g.steps != 1 || g.batch != lengths_.size()) throw Error("pool '" + name() + "': gradient shape mismatch");
  SeqBatch dx(g.batch, steps_, g.dim);
  dx.lengths = lengths_;
  for (std::size_t b = 0; b < g.batch; ++b) {
    const double inv = 1.0 / static_cast<double>(lengths_[b]);
    const double* gr = g.row(b, 0);
    for (std::size_t t = 0; t < lengths_[b]; ++t) {
      double* dr = dx.row(b, t);
      for (std::size_t d = 0; d < g.dim; ++d) dr[d] = gr[d] * inv;
    }
  }
  return dx;
}

// ---------------------------------------------------------------- ScalarMix

ScalarMix::ScalarMix(std::string name, std::size_t classes)
    : Layer(std::move(name)), classes_(classes), weight_(this->name() + "/weight", {2}), bias_(this->name() + "/bias", {classes}) {
  std::fill(weight_.value.begin(), weight_.value.end(), 1.0);
}

std::vector<Param*> ScalarMix::params() { return {&weight_, &bias_}; }

SeqBatch ScalarMix::forward(const SeqBatch& x, Mode) {
  check_width(*this, x, 2 * classes_);
  input_ = x;
  SeqBatch y = SeqBatch::like(x, classes_);
  for (std::size_t b = 0; b < x.batch; ++b) {
    for (std::size_t t = 0; t < x.lengths[b]; ++t) {
      const double* xr = x.row(b, t);
      double* yr = y.row(b, t);
      for (std::size_t c = 0; c < classes_; ++c) {
        yr[c] = weight_.value[0] * xr[c] + weight_.value[1] * xr[classes_ + c] + bias_.value[c];
      }
    }
  }
  return y;
}

SeqBatch ScalarMix::backward(const SeqBatch& g) {
  check_same_shape(*this, input_, g, classes_);
  SeqBatch dx = SeqBatch::like(input_, 2 * classes_);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t t = 0; t < input_.lengths[b]; ++t) {
      const double* gr = g.row(b, t);
      const double* xr = input_.row(b, t);
      double* dr = dx.row(b, t);
      for (std::size_t c = 0; c < classes_; ++c) {
        weight_.grad[0] += gr[c] * xr[c];
        weight_.grad[1] += gr[c] * xr[classes_ + c];
        bias_.grad[c] += gr[c];
        dr[c] = weight_.value[0] * gr[c];
        dr[classes_ + c] = weight_.value[1] * gr[c];
      }
    }
  }
  return dx;
}

}  // namespace ser::nn
