#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "capx/image.hpp"

namespace capx::cnn {

// Row-major float tensor, rank 1..4.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> dims);

  static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }

  int rank() const { return static_cast<int>(dims_.size()); }
  int dim(int i) const { return dims_[i]; }
  const std::vector<int>& dims() const { return dims_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& operator()(int i) { return data_[i]; }
  float operator()(int i) const { return data_[i]; }
  float& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * dims_[1] + j]; }
  float operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * dims_[1] + j];
  }
  float& operator()(int i, int j, int k) {
    return data_[(static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k];
  }
  float operator()(int i, int j, int k) const {
    return data_[(static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k];
  }
  float& operator()(int i, int j, int k, int l) {
    return data_[((static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
  }
  float operator()(int i, int j, int k, int l) const {
    return data_[((static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
  }

  Eigen::Map<Eigen::VectorXf> vec() {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }
  Eigen::Map<const Eigen::VectorXf> vec() const {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }

  bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }
  bool all_finite() const;

 private:
  std::vector<int> dims_;
  std::vector<float> data_;
};

enum class LayerKind : std::uint8_t { conv2d, maxpool2d, flatten, dense, relu, softmax };

struct Layer {
  LayerKind kind;
  std::string name;
  Tensor weights;  // conv: (k, k, C, F); dense: (N, M)
  Tensor bias;     // conv: (F); dense: (M)
  std::vector<int> in_shape;
  std::vector<int> out_shape;
};

struct CnnModel {
  std::vector<Layer> layers;
  std::vector<int> input_shape;  // (H, W, C)
  const std::vector<int>& output_shape() const { return layers.back().out_shape; }
};

struct Classification {
  Label label = Label::not_capillary;
  float confidence = 0.0f;
};

// Valid padding, stride 1:
// out[y,x,f] = bias[f] + sum_{dy,dx,c} in[y+dy, x+dx, c] * kernels[dy,dx,c,f].
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias);

// 2x2 windows, stride 2; a trailing odd row/column is dropped.
Tensor maxpool2d(const Tensor& input);

// out[j] = bias[j] + sum_i input[i] * weights[i,j].
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);

Tensor relu(const Tensor& t);

// Max-shifted exponential normalization; rank-1 input only.
Tensor softmax(const Tensor& t);

// Runs the layer chain; throws ShapeError at the first mismatching layer.
Tensor forward(const CnnModel& model, const Tensor& patch);

// Three conv blocks (32/64/128 filters, 3x3, each followed by relu and 2x2
// max pooling), flatten, dense 128 -> 64 -> 2; relu between dense layers and
// softmax at the end. Weights are zero-initialized. Throws ConfigError when
// pooling collapses a spatial dimension to zero.
CnnModel build_paper_architecture(int input_size = 64, int channels = 1);

// He-scaled deterministic initialization (SplitMix64 stream, uniform in
// +-sqrt(6/fan_in)); biases zero.
CnnModel gen_random_weights(std::uint64_t seed, int input_size = 64);

// CXW1 container: magic "CXW1", u32le record count, then per tensor record:
// u8 name length, name bytes, u8 rank, rank x u32le dims, then
// product(dims) x f32le row-major values. The first record, "input_shape",
// carries (H, W, C) as three floats; weighted layers follow in order as
// "<layer>.weight" / "<layer>.bias" pairs.
void save_weights(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_weights(const std::filesystem::path& path);

Classification classify_patch(const CnnModel& model, const Tensor& patch);

}  // namespace capx::cnn
