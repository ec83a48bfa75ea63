#include "capx/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <utility>

#include "capx/errors.hpp"
#include "capx/rng.hpp"

namespace capx::cnn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;

std::int64_t shape_product(const std::vector<int>& dims) {
  std::int64_t p = 1;
  for (int d : dims) p *= d;
  return p;
}

std::string shape_str(const std::vector<int>& dims) {
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

}  // namespace

Tensor::Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.empty() || dims_.size() > 4) throw ShapeError("tensor rank must be 1..4");
  for (int d : dims_) {
    if (d < 0) throw ShapeError("tensor dims must be >= 0");
  }
  data_.assign(static_cast<std::size_t>(shape_product(dims_)), 0.0f);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v); });
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  if (input.rank() != 3) throw ShapeError("conv2d: input must be rank 3 (H,W,C)");
  if (kernels.rank() != 4) throw ShapeError("conv2d: kernels must be rank 4 (k,k,C,F)");
  if (bias.rank() != 1) throw ShapeError("conv2d: bias must be rank 1");
  const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
  const int k = kernels.dim(0);
  const int f = kernels.dim(3);
  if (kernels.dim(1) != k) throw ShapeError("conv2d: kernels must be square");
  if (kernels.dim(2) != c) {
    throw ShapeError("conv2d: kernel channels " + std::to_string(kernels.dim(2)) +
                     " do not match input channels " + std::to_string(c));
  }
  if (bias.dim(0) != f) throw ShapeError("conv2d: bias length does not match filters");
  if (k > h || k > w) throw ShapeError("conv2d: kernel larger than input");

  const int oh = h - k + 1;
  const int ow = w - k + 1;

  // im2col: one row per output pixel, one GEMM against the (k*k*C, F) kernel
  // matrix, which is exactly the row-major kernel tensor.
  RowMat cols(static_cast<Eigen::Index>(oh) * ow, static_cast<Eigen::Index>(k) * k * c);
  const float* in = input.data();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      float* row = cols.data() + (static_cast<std::size_t>(oy) * ow + ox) * (k * k * c);
      for (int dy = 0; dy < k; ++dy) {
        const float* src = in + (static_cast<std::size_t>(oy + dy) * w + ox) * c;
        std::memcpy(row + static_cast<std::size_t>(dy) * k * c, src,
                    sizeof(float) * static_cast<std::size_t>(k) * c);
      }
    }
  }
  ConstRowMap kmat(kernels.data(), static_cast<Eigen::Index>(k) * k * c, f);
  Eigen::Map<const Eigen::RowVectorXf> bvec(bias.data(), f);

  Tensor out({oh, ow, f});
  RowMap omat(out.data(), static_cast<Eigen::Index>(oh) * ow, f);
  omat.noalias() = cols * kmat;
  omat.rowwise() += bvec;
  return out;
}

Tensor maxpool2d(const Tensor& input) {
  if (input.rank() != 3) throw ShapeError("maxpool2d: input must be rank 3 (H,W,F)");
  const int h = input.dim(0), w = input.dim(1), f = input.dim(2);
  if (h < 2 || w < 2) throw ShapeError("maxpool2d: input smaller than 2x2");
  const int oh = h / 2;
  const int ow = w / 2;
  Tensor out({oh, ow, f});
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      for (int ch = 0; ch < f; ++ch) {
        const float a = input(2 * y, 2 * x, ch);
        const float b = input(2 * y, 2 * x + 1, ch);
        const float c = input(2 * y + 1, 2 * x, ch);
        const float d = input(2 * y + 1, 2 * x + 1, ch);
        out(y, x, ch) = std::max(std::max(a, b), std::max(c, d));
      }
    }
  }
  return out;
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (input.rank() != 1) throw ShapeError("dense: input must be rank 1");
  if (weights.rank() != 2) throw ShapeError("dense: weights must be rank 2 (N,M)");
  if (bias.rank() != 1) throw ShapeError("dense: bias must be rank 1");
  const int n = weights.dim(0);
  const int m = weights.dim(1);
  if (input.dim(0) != n) {
    throw ShapeError("dense: input length " + std::to_string(input.dim(0)) +
                     " does not match weights rows " + std::to_string(n));
  }
  if (bias.dim(0) != m) throw ShapeError("dense: bias length does not match weights cols");
  Tensor out({m});
  ConstRowMap wmat(weights.data(), n, m);
  out.vec().noalias() = wmat.transpose() * input.vec();
  out.vec() += bias.vec();
  return out;
}

Tensor relu(const Tensor& t) {
  Tensor out = t;
  out.vec() = out.vec().cwiseMax(0.0f);
  return out;
}

Tensor softmax(const Tensor& t) {
  if (t.rank() != 1 || t.dim(0) < 1) throw ShapeError("softmax: rank-1 input required");
  Tensor out = t;
  const float peak = out.vec().maxCoeff();
  out.vec() = (out.vec().array() - peak).exp();
  out.vec() /= out.vec().sum();
  return out;
}

namespace {

std::vector<int> conv_out_shape(const std::vector<int>& in, const Tensor& kernels) {
  return {in[0] - kernels.dim(0) + 1, in[1] - kernels.dim(1) + 1, kernels.dim(3)};
}

Tensor flatten(const Tensor& t) {
  Tensor out({static_cast<int>(t.size())});
  std::copy_n(t.data(), t.size(), out.data());
  return out;
}

}  // namespace

Tensor forward(const CnnModel& model, const Tensor& patch) {
  if (patch.dims() != model.input_shape) {
    throw ShapeError("forward: patch shape " + shape_str(patch.dims()) +
                     " does not match model input " + shape_str(model.input_shape));
  }
  Tensor t = patch;
  for (const Layer& layer : model.layers) {
    if (t.dims() != layer.in_shape) {
      throw ShapeError("forward: layer " + layer.name + " expects " +
                       shape_str(layer.in_shape) + ", got " + shape_str(t.dims()));
    }
    switch (layer.kind) {
      case LayerKind::conv2d:
        t = conv2d(t, layer.weights, layer.bias);
        break;
      case LayerKind::maxpool2d:
        t = maxpool2d(t);
        break;
      case LayerKind::flatten:
        t = flatten(t);
        break;
      case LayerKind::dense:
        t = dense(t, layer.weights, layer.bias);
        break;
      case LayerKind::relu:
        t = relu(t);
        break;
      case LayerKind::softmax:
        t = softmax(t);
        break;
    }
  }
  return t;
}

CnnModel build_paper_architecture(int input_size, int channels) {
  if (input_size < 1 || channels < 1) throw ConfigError("cnn: bad input shape");
  const int conv_filters[3] = {32, 64, 128};
  const int dense_units[3] = {128, 64, 2};

  CnnModel model;
  model.input_shape = {input_size, input_size, channels};
  std::vector<int> shape = model.input_shape;

  auto push = [&](Layer layer) {
    layer.in_shape = shape;
    shape = layer.out_shape;
    model.layers.push_back(std::move(layer));
  };

  for (int block = 0; block < 3; ++block) {
    const int f = conv_filters[block];
    if (shape[0] < 3 || shape[1] < 3) {
      throw ConfigError("cnn: input " + std::to_string(input_size) +
                        " collapses before conv" + std::to_string(block + 1));
    }
    Layer conv{LayerKind::conv2d, "conv" + std::to_string(block + 1),
               Tensor({3, 3, shape[2], f}), Tensor({f}), {}, {}};
    conv.out_shape = {shape[0] - 2, shape[1] - 2, f};
    push(std::move(conv));
    push({LayerKind::relu, "relu_conv" + std::to_string(block + 1), {}, {}, {}, shape});
    if (shape[0] / 2 < 1 || shape[1] / 2 < 1) {
      throw ConfigError("cnn: input " + std::to_string(input_size) +
                        " collapses at pool" + std::to_string(block + 1));
    }
    push({LayerKind::maxpool2d, "pool" + std::to_string(block + 1), {}, {},
          {}, {shape[0] / 2, shape[1] / 2, shape[2]}});
  }
  push({LayerKind::flatten, "flatten", {}, {}, {}, {shape[0] * shape[1] * shape[2]}});
  for (int i = 0; i < 3; ++i) {
    const int m = dense_units[i];
    Layer fc{LayerKind::dense, "dense" + std::to_string(i + 1),
             Tensor({shape[0], m}), Tensor({m}), {}, {m}};
    push(std::move(fc));
    if (i + 1 < 3) {
      push({LayerKind::relu, "relu_dense" + std::to_string(i + 1), {}, {}, {}, shape});
    } else {
      push({LayerKind::softmax, "softmax", {}, {}, {}, shape});
    }
  }
  return model;
}

CnnModel gen_random_weights(std::uint64_t seed, int input_size) {
  CnnModel model = build_paper_architecture(input_size);
  SplitMix64 rng(seed);
  for (Layer& layer : model.layers) {
    if (layer.kind != LayerKind::conv2d && layer.kind != LayerKind::dense) continue;
    const int fan_in = layer.kind == LayerKind::conv2d
                           ? layer.weights.dim(0) * layer.weights.dim(1) * layer.weights.dim(2)
                           : layer.weights.dim(0);
    const float limit = std::sqrt(6.0f / static_cast<float>(fan_in));
    for (std::int64_t i = 0; i < layer.weights.size(); ++i) {
      layer.weights.data()[i] =
          static_cast<float>(rng.next_double(-limit, limit));
    }
    // biases stay zero
  }
  return model;
}

namespace {

constexpr char kMagic[4] = {'C', 'X', 'W', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  const std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                             static_cast<std::uint8_t>(v >> 16),
                             static_cast<std::uint8_t>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("cxw1: truncated header field");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_record(std::ostream& out, const std::string& name, const Tensor& t) {
  if (name.size() > 255) throw FormatError("cxw1: record name too long");
  const std::uint8_t len = static_cast<std::uint8_t>(name.size());
  out.write(reinterpret_cast<const char*>(&len), 1);
  out.write(name.data(), len);
  const std::uint8_t rank = static_cast<std::uint8_t>(t.rank());
  out.write(reinterpret_cast<const char*>(&rank), 1);
  for (int i = 0; i < t.rank(); ++i) write_u32(out, static_cast<std::uint32_t>(t.dim(i)));
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size()) * 4);
}

struct Record {
  std::string name;
  Tensor tensor;
};

Record read_record(std::istream& in) {
  std::uint8_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 1);
  if (!in) throw FormatError("cxw1: truncated record");
  std::string name(len, '\0');
  in.read(name.data(), len);
  std::uint8_t rank = 0;
  in.read(reinterpret_cast<char*>(&rank), 1);
  if (!in) throw FormatError("cxw1: truncated record header");
  if (rank < 1 || rank > 4) throw FormatError("cxw1: bad tensor rank");
  std::vector<int> dims(rank);
  std::int64_t count = 1;
  for (int i = 0; i < rank; ++i) {
    const std::uint32_t d = read_u32(in);
    if (d == 0 || d > (1u << 24)) throw FormatError("cxw1: bad dimension");
    dims[i] = static_cast<int>(d);
    count *= d;
    if (count > (1LL << 31)) throw FormatError("cxw1: tensor too large");
  }
  Tensor t(dims);
  in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(count) * 4);
  if (!in) throw FormatError("cxw1: truncated tensor data");
  if (!t.all_finite()) throw FormatError("cxw1: non-finite weight value");
  return {std::move(name), std::move(t)};
}

}  // namespace

void save_weights(const CnnModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path.string());

  std::vector<std::pair<std::string, const Tensor*>> records;
  Tensor input_shape({3});
  for (int i = 0; i < 3; ++i) input_shape(i) = static_cast<float>(model.input_shape[i]);
  records.emplace_back("input_shape", &input_shape);
  for (const Layer& layer : model.layers) {
    if (layer.kind != LayerKind::conv2d && layer.kind != LayerKind::dense) continue;
    records.emplace_back(layer.name + ".weight", &layer.weights);
    records.emplace_back(layer.name + ".bias", &layer.bias);
  }

  out.write(kMagic, 4);
  write_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& [name, tensor] : records) write_record(out, name, *tensor);
  if (!out) throw IoError("short write: " + path.string());
}

CnnModel load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("cxw1: bad magic");
  const std::uint32_t count = read_u32(in);
  if (count < 1 || count > 1024) throw FormatError("cxw1: implausible record count");

  std::vector<Record> records;
  records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) records.push_back(read_record(in));

  if (records[0].name != "input_shape" || records[0].tensor.rank() != 1 ||
      records[0].tensor.dim(0) != 3) {
    throw FormatError("cxw1: missing input_shape record");
  }
  const int in_h = static_cast<int>(records[0].tensor(0));
  const int in_w = static_cast<int>(records[0].tensor(1));
  const int in_c = static_cast<int>(records[0].tensor(2));
  if (in_h < 1 || in_w < 1 || in_c < 1 || in_h != in_w) {
    throw FormatError("cxw1: bad input shape");
  }

  CnnModel model;
  try {
    model = build_paper_architecture(in_h, in_c);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("cxw1: shape chain invalid: ") + e.what());
  }

  std::size_t next = 1;
  for (Layer& layer : model.layers) {
    if (layer.kind != LayerKind::conv2d && layer.kind != LayerKind::dense) continue;
    if (next >= records.size() || records[next].name != layer.name + ".weight") {
      throw FormatError("cxw1: expected record " + layer.name + ".weight");
    }
    if (records[next].tensor.dims() != layer.weights.dims()) {
      throw FormatError("cxw1: shape mismatch in " + records[next].name);
    }
    layer.weights = std::move(records[next].tensor);
    ++next;
    if (next >= records.size() || records[next].name != layer.name + ".bias") {
      throw FormatError("cxw1: expected record " + layer.name + ".bias");
    }
    if (records[next].tensor.dims() != layer.bias.dims()) {
      throw FormatError("cxw1: shape mismatch in " + records[next].name);
    }
    layer.bias = std::move(records[next].tensor);
    ++next;
  }
  if (next != records.size()) throw FormatError("cxw1: unexpected extra records");
  return model;
}

Classification classify_patch(const CnnModel& model, const Tensor& patch) {
  const Tensor probs = forward(model, patch);
  Classification c;
  // Exact ties go to not-capillary.
  if (probs(0) > probs(1)) {
    c.label = Label::capillary;
    c.confidence = probs(0);
  } else {
    c.label = Label::not_capillary;
    c.confidence = probs(1);
  }
  return c;
}

}  // namespace capx::cnn
