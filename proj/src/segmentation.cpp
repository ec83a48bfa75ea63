#include "capx/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "capx/errors.hpp"

namespace capx::seg {

namespace {

void validate_gmm_config(const GmmConfig& cfg) {
  if (cfg.components < 1) throw ConfigError("gmm: components must be >= 1");
  if (!(cfg.learning_rate > 0.0f) || cfg.learning_rate > 1.0f) {
    throw ConfigError("gmm: learning_rate must be in (0, 1]");
  }
  if (!(cfg.match_threshold > 0.0f)) throw ConfigError("gmm: match_threshold must be > 0");
  if (!(cfg.background_ratio > 0.0f) || cfg.background_ratio > 1.0f) {
    throw ConfigError("gmm: background_ratio must be in (0, 1]");
  }
  if (!(cfg.variance_floor > 0.0f)) throw ConfigError("gmm: variance_floor must be > 0");
  if (cfg.initial_variance < cfg.variance_floor) {
    throw ConfigError("gmm: initial_variance below variance_floor");
  }
  if (!(cfg.low_weight > 0.0f) || cfg.low_weight > 1.0f) {
    throw ConfigError("gmm: low_weight must be in (0, 1]");
  }
}

inline float rank_key(const GaussianComponent& c) {
  return c.variance > 0.0f ? c.weight / std::sqrt(c.variance) : 0.0f;
}

// Insertion sort by rank key descending; K is tiny.
inline void resort(GaussianComponent* comps, int k_count) {
  for (int i = 1; i < k_count; ++i) {
    GaussianComponent c = comps[i];
    const float key = rank_key(c);
    int j = i - 1;
    while (j >= 0 && rank_key(comps[j]) < key) {
      comps[j + 1] = comps[j];
      --j;
    }
    comps[j + 1] = c;
  }
}

}  // namespace

BackgroundModel::BackgroundModel(int width, int height, const GmmConfig& config)
    : width_(width), height_(height), config_(config) {
  if (width < 1 || height < 1) throw ConfigError("background model: bad dimensions");
  validate_gmm_config(config);
  components_.assign(static_cast<std::size_t>(width) * height * config.components, {});
  for (std::size_t p = 0; p < static_cast<std::size_t>(width) * height; ++p) {
    GaussianComponent& c = components_[p * config.components];
    c.weight = 1.0f;
    c.mean = 0.0f;
    c.variance = config.initial_variance;
  }
}

void BackgroundModel::update(const GrayImage& image) {
  if (image.cols() != width_ || image.rows() != height_) {
    throw DimensionMismatch("background update: image dimensions do not match model");
  }
  const int k_count = config_.components;
  const float alpha = config_.learning_rate;
  const float lambda = config_.match_threshold;

  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      GaussianComponent* comps =
          &components_[(static_cast<std::size_t>(y) * width_ + x) * k_count];
      const float v = static_cast<float>(image(y, x));

      int matched = -1;
      for (int k = 0; k < k_count; ++k) {
        if (comps[k].weight <= 0.0f) continue;
        const float d = v - comps[k].mean;
        if (std::abs(d) <= lambda * std::sqrt(comps[k].variance)) {
          matched = k;
          break;
        }
      }

      if (matched >= 0) {
        GaussianComponent& c = comps[matched];
        const float rho = alpha / std::max(c.weight, alpha);
        const float d = v - c.mean;
        c.mean += rho * d;
        c.variance += rho * (d * d - c.variance);
        c.variance = std::max(c.variance, config_.variance_floor);
        for (int k = 0; k < k_count; ++k) {
          comps[k].weight = (1.0f - alpha) * comps[k].weight + (k == matched ? alpha : 0.0f);
        }
      } else {
        comps[k_count - 1] = {config_.low_weight, v, config_.initial_variance};
      }

      float sum = 0.0f;
      for (int k = 0; k < k_count; ++k) sum += comps[k].weight;
      for (int k = 0; k < k_count; ++k) comps[k].weight /= sum;
      resort(comps, k_count);
    }
  }
}

GrayImage BackgroundModel::background() const {
  GrayImage out(height_, width_);
  const int k_count = config_.components;
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const GaussianComponent& top =
          components_[(static_cast<std::size_t>(y) * width_ + x) * k_count];
      const long v = std::lround(top.mean);
      out(y, x) = static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
    }
  }
  return out;
}

std::span<const GaussianComponent> BackgroundModel::pixel(int y, int x) const {
  return {&components_[(static_cast<std::size_t>(y) * width_ + x) * config_.components],
          static_cast<std::size_t>(config_.components)};
}

GrayImage estimate_background_static(const GrayImage& image, int kernel_radius) {
  if (kernel_radius < 1) throw ConfigError("blur: kernel_radius must be >= 1");
  const int r = kernel_radius;
  const float sigma = static_cast<float>(r) / 2.0f;
  std::vector<float> kernel(2 * r + 1);
  float norm = 0.0f;
  for (int i = -r; i <= r; ++i) {
    kernel[i + r] = std::exp(-static_cast<float>(i * i) / (2.0f * sigma * sigma));
    norm += kernel[i + r];
  }
  for (float& w : kernel) w /= norm;

  const int h = static_cast<int>(image.rows());
  const int w = static_cast<int>(image.cols());
  FloatPlane tmp(h, w);
  // Horizontal pass, clamp-to-edge.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -r; i <= r; ++i) {
        const int sx = std::clamp(x + i, 0, w - 1);
        acc += kernel[i + r] * static_cast<float>(image(y, sx));
      }
      tmp(y, x) = acc;
    }
  }
  GrayImage out(h, w);
  // Vertical pass.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -r; i <= r; ++i) {
        const int sy = std::clamp(y + i, 0, h - 1);
        acc += kernel[i + r] * tmp(sy, x);
      }
      const long v = std::lround(acc);
      out(y, x) = static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
    }
  }
  return out;
}

SimilarityMap ssim_map(const GrayImage& a, const GrayImage& b, const SsimConfig& config) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch("ssim: input dimensions differ");
  }
  if (config.window < 3 || config.window % 2 == 0) {
    throw ConfigError("ssim: window must be odd and >= 3");
  }
  const int h = static_cast<int>(a.rows());
  const int w = static_cast<int>(a.cols());
  const int r = config.window / 2;
  const double c1 = config.c1;
  const double c2 = config.c2;

  SimilarityMap out(h, w);

  // Clipped-window box sums of (a, b, a^2, b^2, ab): vertical running column
  // sums in double, then a horizontal sliding window per output row.
  std::vector<double> col_a(w, 0.0), col_b(w, 0.0), col_aa(w, 0.0), col_bb(w, 0.0),
      col_ab(w, 0.0);
  auto add_row = [&](int y, double sign) {
    for (int x = 0; x < w; ++x) {
      const double va = a(y, x);
      const double vb = b(y, x);
      col_a[x] += sign * va;
      col_b[x] += sign * vb;
      col_aa[x] += sign * va * va;
      col_bb[x] += sign * vb * vb;
      col_ab[x] += sign * va * vb;
    }
  };
  for (int y = 0; y < std::min(r + 1, h); ++y) add_row(y, 1.0);
  int rows_in = std::min(r + 1, h);

  for (int y = 0; y < h; ++y) {
    if (y > 0) {
      if (y + r < h) {
        add_row(y + r, 1.0);
        ++rows_in;
      }
      if (y - r - 1 >= 0) {
        add_row(y - r - 1, -1.0);
        --rows_in;
      }
    }
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    const int x0_count = std::min(r + 1, w);
    for (int x = 0; x < x0_count; ++x) {
      sa += col_a[x];
      sb += col_b[x];
      saa += col_aa[x];
      sbb += col_bb[x];
      sab += col_ab[x];
    }
    int cols_in = x0_count;
    for (int x = 0; x < w; ++x) {
      if (x > 0) {
        if (x + r < w) {
          const int xi = x + r;
          sa += col_a[xi];
          sb += col_b[xi];
          saa += col_aa[xi];
          sbb += col_bb[xi];
          sab += col_ab[xi];
          ++cols_in;
        }
        if (x - r - 1 >= 0) {
          const int xi = x - r - 1;
          sa -= col_a[xi];
          sb -= col_b[xi];
          saa -= col_aa[xi];
          sbb -= col_bb[xi];
          sab -= col_ab[xi];
          --cols_in;
        }
      }
      const double n = static_cast<double>(rows_in) * cols_in;
      const double mu_a = sa / n;
      const double mu_b = sb / n;
      const double var_a = saa / n - mu_a * mu_a;
      const double var_b = sbb / n - mu_b * mu_b;
      const double cov = sab / n - mu_a * mu_b;
      const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
      const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
      out(y, x) = static_cast<float>(num / den);
    }
  }
  return out;
}

Mask candidate_mask(const SimilarityMap& sim, float tau) {
  if (tau < -1.0f || tau > 1.0f) throw ConfigError("candidate_mask: tau outside [-1, 1]");
  Mask mask(sim.rows(), sim.cols());
  for (int y = 0; y < sim.rows(); ++y)
    for (int x = 0; x < sim.cols(); ++x) mask(y, x) = sim(y, x) < tau ? 1 : 0;
  return mask;
}

std::vector<CandidateRegion> extract_regions(const Mask& mask, int min_area,
                                             int max_regions) {
  if (min_area < 1) throw ConfigError("extract_regions: min_area must be >= 1");
  if (max_regions < 0) throw ConfigError("extract_regions: max_regions must be >= 0");
  const int h = static_cast<int>(mask.rows());
  const int w = static_cast<int>(mask.cols());

  std::vector<std::int32_t> labels(static_cast<std::size_t>(h) * w, 0);
  struct Blob {
    int min_x, min_y, max_x, max_y, area;
  };
  std::vector<Blob> blobs;  // blob i has label i+1
  std::vector<std::int32_t> stack;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (mask(y, x) == 0 || labels[idx] != 0) continue;
      const std::int32_t id = static_cast<std::int32_t>(blobs.size()) + 1;
      Blob blob{x, y, x, y, 0};
      labels[idx] = id;
      stack.push_back(static_cast<std::int32_t>(idx));
      while (!stack.empty()) {
        const std::int32_t p = stack.back();
        stack.pop_back();
        const int py = p / w;
        const int px = p % w;
        ++blob.area;
        blob.min_x = std::min(blob.min_x, px);
        blob.max_x = std::max(blob.max_x, px);
        blob.min_y = std::min(blob.min_y, py);
        blob.max_y = std::max(blob.max_y, py);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dy == 0 && dx == 0) continue;
            const int ny = py + dy, nx = px + dx;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
            if (mask(ny, nx) != 0 && labels[nidx] == 0) {
              labels[nidx] = id;
              stack.push_back(static_cast<std::int32_t>(nidx));
            }
          }
        }
      }
      blobs.push_back(blob);
    }
  }

  struct Kept {
    std::int32_t id;
    Blob blob;
  };
  std::vector<Kept> kept;
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    if (blobs[i].area >= min_area) kept.push_back({static_cast<std::int32_t>(i) + 1, blobs[i]});
  }
  auto yx_order = [](const Kept& a, const Kept& b) {
    return std::tie(a.blob.min_y, a.blob.min_x, a.id) <
           std::tie(b.blob.min_y, b.blob.min_x, b.id);
  };
  if (static_cast<int>(kept.size()) > max_regions) {
    std::sort(kept.begin(), kept.end(), [&](const Kept& a, const Kept& b) {
      if (a.blob.area != b.blob.area) return a.blob.area > b.blob.area;
      return yx_order(a, b);
    });
    kept.resize(max_regions);
  }
  std::sort(kept.begin(), kept.end(), yx_order);

  std::vector<CandidateRegion> regions;
  regions.reserve(kept.size());
  for (const Kept& k : kept) {
    CandidateRegion region;
    region.bbox = {k.blob.min_x, k.blob.min_y, k.blob.max_x - k.blob.min_x + 1,
                   k.blob.max_y - k.blob.min_y + 1};
    region.mask = Mask::Zero(region.bbox.h, region.bbox.w);
    for (int y = 0; y < region.bbox.h; ++y) {
      for (int x = 0; x < region.bbox.w; ++x) {
        const std::size_t idx =
            static_cast<std::size_t>(y + region.bbox.y) * w + (x + region.bbox.x);
        if (labels[idx] == k.id) region.mask(y, x) = 1;
      }
    }
    regions.push_back(std::move(region));
  }
  return regions;
}

cnn::Tensor crop_patch(const GrayImage& image, const CandidateRegion& region,
                       int out_size) {
  if (out_size < 1) throw ConfigError("crop_patch: out_size must be >= 1");
  const BoundingBox& bb = region.bbox;
  if (!bb.inside(static_cast<int>(image.cols()), static_cast<int>(image.rows()))) {
    throw DimensionMismatch("crop_patch: bbox outside image");
  }
  cnn::Tensor patch({out_size, out_size, 1});
  const float sx = static_cast<float>(bb.w) / static_cast<float>(out_size);
  const float sy = static_cast<float>(bb.h) / static_cast<float>(out_size);
  for (int oy = 0; oy < out_size; ++oy) {
    // Pixel-center mapping, clamped to the box.
    float fy = (static_cast<float>(oy) + 0.5f) * sy - 0.5f;
    fy = std::clamp(fy, 0.0f, static_cast<float>(bb.h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, bb.h - 1);
    const float wy = fy - static_cast<float>(y0);
    for (int ox = 0; ox < out_size; ++ox) {
      float fx = (static_cast<float>(ox) + 0.5f) * sx - 0.5f;
      fx = std::clamp(fx, 0.0f, static_cast<float>(bb.w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, bb.w - 1);
      const float wx = fx - static_cast<float>(x0);
      const float p00 = image(bb.y + y0, bb.x + x0);
      const float p01 = image(bb.y + y0, bb.x + x1);
      const float p10 = image(bb.y + y1, bb.x + x0);
      const float p11 = image(bb.y + y1, bb.x + x1);
      const float top = p00 + wx * (p01 - p00);
      const float bot = p10 + wx * (p11 - p10);
      patch(oy, ox, 0) = (top + wy * (bot - top)) / 255.0f;
    }
  }
  return patch;
}

}  // namespace capx::seg
