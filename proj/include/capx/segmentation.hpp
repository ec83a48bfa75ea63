#pragma once

#include <span>
#include <vector>

#include "capx/cnn.hpp"
#include "capx/image.hpp"

namespace capx::seg {

// Adaptive per-pixel mixture of Gaussians, scalar luminance.
struct GmmConfig {
  int components = 3;             // K
  float learning_rate = 0.05f;    // alpha
  float match_threshold = 2.5f;   // lambda, in standard deviations
  float background_ratio = 0.8f;  // T
  float initial_variance = 225.0f;
  float variance_floor = 4.0f;
  float low_weight = 0.05f;  // weight given to a freshly seeded component
};

struct GaussianComponent {
  float weight = 0.0f;
  float mean = 0.0f;
  float variance = 0.0f;
};

class BackgroundModel {
 public:
  // Every pixel starts with one active component (weight 1, mean 0,
  // variance = initial_variance) and K-1 empty slots.
  BackgroundModel(int width, int height, const GmmConfig& config = {});

  // One adaptive update. A pixel matches a component when
  // |x - mean| <= lambda * sqrt(variance); the matched component moves by
  // rho = alpha / max(weight, alpha). With no match the lowest-ranked
  // component is replaced by (mean = x, variance = initial_variance,
  // weight = low_weight). Weights are renormalized and components kept
  // sorted by weight/sqrt(variance) descending.
  void update(const GrayImage& image);

  // Rounded mean of each pixel's top-ranked component.
  GrayImage background() const;

  int width() const { return width_; }
  int height() const { return height_; }
  const GmmConfig& config() const { return config_; }
  std::span<const GaussianComponent> pixel(int y, int x) const;

 private:
  int width_ = 0;
  int height_ = 0;
  GmmConfig config_;
  std::vector<GaussianComponent> components_;  // width*height*K, rank order
};

// Gaussian blur with sigma = kernel_radius / 2, kernel size 2*radius+1,
// clamp-to-edge borders. Background stand-in for single-still inputs.
GrayImage estimate_background_static(const GrayImage& image, int kernel_radius);

struct SsimConfig {
  int window = 7;         // odd, >= 3; uniform weights
  float c1 = 6.5025f;     // (0.01 * 255)^2
  float c2 = 58.5225f;    // (0.03 * 255)^2
};

using SimilarityMap = FloatPlane;  // per-pixel SSIM scores in [-1, 1]

// Windowed SSIM between two equally sized planes. Windows are clipped at the
// image border; statistics run over the intersection.
SimilarityMap ssim_map(const GrayImage& a, const GrayImage& b,
                       const SsimConfig& config = {});

// Pixel set iff its SSIM score is below tau.
Mask candidate_mask(const SimilarityMap& sim, float tau);

struct CandidateRegion {
  BoundingBox bbox;
  Mask mask;  // bbox.h x bbox.w, 1 marks the component's pixels

  int area() const { return static_cast<int>(mask.cast<int>().sum()); }
};

// 8-connected components of `mask` with area >= min_area, tight boxes,
// sorted by (y, x) of the box corner. When more than max_regions qualify the
// largest areas win before re-sorting.
std::vector<CandidateRegion> extract_regions(const Mask& mask, int min_area,
                                             int max_regions);

// Region bbox resampled bilinearly to out_size x out_size, scaled to [0,1],
// shape (out_size, out_size, 1).
cnn::Tensor crop_patch(const GrayImage& image, const CandidateRegion& region,
                       int out_size);

}  // namespace capx::seg
