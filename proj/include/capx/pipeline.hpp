#pragma once

#include <span>
#include <string>
#include <vector>

#include "capx/cnn.hpp"
#include "capx/image.hpp"
#include "capx/segmentation.hpp"

namespace capx::pipeline {

enum class BackgroundMode { still, sequence };

const char* to_string(BackgroundMode mode);
BackgroundMode background_mode_from_string(const std::string& s);

struct PipelineConfig {
  BackgroundMode background_mode = BackgroundMode::still;
  int blur_radius = 12;  // still-mode background kernel radius
  seg::GmmConfig gmm;    // sequence-mode background model
  seg::SsimConfig ssim;
  float tau = 0.75f;
  int min_area = 25;
  int max_regions = 512;
  int input_size = 64;
  std::string weights_path;

  void validate() const;  // ConfigError on any out-of-range field
};

// One frame end to end: grayscale -> background -> SSIM -> candidate regions
// -> CNN labels -> density. Pure in everything but the elapsed measurement.
DensityResult analyze_frame(const Frame& frame, const cnn::CnnModel& model,
                            const PipelineConfig& config);

// Sequence mode: a mixture background model is updated with each frame in
// order and each frame is compared against the evolving background. Frames
// must share dimensions.
std::vector<DensityResult> analyze_sequence(std::span<const Frame> frames,
                                            const cnn::CnnModel& model,
                                            const PipelineConfig& config);

// |union of capillary-labelled masks| / (width*height); overlaps counted once.
double compute_density(std::span<const ClassifiedRegion> regions, int width,
                       int height);

}  // namespace capx::pipeline
