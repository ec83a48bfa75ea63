#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace capx {

// Dense row-major pixel plane: rows() = height, cols() = width.
template <typename Scalar>
using Plane = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using GrayImage = Plane<std::uint8_t>;
using FloatPlane = Plane<float>;
using Mask = Plane<std::uint8_t>;  // entries are 0 or 1

// Raw frame as decoded from disk: interleaved 8-bit samples, 1 or 3 channels.
struct Frame {
  std::string id;
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;  // row-major, length = width*height*channels

  static Frame make(std::string id, int width, int height, int channels);

  std::uint8_t at(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t& at(int y, int x, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool valid() const {
    return width >= 1 && height >= 1 && (channels == 1 || channels == 3) &&
           data.size() == static_cast<std::size_t>(width) * height * channels;
  }
};

struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool inside(int image_width, int image_height) const {
    return w >= 1 && h >= 1 && x >= 0 && y >= 0 && x + w <= image_width &&
           y + h <= image_height;
  }
  bool operator==(const BoundingBox&) const = default;
};

enum class Label : std::uint8_t { capillary = 0, not_capillary = 1 };

const char* to_string(Label label);
Label label_from_string(const std::string& s);  // FormatError on unknown text

struct ClassifiedRegion {
  BoundingBox bbox;
  Mask mask;  // bbox.h x bbox.w, 1 marks region pixels
  Label label = Label::not_capillary;
  float confidence = 0.0f;
};

struct DensityResult {
  std::string frame_id;
  double density = 0.0;    // fraction of frame pixels in capillary masks
  double elapsed_s = 0.0;  // wall clock of the analyze call
  std::vector<ClassifiedRegion> regions;
};

// BT.601 luma, rounded to nearest. 1-channel frames pass through unchanged.
GrayImage to_grayscale(const Frame& frame);

// Frame view of a single plane (channels = 1).
Frame frame_from_gray(const GrayImage& gray, std::string id);

// Copy of `frame` with capillary regions drawn: black mask contours first,
// then a 1-px green bounding-box border. Non-capillary regions are untouched.
// 1-channel frames are promoted to RGB so the overlay has color.
Frame annotate(const Frame& frame, const DensityResult& result);

}  // namespace capx
