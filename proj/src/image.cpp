#include "capx/image.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "capx/errors.hpp"

namespace capx {

Frame Frame::make(std::string id, int width, int height, int channels) {
  if (width < 1 || height < 1 || (channels != 1 && channels != 3)) {
    throw std::invalid_argument("Frame::make: bad dimensions " +
                                std::to_string(width) + "x" + std::to_string(height) +
                                "x" + std::to_string(channels));
  }
  Frame f;
  f.id = std::move(id);
  f.width = width;
  f.height = height;
  f.channels = channels;
  f.data.assign(static_cast<std::size_t>(width) * height * channels, 0);
  return f;
}

const char* to_string(Label label) {
  return label == Label::capillary ? "capillary" : "not-capillary";
}

Label label_from_string(const std::string& s) {
  if (s == "capillary") return Label::capillary;
  if (s == "not-capillary") return Label::not_capillary;
  throw FormatError("unknown label: " + s);
}

GrayImage to_grayscale(const Frame& frame) {
  GrayImage out(frame.height, frame.width);
  if (frame.channels == 1) {
    for (int y = 0; y < frame.height; ++y)
      for (int x = 0; x < frame.width; ++x) out(y, x) = frame.at(y, x, 0);
    return out;
  }
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const float r = frame.at(y, x, 0);
      const float g = frame.at(y, x, 1);
      const float b = frame.at(y, x, 2);
      const long v = std::lround(0.299f * r + 0.587f * g + 0.114f * b);
      out(y, x) = static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
    }
  }
  return out;
}

Frame frame_from_gray(const GrayImage& gray, std::string id) {
  Frame f = Frame::make(std::move(id), static_cast<int>(gray.cols()),
                        static_cast<int>(gray.rows()), 1);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) f.at(y, x, 0) = gray(y, x);
  return f;
}

namespace {

void set_rgb(Frame& f, int y, int x, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  f.at(y, x, 0) = r;
  f.at(y, x, 1) = g;
  f.at(y, x, 2) = b;
}

bool is_contour(const Mask& mask, int y, int x) {
  if (mask(y, x) == 0) return false;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (dy == 0 && dx == 0) continue;
      const int ny = y + dy, nx = x + dx;
      if (ny < 0 || ny >= mask.rows() || nx < 0 || nx >= mask.cols()) return true;
      if (mask(ny, nx) == 0) return true;
    }
  }
  return false;
}

}  // namespace

Frame annotate(const Frame& frame, const DensityResult& result) {
  Frame out = Frame::make(frame.id, frame.width, frame.height, 3);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      if (frame.channels == 3) {
        set_rgb(out, y, x, frame.at(y, x, 0), frame.at(y, x, 1), frame.at(y, x, 2));
      } else {
        const std::uint8_t v = frame.at(y, x, 0);
        set_rgb(out, y, x, v, v, v);
      }
    }
  }
  for (const ClassifiedRegion& region : result.regions) {
    if (region.label != Label::capillary) continue;
    const BoundingBox& bb = region.bbox;
    if (!bb.inside(frame.width, frame.height)) {
      throw DimensionMismatch("annotate: region box outside frame");
    }
    // Mask contour in black.
    for (int my = 0; my < region.mask.rows(); ++my) {
      for (int mx = 0; mx < region.mask.cols(); ++mx) {
        if (is_contour(region.mask, my, mx)) set_rgb(out, bb.y + my, bb.x + mx, 0, 0, 0);
      }
    }
    // Box border in green, drawn over any contour pixels it crosses.
    for (int x = bb.x; x < bb.x + bb.w; ++x) {
      set_rgb(out, bb.y, x, 0, 255, 0);
      set_rgb(out, bb.y + bb.h - 1, x, 0, 255, 0);
    }
    for (int y = bb.y; y < bb.y + bb.h; ++y) {
      set_rgb(out, y, bb.x, 0, 255, 0);
      set_rgb(out, y, bb.x + bb.w - 1, 0, 255, 0);
    }
  }
  return out;
}

}  // namespace capx
