// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <vector>

namespace vidanno {

/// Grayscale image with intensities in [0,1], row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0.0f) {}
  float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// Binary PGM (P5), 8 or 16 bit.
Image read_pgm(const std::filesystem::path& path);
void write_pgm(const Image& image, const std::filesystem::path& path);

/// Pixel (x, y) covers [x, x+1) x [y, y+1); samples outside the image read 0.
float sample_bilinear(const Image& image, double x, double y);

/// Per-frame pixels, fetched on demand.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual int width() const = 0;
  virtual int height() const = 0;
  virtual int frame_count() const = 0;
  /// `size` x `size` samples of the frame-pixel rectangle [x0,x1) x [y0,y1),
  /// taken at sample-cell centers.
  virtual Image crop(int frame, double x0, double y0, double x1, double y1, int size) const = 0;
};

/// A directory of `000000.pgm`, `000001.pgm`, ... frames of equal size.
class ImageDirSource : public FrameSource {
 public:
  explicit ImageDirSource(std::filesystem::path dir);

  int width() const override { return width_; }
  int height() const override { return height_; }
  int frame_count() const override { return count_; }
  Image crop(int frame, double x0, double y0, double x1, double y1, int size) const override;

 private:
  std::filesystem::path dir_;
  int width_ = 0, height_ = 0, count_ = 0;
  mutable std::mutex mu_;
  mutable int cached_frame_ = -1;
  mutable std::shared_ptr<const Image> cached_;
};

std::filesystem::path frame_image_path(const std::filesystem::path& dir, int frame);

}  // namespace vidanno
