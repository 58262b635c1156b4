// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "frame_source.hpp"

#include "common.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vidanno {

namespace {

// Reads the next whitespace-delimited header token, skipping `#` comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  while (in) {
    int c = in.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  in >> tok;
  return tok;
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_not_found("image not found: " + path.string());
  if (pgm_token(in) != "P5") throw_format(path.string() + ": not a binary PGM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = static_cast<int>(parse_int(pgm_token(in)));
    h = static_cast<int>(parse_int(pgm_token(in)));
    maxval = static_cast<int>(parse_int(pgm_token(in)));
  } catch (const Error&) {
    throw_format(path.string() + ": bad PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw_format(path.string() + ": bad PGM header");
  in.get();
  Image img(w, h);
  const bool wide = maxval > 255;
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw_format(path.string() + ": truncated PGM data");
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const int v = wide ? (raw[2 * i] << 8 | raw[2 * i + 1]) : raw[i];
    img.pixels[i] = static_cast<float>(v) / maxval;
  }
  return img;
}

void write_pgm(const Image& image, const std::filesystem::path& path) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.reserve(out.size() + image.pixels.size());
  for (float p : image.pixels) {
    out.push_back(static_cast<char>(std::lround(std::clamp(p, 0.0f, 1.0f) * 255.0f)));
  }
  AtomicFile f(path);
  f.write(out);
  f.commit();
}

float sample_bilinear(const Image& image, double x, double y) {
  const double fx = x - 0.5, fy = y - 0.5;
  const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
  const double ax = fx - x0, ay = fy - y0;
  auto px = [&](int xi, int yi) -> double {
    if (xi < 0 || yi < 0 || xi >= image.width || yi >= image.height) return 0.0;
    return image.at(xi, yi);
  };
  const double top = (1 - ax) * px(x0, y0) + ax * px(x0 + 1, y0);
  const double bottom = (1 - ax) * px(x0, y0 + 1) + ax * px(x0 + 1, y0 + 1);
  return static_cast<float>((1 - ay) * top + ay * bottom);
}

std::filesystem::path frame_image_path(const std::filesystem::path& dir, int frame) {
  char name[32];
  std::snprintf(name, sizeof(name), "%06d.pgm", frame);
  return dir / name;
}

ImageDirSource::ImageDirSource(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_)) throw_not_found("frame directory not found: " + dir_.string());
  while (std::filesystem::exists(frame_image_path(dir_, count_))) ++count_;
  if (count_ == 0) throw_not_found(dir_.string() + ": no frames (expected 000000.pgm)");
  const Image first = read_pgm(frame_image_path(dir_, 0));
  width_ = first.width;
  height_ = first.height;
}

Image ImageDirSource::crop(int frame, double x0, double y0, double x1, double y1, int size) const {
  if (frame < 0 || frame >= count_) throw_invalid("frame " + std::to_string(frame) + " out of range");
  std::shared_ptr<const Image> img;
  {
    std::lock_guard lock(mu_);
    if (cached_frame_ != frame) {
      auto loaded = std::make_shared<Image>(read_pgm(frame_image_path(dir_, frame)));
      if (loaded->width != width_ || loaded->height != height_) {
        throw_format("frame " + std::to_string(frame) + " has a different size than frame 0");
      }
      cached_ = std::move(loaded);
      cached_frame_ = frame;
    }
    img = cached_;
  }
  Image out(size, size);
  const double sx = (x1 - x0) / size, sy = (y1 - y0) / size;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) out.at(c, r) = sample_bilinear(*img, x0 + (c + 0.5) * sx, y0 + (r + 0.5) * sy);
  }
  return out;
}

}  // namespace vidanno
