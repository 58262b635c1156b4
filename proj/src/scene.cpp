// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "scene.hpp"

#include "common.hpp"

#include <algorithm>
#include <cmath>

namespace vidanno {

namespace {

constexpr std::string_view kSceneMagic = "VIDANNO-SCENE/1";

// Smooth value noise over an integer lattice with the given cell size.
double value_noise(std::uint64_t seed, double x, double y, double cell) {
  const double fx = x / cell, fy = y / cell;
  const auto ix = static_cast<std::int64_t>(std::floor(fx));
  const auto iy = static_cast<std::int64_t>(std::floor(fy));
  const double ax = fx - ix, ay = fy - iy;
  const double sx = ax * ax * (3 - 2 * ax), sy = ay * ay * (3 - 2 * ay);
  const double v00 = hash_unit(seed, ix, iy, 0), v10 = hash_unit(seed, ix + 1, iy, 0);
  const double v01 = hash_unit(seed, ix, iy + 1, 0), v11 = hash_unit(seed, ix + 1, iy + 1, 0);
  return (1 - sy) * ((1 - sx) * v00 + sx * v10) + sy * ((1 - sx) * v01 + sx * v11);
}

}  // namespace

double hash_unit(std::uint64_t seed, std::int64_t a, std::int64_t b, std::int64_t c) {
  std::uint64_t h = mix_seed(seed, static_cast<std::uint64_t>(a));
  h = mix_seed(h, static_cast<std::uint64_t>(b));
  h = mix_seed(h, static_cast<std::uint64_t>(c));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

bool inside_ellipse(const BBox& box, double x, double y) {
  const double cx = 0.5 * (box.x_min + box.x_max), cy = 0.5 * (box.y_min + box.y_max);
  const double rx = 0.5 * box.width(), ry = 0.5 * box.height();
  const double dx = (x - cx) / rx, dy = (y - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

BBox SyntheticScene::distractor_box(std::size_t k, int frame) const {
  const BBox& t = ground_truth.at(frame);
  const Distractor& d = distractors.at(k);
  const double phi = d.phase + d.speed * frame;
  const double cx = t.center_x(), cy = t.center_y();
  return BBox::from_center(cx + d.radius * t.width() * std::cos(phi), cy + d.radius * t.height() * std::sin(phi),
                           d.scale * t.width(), d.scale * t.height());
}

double SyntheticScene::mask_value(int frame, double x, double y, std::uint64_t salt) const {
  if (x < 0 || y < 0 || x >= width || y >= height) return 0.0;
  if (inside_ellipse(ground_truth.at(frame), x, y)) return 1.0;
  for (std::size_t k = 0; k < distractors.size(); ++k) {
    if (inside_ellipse(distractor_box(k, frame), x, y)) return distractor_level;
  }
  // Noise keyed on the sub-pixel position so it is independent per query grid.
  const auto qx = static_cast<std::int64_t>(std::floor(x * 4));
  const auto qy = static_cast<std::int64_t>(std::floor(y * 4));
  const double u = hash_unit(mix_seed(seed, salt), frame, qx, qy);
  if (u < mask_noise_density) return mask_noise_level * (u / mask_noise_density);
  return 0.0;
}

float SyntheticScene::intensity(int frame, double x, double y) const {
  if (x < 0 || y < 0 || x >= width || y >= height) return 0.0f;
  const double tex = value_noise(seed, x, y, 6.0);
  double v = 0.25 + 0.2 * tex;
  if (inside_ellipse(ground_truth.at(frame), x, y)) {
    v = 0.75 + 0.15 * value_noise(seed ^ 0x5a5aULL, x, y, 3.0);
  } else {
    for (std::size_t k = 0; k < distractors.size(); ++k) {
      if (inside_ellipse(distractor_box(k, frame), x, y)) {
        v = 0.7 + 0.15 * value_noise(seed ^ (0xa5a5ULL + k), x, y, 3.0);
        break;
      }
    }
  }
  v += 0.05 * (hash_unit(seed, frame, static_cast<std::int64_t>(x), static_cast<std::int64_t>(y)) - 0.5);
  return static_cast<float>(std::clamp(v, 0.0, 1.0));
}

Image SyntheticFrameSource::crop(int frame, double x0, double y0, double x1, double y1, int size) const {
  if (frame < 0 || frame >= frame_count()) throw_invalid("frame " + std::to_string(frame) + " out of range");
  Image out(size, size);
  const double sx = (x1 - x0) / size, sy = (y1 - y0) / size;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) out.at(c, r) = scene_->intensity(frame, x0 + (c + 0.5) * sx, y0 + (r + 0.5) * sy);
  }
  return out;
}

void write_scene(const SyntheticScene& scene, const std::filesystem::path& path) {
  std::string out(kSceneMagic);
  out += '\n';
  out += "seed=" + std::to_string(scene.seed) + '\n';
  out += "width=" + std::to_string(scene.width) + '\n';
  out += "height=" + std::to_string(scene.height) + '\n';
  out += "mask_noise_density=" + format_double(scene.mask_noise_density) + '\n';
  out += "mask_noise_level=" + format_double(scene.mask_noise_level) + '\n';
  out += "distractor_level=" + format_double(scene.distractor_level) + '\n';
  for (const auto& d : scene.distractors) {
    out += "distractor=" + format_double(d.radius) + ',' + format_double(d.phase) + ',' + format_double(d.speed) +
           ',' + format_double(d.scale) + '\n';
  }
  write_text_file(path, out);
}

SyntheticScene read_scene(const std::filesystem::path& path) {
  SyntheticScene scene;
  bool header = false;
  int line_no = 0;
  const std::string text = read_text_file(path);
  for (auto line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    try {
      if (!header) {
        if (line != kSceneMagic) throw_format("bad scene header");
        header = true;
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw_format("expected key=value");
      const auto key = line.substr(0, eq);
      const auto value = line.substr(eq + 1);
      if (key == "seed") {
        scene.seed = static_cast<std::uint64_t>(std::stoull(std::string(value)));
      } else if (key == "width") {
        scene.width = static_cast<int>(parse_int(value));
      } else if (key == "height") {
        scene.height = static_cast<int>(parse_int(value));
      } else if (key == "mask_noise_density") {
        scene.mask_noise_density = parse_double(value);
      } else if (key == "mask_noise_level") {
        scene.mask_noise_level = parse_double(value);
      } else if (key == "distractor_level") {
        scene.distractor_level = parse_double(value);
      } else if (key == "distractor") {
        const auto f = split(value, ',');
        if (f.size() != 4) throw_format("distractor needs 4 fields");
        scene.distractors.push_back({parse_double(f[0]), parse_double(f[1]), parse_double(f[2]), parse_double(f[3])});
      } else {
        throw_format("unknown key '" + std::string(key) + "'");
      }
    } catch (const Error& e) {
      throw Error(ErrorCode::kFormat, path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kFormat, path.string() + ": line " + std::to_string(line_no) + ": bad value");
    }
  }
  if (!header) throw_format(path.string() + ": missing scene header");
  return scene;
}

}  // namespace vidanno
