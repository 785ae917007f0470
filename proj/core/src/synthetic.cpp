#include "cpgan/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <stdexcept>

#include "cpgan/png_io.hpp"
#include "cpgan/rng.hpp"

namespace fs = std::filesystem;

namespace cpgan {

namespace {

struct Shape {
  double cx, cy, rx, ry, theta;
  float r, g, b;
};

void hsv_to_rgb(double h, double s, double v, float& r, float& g, float& b) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double rr = 0, gg = 0, bb = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: rr = c; gg = x; break;
    case 1: rr = x; gg = c; break;
    case 2: gg = c; bb = x; break;
    case 3: gg = x; bb = c; break;
    case 4: rr = x; bb = c; break;
    default: rr = c; bb = x; break;
  }
  const double m = v - c;
  r = static_cast<float>(rr + m);
  g = static_cast<float>(gg + m);
  b = static_cast<float>(bb + m);
}

double unit(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

/// Canonical pattern of one identity on a [0,1] RGB canvas (C x H x W).
Tensor<float> render_canonical(const SyntheticSpec& spec, int identity, float bg[3]) {
  std::mt19937_64 rng = make_rng(spec.seed, "identity/" + std::to_string(identity));
  for (int c = 0; c < 3; ++c) bg[c] = static_cast<float>(0.05 + 0.08 * unit(rng));
  const int n_shapes = 3 + static_cast<int>(rng() % 4);
  std::vector<Shape> shapes;
  for (int k = 0; k < n_shapes; ++k) {
    Shape s;
    const bool stroke = unit(rng) < 0.35;
    s.cx = 0.18 + 0.64 * unit(rng);
    s.cy = 0.18 + 0.64 * unit(rng);
    if (stroke) {
      s.rx = 0.18 + 0.20 * unit(rng);
      s.ry = 0.02 + 0.03 * unit(rng);
    } else {
      s.rx = 0.07 + 0.17 * unit(rng);
      s.ry = 0.07 + 0.17 * unit(rng);
    }
    s.theta = 3.14159265358979 * unit(rng);
    hsv_to_rgb(unit(rng), 0.55 + 0.45 * unit(rng), 0.55 + 0.45 * unit(rng), s.r, s.g, s.b);
    shapes.push_back(s);
  }

  const int n = spec.image_size;
  Tensor<float> canvas({3, n, n});
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int c = 0; c < 3; ++c) canvas.at(c, y, x) = bg[c];

  for (const Shape& s : shapes) {
    const double ct = std::cos(s.theta), st = std::sin(s.theta);
    for (int y = 0; y < n; ++y) {
      const double v = (y + 0.5) / n;
      for (int x = 0; x < n; ++x) {
        const double u = (x + 0.5) / n;
        const double du = u - s.cx, dv = v - s.cy;
        const double a = (du * ct + dv * st) / s.rx;
        const double b = (-du * st + dv * ct) / s.ry;
        const double d = a * a + b * b;
        const float alpha = static_cast<float>(std::clamp((1.0 - d) / 0.25, 0.0, 1.0));
        if (alpha <= 0.f) continue;
        canvas.at(0, y, x) += alpha * (s.r - canvas.at(0, y, x));
        canvas.at(1, y, x) += alpha * (s.g - canvas.at(1, y, x));
        canvas.at(2, y, x) += alpha * (s.b - canvas.at(2, y, x));
      }
    }
  }
  return canvas;
}

/// Perspective warp of the canonical plane rotated about the vertical axis;
/// bilinear resampling, background fill outside the source.
Tensor<float> warp_yaw(const Tensor<float>& src, double yaw, const float bg[3]) {
  const int n = src.dim(1);
  Tensor<float> out({3, n, n});
  const double cphi = std::cos(yaw), sphi = std::sin(yaw);
  for (int y = 0; y < n; ++y) {
    const double ys = (y + 0.5) / n * 2.0 - 1.0;
    for (int x = 0; x < n; ++x) {
      const double xs = (x + 0.5) / n * 2.0 - 1.0;
      // plane point seen at screen (xs, ys) with focal length = distance = 2
      const double denom = 2.0 * cphi - xs * sphi;
      if (std::abs(denom) < 1e-9) {
        for (int c = 0; c < 3; ++c) out.at(c, y, x) = bg[c];
        continue;
      }
      const double xp = 2.0 * xs / denom;
      const double yp = ys * (2.0 + xp * sphi) / 2.0;
      const double fx = (xp + 1.0) / 2.0 * n - 0.5;
      const double fy = (yp + 1.0) / 2.0 * n - 0.5;
      const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
      const double wx = fx - x0, wy = fy - y0;
      for (int c = 0; c < 3; ++c) {
        auto tap = [&](int yy, int xx) -> double {
          if (xx < 0 || xx >= n || yy < 0 || yy >= n) return bg[c];
          return src.at(c, yy, xx);
        };
        const double val = (1 - wy) * ((1 - wx) * tap(y0, x0) + wx * tap(y0, x0 + 1)) +
                           wy * ((1 - wx) * tap(y0 + 1, x0) + wx * tap(y0 + 1, x0 + 1));
        out.at(c, y, x) = static_cast<float>(val);
      }
    }
  }
  return out;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (num_identities < 1) throw std::invalid_argument("synthetic: num_identities must be >= 1");
  if (views_per_domain < 1) throw std::invalid_argument("synthetic: views_per_domain must be >= 1");
  if (image_size < 8) throw std::invalid_argument("synthetic: image_size must be >= 8");
  if (warp_magnitude < 0.0 || warp_magnitude > 1.0)
    throw std::invalid_argument("synthetic: warp_magnitude must be in [0, 1]");
  if (illumination_jitter < 0.0) throw std::invalid_argument("synthetic: illumination_jitter must be >= 0");
  if (num_folds < 1) throw std::invalid_argument("synthetic: num_folds must be >= 1");
  if (num_identities < num_folds)
    throw std::invalid_argument("synthetic: num_identities (" + std::to_string(num_identities) +
                                ") must be >= num_folds (" + std::to_string(num_folds) + ")");
}

Tensor<float> render_synthetic_view(const SyntheticSpec& spec, int identity, Domain domain, int view) {
  spec.validate();
  float bg[3];
  Tensor<float> canvas = render_canonical(spec, identity, bg);
  if (domain == Domain::kProfile && spec.warp_magnitude > 0.0)
    canvas = warp_yaw(canvas, spec.warp_magnitude * (3.14159265358979 / 3.0), bg);

  std::mt19937_64 jrng = make_rng(derive_seed(spec.seed, "identity/" + std::to_string(identity)),
                                  domain_name(domain) + "/view" + std::to_string(view));
  auto draw = [&jrng] { return std::uniform_real_distribution<double>(-1.0, 1.0)(jrng); };
  const double j = spec.illumination_jitter;
  const float brightness = static_cast<float>(1.0 + j * draw());
  float gain[3], offset;
  for (int c = 0; c < 3; ++c) gain[c] = static_cast<float>(1.0 + 0.4 * j * draw());
  offset = static_cast<float>(0.08 * j * draw());

  const int n = spec.image_size;
  Tensor<float> out({3, n, n});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const float lit = std::clamp(canvas.at(c, y, x) * brightness * gain[c] + offset, 0.f, 1.f);
        out.at(c, y, x) = lit * 2.f - 1.f;
      }
  return out;
}

DatasetManifest generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir))
    throw std::runtime_error("generate_synthetic: cannot create output directory " + out_dir);

  DatasetManifest m;
  m.height = m.width = spec.image_size;
  m.channels = 3;
  m.num_identities = spec.num_identities;
  m.num_folds = spec.num_folds;
  m.root = out_dir;

  char name[64];
  for (int id = 0; id < spec.num_identities; ++id) {
    for (Domain dom : {Domain::kProfile, Domain::kFrontal}) {
      for (int v = 0; v < spec.views_per_domain; ++v) {
        std::snprintf(name, sizeof(name), "id%03d_%s_v%02d.png", id, domain_name(dom).c_str(), v);
        write_png((fs::path(out_dir) / name).string(), render_synthetic_view(spec, id, dom, v));
        m.entries.push_back({id, dom, v, id % spec.num_folds, name});
      }
    }
  }
  save_manifest(m, (fs::path(out_dir) / "manifest.txt").string());
  return m;
}

}  // namespace cpgan
