#pragma once

// Basin membership by orbit iteration, the exhaustion index and raster slices.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "basinforge/autoseq.hpp"

namespace basinforge {

inline constexpr double kDivergenceCeiling = 1e8;
inline constexpr std::size_t kDefaultMaxIter = 10000;
inline constexpr double kFallbackRadius = 0.5;

struct OrbitResult {
  bool member = false;
  std::optional<std::size_t> entry_index;
  double final_norm = 0.0;
  std::size_t iterations_used = 0;
  bool diverged = false;
};

/// Iterates f_t ∘ ... ∘ f_0 from p until the orbit enters the ball of `radius`.
inline OrbitResult orbit(const Sequence& seq, Point p, std::size_t max_iter, double radius,
                         double ceiling = kDivergenceCeiling) {
  if (max_iter < 1) throw std::invalid_argument("orbit: max_iter must be >= 1");
  if (!(radius > 0.0 && radius <= 1.0)) throw std::invalid_argument("orbit: radius must lie in (0, 1]");
  OrbitResult res;
  Point x = p;
  for (std::size_t t = 0;; ++t) {
    const double nrm = x.norm();
    res.final_norm = nrm;
    if (!std::isfinite(nrm) || nrm > ceiling) {
      res.diverged = true;
      return res;
    }
    if (nrm < radius) {
      res.member = true;
      res.entry_index = t;
      return res;
    }
    if (t == max_iter) return res;
    x = seq.apply(t, x);
    res.iterations_used = t + 1;
  }
}

inline std::optional<std::size_t> exhaustion_index(const Sequence& seq, Point p, std::size_t max_iter, double radius) {
  return orbit(seq, p, max_iter, radius).entry_index;
}

/// Membership radius: largest sampled radius with no bound violation, else 0.5.
inline double default_membership_radius(const SequenceSpec& spec, std::size_t n_max = 32, std::size_t samples = 64) {
  const auto rep = verify_uniform_bounds(spec, n_max, samples);
  return rep.clean_radius.value_or(kFallbackRadius);
}

/// Affine embedding of a real rectangle into C^2.
struct Slice {
  Point origin;
  Point dir1{1.0, 0.0};
  Point dir2{cplx{0.0, 1.0}, 0.0};
  double half_width1 = 1.0;
  double half_width2 = 1.0;

  /// Point for pixel (x, y); pixel centres, y grows downward.
  Point pixel(std::size_t x, std::size_t y, std::size_t width, std::size_t height) const {
    const double s = half_width1 * (2.0 * (static_cast<double>(x) + 0.5) / static_cast<double>(width) - 1.0);
    const double t = half_width2 * (1.0 - 2.0 * (static_cast<double>(y) + 0.5) / static_cast<double>(height));
    return origin + s * dir1 + t * dir2;
  }

  bool independent() const {
    const double a[4] = {dir1.z.real(), dir1.z.imag(), dir1.w.real(), dir1.w.imag()};
    const double b[4] = {dir2.z.real(), dir2.z.imag(), dir2.w.real(), dir2.w.imag()};
    double aa = 0, bb = 0, ab = 0;
    for (int i = 0; i < 4; ++i) {
      aa += a[i] * a[i];
      bb += b[i] * b[i];
      ab += a[i] * b[i];
    }
    return aa * bb - ab * ab > 1e-24 * std::max(1.0, aa * bb);
  }
};

struct BasinRaster {
  Slice slice;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::int32_t> data;  // entry index per pixel, -1 for non-members

  std::int32_t at(std::size_t x, std::size_t y) const { return data[y * width + x]; }
};

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BASINFORGE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline BasinRaster raster(Sequence& seq, const Slice& slice, std::size_t width, std::size_t height,
                          std::size_t max_iter, double radius, unsigned threads = 0) {
  if (!slice.independent()) throw std::invalid_argument("raster: slice directions are linearly dependent");
  BasinRaster out{slice, width, height, std::vector<std::int32_t>(width * height, -1)};
  if (width == 0 || height == 0) return out;
  seq.prefetch(max_iter + 1);
  const Sequence& view = seq;
  const unsigned nthreads = std::min<unsigned>(resolve_threads(threads), static_cast<unsigned>(height));
  auto work = [&](unsigned tid) {
    for (std::size_t y = tid; y < height; y += nthreads)
      for (std::size_t x = 0; x < width; ++x) {
        const auto r = orbit(view, slice.pixel(x, y, width, height), max_iter, radius);
        out.data[y * width + x] = r.entry_index ? static_cast<std::int32_t>(*r.entry_index) : -1;
      }
  };
  if (nthreads <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Raster output: PGM (P5), lossless CSV and a JSON sidecar.

/// Members are shaded by min(entry_index, 254); non-members are 255.
inline void write_pgm(std::ostream& os, const BasinRaster& r) {
  os << "P5\n" << r.width << ' ' << r.height << "\n255\n";
  for (std::int32_t v : r.data) {
    const unsigned char c = v < 0 ? 255 : static_cast<unsigned char>(std::min<std::int32_t>(v, 254));
    os.put(static_cast<char>(c));
  }
}

inline void write_csv(std::ostream& os, const BasinRaster& r) {
  os << "x,y,entry_index\n";
  for (std::size_t y = 0; y < r.height; ++y)
    for (std::size_t x = 0; x < r.width; ++x) os << x << ',' << y << ',' << r.at(x, y) << '\n';
}

inline nlohmann::json point_to_json(Point p) { return {p.z.real(), p.z.imag(), p.w.real(), p.w.imag()}; }
inline Point point_from_json(const nlohmann::json& j) {
  return {{j.at(0).get<double>(), j.at(1).get<double>()}, {j.at(2).get<double>(), j.at(3).get<double>()}};
}

inline nlohmann::json to_json(const Slice& s) {
  return {{"origin", point_to_json(s.origin)}, {"dir1", point_to_json(s.dir1)}, {"dir2", point_to_json(s.dir2)},
          {"half_width1", s.half_width1}, {"half_width2", s.half_width2}};
}

inline Slice slice_from_json(const nlohmann::json& j) {
  Slice s;
  s.origin = point_from_json(j.at("origin"));
  s.dir1 = point_from_json(j.at("dir1"));
  s.dir2 = point_from_json(j.at("dir2"));
  s.half_width1 = j.at("half_width1").get<double>();
  s.half_width2 = j.at("half_width2").get<double>();
  return s;
}

inline nlohmann::json raster_sidecar(const BasinRaster& r, const SequenceSpec& spec, std::size_t max_iter, double radius) {
  std::size_t members = 0;
  for (auto v : r.data) members += v >= 0;
  return {{"slice", to_json(r.slice)}, {"width", r.width},      {"height", r.height},
          {"max_iter", max_iter},      {"radius", radius},      {"spec_hash", spec_hash(spec)},
          {"members", members},        {"non_member_sentinel", -1}};
}

}  // namespace basinforge
