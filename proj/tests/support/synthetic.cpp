#include "synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace mitodet::testing {

StainColumns normalized(StainColumns m) {
  for (auto& col : m) {
    const double n = std::sqrt(col[0] * col[0] + col[1] * col[1] + col[2] * col[2]);
    for (auto& v : col) v /= n;
  }
  return m;
}

StainColumns random_stains(Rng& rng, double perturbation) {
  StainColumns m = kReferenceStains;
  for (auto& col : m) {
    for (auto& v : col) v = std::max(0.01, v + perturbation * (2.0 * rng.uniform01() - 1.0));
  }
  return normalized(m);
}

RgbImage stain_image(const StainColumns& m_in, int width, int height, Rng& rng,
                     const StainImageOptions& opts) {
  const StainColumns m = normalized(m_in);
  RgbImage img(width, height, 255);
  auto data = img.data();
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const double u = rng.uniform01();
    double ch = 0.0;
    double ce = 0.0;
    if (u < opts.background_fraction) {
      // white background
    } else if (u < opts.background_fraction + opts.pure_fraction) {
      ch = 0.3 + (opts.max_conc_h - 0.3) * rng.uniform01();
    } else if (u < opts.background_fraction + 2 * opts.pure_fraction) {
      ce = 0.3 + (opts.max_conc_e - 0.3) * rng.uniform01();
    } else {
      ch = 0.1 + (opts.max_conc_h - 0.1) * rng.uniform01();
      ce = 0.1 + (opts.max_conc_e - 0.1) * rng.uniform01();
    }
    if (opts.single_stain) {
      ce = 0.0;
      if (u >= opts.background_fraction && ch == 0.0) ch = 0.3 + 0.9 * rng.uniform01();
    }
    for (std::size_t c = 0; c < 3; ++c) {
      const double od = m[0][c] * ch + m[1][c] * ce;
      const double v = std::round(255.0 * std::pow(10.0, -od));
      data[3 * i + c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  }
  return img;
}

double cosine(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace mitodet::testing
