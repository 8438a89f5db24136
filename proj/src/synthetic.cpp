#include "u1/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "u1/labels.hpp"

namespace u1 {

Dataset make_gaussian_blobs(std::size_t n_classes, std::size_t dim, std::size_t per_class,
                            double center_scale, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> centers(n_classes, std::vector<double>(dim));
  for (auto& c : centers) {
    for (double& v : c) v = center_scale * standard_normal(rng);
  }
  Dataset data;
  data.x = Matrix(n_classes * per_class, dim);
  std::size_t row = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t s = 0; s < per_class; ++s, ++row) {
      for (std::size_t d = 0; d < dim; ++d) data.x(row, d) = centers[c][d] + spread * standard_normal(rng);
      data.y.push_back(static_cast<std::int64_t>(c));
    }
  }
  return data;
}

Dataset make_bar_images(std::size_t n_classes, std::size_t per_class, std::size_t side,
                        double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset data;
  data.image_height = side;
  data.image_width = side;
  data.x = Matrix(n_classes * per_class, side * side);
  const double half = (static_cast<double>(side) - 1.0) / 2.0;
  std::size_t row = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    const double angle = std::numbers::pi * static_cast<double>(c) / static_cast<double>(n_classes);
    const double ux = std::cos(angle), uy = std::sin(angle);
    for (std::size_t s = 0; s < per_class; ++s, ++row) {
      const double cx = half + 1.5 * standard_normal(rng);
      const double cy = half + 1.5 * standard_normal(rng);
      for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t col = 0; col < side; ++col) {
          // Distance from the pixel to the bar's center line.
          const double px = static_cast<double>(col) - cx;
          const double py = static_cast<double>(r) - cy;
          const double across = std::abs(-px * uy + py * ux);
          data.x(row, r * side + col) = std::exp(-across * across) + noise * standard_normal(rng);
        }
      }
      data.y.push_back(static_cast<std::int64_t>(c));
    }
  }
  return data;
}

}  // namespace u1
