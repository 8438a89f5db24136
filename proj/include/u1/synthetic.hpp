#pragma once

#include <cstddef>
#include <cstdint>

#include "u1/trainer.hpp"

namespace u1 {

/// Isotropic Gaussian blobs: class centers ~ N(0, center_scale^2 I), samples
/// ~ N(center, spread^2 I).
Dataset make_gaussian_blobs(std::size_t n_classes, std::size_t dim, std::size_t per_class,
                            double center_scale, double spread, std::uint64_t seed);

/// side x side images, one oriented bar per class through a jittered center,
/// plus pixel noise. Rows are flattened row-major.
Dataset make_bar_images(std::size_t n_classes, std::size_t per_class, std::size_t side,
                        double noise, std::uint64_t seed);

}  // namespace u1
