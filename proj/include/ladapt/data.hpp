/* Copyright 2026 The ladapt Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef LADAPT_DATA_HPP_
#define LADAPT_DATA_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ladapt/errors.hpp"
#include "ladapt/rng.hpp"
#include "ladapt/tensor.hpp"

namespace ladapt {

/// A set of samples with optional class labels. Samples are [n, d] vectors
/// or [n, H, W, C] images. Generation is a pure function of (spec, seed).
struct Dataset {
  Tensor samples;
  std::vector<int> labels;  // empty when unlabeled
  std::size_t n_classes = 0;
  std::uint64_t domain_id = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return samples.dim(0); }
  bool labeled() const { return !labels.empty(); }

  Shape sample_shape() const {
    Shape s = samples.shape();
    s.erase(s.begin());
    return s;
  }

  /// Rows of `samples` at the given indices, stacked as a batch.
  Tensor gather(const std::vector<std::size_t>& idx) const {
    std::size_t stride = samples.size() / size();
    Shape shape = samples.shape();
    shape[0] = idx.size();
    Tensor out(shape);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (idx[r] >= size()) throw Error("Dataset: index out of range");
      std::copy(samples.data() + idx[r] * stride,
                samples.data() + (idx[r] + 1) * stride,
                out.data() + r * stride);
    }
    return out;
  }

  std::vector<int> gather_labels(const std::vector<std::size_t>& idx) const {
    if (!labeled()) throw Error("Dataset: unlabeled");
    std::vector<int> out(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) out[r] = labels[idx[r]];
    return out;
  }

  Dataset without_labels() const {
    Dataset d = *this;
    d.labels.clear();
    return d;
  }
};

/// Label-preserving covariate shift: rotation in the first two coordinates,
/// a constant added to every channel, elementwise Gaussian noise, and an
/// optional per-class mean displacement. Each component is optional (zero
/// disables it, leaving the data bit-identical).
struct ShiftSpec {
  double rotation_degrees = 0.0;
  double channel_bias = 0.0;
  double noise_sigma = 0.0;
  double class_displacement = 0.0;
};

/// Class-conditional Gaussian clusters: K means equally spaced on a circle
/// of radius 4 in the first two coordinates, sigma 0.5, balanced classes.
/// Samples are blocked by class; label of row i is i / (n / n_classes).
inline Dataset gen_blobs(std::size_t n, std::size_t n_classes, std::size_t d,
                         std::uint64_t seed) {
  if (n_classes < 2) throw ConfigError("gen_blobs: need at least 2 classes");
  if (d < 2) throw ConfigError("gen_blobs: need dimension >= 2");
  if (n == 0 || n % n_classes != 0) {
    throw ConfigError("gen_blobs: n must be a positive multiple of n_classes");
  }
  constexpr double kRadius = 4.0;
  constexpr double kSigma = 0.5;
  Pcg32 rng(seed, rng_stream::kData);
  Dataset ds;
  ds.samples = Tensor({n, d});
  ds.labels.resize(n);
  ds.n_classes = n_classes;
  ds.seed = seed;
  std::size_t per_class = n / n_classes;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = i / per_class;
    double angle = 6.283185307179586477 * static_cast<double>(c) /
                   static_cast<double>(n_classes);
    ds.labels[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      if (j == 0) mean = kRadius * std::cos(angle);
      if (j == 1) mean = kRadius * std::sin(angle);
      ds.samples[i * d + j] = mean + kSigma * rng.normal();
    }
  }
  return ds;
}

/// Image-mode blobs for exercising conv layers: 8x8x3 maps holding one
/// Gaussian bump per class at a class-specific position, with fixed channel
/// weights and light pixel noise.
inline Dataset gen_blob_images(std::size_t n, std::size_t n_classes,
                               std::uint64_t seed) {
  if (n_classes < 2) throw ConfigError("gen_blob_images: need >= 2 classes");
  if (n == 0 || n % n_classes != 0) {
    throw ConfigError(
        "gen_blob_images: n must be a positive multiple of n_classes");
  }
  constexpr std::size_t kSide = 8, kChannels = 3;
  constexpr double kChannelWeight[kChannels] = {1.0, 0.6, 0.3};
  Pcg32 rng(seed, rng_stream::kData);
  Dataset ds;
  ds.samples = Tensor({n, kSide, kSide, kChannels});
  ds.labels.resize(n);
  ds.n_classes = n_classes;
  ds.seed = seed;
  std::size_t per_class = n / n_classes;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = i / per_class;
    ds.labels[i] = static_cast<int>(c);
    double angle = 6.283185307179586477 * static_cast<double>(c) /
                   static_cast<double>(n_classes);
    double cx = 3.5 + 2.2 * std::cos(angle) + 0.3 * rng.normal();
    double cy = 3.5 + 2.2 * std::sin(angle) + 0.3 * rng.normal();
    for (std::size_t y = 0; y < kSide; ++y) {
      for (std::size_t x = 0; x < kSide; ++x) {
        double d2 = (static_cast<double>(x) - cx) * (static_cast<double>(x) - cx) +
                    (static_cast<double>(y) - cy) * (static_cast<double>(y) - cy);
        double bump = std::exp(-d2 / (2.0 * 1.3 * 1.3));
        for (std::size_t ch = 0; ch < kChannels; ++ch) {
          ds.samples[((i * kSide + y) * kSide + x) * kChannels + ch] =
              kChannelWeight[ch] * bump + 0.05 * rng.normal();
        }
      }
    }
  }
  return ds;
}

/// Applies a ShiftSpec, producing the target-domain version of a dataset.
/// Labels are carried over unchanged and the domain id is bumped.
inline Dataset apply_shift(const Dataset& ds, const ShiftSpec& shift,
                           std::uint64_t seed) {
  if (shift.noise_sigma < 0) throw ConfigError("apply_shift: sigma < 0");
  Dataset out = ds;
  out.domain_id = ds.domain_id + 1;
  out.seed = seed;
  std::size_t n = ds.size();
  std::size_t stride = ds.samples.size() / n;
  bool vector_mode = ds.samples.rank() == 2;

  if (shift.rotation_degrees != 0.0) {
    if (!vector_mode || stride < 2) {
      throw ShapeError(
          "apply_shift: rotation applies to [n, d>=2] vector data, got " +
          shape_str(ds.samples.shape()));
    }
    double rad = shift.rotation_degrees * 3.14159265358979323846 / 180.0;
    double cs = std::cos(rad), sn = std::sin(rad);
    for (std::size_t i = 0; i < n; ++i) {
      double x = out.samples[i * stride + 0];
      double y = out.samples[i * stride + 1];
      out.samples[i * stride + 0] = cs * x - sn * y;
      out.samples[i * stride + 1] = sn * x + cs * y;
    }
  }

  if (shift.class_displacement != 0.0) {
    if (!vector_mode) {
      throw ShapeError(
          "apply_shift: class displacement applies to vector data only");
    }
    if (!ds.labeled()) {
      throw Error("apply_shift: class displacement needs labels");
    }
    // One seeded unit direction per class.
    Pcg32 dir_rng(seed, rng_stream::kData + 1);
    std::vector<double> dirs(ds.n_classes * stride);
    for (std::size_t c = 0; c < ds.n_classes; ++c) {
      double norm2 = 0.0;
      for (std::size_t j = 0; j < stride; ++j) {
        double v = dir_rng.normal();
        dirs[c * stride + j] = v;
        norm2 += v * v;
      }
      double inv = 1.0 / std::sqrt(norm2 > 0 ? norm2 : 1.0);
      for (std::size_t j = 0; j < stride; ++j) dirs[c * stride + j] *= inv;
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t c = static_cast<std::size_t>(ds.labels[i]);
      for (std::size_t j = 0; j < stride; ++j) {
        out.samples[i * stride + j] +=
            shift.class_displacement * dirs[c * stride + j];
      }
    }
  }

  if (shift.channel_bias != 0.0) {
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
      out.samples[i] += shift.channel_bias;
    }
  }

  if (shift.noise_sigma != 0.0) {
    Pcg32 rng(seed, rng_stream::kData);
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
      out.samples[i] += shift.noise_sigma * rng.normal();
    }
  }
  return out;
}

/// Deterministic label-stratified partition. Fractions must be positive and
/// sum to 1; every (stratum, part) cell must stay non-empty. Unlabeled data
/// is treated as a single stratum. Indices within each part are ascending.
inline std::vector<Dataset> split(const Dataset& ds,
                                  const std::vector<double>& fractions,
                                  std::uint64_t seed) {
  if (fractions.empty()) throw ConfigError("split: no fractions");
  double total = 0.0;
  for (double f : fractions) {
    if (f <= 0.0) throw ConfigError("split: fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split: fractions must sum to 1");
  }

  // Strata: per label, or everything at once.
  std::vector<std::vector<std::size_t>> strata;
  if (ds.labeled()) {
    strata.resize(ds.n_classes);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      int label = ds.labels[i];
      if (label < 0 || static_cast<std::size_t>(label) >= ds.n_classes) {
        throw Error("split: label " + std::to_string(label) +
                    " out of range [0, " + std::to_string(ds.n_classes) + ")");
      }
      strata[static_cast<std::size_t>(label)].push_back(i);
    }
  } else {
    strata.emplace_back(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) strata[0][i] = i;
  }

  Pcg32 rng(seed, rng_stream::kSplit);
  std::vector<std::vector<std::size_t>> parts(fractions.size());
  for (auto& stratum : strata) {
    if (stratum.empty()) continue;
    rng.shuffle(stratum);
    std::size_t ns = stratum.size();
    std::vector<std::size_t> counts(fractions.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t p = 0; p < fractions.size(); ++p) {
      double exact = fractions[p] * static_cast<double>(ns);
      counts[p] = static_cast<std::size_t>(exact);
      assigned += counts[p];
      remainders.push_back({exact - std::floor(exact), p});
    }
    std::sort(remainders.begin(), remainders.end(),
              [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
              });
    for (std::size_t r = 0; assigned < ns; ++r, ++assigned) {
      counts[remainders[r % remainders.size()].second]++;
    }
    std::size_t cursor = 0;
    for (std::size_t p = 0; p < fractions.size(); ++p) {
      if (counts[p] == 0) {
        throw ConfigError("split: fraction " + std::to_string(fractions[p]) +
                          " yields an empty stratum");
      }
      for (std::size_t k = 0; k < counts[p]; ++k) {
        parts[p].push_back(stratum[cursor++]);
      }
    }
  }

  std::vector<Dataset> out;
  for (auto& idx : parts) {
    std::sort(idx.begin(), idx.end());
    Dataset part;
    part.samples = ds.gather(idx);
    if (ds.labeled()) part.labels = ds.gather_labels(idx);
    part.n_classes = ds.n_classes;
    part.domain_id = ds.domain_id;
    part.seed = ds.seed;
    out.push_back(std::move(part));
  }
  return out;
}

}  // namespace ladapt

#endif  // LADAPT_DATA_HPP_
