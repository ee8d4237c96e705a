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

#ifndef LADAPT_METRICS_HPP_
#define LADAPT_METRICS_HPP_

#include <cstddef>
#include <vector>

#include "ladapt/data.hpp"
#include "ladapt/layers.hpp"

namespace ladapt {

/// Classification metrics as percentages, with the confusion counts they
/// were derived from (row = true class, column = predicted class).
///
/// Binary tasks report the positive class (class 1); multi-class tasks
/// report macro-averaged precision and recall. F1 is always
/// 2 P R / (P + R) on the reported precision/recall, 0 when P + R = 0.
struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::vector<std::size_t> confusion;
  std::size_t n_classes = 0;
};

inline Metrics metrics_from_confusion(const std::vector<std::size_t>& confusion,
                                      std::size_t k) {
  if (k < 2 || confusion.size() != k * k) {
    throw Error("metrics: confusion matrix must be k x k with k >= 2");
  }
  Metrics m;
  m.confusion = confusion;
  m.n_classes = k;
  std::size_t total = 0, correct = 0;
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t p = 0; p < k; ++p) total += confusion[t * k + p];
    correct += confusion[t * k + t];
  }
  if (total == 0) throw Error("metrics: empty confusion matrix");
  m.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(total);

  auto class_precision = [&](std::size_t c) {
    std::size_t tp = confusion[c * k + c], denom = 0;
    for (std::size_t t = 0; t < k; ++t) denom += confusion[t * k + c];
    return denom == 0 ? 0.0
                      : 100.0 * static_cast<double>(tp) /
                            static_cast<double>(denom);
  };
  auto class_recall = [&](std::size_t c) {
    std::size_t tp = confusion[c * k + c], denom = 0;
    for (std::size_t p = 0; p < k; ++p) denom += confusion[c * k + p];
    return denom == 0 ? 0.0
                      : 100.0 * static_cast<double>(tp) /
                            static_cast<double>(denom);
  };

  if (k == 2) {
    m.precision = class_precision(1);
    m.recall = class_recall(1);
  } else {
    for (std::size_t c = 0; c < k; ++c) {
      m.precision += class_precision(c);
      m.recall += class_recall(c);
    }
    m.precision /= static_cast<double>(k);
    m.recall /= static_cast<double>(k);
  }
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

/// Evaluates argmax predictions of a model snapshot on a labeled dataset.
/// Runs in evaluation mode (running batchnorm statistics, no state updates).
inline Metrics evaluate(const Model& model, const Dataset& ds) {
  if (ds.size() == 0) throw Error("evaluate: empty dataset");
  if (!ds.labeled()) throw Error("evaluate: dataset has no labels");
  Model snapshot = model;  // forward is non-mutating in eval mode
  std::size_t k = snapshot.n_classes();
  std::vector<std::size_t> confusion(k * k, 0);

  constexpr std::size_t kChunk = 256;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += kChunk) {
    std::size_t stop = std::min(ds.size(), start + kChunk);
    idx.clear();
    for (std::size_t i = start; i < stop; ++i) idx.push_back(i);
    Graph g;
    NodeId input = g.constant(ds.gather(idx));
    Model::Forward f = snapshot.forward(g, input, /*training=*/false);
    const Tensor& logits = g.value(f.logits);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c) {
        if (logits[r * k + c] > logits[r * k + best]) best = c;
      }
      int label = ds.labels[idx[r]];
      if (label < 0 || static_cast<std::size_t>(label) >= k) {
        throw Error("evaluate: label " + std::to_string(label) +
                    " out of range for a " + std::to_string(k) +
                    "-class model");
      }
      confusion[static_cast<std::size_t>(label) * k + best]++;
    }
  }
  return metrics_from_confusion(confusion, k);
}

}  // namespace ladapt

#endif  // LADAPT_METRICS_HPP_
