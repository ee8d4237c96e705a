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

#ifndef LADAPT_TRAINER_HPP_
#define LADAPT_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "ladapt/data.hpp"
#include "ladapt/heads.hpp"
#include "ladapt/layers.hpp"
#include "ladapt/metrics.hpp"
#include "ladapt/optimizer.hpp"

namespace ladapt {

enum class Method : std::uint8_t { kNone, kDann, kLdann, kLwass };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::kNone: return "none";
    case Method::kDann: return "dann";
    case Method::kLdann: return "l-dann";
    case Method::kLwass: return "l-wass";
  }
  return "?";
}

struct TrainConfig {
  Method method = Method::kNone;
  std::size_t epochs = 100;
  std::size_t batch = 32;      // m
  std::size_t n_critic = 5;    // critic iterations per main update
  double lr_heads = 0.001;     // alpha_1: domain classifiers / critics
  double lr_main = 0.001;      // alpha_2: feature extractor + label classifier
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double lambda = 10.0;        // gradient penalty coefficient
  double beta = 1.0;           // feature-loss weight on the critic estimate
  double reduction = 16.0;     // r for the domain heads
  double grl_scale = 1.0;
  std::uint64_t seed = 1;
  std::size_t selection_window = 30;
  bool alg1_literal = false;     // alternative sign convention, see critic_loss
  double val_fraction = 0.2;     // source held out for model selection
  double divergence_threshold = 1e6;
  int divergence_patience = 3;
};

/// One epoch of diagnostics. target_acc and domain_acc are NaN where they
/// do not apply (unlabeled target / no domain classifier); w1 holds one
/// critic distance estimate per active tap and is empty for other methods.
struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_acc = 0.0;
  double target_acc = std::numeric_limits<double>::quiet_NaN();
  double domain_acc = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> w1;
};

struct TrainResult {
  Model model;
  std::vector<DomainHead> heads;
  std::vector<EpochRecord> history;
  std::size_t selected_epoch = 0;  // 1-based; 0 if training diverged
  bool diverged = false;
  std::string divergence_note;
  // Loop instrumentation.
  std::size_t main_updates = 0;
  std::vector<std::size_t> critic_updates;  // per active tap
};

/// Model-selection rule: argmax of source validation accuracy over the
/// final `window` epochs, ties broken toward the later epoch. Returns the
/// 1-based epoch index.
inline std::size_t select_model(const std::vector<EpochRecord>& history,
                                std::size_t window) {
  if (window == 0) throw ConfigError("select_model: window must be >= 1");
  if (history.size() < window) {
    throw ConfigError("select_model: history of " +
                      std::to_string(history.size()) +
                      " epochs is shorter than window " +
                      std::to_string(window));
  }
  std::size_t best = history.size() - window;
  for (std::size_t i = best + 1; i < history.size(); ++i) {
    if (history[i].val_acc >= history[best].val_acc) best = i;
  }
  return history[best].epoch;
}

/// Endless index stream over a dataset; reshuffles after each full pass.
class BatchCycler {
 public:
  BatchCycler(std::size_t n, std::uint64_t seed, std::uint64_t stream)
      : rng_(seed, stream), order_(n), pos_(n) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }

  std::vector<std::size_t> next(std::size_t m) {
    std::vector<std::size_t> out;
    out.reserve(m);
    while (out.size() < m) {
      if (pos_ >= order_.size()) {
        rng_.shuffle(order_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  Pcg32 rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_;
};

namespace detail {

/// Everything one training run owns. Heads, optimizers and RNG streams are
/// isolated per concern so that severing the adversarial path (grl scale 0,
/// beta 0) leaves the main-network batch and update sequence untouched.
class TrainRun {
 public:
  TrainRun(const TrainConfig& cfg, const Dataset& source,
           const Dataset& target, Model model)
      : cfg_(cfg),
        result_(TrainResult{std::move(model), {}, {}, 0, false, {}, 0, {}}),
        opt_main_({cfg.lr_main, cfg.momentum, cfg.weight_decay}),
        opt_heads_({cfg.lr_heads, cfg.momentum, cfg.weight_decay}),
        src_rng_(cfg.seed, rng_stream::kSourceBatches),
        eps_rng_(cfg.seed, rng_stream::kEpsilon) {
    validate(source, target);

    auto src_parts =
        split(source, {1.0 - cfg_.val_fraction, cfg_.val_fraction}, cfg_.seed);
    train_src_ = std::move(src_parts[0]);
    val_src_ = std::move(src_parts[1]);
    target_full_ = target;
    auto tgt_parts = split(target.without_labels(), {0.8, 0.2}, cfg_.seed);
    tgt_adapt_ = std::move(tgt_parts[0]);
    tgt_held_ = std::move(tgt_parts[1]);

    if (adversarial()) {
      const auto& taps = result_.model.taps();
      if (cfg_.method == Method::kDann) {
        tap_positions_ = {taps.size() - 1};
      } else {
        tap_positions_.resize(taps.size());
        std::iota(tap_positions_.begin(), tap_positions_.end(),
                  std::size_t{0});
      }
      for (std::size_t pos : tap_positions_) {
        const TapInfo& tap = taps[pos];
        std::size_t outputs =
            cfg_.method == Method::kLwass ? tap.channels : 2;
        heads_.emplace_back(tap.layer, tap.channels, cfg_.reduction, outputs,
                            cfg_.seed);
      }
    }
    result_.critic_updates.assign(heads_.size(), 0);

    tgt_cycle_ = std::make_unique<BatchCycler>(
        tgt_adapt_.size(), cfg_.seed, rng_stream::kTargetBatches);
    critic_src_ = std::make_unique<BatchCycler>(
        train_src_.size(), cfg_.seed, rng_stream::kCriticSource);
    critic_tgt_ = std::make_unique<BatchCycler>(
        tgt_adapt_.size(), cfg_.seed, rng_stream::kCriticTarget);
  }

  TrainResult run() {
    std::vector<std::size_t> order(train_src_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::map<std::size_t, Model::State> snapshots;

    for (std::size_t epoch = 1; epoch <= cfg_.epochs; ++epoch) {
      src_rng_.shuffle(order);
      double loss_sum = 0.0;
      std::size_t steps = 0;
      epoch_w1_.assign(heads_.size(), 0.0);
      epoch_w1_count_ = 0;

      for (std::size_t start = 0; start < order.size();
           start += cfg_.batch) {
        std::size_t stop = std::min(order.size(), start + cfg_.batch);
        std::vector<std::size_t> sidx(order.begin() + start,
                                      order.begin() + stop);
        double loss;
        try {
          loss = step(sidx);
        } catch (const NumericError& e) {
          if (note_divergence(epoch, e.what())) break;
          continue;
        }
        loss_sum += loss;
        ++steps;
        ++result_.main_updates;
        if (!std::isfinite(loss) ||
            std::abs(loss) > cfg_.divergence_threshold) {
          if (note_divergence(epoch, "train loss " + std::to_string(loss))) {
            break;
          }
        } else {
          bad_streak_ = 0;
        }
      }
      if (result_.diverged) break;

      EpochRecord rec;
      rec.epoch = epoch;
      rec.train_loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
      rec.val_acc = evaluate(result_.model, val_src_).accuracy;
      if (target_full_.labeled()) {
        rec.target_acc = evaluate(result_.model, target_full_).accuracy;
      }
      if (cfg_.method == Method::kDann || cfg_.method == Method::kLdann) {
        rec.domain_acc = domain_accuracy();
      }
      if (cfg_.method == Method::kLwass && epoch_w1_count_ > 0) {
        rec.w1.resize(heads_.size());
        for (std::size_t j = 0; j < heads_.size(); ++j) {
          rec.w1[j] = epoch_w1_[j] / static_cast<double>(epoch_w1_count_);
        }
      }
      result_.history.push_back(std::move(rec));
      if (epoch + cfg_.selection_window > cfg_.epochs) {
        snapshots.emplace(epoch, result_.model.state());
      }
    }

    if (!result_.diverged) {
      result_.selected_epoch =
          select_model(result_.history, cfg_.selection_window);
      result_.model.set_state(snapshots.at(result_.selected_epoch));
    }
    result_.heads = std::move(heads_);
    return std::move(result_);
  }

 private:
  bool adversarial() const { return cfg_.method != Method::kNone; }

  void validate(const Dataset& source, const Dataset& target) const {
    if (source.size() == 0 || target.size() == 0) {
      throw ConfigError("train: datasets must be non-empty");
    }
    if (!source.labeled()) throw ConfigError("train: source must be labeled");
    if (cfg_.epochs == 0 || cfg_.selection_window == 0 ||
        cfg_.epochs < cfg_.selection_window) {
      throw ConfigError(
          "train: need epochs >= selection_window >= 1, got epochs=" +
          std::to_string(cfg_.epochs) + " selection_window=" +
          std::to_string(cfg_.selection_window));
    }
    if (cfg_.batch == 0) throw ConfigError("train: batch must be >= 1");
    if (cfg_.n_critic == 0) throw ConfigError("train: n_critic must be >= 1");
    if (cfg_.lr_main < 0 || cfg_.lr_heads < 0 || cfg_.momentum < 0 ||
        cfg_.weight_decay < 0 || cfg_.lambda < 0 ||
        cfg_.val_fraction <= 0 || cfg_.val_fraction >= 1) {
      throw ConfigError("train: hyperparameter out of range");
    }
    if (adversarial() && result_.model.taps().empty()) {
      throw ConfigError("train: method " +
                        std::string(method_name(cfg_.method)) +
                        " needs at least one tapped layer");
    }
  }

  bool note_divergence(std::size_t epoch, const std::string& what) {
    ++bad_streak_;
    if (bad_streak_ >= cfg_.divergence_patience) {
      result_.diverged = true;
      result_.divergence_note =
          "epoch " + std::to_string(epoch) + ": " + what;
      return true;
    }
    return false;
  }

  double step(const std::vector<std::size_t>& sidx) {
    switch (cfg_.method) {
      case Method::kNone: return step_plain(sidx);
      case Method::kDann:
      case Method::kLdann: return step_grl(sidx);
      case Method::kLwass: return step_lwass(sidx);
    }
    throw Error("train: unknown method");
  }

  double step_plain(const std::vector<std::size_t>& sidx) {
    Graph g;
    Model& model = result_.model;
    Model::Binding mb = model.bind(g, /*trainable=*/true);
    Model::Forward fwd = model.run(g, mb, g.constant(train_src_.gather(sidx)),
                                   /*training=*/true, /*update_stats=*/true);
    NodeId loss = g.softmax_xent(fwd.logits, train_src_.gather_labels(sidx));
    GradientMap gm = backward(g, loss);
    opt_main_.step(model.params(), mb.param_ids, gm, g);
    return g.value(loss)[0];
  }

  /// Joint update through the gradient reversal layers: a single backward
  /// pass drives the main network down the task loss and up the domain
  /// loss, while the heads descend the domain loss.
  double step_grl(const std::vector<std::size_t>& sidx) {
    Graph g;
    Model& model = result_.model;
    Model::Binding mb = model.bind(g, /*trainable=*/true);
    Model::Forward fs = model.run(g, mb, g.constant(train_src_.gather(sidx)),
                                  true, true);
    std::vector<std::size_t> tidx = tgt_cycle_->next(sidx.size());
    Model::Forward ft = model.run(g, mb, g.constant(tgt_adapt_.gather(tidx)),
                                  true, true);
    std::vector<DomainHead::Binding> hbs;
    for (const DomainHead& h : heads_) hbs.push_back(h.bind(g, true));

    NodeId task = g.softmax_xent(fs.logits, train_src_.gather_labels(sidx));
    NodeId domain = ldann_loss(g, hbs, select_taps(fs), select_taps(ft),
                               {cfg_.grl_scale});
    NodeId loss = g.add(task, domain);
    GradientMap gm = backward(g, loss);
    opt_main_.step(model.params(), mb.param_ids, gm, g);
    for (std::size_t j = 0; j < heads_.size(); ++j) {
      opt_heads_.step(heads_[j].params(), heads_[j].bound_ids(hbs[j]), gm, g);
    }
    return g.value(loss)[0];
  }

  /// Wasserstein matching: n_critic critic updates per layer, then one
  /// main-network update against the frozen critics.
  double step_lwass(const std::vector<std::size_t>& sidx) {
    Model& model = result_.model;
    for (std::size_t j = 0; j < heads_.size(); ++j) {
      for (std::size_t t = 0; t < cfg_.n_critic; ++t) {
        std::vector<std::size_t> cs = critic_src_->next(cfg_.batch);
        std::vector<std::size_t> ct = critic_tgt_->next(cfg_.batch);
        Graph g;
        Model::Binding mb = model.bind(g, /*trainable=*/false);
        Model::Forward fs = model.run(
            g, mb, g.constant(train_src_.gather(cs)), true, false);
        Model::Forward ft = model.run(
            g, mb, g.constant(tgt_adapt_.gather(ct)), true, false);
        DomainHead::Binding hb = heads_[j].bind(g, /*trainable=*/true);
        NodeId zs = fs.taps[tap_positions_[j]];
        NodeId zt = ft.taps[tap_positions_[j]];
        NodeId zb = interpolate_batch(g, zs, zt, draw_eps(cfg_.batch));
        NodeId loss =
            critic_loss(g, hb, zs, zt, zb, cfg_.lambda, cfg_.alg1_literal);
        epoch_w1_[j] += g.value(critic_estimate(g, hb, zs, zt))[0];
        // The model is frozen here: only the head needs gradients, and the
        // targeted backward keeps the sweep out of the feature extractor.
        GradientMap gm = backward(g, loss, heads_[j].bound_ids(hb));
        opt_heads_.step(heads_[j].params(), heads_[j].bound_ids(hb), gm, g);
        ++result_.critic_updates[j];
      }
    }
    epoch_w1_count_ += cfg_.n_critic;

    Graph g;
    Model::Binding mb = model.bind(g, /*trainable=*/true);
    Model::Forward fs = model.run(g, mb, g.constant(train_src_.gather(sidx)),
                                  true, true);
    std::vector<std::size_t> tidx = tgt_cycle_->next(sidx.size());
    Model::Forward ft = model.run(g, mb, g.constant(tgt_adapt_.gather(tidx)),
                                  true, true);
    std::vector<DomainHead::Binding> hbs;
    for (const DomainHead& h : heads_) hbs.push_back(h.bind(g, false));

    NodeId task = g.softmax_xent(fs.logits, train_src_.gather_labels(sidx));
    NodeId loss;
    if (cfg_.alg1_literal) {
      // Literal mode: the task loss minus the gradient penalties, coupled
      // to the features through the interpolates via double backprop.
      NodeId gp_total;
      std::vector<NodeId> staps = select_taps(fs), ttaps = select_taps(ft);
      for (std::size_t j = 0; j < heads_.size(); ++j) {
        NodeId zb = interpolate_batch(g, staps[j], ttaps[j],
                                      draw_eps(sidx.size()));
        NodeId gp = gradient_penalty(g, hbs[j], zb, cfg_.lambda);
        gp_total = gp_total.valid() ? g.add(gp_total, gp) : gp;
      }
      loss = g.subtract(task, gp_total);
    } else {
      NodeId adv = lwass_feature_loss(g, hbs, select_taps(fs),
                                      select_taps(ft), cfg_.beta);
      loss = g.add(task, adv);
    }
    GradientMap gm = backward(g, loss);
    opt_main_.step(model.params(), mb.param_ids, gm, g);
    return g.value(loss)[0];
  }

  std::vector<NodeId> select_taps(const Model::Forward& f) const {
    std::vector<NodeId> out;
    for (std::size_t pos : tap_positions_) out.push_back(f.taps[pos]);
    return out;
  }

  std::vector<double> draw_eps(std::size_t m) {
    std::vector<double> eps(m);
    for (double& e : eps) e = eps_rng_.uniform();
    return eps;
  }

  /// Domain-classification accuracy of the trained heads on held-out data:
  /// source validation rows (domain 0) against held-out target rows
  /// (domain 1), averaged over heads. Target labels are never touched.
  double domain_accuracy() {
    Graph g;
    Model& model = result_.model;
    Model::Binding mb = model.bind(g, false);
    std::vector<std::size_t> all_src(val_src_.size());
    std::iota(all_src.begin(), all_src.end(), std::size_t{0});
    std::vector<std::size_t> all_tgt(tgt_held_.size());
    std::iota(all_tgt.begin(), all_tgt.end(), std::size_t{0});
    Model::Forward fs = model.run(g, mb, g.constant(val_src_.gather(all_src)),
                                  false, false);
    Model::Forward ft = model.run(g, mb, g.constant(tgt_held_.gather(all_tgt)),
                                  false, false);
    std::size_t correct = 0, total = 0;
    for (std::size_t j = 0; j < heads_.size(); ++j) {
      DomainHead::Binding hb = heads_[j].bind(g, false);
      for (int domain = 0; domain < 2; ++domain) {
        NodeId tap = domain == 0 ? fs.taps[tap_positions_[j]]
                                 : ft.taps[tap_positions_[j]];
        const Tensor& logits = g.value(domain_head_forward(g, hb, tap));
        std::size_t rows = logits.dim(0);
        for (std::size_t r = 0; r < rows; ++r) {
          int pred = logits[r * 2 + 1] > logits[r * 2 + 0] ? 1 : 0;
          correct += pred == domain;
          ++total;
        }
      }
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
  }

  TrainConfig cfg_;
  TrainResult result_;
  std::vector<DomainHead> heads_;
  std::vector<std::size_t> tap_positions_;
  Dataset train_src_, val_src_, target_full_, tgt_adapt_, tgt_held_;
  SgdOptimizer opt_main_, opt_heads_;
  Pcg32 src_rng_, eps_rng_;
  std::unique_ptr<BatchCycler> tgt_cycle_, critic_src_, critic_tgt_;
  std::vector<double> epoch_w1_;
  std::size_t epoch_w1_count_ = 0;
  int bad_streak_ = 0;
};

}  // namespace detail

/// Trains a model on labeled source data against an unlabeled target domain
/// (target labels, when present, are used only for the per-epoch diagnostic
/// accuracy). Returns the snapshot chosen by the selection rule plus the
/// full history; a diverging run is reported through `diverged` rather than
/// an exception so the caller can mark it N/C.
inline TrainResult train(const TrainConfig& cfg, const Dataset& source,
                         const Dataset& target, Model model) {
  detail::TrainRun run(cfg, source, target, std::move(model));
  return run.run();
}

/// Options for the standalone Wasserstein-1 estimation diagnostic.
///
/// The penalty coefficient ramps linearly over the first `warmup_steps` so
/// the distance term fixes the critic's sign before the Lipschitz penalty
/// locks its gradient norm; without the ramp the critic can settle on the
/// mirrored (negative) witness, which is a penalty-created local optimum.
/// The penalty weight is higher than the training default: a soft penalty
/// lets slopes drift a little past 1 between interpolates, and the stronger
/// pin keeps the distance estimate centered.
struct W1Options {
  std::size_t steps = 2000;
  std::size_t batch = 64;
  double lr = 0.02;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double lambda = 30.0;
  std::size_t warmup_steps = 300;
  double reduction = 0.125;  // hidden width 8x input
  std::uint64_t seed = 1;
};

/// Trains a fresh critic between two sample sets ([n] or [n, d]) and
/// returns the final full-set estimate mean D(a) - mean D(b). Throws on
/// divergence.
inline double estimate_w1(const Tensor& samples_a, const Tensor& samples_b,
                          const W1Options& opts = {}) {
  auto as_matrix = [](const Tensor& t) {
    if (t.rank() == 1) {
      return Tensor({t.dim(0), 1}, t.values());
    }
    if (t.rank() != 2) {
      throw ShapeError("estimate_w1: expects [n] or [n, d] samples, got " +
                       shape_str(t.shape()));
    }
    return t;
  };
  Tensor a = as_matrix(samples_a);
  Tensor b = as_matrix(samples_b);
  if (a.dim(1) != b.dim(1)) {
    throw ShapeError("estimate_w1: sample dimensions differ");
  }
  std::size_t d = a.dim(1);

  DomainHead critic(0, d, opts.reduction, /*outputs=*/d, opts.seed);
  SgdOptimizer opt({opts.lr, opts.momentum, opts.weight_decay});
  Pcg32 eps_rng(opts.seed, rng_stream::kEpsilon);

  Dataset da, db;
  da.samples = a;
  db.samples = b;
  BatchCycler cycle_a(a.dim(0), opts.seed, rng_stream::kCriticSource);
  BatchCycler cycle_b(b.dim(0), opts.seed, rng_stream::kCriticTarget);

  for (std::size_t step = 0; step < opts.steps; ++step) {
    double lam = opts.lambda;
    if (opts.warmup_steps > 0 && step < opts.warmup_steps) {
      lam *= static_cast<double>(step) / static_cast<double>(opts.warmup_steps);
    }
    Graph g;
    NodeId za = g.constant(da.gather(cycle_a.next(opts.batch)));
    NodeId zb_batch = g.constant(db.gather(cycle_b.next(opts.batch)));
    std::vector<double> eps(opts.batch);
    for (double& e : eps) e = eps_rng.uniform();
    NodeId zmix = interpolate_batch(g, za, zb_batch, eps);
    DomainHead::Binding hb = critic.bind(g, true);
    NodeId loss = critic_loss(g, hb, za, zb_batch, zmix, lam);
    double lv;
    try {
      lv = g.value(loss)[0];
      GradientMap gm = backward(g, loss);
      opt.step(critic.params(), critic.bound_ids(hb), gm, g);
    } catch (const NumericError& e) {
      throw NumericError("estimate_w1: diverged at step " +
                         std::to_string(step) + ": " + e.what());
    }
    if (!std::isfinite(lv) || std::abs(lv) > 1e9) {
      throw NumericError("estimate_w1: diverged at step " +
                         std::to_string(step));
    }
  }

  Graph g;
  DomainHead::Binding hb = critic.bind(g, false);
  NodeId est = critic_estimate(g, hb, g.constant(a), g.constant(b));
  return g.value(est)[0];
}

}  // namespace ladapt

#endif  // LADAPT_TRAINER_HPP_
