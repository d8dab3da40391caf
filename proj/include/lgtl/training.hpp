#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "lgtl/lgtl.hpp"
#include "lgtl/templates.hpp"

namespace lgtl {

enum class TemplateKind { None, HO, ND, LGTL };

inline const char* to_string(TemplateKind t) {
  switch (t) {
    case TemplateKind::None: return "none";
    case TemplateKind::HO: return "ho";
    case TemplateKind::ND: return "nd";
    case TemplateKind::LGTL: return "lgtl";
  }
  return "?";
}

inline TemplateKind parse_template(const std::string& s) {
  if (s == "none") return TemplateKind::None;
  if (s == "ho") return TemplateKind::HO;
  if (s == "nd") return TemplateKind::ND;
  if (s == "lgtl") return TemplateKind::LGTL;
  throw ConfigError("unknown template '" + s + "'");
}

struct TrainConfig {
  double learning_rate = 1e-2;
  std::size_t epochs = 500;
  std::uint64_t seed = 0;
  std::size_t hop_count = 2;
  std::vector<std::size_t> sample_sizes{4, 8};  // LGTL per-hop samples
  std::vector<std::size_t> nd_sizes{4, 1};      // ND tree shape
  TemplateKind template_kind = TemplateKind::LGTL;
  Ablation ablation = Ablation::Full;
  std::size_t early_stop_patience = 50;
  bool frozen_backbone = false;  // keep W_Q, W_K, W_V at their initial values
  bool resample = false;         // redraw ND trees / hop samples every epoch

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
    if (template_kind == TemplateKind::LGTL && sample_sizes.size() != hop_count)
      throw ConfigError("sample_sizes must list one size per hop");
    if (template_kind == TemplateKind::ND && nd_sizes.empty()) throw ConfigError("nd_sizes must be nonempty");
    for (auto s : sample_sizes)
      if (s == 0) throw ConfigError("sample sizes must be >= 1");
    for (auto s : nd_sizes)
      if (s == 0) throw ConfigError("ND sizes must be >= 1");
  }
};

struct SplitSpec {
  std::vector<NodeId> train, val, test;
};

/// Per-class shuffled split with the given train/val fractions; the rest is test.
inline SplitSpec stratified_split(const Graph& g, std::uint64_t seed, double train_frac = 0.6, double val_frac = 0.2) {
  const auto& y = g.labels();
  if (!(train_frac > 0 && val_frac >= 0 && train_frac + val_frac <= 1.0)) throw ConfigError("bad split fractions");
  SplitSpec s;
  for (int c = 0; c < g.class_count(); ++c) {
    std::vector<NodeId> members;
    for (NodeId u = 0; u < g.num_nodes(); ++u)
      if (y[u] == c) members.push_back(u);
    CounterRng rng(derive_seed(seed, {0x5b117, static_cast<std::uint64_t>(c)}));
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.below(i)]);
    const auto n = members.size();
    const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
    const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(n))));
    s.train.insert(s.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.insert(s.val.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train),
                 members.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.insert(s.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), members.end());
  }
  for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

struct Metrics {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};

/// Single-label F1s. Macro-F1 averages over every class that occurs in the truth or
/// the predictions; a class that is present but never predicted correctly scores 0.
inline Metrics compute_metrics(const std::vector<int>& truth, const std::vector<int>& pred) {
  if (truth.empty()) throw DomainError("metrics over an empty node list");
  if (truth.size() != pred.size()) throw ShapeError("truth and predictions differ in length");
  int classes = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) classes = std::max({classes, truth[i] + 1, pred[i] + 1});
  std::vector<std::size_t> tp(classes, 0), fp(classes, 0), fn(classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == pred[i]) {
      ++correct;
      ++tp[truth[i]];
    } else {
      ++fp[pred[i]];
      ++fn[truth[i]];
    }
  }
  Metrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  m.micro_f1 = m.accuracy;
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    if (tp[c] + fp[c] + fn[c] == 0) continue;
    ++present;
    sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
  }
  m.macro_f1 = sum / present;
  return m;
}

/// argmax with ties going to the lowest index.
inline int argmax(const Vector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return static_cast<int>(best);
}

/// Per-node model inputs that do not depend on the parameters: fixed token
/// matrices for the templates, hop samples for LGTL.
class Inputs {
 public:
  Inputs(const Graph& g, const TrainConfig& cfg) : g_(&g), cfg_(cfg) {
    if (cfg.template_kind == TemplateKind::HO) ho_ = ho_token_stack(g, cfg.hop_count);
    refresh(0);
  }

  /// Redraws random structure for `epoch` when resampling is on (epoch 0 = default draw).
  void refresh(std::size_t epoch) {
    if (epoch > 0 && !cfg_.resample) return;
    const std::uint64_t s = epoch == 0 ? cfg_.seed : derive_seed(cfg_.seed, {0xe90c, epoch});
    const auto n = g_->num_nodes();
    if (cfg_.template_kind == TemplateKind::ND) {
      nd_.assign(n, Matrix());
      for (NodeId u = 0; u < n; ++u) nd_[u] = flatten(*g_, nd_tree(*g_, u, cfg_.nd_sizes, derive_seed(s, {0x4e44}))).tokens;
    } else if (cfg_.template_kind == TemplateKind::LGTL) {
      samples_.assign(n, {});
      for (NodeId u = 0; u < n; ++u) samples_[u] = sample_hops(*g_, u, cfg_.sample_sizes, s);
    }
  }

  NodeTrace trace(NodeId u, const LgtlParams& p) const {
    switch (cfg_.template_kind) {
      case TemplateKind::None: return trace_tokens(u, Matrix(g_->feature(u)), p);
      case TemplateKind::HO: {
        Matrix T(static_cast<Eigen::Index>(ho_.size()), static_cast<Eigen::Index>(g_->feature_dim()));
        for (std::size_t k = 0; k < ho_.size(); ++k) T.row(static_cast<Eigen::Index>(k)) = ho_[k].row(u);
        return trace_tokens(u, std::move(T), p);
      }
      case TemplateKind::ND: return trace_tokens(u, nd_[u], p);
      case TemplateKind::LGTL: return trace_lgtl(*g_, u, samples_[u], p, cfg_.ablation);
    }
    throw ConfigError("unknown template");
  }

  const std::vector<std::vector<NodeId>>& hop_samples(NodeId u) const { return samples_.at(u); }
  const Graph& graph() const { return *g_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  const Graph* g_;
  TrainConfig cfg_;
  std::vector<FeatureMatrix> ho_;
  std::vector<Matrix> nd_;
  std::vector<std::vector<std::vector<NodeId>>> samples_;
};

/// Mean cross-entropy over `batch` (duplicates count twice) and, if grad is given,
/// its gradient accumulated into *grad.
inline double loss_and_gradient(const Inputs& in, const std::vector<NodeId>& batch, const LgtlParams& p,
                                LgtlParams* grad) {
  if (batch.empty()) throw DomainError("empty batch");
  const auto& g = in.graph();
  const auto& y = g.labels();
  const bool train_backbone = !in.config().frozen_backbone;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (NodeId u : batch) {
    const NodeTrace t = in.trace(u, p);
    const double mx = t.logits.maxCoeff();
    const Vector e = (t.logits.array() - mx).exp().matrix();
    const double lse = mx + std::log(e.sum());
    loss += (lse - t.logits(y[u])) * inv_b;
    if (grad) {
      Vector d = e / e.sum();
      d(y[u]) -= 1.0;
      backward(g, t, p, d * inv_b, *grad, train_backbone);
    }
  }
  return loss;
}

inline std::vector<double> gradients(const Inputs& in, const std::vector<NodeId>& batch, const LgtlParams& p) {
  LgtlParams grad = p.zeros_like();
  loss_and_gradient(in, batch, p, &grad);
  auto flat = grad.flatten();
  for (double v : flat)
    if (!std::isfinite(v)) throw NumericError("non-finite gradient");
  return flat;
}

inline std::vector<int> predict(const Inputs& in, const LgtlParams& p, const std::vector<NodeId>& nodes) {
  std::vector<int> out;
  out.reserve(nodes.size());
  for (NodeId u : nodes) out.push_back(argmax(in.trace(u, p).logits));
  return out;
}

inline Metrics evaluate(const Inputs& in, const LgtlParams& p, const std::vector<NodeId>& nodes) {
  if (nodes.empty()) throw DomainError("evaluate on an empty node list");
  const auto& y = in.graph().labels();
  std::vector<int> truth;
  for (NodeId u : nodes) truth.push_back(y[u]);
  return compute_metrics(truth, predict(in, p, nodes));
}

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_micro_f1 = 0.0;
  double val_micro_f1 = 0.0;
};

struct TrainResult {
  LgtlParams params;
  std::vector<EpochRecord> curve;
  std::size_t best_epoch = 0;
};

/// Full-batch gradient descent on the train split, keeping the parameters with the
/// best validation micro-F1 (first best wins). Stops after `early_stop_patience`
/// epochs without improvement.
inline TrainResult train(const Graph& g, const SplitSpec& split, const TrainConfig& cfg, const LgtlParams& init) {
  cfg.validate();
  init.validate();
  if (split.train.empty()) throw PreconditionError("train split is empty");
  Inputs in(g, cfg);
  TrainResult r{init, {}, 0};
  if (cfg.epochs == 0) return r;
  LgtlParams p = init;
  std::vector<double> flat = p.flatten();
  double best_val = -1.0;
  std::size_t since_best = 0;
  const auto& eval_nodes = split.val.empty() ? split.train : split.val;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    in.refresh(epoch);
    LgtlParams grad = p.zeros_like();
    const double loss = loss_and_gradient(in, split.train, p, &grad);
    if (!std::isfinite(loss)) throw NumericError("loss diverged at epoch " + std::to_string(epoch));
    const auto gflat = grad.flatten();
    for (std::size_t i = 0; i < flat.size(); ++i) flat[i] -= cfg.learning_rate * gflat[i];
    p.assign(flat);
    EpochRecord rec{epoch, loss, evaluate(in, p, split.train).micro_f1, evaluate(in, p, eval_nodes).micro_f1};
    r.curve.push_back(rec);
    if (rec.val_micro_f1 > best_val) {
      best_val = rec.val_micro_f1;
      r.params = p;
      r.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  return r;
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose
/// true gradient is ~0 from turning finite-difference noise into huge ratios.
inline constexpr double kGradCheckFloor = 1e-6;

/// Central differences on the coordinates [first, last) of the flat parameter vector.
inline GradCheckReport grad_check(const Inputs& in, const std::vector<NodeId>& batch, const LgtlParams& p, double eps,
                                  std::size_t first = 0, std::size_t last = std::numeric_limits<std::size_t>::max()) {
  if (!(eps >= 1e-6 && eps <= 1e-3)) throw PreconditionError("eps must lie in [1e-6, 1e-3]");
  const auto analytic = gradients(in, batch, p);
  last = std::min(last, analytic.size());
  std::vector<double> flat = p.flatten();
  LgtlParams probe = p;
  GradCheckReport r;
  for (std::size_t i = first; i < last; ++i) {
    const double orig = flat[i];
    flat[i] = orig + eps;
    probe.assign(flat);
    const double up = loss_and_gradient(in, batch, probe, nullptr);
    flat[i] = orig - eps;
    probe.assign(flat);
    const double down = loss_and_gradient(in, batch, probe, nullptr);
    flat[i] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
    if (r.checked++ == 0 || rel > r.max_rel_error) {
      r.max_rel_error = rel;
      r.worst_index = i;
      r.analytic = a;
      r.numeric = numeric;
    }
  }
  return r;
}

/// Offsets of each parameter block in the flat vector, in layout order.
struct BlockRange {
  std::string name;
  std::size_t begin = 0, end = 0;
};

inline std::vector<BlockRange> block_ranges(const LgtlParams& p) {
  const std::array<const char*, 8> names{"gate.W", "gate.a", "selection.W", "selection.a", "W_Q", "W_K", "W_V", "classifier"};
  std::vector<BlockRange> out;
  std::size_t off = 0, k = 0;
  LgtlParams::for_each_block(p, [&](const auto& m) {
    const auto n = static_cast<std::size_t>(m.size());
    out.push_back({names[k++], off, off + n});
    off += n;
  });
  return out;
}

inline BlockRange block_range(const LgtlParams& p, const std::string& name) {
  for (auto& b : block_ranges(p))
    if (b.name == name) return b;
  throw PreconditionError("no parameter block named " + name);
}

}  // namespace lgtl
