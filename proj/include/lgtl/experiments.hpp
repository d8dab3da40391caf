#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "lgtl/generators.hpp"
#include "lgtl/lgtl.hpp"
#include "lgtl/training.hpp"

namespace lgtl {

struct GraphFamily {
  std::string name;
  SbmConfig sbm;  // seed is overwritten per run
};

/// Everything one experiment run depends on. Graph, split, initialization and
/// training all use the run seed, so (config, seed) pins every number.
struct ExperimentConfig {
  std::vector<GraphFamily> families;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<TemplateKind> templates{TemplateKind::None, TemplateKind::HO, TemplateKind::ND, TemplateKind::LGTL};
  std::vector<Ablation> ablations{Ablation::Full, Ablation::NoGate, Ablation::NoSelection};
  TrainConfig train;
  InitScales init;
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  std::size_t selection_random_draws = 100;

  static ExperimentConfig defaults() {
    ExperimentConfig c;
    // expected degree 10 over two classes of 150
    const double per = 10.0 / 150.0;
    SbmConfig base;
    base.nodes_per_class = 150;
    base.class_count = 2;
    base.feature_dim = 8;
    base.class_mean_separation = 2.0;
    base.noise_std = 1.0;
    SbmConfig het = base, hom = base;
    het.p_intra = 0.1 * per;
    het.p_inter = 0.9 * per;
    hom.p_intra = 0.8 * per;
    hom.p_inter = 0.2 * per;
    c.families = {{"heterophilic", het}, {"homophilic", hom}};
    c.train.learning_rate = 1.0;
    c.train.epochs = 500;
    c.train.early_stop_patience = 500;
    c.train.hop_count = 2;
    c.train.sample_sizes = {16, 32};
    c.train.nd_sizes = {8, 1};
    c.train.frozen_backbone = true;
    return c;
  }

  void validate() const {
    if (families.empty()) throw ConfigError("no graph families");
    if (seeds.empty()) throw ConfigError("no seeds");
    for (const auto& f : families) f.sbm.validate();
    TrainConfig t = train;
    t.template_kind = TemplateKind::LGTL;
    t.validate();
    if (train.epochs == 0) throw ConfigError("epochs must be >= 1");
    if (selection_random_draws == 0) throw ConfigError("selection_random_draws must be >= 1");
  }

  const GraphFamily& family(const std::string& name) const {
    for (const auto& f : families)
      if (f.name == name) return f;
    throw ConfigError("no graph family named '" + name + "'");
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json fam = nlohmann::json::array();
  for (const auto& f : c.families)
    fam.push_back({{"name", f.name},
                   {"nodes_per_class", f.sbm.nodes_per_class},
                   {"class_count", f.sbm.class_count},
                   {"p_intra", f.sbm.p_intra},
                   {"p_inter", f.sbm.p_inter},
                   {"feature_dim", f.sbm.feature_dim},
                   {"class_mean_separation", f.sbm.class_mean_separation},
                   {"noise_std", f.sbm.noise_std}});
  std::vector<std::string> templates, ablations;
  for (auto t : c.templates) templates.push_back(to_string(t));
  for (auto a : c.ablations) ablations.push_back(to_string(a));
  return {{"families", fam},
          {"seeds", c.seeds},
          {"templates", templates},
          {"ablations", ablations},
          {"train",
           {{"learning_rate", c.train.learning_rate},
            {"epochs", c.train.epochs},
            {"early_stop_patience", c.train.early_stop_patience},
            {"hop_count", c.train.hop_count},
            {"sample_sizes", c.train.sample_sizes},
            {"nd_sizes", c.train.nd_sizes},
            {"frozen_backbone", c.train.frozen_backbone},
            {"resample", c.train.resample}}},
          {"init",
           {{"gate", c.init.gate},
            {"selection", c.init.selection},
            {"projection", c.init.projection},
            {"classifier", c.init.classifier}}},
          {"split", {{"train", c.train_fraction}, {"val", c.val_fraction}}},
          {"selection_random_draws", c.selection_random_draws}};
}

/// Missing keys keep their defaults, unknown keys are rejected.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  auto c = ExperimentConfig::defaults();
  auto check_keys = [](const nlohmann::json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : obj.items()) {
      bool known = false;
      for (const char* key : keys) known = known || k == key;
      if (!known) throw ConfigError("unknown key '" + k + "' in " + where);
    }
  };
  try {
    check_keys(j, {"families", "seeds", "templates", "ablations", "train", "init", "split", "selection_random_draws"},
               "config");
    if (j.contains("families")) {
      c.families.clear();
      for (const auto& f : j["families"]) {
        check_keys(f,
                   {"name", "nodes_per_class", "class_count", "p_intra", "p_inter", "feature_dim",
                    "class_mean_separation", "noise_std"},
                   "family");
        GraphFamily g{f.at("name").get<std::string>(), {}};
        g.sbm.nodes_per_class = f.value("nodes_per_class", g.sbm.nodes_per_class);
        g.sbm.class_count = f.value("class_count", g.sbm.class_count);
        g.sbm.p_intra = f.value("p_intra", g.sbm.p_intra);
        g.sbm.p_inter = f.value("p_inter", g.sbm.p_inter);
        g.sbm.feature_dim = f.value("feature_dim", g.sbm.feature_dim);
        g.sbm.class_mean_separation = f.value("class_mean_separation", g.sbm.class_mean_separation);
        g.sbm.noise_std = f.value("noise_std", g.sbm.noise_std);
        c.families.push_back(std::move(g));
      }
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("templates")) {
      c.templates.clear();
      for (const auto& t : j["templates"]) c.templates.push_back(parse_template(t.get<std::string>()));
    }
    if (j.contains("ablations")) {
      c.ablations.clear();
      for (const auto& a : j["ablations"]) c.ablations.push_back(parse_ablation(a.get<std::string>()));
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      check_keys(t,
                 {"learning_rate", "epochs", "early_stop_patience", "hop_count", "sample_sizes", "nd_sizes",
                  "frozen_backbone", "resample"},
                 "train");
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.early_stop_patience = t.value("early_stop_patience", c.train.early_stop_patience);
      c.train.hop_count = t.value("hop_count", c.train.hop_count);
      c.train.sample_sizes = t.value("sample_sizes", c.train.sample_sizes);
      c.train.nd_sizes = t.value("nd_sizes", c.train.nd_sizes);
      c.train.frozen_backbone = t.value("frozen_backbone", c.train.frozen_backbone);
      c.train.resample = t.value("resample", c.train.resample);
    }
    if (j.contains("init")) {
      const auto& i = j["init"];
      check_keys(i, {"gate", "selection", "projection", "classifier"}, "init");
      c.init.gate = i.value("gate", c.init.gate);
      c.init.selection = i.value("selection", c.init.selection);
      c.init.projection = i.value("projection", c.init.projection);
      c.init.classifier = i.value("classifier", c.init.classifier);
    }
    if (j.contains("split")) {
      check_keys(j["split"], {"train", "val"}, "split");
      c.train_fraction = j["split"].value("train", c.train_fraction);
      c.val_fraction = j["split"].value("val", c.val_fraction);
    }
    c.selection_random_draws = j.value("selection_random_draws", c.selection_random_draws);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

/// FNV-1a 64 over the canonical JSON dump, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  auto [end, ec] = std::to_chars(buf, buf + 16, h, 16);
  std::string s(buf, end);
  return std::string(16 - s.size(), '0') + s;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

struct ReportRow {
  std::string experiment, dataset, template_name, ablation;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

struct ExperimentReport {
  std::string config_hash;
  std::vector<ReportRow> rows;

  void add(std::string experiment, std::string dataset, std::string tmpl, std::string ablation, std::uint64_t seed,
           std::string metric, double value) {
    rows.push_back({std::move(experiment), std::move(dataset), std::move(tmpl), std::move(ablation), seed,
                    std::move(metric), value});
  }

  void append(const ExperimentReport& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }

  /// Mean of `metric` over the matching rows (one per seed); empty filter fields match anything.
  double mean(const std::string& experiment, const std::string& dataset, const std::string& tmpl,
              const std::string& ablation, const std::string& metric) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows) {
      if (r.metric != metric || (!experiment.empty() && r.experiment != experiment) ||
          (!dataset.empty() && r.dataset != dataset) || (!tmpl.empty() && r.template_name != tmpl) ||
          (!ablation.empty() && r.ablation != ablation))
        continue;
      sum += r.value;
      ++n;
    }
    if (n == 0) throw DomainError("no report rows for metric " + metric);
    return sum / static_cast<double>(n);
  }

  void write_csv(std::ostream& out) const {
    out << "config_hash,experiment,dataset,template,ablation,seed,metric,value\n";
    for (const auto& r : rows)
      out << config_hash << ',' << r.experiment << ',' << r.dataset << ',' << r.template_name << ',' << r.ablation
          << ',' << r.seed << ',' << r.metric << ',' << format_double(r.value) << '\n';
  }
};

/// Trains each (family, seed, template, ablation) at most once so the analyses can
/// share models.
class ExperimentRunner {
 public:
  struct Run {
    TrainConfig cfg;
    LgtlParams params;
    std::size_t best_epoch = 0;
  };

  explicit ExperimentRunner(ExperimentConfig cfg) : cfg_(std::move(cfg)), hash_(config_hash(cfg_)) { cfg_.validate(); }

  const ExperimentConfig& config() const { return cfg_; }
  const std::string& hash() const { return hash_; }

  const Graph& graph(const GraphFamily& f, std::uint64_t seed) {
    auto key = std::make_pair(f.name, seed);
    auto it = graphs_.find(key);
    if (it == graphs_.end()) {
      SbmConfig s = f.sbm;
      s.seed = seed;
      Graph g = generate_sbm(s);
      auto split = stratified_split(g, seed, cfg_.train_fraction, cfg_.val_fraction);
      it = graphs_.emplace(key, std::make_pair(std::move(g), std::move(split))).first;
    }
    return it->second.first;
  }

  const SplitSpec& split(const GraphFamily& f, std::uint64_t seed) {
    graph(f, seed);
    return graphs_.at({f.name, seed}).second;
  }

  const Run& run(const GraphFamily& f, std::uint64_t seed, TemplateKind t, Ablation a) {
    auto key = std::make_tuple(f.name, seed, t, a);
    auto it = runs_.find(key);
    if (it != runs_.end()) return it->second;
    const Graph& g = graph(f, seed);
    TrainConfig tc = cfg_.train;
    tc.seed = seed;
    tc.template_kind = t;
    tc.ablation = a;
    const auto p0 = init_params(g.feature_dim(), static_cast<std::size_t>(g.class_count()), tc.hop_count,
                                tc.sample_sizes, seed, cfg_.init);
    auto r = train(g, split(f, seed), tc, p0);
    return runs_.emplace(key, Run{tc, std::move(r.params), r.best_epoch}).first->second;
  }

 private:
  ExperimentConfig cfg_;
  std::string hash_;
  std::map<std::pair<std::string, std::uint64_t>, std::pair<Graph, SplitSpec>> graphs_;
  std::map<std::tuple<std::string, std::uint64_t, TemplateKind, Ablation>, Run> runs_;
};

namespace detail {

inline void add_metrics(ExperimentReport& rep, const std::string& exp, const std::string& ds, const std::string& t,
                        const std::string& a, std::uint64_t seed, const Metrics& m) {
  rep.add(exp, ds, t, a, seed, "micro_f1", m.micro_f1);
  rep.add(exp, ds, t, a, seed, "macro_f1", m.macro_f1);
  rep.add(exp, ds, t, a, seed, "accuracy", m.accuracy);
}

}  // namespace detail

/// Per-template test metrics, plus the node-homophily of test nodes the template
/// gets right where no template is wrong ("better") and the reverse ("worse").
inline ExperimentReport run_preliminary(ExperimentRunner& R) {
  ExperimentReport rep{R.hash(), {}};
  const auto& c = R.config();
  for (const auto& f : c.families) {
    for (auto seed : c.seeds) {
      const Graph& g = R.graph(f, seed);
      const auto& sp = R.split(f, seed);
      rep.add("prelim", f.name, "-", "-", seed, "edge_homophily", edge_homophily(g));
      std::map<TemplateKind, std::vector<int>> preds;
      for (auto t : c.templates) {
        const auto& run = R.run(f, seed, t, Ablation::Full);
        Inputs in(g, run.cfg);
        preds[t] = predict(in, run.params, sp.test);
        std::vector<int> truth;
        for (NodeId u : sp.test) truth.push_back(g.label(u));
        detail::add_metrics(rep, "prelim", f.name, to_string(t), "full", seed, compute_metrics(truth, preds[t]));
      }
      if (!preds.contains(TemplateKind::None)) continue;
      const auto& base = preds[TemplateKind::None];
      for (auto t : {TemplateKind::HO, TemplateKind::ND}) {
        if (!preds.contains(t)) continue;
        const auto& pt = preds[t];
        double hb = 0, hw = 0;
        std::size_t nb = 0, nw = 0, cb = 0, cw = 0;
        for (std::size_t k = 0; k < sp.test.size(); ++k) {
          const NodeId u = sp.test[k];
          const int y = g.label(u);
          const bool better = pt[k] == y && base[k] != y;
          const bool worse = pt[k] != y && base[k] == y;
          if (!better && !worse) continue;
          (better ? cb : cw) += 1;
          if (g.degree(u) == 0) continue;
          (better ? hb : hw) += node_homophily(g, u);
          (better ? nb : nw) += 1;
        }
        rep.add("prelim", f.name, to_string(t), "full", seed, "better_count", static_cast<double>(cb));
        rep.add("prelim", f.name, to_string(t), "full", seed, "worse_count", static_cast<double>(cw));
        if (nb > 0) rep.add("prelim", f.name, to_string(t), "full", seed, "better_node_homophily", hb / nb);
        if (nw > 0) rep.add("prelim", f.name, to_string(t), "full", seed, "worse_node_homophily", hw / nw);
      }
    }
  }
  return rep;
}

/// Mean gate weight per hop over test nodes of the trained full LGTL model.
inline ExperimentReport run_gate_analysis(ExperimentRunner& R) {
  ExperimentReport rep{R.hash(), {}};
  const auto& c = R.config();
  for (const auto& f : c.families) {
    for (auto seed : c.seeds) {
      const Graph& g = R.graph(f, seed);
      const auto& sp = R.split(f, seed);
      const auto& run = R.run(f, seed, TemplateKind::LGTL, Ablation::Full);
      Inputs in(g, run.cfg);
      Vector mean = Vector::Zero(static_cast<Eigen::Index>(run.cfg.hop_count + 1));
      for (NodeId u : sp.test) mean += in.trace(u, run.params).s_hat;
      mean /= static_cast<double>(sp.test.size());
      for (Eigen::Index i = 0; i < mean.size(); ++i)
        rep.add("gate", f.name, "lgtl", "full", seed, "gate_hop_" + std::to_string(i), mean(i));
    }
  }
  return rep;
}

/// Per hop: how often the top-beta sampled node (the self-loop excluded) shares the
/// center's label, against picking one of the same sampled nodes uniformly at random.
inline ExperimentReport run_selection_analysis(ExperimentRunner& R) {
  ExperimentReport rep{R.hash(), {}};
  const auto& c = R.config();
  for (const auto& f : c.families) {
    for (auto seed : c.seeds) {
      const Graph& g = R.graph(f, seed);
      const auto& sp = R.split(f, seed);
      const auto& run = R.run(f, seed, TemplateKind::LGTL, Ablation::Full);
      Inputs in(g, run.cfg);
      const std::size_t L = run.cfg.hop_count;
      std::vector<double> top(L + 1, 0.0), rnd(L + 1, 0.0);
      std::vector<std::size_t> count(L + 1, 0);
      for (NodeId u : sp.test) {
        const auto t = in.trace(u, run.params);
        for (std::size_t i = 1; i <= L; ++i) {
          const auto& h = t.hops[i];
          if (h.degenerate || h.star.size() < 2) continue;
          Eigen::Index best = 1;
          for (Eigen::Index j = 2; j < h.beta.size(); ++j)
            if (h.beta(j) > h.beta(best)) best = j;
          top[i] += g.label(h.star[static_cast<std::size_t>(best)]) == g.label(u) ? 1.0 : 0.0;
          CounterRng rng(derive_seed(seed, {0x5e1ec7, u, i}));
          std::size_t hits = 0;
          for (std::size_t d = 0; d < c.selection_random_draws; ++d)
            hits += g.label(h.star[1 + rng.below(h.star.size() - 1)]) == g.label(u) ? 1 : 0;
          rnd[i] += static_cast<double>(hits) / static_cast<double>(c.selection_random_draws);
          ++count[i];
        }
      }
      for (std::size_t i = 1; i <= L; ++i) {
        if (count[i] == 0) continue;
        const auto n = static_cast<double>(count[i]);
        rep.add("selection", f.name, "lgtl", "full", seed, "top_beta_consistency_hop_" + std::to_string(i), top[i] / n);
        rep.add("selection", f.name, "lgtl", "full", seed, "random_consistency_hop_" + std::to_string(i), rnd[i] / n);
      }
    }
  }
  return rep;
}

inline ExperimentReport run_ablation(ExperimentRunner& R) {
  ExperimentReport rep{R.hash(), {}};
  const auto& c = R.config();
  for (const auto& f : c.families) {
    for (auto seed : c.seeds) {
      const Graph& g = R.graph(f, seed);
      const auto& sp = R.split(f, seed);
      for (auto a : c.ablations) {
        const auto& run = R.run(f, seed, TemplateKind::LGTL, a);
        Inputs in(g, run.cfg);
        detail::add_metrics(rep, "ablation", f.name, "lgtl", to_string(a), seed, evaluate(in, run.params, sp.test));
      }
    }
  }
  return rep;
}

}  // namespace lgtl
