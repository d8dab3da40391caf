#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lgtl/all.hpp"

using namespace lgtl;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::string out = "-";
};

// Writes to the --out file, or stdout for "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path != "-") {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw PreconditionError("cannot write " + path);
    }
  }
  std::ostream& operator*() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::vector<std::size_t> parse_sizes(const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoul(item));
    } catch (const std::exception&) {
      throw ConfigError("bad size list '" + csv + "'");
    }
  }
  return out;
}

ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) return ExperimentConfig::defaults();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, 0, e.what());
  }
  return experiment_config_from_json(j);
}

Graph graph_from(const std::string& dir, const ExperimentConfig& cfg, const std::string& family, std::uint64_t seed) {
  if (!dir.empty()) return load_graph_dir(dir);
  SbmConfig s = cfg.family(family).sbm;
  s.seed = seed;
  return generate_sbm(s);
}

int cmd_tokenize(const Common& c, const std::string& graph_dir, const std::string& family, const std::string& tmpl,
                 NodeId center, std::size_t hops, const std::string& sizes_csv, const std::string& params_path) {
  const auto cfg = ExperimentConfig::defaults();
  const Graph g = graph_from(graph_dir, cfg, family, c.seed);
  const auto kind = parse_template(tmpl);
  auto sizes = parse_sizes(sizes_csv);
  TokenList tl;
  switch (kind) {
    case TemplateKind::None: tl = none_tokens(g, center); break;
    case TemplateKind::HO: tl = ho_tokens(g, center, hops); break;
    case TemplateKind::ND: {
      if (sizes.empty()) sizes.assign(hops, 2);
      tl = nd_tokens(g, center, sizes, c.seed).first;
      break;
    }
    case TemplateKind::LGTL: {
      LgtlParams p;
      if (!params_path.empty()) {
        p = read_params(params_path);
      } else {
        if (sizes.empty()) sizes.assign(hops, 4);
        p = init_params(g.feature_dim(), static_cast<std::size_t>(std::max(g.class_count(), 1)), hops, sizes, c.seed,
                        cfg.init);
      }
      tl = lgtl_forward(g, center, p, c.seed).tokens;
      break;
    }
  }
  Output out(c.out);
  *out << "token,layer,field,key,value\n";
  for (std::size_t t = 0; t < tl.size(); ++t) {
    const auto layer = t < tl.layer.size() ? tl.layer[t] : 0;
    for (Eigen::Index d = 0; d < tl.tokens.cols(); ++d)
      *out << t << ',' << layer << ",feature," << d << ',' << format_double(tl.tokens(static_cast<Eigen::Index>(t), d))
           << '\n';
    for (const auto& s : tl.provenance[t]) *out << t << ',' << layer << ",source," << s.node << ',' << to_string(s.weight) << '\n';
  }
  return 0;
}

int cmd_matrix(const Common& c, const std::string& kind, std::size_t n, std::size_t depth) {
  const bool ho = kind == "ho";
  if (!ho && kind != "nd") throw ConfigError("--kind must be ho or nd");
  const auto t = ho ? m_ho(n, depth) : m_nd(n, depth);
  Output out(c.out);
  *out << "record,row,col,value\n";
  for (std::size_t k = 0; k <= depth; ++k)
    for (std::size_t i = 0; i <= depth; ++i) *out << "entry," << k << ',' << i << ',' << to_string(t(k, i)) << '\n';
  const auto rep = check_properties(t);
  bool ok = rep.all();
  *out << "check,parity," << rep.parity << ",\n";
  *out << "check," << (ho ? "row_decay" : "within_layer_decay") << ',' << rep.row_decay << ",\n";
  *out << "check," << (ho ? "column_decay" : "cross_layer_growth") << ',' << rep.column_monotonicity << ','
       << rep.counterexample.value_or("") << '\n';
  if (!ho) {
    const auto p = phi(n, depth);
    for (std::size_t k = 0; k <= depth; ++k) *out << "phi," << depth << ',' << k << ',' << to_string(p.phi[k]) << '\n';
    const auto pr = check_phi_properties(p);
    ok = ok && pr.all();
    *out << "check,phi_recurrence," << pr.recurrence << ",\n";
    *out << "check,phi_near_hop," << pr.near_hop << ",\n";
    *out << "check,phi_parity_bias," << pr.parity_bias << ',' << pr.counterexample.value_or("") << '\n';
  }
  return ok ? 0 : 1;
}

int cmd_bounds(const Common& c, bool seed_given, const std::string& tmpl, const std::string& graph_dir,
               std::size_t hops, std::size_t graphs, std::size_t nodes) {
  if (tmpl != "ho" && tmpl != "nd" && tmpl != "lgtl" && tmpl != "all") throw ConfigError("--template must be ho, nd, lgtl or all");
  std::vector<BoundSuiteRow> rows;
  if (graph_dir.empty()) {
    BoundSuiteConfig bc;
    bc.graphs = graphs;
    bc.nodes_per_graph = nodes;
    bc.hops = hops;
    bc.nd_sizes.assign(hops, 2);
    bc.nd_sizes.front() = 4;
    if (seed_given) bc.seed = c.seed;
    rows = run_bound_suite(bc);
  } else {
    const Graph g = load_graph_dir(graph_dir);
    const double lip = estimate_lipschitz(g);
    const auto [w, lp] = bound_model(g.feature_dim(), hops, c.seed);
    std::vector<std::size_t> nd_sizes(hops, 2);
    nd_sizes.front() = 4;
    const auto limit = std::min<std::size_t>(nodes, g.num_nodes());
    for (NodeId u = 0; u < limit; ++u) {
      if (tmpl == "ho" || tmpl == "all") rows.push_back({0, "ho", ho_bound_row(g, u, hops, w, lip)});
      if (tmpl == "nd" || tmpl == "all") rows.push_back({0, "nd", nd_bound_row(g, u, nd_sizes, c.seed, w, lip)});
      if (tmpl == "lgtl" || tmpl == "all") rows.push_back({0, "lgtl", lgtl_bound_row(g, u, lp, c.seed, lip)});
    }
  }
  Output out(c.out);
  *out << "graph,template,node,smoothness,bound,violated\n";
  bool ok = true;
  for (const auto& r : rows) {
    if (tmpl != "all" && r.template_name != tmpl) continue;
    if (r.row.skipped) continue;
    const bool bad = r.row.smoothness > r.row.bound + 1e-9;
    ok = ok && !bad;
    *out << r.graph << ',' << r.template_name << ',' << r.row.node << ',' << format_double(r.row.smoothness) << ','
         << format_double(r.row.bound) << ',' << bad << '\n';
  }
  return ok ? 0 : 1;
}

struct TrainArgs {
  std::string graph_dir, family = "heterophilic", config, tmpl = "lgtl", ablation = "full", sizes, nd_sizes,
                         params_out;
  std::optional<std::size_t> hops, epochs, patience;
  std::optional<double> lr;
  bool train_backbone = false, resample = false;
};

int cmd_train(const Common& c, const TrainArgs& a) {
  const auto cfg = load_config(a.config);
  const Graph g = graph_from(a.graph_dir, cfg, a.family, c.seed);
  if (!g.has_labels()) throw PreconditionError("training needs labels");
  TrainConfig tc = cfg.train;
  tc.seed = c.seed;
  tc.template_kind = parse_template(a.tmpl);
  tc.ablation = parse_ablation(a.ablation);
  if (a.hops) tc.hop_count = *a.hops;
  if (a.lr) tc.learning_rate = *a.lr;
  if (a.epochs) tc.epochs = *a.epochs;
  if (a.patience) tc.early_stop_patience = *a.patience;
  if (!a.sizes.empty()) tc.sample_sizes = parse_sizes(a.sizes);
  if (!a.nd_sizes.empty()) tc.nd_sizes = parse_sizes(a.nd_sizes);
  if (a.hops && a.sizes.empty()) tc.sample_sizes.resize(tc.hop_count, tc.sample_sizes.empty() ? 4 : tc.sample_sizes.back());
  if (a.train_backbone) tc.frozen_backbone = false;
  tc.resample = a.resample;
  tc.validate();
  const auto split = stratified_split(g, c.seed, cfg.train_fraction, cfg.val_fraction);
  const auto p0 = init_params(g.feature_dim(), static_cast<std::size_t>(g.class_count()), tc.hop_count,
                              tc.sample_sizes, c.seed, cfg.init);
  const auto r = train(g, split, tc, p0);
  Inputs in(g, tc);
  Output out(c.out);
  *out << "split,epoch,metric,value\n";
  for (const auto& e : r.curve) {
    *out << "train," << e.epoch << ",loss," << format_double(e.loss) << '\n';
    *out << "train," << e.epoch << ",micro_f1," << format_double(e.train_micro_f1) << '\n';
    *out << "val," << e.epoch << ",micro_f1," << format_double(e.val_micro_f1) << '\n';
  }
  *out << "best,"
       << r.best_epoch << ",epoch," << r.best_epoch << '\n';
  if (!split.test.empty()) {
    const auto m = evaluate(in, r.params, split.test);
    *out << "test," << r.best_epoch << ",micro_f1," << format_double(m.micro_f1) << '\n';
    *out << "test," << r.best_epoch << ",macro_f1," << format_double(m.macro_f1) << '\n';
    *out << "test," << r.best_epoch << ",accuracy," << format_double(m.accuracy) << '\n';
  }
  if (!a.params_out.empty()) write_params(a.params_out, r.params);
  return 0;
}

int cmd_experiment(const Common& c, const std::string& which, const std::string& config, std::optional<std::size_t> seeds,
                   bool seed_given) {
  auto cfg = load_config(config);
  if (seed_given || seeds) {
    const std::size_t count = seeds.value_or(cfg.seeds.size());
    const std::uint64_t base = seed_given ? c.seed : (cfg.seeds.empty() ? 0 : cfg.seeds.front());
    cfg.seeds.clear();
    for (std::size_t i = 0; i < count; ++i) cfg.seeds.push_back(base + i);
  }
  ExperimentRunner R(cfg);
  ExperimentReport rep{R.hash(), {}};
  if (which == "prelim") rep = run_preliminary(R);
  else if (which == "gate-analysis") rep = run_gate_analysis(R);
  else if (which == "selection-analysis") rep = run_selection_analysis(R);
  else rep = run_ablation(R);
  Output out(c.out);
  rep.write_csv(*out);
  return 0;
}

int cmd_check(const Common& c) {
  const auto results = run_invariant_checks();
  Output out(c.out);
  *out << "check,pass,detail\n";
  bool ok = true;
  for (const auto& r : results) {
    ok = ok && r.pass;
    *out << r.name << ',' << (r.pass ? "pass" : "FAIL") << ",\"" << r.detail << "\"\n";
  }
  return ok ? 0 : 1;
}

int cmd_generate(const Common& c, const std::string& family, const std::string& config, std::size_t tree_n,
                 std::size_t tree_depth) {
  if (c.out == "-") throw ConfigError("generate needs --out <directory>");
  if (tree_n > 0) {
    save_graph_dir(generate_regular_tree(tree_n, tree_depth, 1, c.seed), c.out);
    return 0;
  }
  auto s = load_config(config).family(family).sbm;
  s.seed = c.seed;
  save_graph_dir(generate_sbm(s), c.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learnable graph token lists: templates, hop tables, bounds and experiments"};
  app.require_subcommand(1);
  Common c;
  bool seed_given = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&](const std::uint64_t& s) {
          c.seed = s;
          seed_given = true;
        },
        "random seed");
    sub->add_option("--out", c.out, "output path ('-' for stdout)");
  };

  std::string graph_dir, family = "heterophilic", tmpl = "ho", sizes, params, kind = "ho", config;
  NodeId center = 0;
  std::size_t hops = 2, n = 3, depth = 8, graphs = 50, nodes = 20, tree_n = 0, tree_depth = 3;
  std::optional<std::size_t> seeds;

  auto* tok = app.add_subcommand("tokenize", "emit one node's token list with provenance");
  add_common(tok);
  tok->add_option("--graph", graph_dir, "graph directory (edges.txt, features.csv, labels.csv)");
  tok->add_option("--family", family, "synthetic family when --graph is absent");
  tok->add_option("--template", tmpl)->check(CLI::IsMember({"none", "ho", "nd", "lgtl"}));
  tok->add_option("--center", center);
  tok->add_option("--hops", hops);
  tok->add_option("--sizes", sizes, "comma-separated per-hop sizes");
  tok->add_option("--params", params, "LGTL parameter file");

  auto* mat = app.add_subcommand("matrix", "hop-contribution table and its property checks");
  add_common(mat);
  mat->add_option("--kind", kind)->check(CLI::IsMember({"ho", "nd"}));
  mat->add_option("--n", n);
  mat->add_option("--depth", depth);

  std::string bound_tmpl = "all";
  auto* bnd = app.add_subcommand("bounds", "per-node smoothness next to its upper bound");
  add_common(bnd);
  bnd->add_option("--template", bound_tmpl)->check(CLI::IsMember({"ho", "nd", "lgtl", "all"}));
  bnd->add_option("--graph", graph_dir);
  bnd->add_option("--hops", hops);
  bnd->add_option("--graphs", graphs, "random graphs when --graph is absent");
  bnd->add_option("--nodes", nodes, "centers per graph");

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "train one model, emit the curve and test metrics");
  add_common(trn);
  trn->add_option("--graph", ta.graph_dir);
  trn->add_option("--family", ta.family);
  trn->add_option("--config", ta.config);
  trn->add_option("--template", ta.tmpl)->check(CLI::IsMember({"none", "ho", "nd", "lgtl"}));
  trn->add_option("--ablation", ta.ablation)->check(CLI::IsMember({"full", "no_gate", "no_selection"}));
  trn->add_option("--hops", ta.hops);
  trn->add_option("--lr", ta.lr);
  trn->add_option("--epochs", ta.epochs);
  trn->add_option("--patience", ta.patience);
  trn->add_option("--sizes", ta.sizes, "LGTL per-hop sample sizes");
  trn->add_option("--nd-sizes", ta.nd_sizes, "ND tree shape");
  trn->add_flag("--train-backbone", ta.train_backbone, "also train W_Q, W_K, W_V");
  trn->add_flag("--resample", ta.resample, "redraw samples every epoch");
  trn->add_option("--params-out", ta.params_out, "write trained parameters here");

  std::vector<CLI::App*> experiments;
  for (const char* name : {"prelim", "gate-analysis", "selection-analysis", "ablate"}) {
    auto* e = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    add_common(e);
    e->add_option("--config", config, "experiment JSON");
    e->add_option("--seeds", seeds, "number of consecutive seeds starting at --seed");
    experiments.push_back(e);
  }

  auto* chk = app.add_subcommand("check", "run the invariant suite");
  add_common(chk);

  auto* gen = app.add_subcommand("generate", "write a synthetic graph directory");
  add_common(gen);
  gen->add_option("--family", family);
  gen->add_option("--config", config);
  gen->add_option("--tree", tree_n, "regular tree branching instead of an SBM graph");
  gen->add_option("--depth", tree_depth);

  CLI11_PARSE(app, argc, argv);
  try {
    if (tok->parsed()) return cmd_tokenize(c, graph_dir, family, tmpl, center, hops, sizes, params);
    if (mat->parsed()) return cmd_matrix(c, kind, n, depth);
    if (bnd->parsed()) return cmd_bounds(c, seed_given, bound_tmpl, graph_dir, hops, graphs, nodes);
    if (trn->parsed()) return cmd_train(c, ta);
    for (auto* e : experiments)
      if (e->parsed()) return cmd_experiment(c, e->get_name(), config, seeds, seed_given);
    if (chk->parsed()) return cmd_check(c);
    if (gen->parsed()) return cmd_generate(c, family, config, tree_n, tree_depth);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
