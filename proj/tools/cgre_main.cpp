// Command-line driver: builds constraint graphs, trains models, evaluates
// checkpoints and generates the synthetic fixtures. Every run is driven by a
// key=value config file and is reproducible bit for bit from its seed.
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "cgre/checkpoint.hpp"
#include "cgre/config.hpp"
#include "cgre/evaluation.hpp"
#include "cgre/synthetic.hpp"
#include "cgre/train.hpp"

namespace fs = std::filesystem;
using namespace cgre;

namespace {

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << content;
}

void need(const std::string& value, const char* key) {
  if (value.empty())
    throw ConfigError(std::string("config is missing required key '") + key +
                      "'");
}

Schema load_schema(const RunConfig& cfg) {
  need(cfg.relations_path, "relations");
  need(cfg.types_path, "types");
  return Schema::load(cfg.relations_path, cfg.types_path);
}

ConstraintGraph load_graph(const RunConfig& cfg, const Schema& schema) {
  need(cfg.constraints_path, "constraints");
  return build_constraint_graph(schema, cfg.constraints_path);
}

// Scores every bag with a read-only model. Work items are independent, so the
// result is identical for any thread count.
std::vector<Tensor> score_bags(const std::vector<EncodedBag>& bags,
                               const ModelParams& p, const ConstraintGraph& g,
                               const EvalContext& ctx, int threads) {
  std::vector<Tensor> out(bags.size());
  if (threads <= 1 || bags.size() < 2) {
    for (std::size_t i = 0; i < bags.size(); ++i)
      out[i] = predict_bag(bags[i], p, g, ctx);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    NoGradGuard off;
    try {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= bags.size()) break;
        out[i] = predict_bag(bags[i], p, g, ctx);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mu);
      if (!failure) failure = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(threads, static_cast<int>(bags.size()));
  pool.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

// ---------------------------------------------------------------- build-graph

int cmd_build_graph(const RunConfig& cfg) {
  Schema schema = load_schema(cfg);
  ConstraintGraph g = load_graph(cfg, schema);
  need(cfg.output_dir, "output");

  std::ostringstream report;
  report << "nodes: " << g.num_nodes() << " (" << g.num_relations()
         << " relations + " << g.num_types() << " types)\n"
         << g.report.to_text();

  std::ostringstream out;
  out << "nodes " << g.num_nodes() << "\n"
      << "relations " << g.num_relations() << "\n"
      << "types " << g.num_types() << "\n";
  for (int r = 0; r < g.num_relations(); ++r)
    out << "node " << r << " relation " << schema.relation_name(r) << "\n";
  for (int t = 0; t < g.num_types(); ++t)
    out << "node " << g.type_node(t) << " type " << schema.type_name(t) << "\n";
  for (int i = 0; i < g.num_nodes(); ++i)
    for (int j = 0; j < g.num_nodes(); ++j)
      if (g.adjacency.at(i, j) != 0.0) out << "edge " << i << " " << j << "\n";

  fs::create_directories(cfg.output_dir);
  write_file(fs::path(cfg.output_dir) / "graph.txt", out.str());
  write_file(fs::path(cfg.output_dir) / "graph_report.txt", report.str());
  std::cout << report.str();
  return 0;
}

// ---------------------------------------------------------------------- train

int cmd_train(const RunConfig& cfg) {
  need(cfg.train_path, "train");
  need(cfg.output_dir, "output");
  Schema schema = load_schema(cfg);
  ConstraintGraph graph = load_graph(cfg, schema);

  auto bags = parse_dataset(cfg.train_path, schema, BagMode::train);
  Rng rng(cfg.seed);
  Vocabulary vocab = build_vocabulary(bags, cfg.dims.d_w, cfg.dims.d_p,
                                      cfg.dims.max_len, rng,
                                      cfg.pretrained_path);
  ModelParams params =
      ModelParams::init(schema, std::move(vocab), cfg.variant, cfg.dims, rng);
  auto encoded = encode_bags(bags, params.vocab);

  fs::create_directories(cfg.output_dir);
  const fs::path ckpt = fs::path(cfg.output_dir) / "checkpoint";
  const fs::path log_path = fs::path(cfg.output_dir) / "train.log";

  std::ostringstream log;
  ModelParams last_good = params.clone();
  TrainOptions opt;
  opt.epochs = cfg.epochs;
  opt.batch_size = cfg.batch_size;
  opt.learning_rate = cfg.learning_rate;
  opt.on_epoch = [&](int epoch, double loss, const ModelParams& p) {
    log << "epoch " << epoch << " loss " << fmt17(loss) << "\n";
    last_good = p.clone();
  };
  try {
    train_model(params, encoded, graph, opt, rng);
  } catch (const NumericError& e) {
    log << "diverged: " << e.what() << "\n";
    save_checkpoint(ckpt.string(), last_good);
    write_file(log_path, log.str());
    std::cerr << "training diverged; last good checkpoint kept at " << ckpt
              << "\n";
    throw;
  }
  save_checkpoint(ckpt.string(), params);
  write_file(log_path, log.str());
  std::cout << "trained " << to_string(cfg.variant) << " for " << cfg.epochs
            << " epochs on " << encoded.size() << " bags -> " << ckpt << "\n";
  return 0;
}

// ------------------------------------------------------- shared eval plumbing

struct EvalData {
  ConstraintGraph graph;
  ModelParams params;
  std::vector<EncodedBag> bags;
};

EvalData load_eval_data(const RunConfig& cfg, const std::string& ckpt,
                        const std::string& split) {
  need(cfg.test_path, "test");
  Schema schema = load_schema(cfg);
  EvalData d;
  d.graph = load_graph(cfg, schema);
  d.params = load_checkpoint(ckpt);
  if (d.params.schema.hash() != schema.hash())
    throw SchemaError("checkpoint schema does not match the configured "
                      "relation/type lists; refusing to evaluate");
  auto bags = parse_dataset(cfg.test_path, schema, BagMode::eval);
  d.bags = encode_bags(bags, d.params.vocab);
  if (!split.empty()) {
    SplitMode mode;
    if (split == "one") mode = SplitMode::size_one;
    else if (split == "two") mode = SplitMode::size_two;
    else if (split == "all") mode = SplitMode::size_all;
    else if (split == "zero") mode = SplitMode::zero_valid;
    else if (split == "one-valid") mode = SplitMode::one_valid;
    else mode = SplitMode::all_valid;
    Rng rng(cfg.seed);
    d.bags = build_eval_splits(d.bags, mode, rng);
  }
  return d;
}

std::vector<Prediction> collect_predictions(
    const std::vector<EncodedBag>& bags, const std::vector<Tensor>& scores) {
  std::vector<Prediction> preds;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    const int n_r = scores[i].shape[0];
    for (int r = 1; r < n_r; ++r)
      preds.push_back({bags[i].pair_id(), r,
                       scores[i].at(static_cast<std::size_t>(r))});
  }
  return preds;
}

std::string pr_csv(const std::vector<PrPoint>& points) {
  std::string csv = "recall,precision\n";
  for (const PrPoint& pt : points)
    csv += fmt17(pt.recall) + "," + fmt17(pt.precision) + "\n";
  return csv;
}

bool wants(const RunConfig& cfg, const std::string& metric) {
  for (const auto& m : cfg.metrics)
    if (m == metric) return true;
  return false;
}

// ----------------------------------------------------------------------- eval

void report_pr(const RunConfig& cfg, const std::vector<Prediction>& preds,
               const std::map<std::string, std::set<int>>& gold,
               nlohmann::json& report) {
  RankedPredictions rp = rank_predictions(preds, gold);
  report["predictions"] = rp.items.size();
  report["facts"] = rp.total_positive_facts;
  std::vector<PrPoint> curve = pr_curve(rp);
  write_file(fs::path(cfg.output_dir) / "pr_curve.csv", pr_csv(curve));
  if (wants(cfg, "auc")) report["auc"] = auc(curve);
  if (wants(cfg, "pn")) {
    nlohmann::json pn;
    for (int n : {100, 200, 300})
      if (n <= static_cast<int>(rp.items.size()))
        pn[std::to_string(n)] = precision_at_n(rp, n);
    report["p_at_n"] = pn;
  }
}

void finish_report(const RunConfig& cfg, const nlohmann::json& report) {
  const std::string body = report.dump(2) + "\n";
  write_file(fs::path(cfg.output_dir) / "metrics.json", body);
  std::cout << body;
}

// Metrics recomputed from a prediction file. Rankings over all relations and
// attention weights are not recoverable from it, so hits/aacc are refused.
int cmd_eval_from_file(const RunConfig& cfg,
                       const std::string& predictions_file, bool hits) {
  if (hits || wants(cfg, "hits") || wants(cfg, "aacc"))
    throw ConfigError("hits and aacc need the model; run eval against a "
                      "checkpoint, not a prediction file");
  need(cfg.test_path, "test");
  need(cfg.output_dir, "output");
  Schema schema = load_schema(cfg);
  auto bags = parse_dataset(cfg.test_path, schema, BagMode::eval);

  std::vector<Prediction> preds;
  std::map<std::string, int> argmax_by_pair;
  std::ifstream in(predictions_file);
  if (!in) throw ParseError("cannot open " + predictions_file);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = predictions_file + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    for (const char* f : {"pair_id", "relation", "score", "argmax"})
      if (!j.contains(f))
        throw ParseError(where + ": missing field '" + std::string(f) + "'");
    Prediction p;
    p.pair_id = j["pair_id"].get<std::string>();
    p.relation = schema.relation_id(j["relation"].get<std::string>());
    if (!j["score"].is_number())
      throw ParseError(where + ": score is not a number");
    p.score = j["score"].get<double>();
    preds.push_back(p);
    argmax_by_pair[p.pair_id] =
        schema.relation_id(j["argmax"].get<std::string>());
  }

  std::map<std::string, std::set<int>> gold;
  std::vector<BagOutcome> outcomes;
  for (const Bag& b : bags) {
    auto it = argmax_by_pair.find(b.pair_id());
    if (it == argmax_by_pair.end())
      throw ParseError(predictions_file + ": no predictions for bag '" +
                       b.pair_id() + "'");
    BagOutcome o;
    o.predicted = it->second;
    for (int label : b.label_set)
      if (label != Schema::kNaRelation) {
        o.gold.push_back(label);
        gold[b.pair_id()].insert(label);
      }
    outcomes.push_back(o);
  }

  fs::create_directories(cfg.output_dir);
  nlohmann::json report;
  report["bags"] = bags.size();
  if (wants(cfg, "auc") || wants(cfg, "pn")) report_pr(cfg, preds, gold, report);
  if (wants(cfg, "f1")) report["micro_f1"] = micro_f1(outcomes, false);
  finish_report(cfg, report);
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& ckpt,
             const std::string& split, bool hits, int threads,
             const std::string& predictions_file) {
  if (!predictions_file.empty())
    return cmd_eval_from_file(cfg, predictions_file, hits);

  EvalData d = load_eval_data(cfg, ckpt, split);
  const Schema& schema = d.params.schema;
  need(cfg.output_dir, "output");
  fs::create_directories(cfg.output_dir);
  nlohmann::json report;
  report["bags"] = d.bags.size();
  if (!split.empty()) report["split"] = split;

  EvalContext ctx = make_eval_context(d.params, d.graph);
  std::vector<Tensor> scores = score_bags(d.bags, d.params, d.graph, ctx, threads);
  std::vector<Prediction> preds = collect_predictions(d.bags, scores);
  std::vector<BagOutcome> outcomes;
  for (std::size_t i = 0; i < d.bags.size(); ++i) {
    BagOutcome o;
    o.predicted = predicted_relation(scores[i]);
    for (int label : d.bags[i].label_set)
      if (label != Schema::kNaRelation) o.gold.push_back(label);
    outcomes.push_back(o);
  }

  if (wants(cfg, "auc") || wants(cfg, "pn"))
    report_pr(cfg, preds, gold_facts(d.bags), report);
  if (wants(cfg, "f1"))
    report["micro_f1"] = micro_f1(outcomes, split == "zero");

  if (hits || wants(cfg, "hits")) {
    need(cfg.train_path, "train");
    auto train_instances = parse_instances(cfg.train_path, schema);
    auto counts =
        relation_instance_counts(train_instances, schema.num_relations());
    std::vector<RankedBag> ranked;
    for (std::size_t i = 0; i < d.bags.size(); ++i) {
      RankedBag rb;
      rb.ranking = ranking_from_scores(scores[i]);
      for (int label : d.bags[i].label_set)
        if (label != Schema::kNaRelation) rb.gold.push_back(label);
      ranked.push_back(rb);
    }
    nlohmann::json hits_report;
    for (int threshold : {100, 200}) {
      LongTailBucket bucket = long_tail_bucket(counts, threshold);
      nlohmann::json at;
      for (int k : {10, 15, 20})
        at[std::to_string(k)] = hits_at_k_macro(ranked, bucket, k);
      hits_report[std::to_string(threshold)] = at;
    }
    report["hits"] = hits_report;
  }

  if (wants(cfg, "aacc")) {
    std::vector<ScoredBag> scored;
    for (const EncodedBag& b : d.bags) {
      std::vector<int> gold;
      for (int label : b.label_set)
        if (label != Schema::kNaRelation) gold.push_back(label);
      if (gold.size() != 1) continue;
      ScoredBag sb;
      sb.weights = bag_attention_weights(b, d.params, d.graph, ctx, gold[0]);
      sb.valid = b.valid;
      scored.push_back(std::move(sb));
    }
    report["aacc"] = attention_accuracy(scored);
  }

  finish_report(cfg, report);
  return 0;
}

// -------------------------------------------------------------------- predict

int cmd_predict(const RunConfig& cfg, const std::string& ckpt, int threads) {
  EvalData d = load_eval_data(cfg, ckpt, "");
  need(cfg.output_dir, "output");
  EvalContext ctx = make_eval_context(d.params, d.graph);
  std::vector<Tensor> scores = score_bags(d.bags, d.params, d.graph, ctx, threads);

  std::ostringstream out;
  for (std::size_t i = 0; i < d.bags.size(); ++i) {
    const std::string argmax =
        d.params.schema.relation_name(predicted_relation(scores[i]));
    for (int r = 1; r < d.params.schema.num_relations(); ++r) {
      nlohmann::json j;
      j["pair_id"] = d.bags[i].pair_id();
      j["relation"] = d.params.schema.relation_name(r);
      j["score"] = scores[i].at(static_cast<std::size_t>(r));
      j["argmax"] = argmax;
      out << j.dump() << "\n";
    }
  }
  fs::create_directories(cfg.output_dir);
  write_file(fs::path(cfg.output_dir) / "predictions.jsonl", out.str());
  std::cout << "wrote " << d.bags.size() << " bags to "
            << (fs::path(cfg.output_dir) / "predictions.jsonl") << "\n";
  return 0;
}

// ---------------------------------------------------------------- gen-fixture

int cmd_gen_fixture(const std::string& kind_name, std::uint64_t seed,
                    const std::string& out_dir) {
  FixtureKind kind = parse_fixture_kind(kind_name);
  Fixture f = make_fixture(kind, seed);
  write_fixture(out_dir, f);

  // a ready-to-run config sized for the fixture corpora
  const fs::path dir = fs::absolute(out_dir);
  std::ostringstream conf;
  conf << "train = " << (dir / "train.jsonl").string() << "\n"
       << "test = " << (dir / "test.jsonl").string() << "\n"
       << "relations = " << (dir / "relations.txt").string() << "\n"
       << "types = " << (dir / "types.txt").string() << "\n"
       << "constraints = " << (dir / "constraints.tsv").string() << "\n"
       << "output = " << (dir / "run").string() << "\n"
       << "variant = cgre\n"
       << "word size = 16\n"
       << "position size = 4\n"
       << "filter num. = 16\n"
       << "window size = 3\n"
       << "coefficient lambda = 17\n"
       << "emb. size = 16\n"
       << "hidden size = 16\n"
       << "gcn layers = 2\n"
       << "type size = 8\n"
       << "max length = 16\n"
       << "dropout rate = 0\n"
       << "batch size = " << (kind == FixtureKind::overfit ? 100 : 32) << "\n"
       << "learning rate = " << (kind == FixtureKind::overfit ? "0.2" : "0.3")
       << "\n"
       << "epochs = " << (kind == FixtureKind::overfit ? 30 : 20) << "\n"
       << "seed = " << seed << "\n"
       << "metrics = auc, pn, f1"
       << (kind == FixtureKind::attention ? ", aacc" : "") << "\n";
  write_file(dir / "run.conf", conf.str());

  std::cout << "fixture " << kind_name << " seed " << seed << ": "
            << f.train.size() << " train / " << f.test.size()
            << " test sentences -> " << dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"constraint-graph relation extraction"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, output_override, predictions_file;
  std::string split, fixture_kind, fixture_out;
  std::uint64_t fixture_seed = 1;
  int threads = 1;
  bool hits = false;

  auto add_config = [&](CLI::App* sc) {
    sc->add_option("config", config_path, "run config file")->required();
    sc->add_option("--output", output_override,
                   "override the configured output directory");
  };

  CLI::App* sc_graph = app.add_subcommand(
      "build-graph", "build the constraint graph and write its structure");
  add_config(sc_graph);

  CLI::App* sc_train =
      app.add_subcommand("train", "train a model and write a checkpoint");
  add_config(sc_train);

  CLI::App* sc_eval =
      app.add_subcommand("eval", "score a checkpoint and write metrics");
  add_config(sc_eval);
  sc_eval->add_option("--checkpoint", checkpoint, "checkpoint to evaluate");
  auto* size_opt =
      sc_eval
          ->add_option("--split", split,
                       "bag-size split: one, two or all sentences per bag")
          ->check(CLI::IsMember({"one", "two", "all"}));
  auto* validity_opt =
      sc_eval
          ->add_option("--validity", split,
                       "validity split: zero, one-valid or all-valid")
          ->check(CLI::IsMember({"zero", "one-valid", "all-valid"}));
  size_opt->excludes(validity_opt);
  validity_opt->excludes(size_opt);
  sc_eval->add_flag("--hits", hits, "report macro Hits@{10,15,20} for the "
                                    "<100 and <200 training-count buckets");
  sc_eval->add_option("--threads", threads, "scoring worker threads")
      ->check(CLI::Range(1, 256));
  auto* pred_opt =
      sc_eval->add_option("--predictions", predictions_file,
                          "recompute metrics from an existing prediction file");
  pred_opt->excludes(size_opt);
  pred_opt->excludes(validity_opt);

  CLI::App* sc_predict = app.add_subcommand(
      "predict", "write per-relation scores for every test bag");
  add_config(sc_predict);
  sc_predict->add_option("--checkpoint", checkpoint, "checkpoint to score with");
  sc_predict->add_option("--threads", threads, "scoring worker threads")
      ->check(CLI::Range(1, 256));

  CLI::App* sc_fixture = app.add_subcommand(
      "gen-fixture", "generate a synthetic corpus with schema and constraints");
  sc_fixture
      ->add_option("kind", fixture_kind, "overfit, longtail or attention")
      ->required()
      ->check(CLI::IsMember({"overfit", "longtail", "attention"}));
  sc_fixture->add_option("--seed", fixture_seed, "generator seed");
  sc_fixture->add_option("--out", fixture_out, "fixture directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (sc_fixture->parsed())
      return cmd_gen_fixture(fixture_kind, fixture_seed, fixture_out);

    RunConfig cfg = load_run_config(config_path);
    // the default checkpoint lives in the configured layout even when writes
    // are redirected
    if (checkpoint.empty() && !cfg.output_dir.empty())
      checkpoint = (fs::path(cfg.output_dir) / "checkpoint").string();
    if (!output_override.empty()) cfg.output_dir = output_override;

    if (sc_graph->parsed()) return cmd_build_graph(cfg);
    if (sc_train->parsed()) return cmd_train(cfg);
    if (sc_eval->parsed())
      return cmd_eval(cfg, checkpoint, split, hits, threads, predictions_file);
    if (sc_predict->parsed()) return cmd_predict(cfg, checkpoint, threads);
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
