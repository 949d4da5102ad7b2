#include "protobank/cli.hpp"

#include <cstdio>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "protobank/arcface.hpp"
#include "protobank/config.hpp"
#include "protobank/errors.hpp"
#include "protobank/io.hpp"
#include "protobank/leakage.hpp"
#include "protobank/metrics.hpp"
#include "protobank/rng.hpp"
#include "protobank/synthesis.hpp"
#include "protobank/trainer.hpp"

namespace protobank::cli {

namespace {

// Fills in config-file values for options the user did not pass explicitly:
// defaults < config file < command line.
struct ConfigLayer {
  std::optional<RunConfig> file;

  void load(const std::string& path) {
    if (!path.empty()) file = load_run_config(path);
  }

  template <typename T, typename Get>
  void fill(const CLI::Option* opt, T& target, Get get) const {
    if (file && opt->count() == 0) target = get(*file);
  }
};

bool is_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && magic[0] == 'V' && magic[1] == 'I' && magic[2] == 'G' &&
         magic[3] == 'P';
}

// Queries/references for the audit can be an embedding corpus (class centers
// are computed) or a checkpoint (prototype rows of one partition are the
// centers).
ClassCenterSet load_center_set(const std::string& path, const std::string& partition) {
  if (is_checkpoint_file(path)) {
    Checkpoint ckpt = read_checkpoint(path);
    Partition p = parse_partition(partition);
    Matrix rows;
    switch (p) {
      case Partition::kReal: rows = ckpt.bank.real_rows(); break;
      case Partition::kVirtual: rows = ckpt.bank.virtual_rows(); break;
      case Partition::kBoth: rows = ckpt.bank.matrix(); break;
    }
    std::size_t count = rows.rows();
    if (count == 0) throw EmptyPartition(partition);
    return ClassCenterSet{std::move(rows), std::vector<std::size_t>(count, 1)};
  }
  return class_centers(read_embeddings(path));
}

int run_gen_data(const DataGenConfig& cfg, const std::string& out) {
  LabeledEmbeddingSet set = generate_synthetic_clusters(cfg.n_ids, cfg.per_id, cfg.dim,
                                                        cfg.jitter, cfg.seed, cfg.concentration);
  write_embeddings(set, out);
  std::printf("wrote %zu embeddings (%lld ids, dim %zu) to %s\n", set.size(),
              static_cast<long long>(set.class_count()), set.dim(), out.c_str());
  return 0;
}

int run_train(const TrainRunConfig& cfg, const std::string& data_path,
              const std::string& out_ckpt, const std::string& out_csv,
              const std::string& out_report, const std::string& init_ckpt) {
  LabeledEmbeddingSet data = read_embeddings(data_path);
  TrainReport report = [&] {
    if (init_ckpt.empty()) return train_stage1(data, cfg);
    Checkpoint start = read_checkpoint(init_ckpt);
    return train_stage1(data, cfg, std::move(start.bank), std::move(start.tracker));
  }();
  if (!out_ckpt.empty()) write_checkpoint(Checkpoint{report.bank, report.tracker}, out_ckpt);
  if (!out_csv.empty()) write_train_report_csv(report, out_csv);
  if (!out_report.empty()) write_train_report_text(report, cfg, out_report);
  const CheckpointStats& last = report.checkpoints.back();
  std::printf("trained %llu iterations: loss %.6f, vv mean/max %.4f/%.4f, rv max %.4f\n",
              static_cast<unsigned long long>(last.iteration), last.loss,
              last.virtual_virtual.mean, last.virtual_virtual.max, last.real_virtual.max);
  return 0;
}

int run_metrics(const std::string& data_path, const std::string& scores_path,
                const std::string& baseline_path, const std::string& out) {
  LabeledEmbeddingSet data = read_embeddings(data_path);
  std::optional<QualityScoreSet> scores;
  if (!scores_path.empty()) scores = read_quality_scores(scores_path, data.size());
  PropertyReport report = property_report(data, scores ? &*scores : nullptr);
  if (!baseline_path.empty()) {
    PropertyReport baseline = read_property_report_csv(baseline_path);
    attach_baseline(report, baseline, baseline_path);
  }
  write_property_report_csv(report, out);
  std::printf("%zu classes: avg consistency %.6f, avg separability %.6f\n",
              report.rows.size(), report.avg_consistency, report.avg_separability);
  if (report.rel_consistency)
    std::printf("vs baseline: consistency x%.4f, separability x%.4f\n", *report.rel_consistency,
                *report.rel_separability);
  return 0;
}

int run_distrib(const MetricsParams& cfg, const std::string& data_path,
                const std::string& out_prefix) {
  LabeledEmbeddingSet data = read_embeddings(data_path);
  SimilarityDistributions dist =
      similarity_distributions(data, cfg.bins, cfg.max_pairs_per_class, cfg.seed);
  write_histogram_csv(dist.positive, out_prefix + "_positive.csv");
  write_histogram_csv(dist.negative_centers, out_prefix + "_negative_centers.csv");
  write_histogram_csv(dist.negative_members, out_prefix + "_negative_members.csv");
  std::printf("histograms: positive %llu pairs, negative centers %llu, negative members %llu\n",
              static_cast<unsigned long long>(dist.positive.total()),
              static_cast<unsigned long long>(dist.negative_centers.total()),
              static_cast<unsigned long long>(dist.negative_members.total()));
  return 0;
}

int run_audit(const AuditParams& cfg, const std::string& queries_path,
              const std::string& queries_partition, const std::string& reference_path,
              const std::string& reference_partition, const std::string& out_csv,
              const std::string& hist_prefix) {
  ClassCenterSet queries = load_center_set(queries_path, queries_partition);
  ClassCenterSet reference = load_center_set(reference_path, reference_partition);
  LeakageReport report =
      leakage_audit_with_baseline(queries, reference, cfg.top_j, cfg.bins, cfg.block);
  LeakageVerdict verdict = leakage_verdict(report, cfg.quantile);
  if (!out_csv.empty()) write_leakage_csv(report, out_csv);
  if (!hist_prefix.empty()) {
    write_histogram_csv(report.top1_histogram, hist_prefix + "_top1.csv");
    write_histogram_csv(report.baseline_histogram, hist_prefix + "_baseline.csv");
  }
  std::printf("audited %zu queries against %zu reference classes (top_j=%zu)\n",
              report.queries.size(), report.baseline_nearest.size(), cfg.top_j);
  std::printf("query quantile (q=%g): %.6f\n", verdict.quantile, verdict.query_quantile);
  std::printf("baseline quantile (q=%g): %.6f\n", verdict.quantile, verdict.baseline_quantile);
  std::printf("margin: %.6f\n", verdict.margin);
  std::printf("verdict: %s\n", verdict.clean ? "clean" : "leaked");
  return 0;
}

int run_simulate(const SurrogateConfig& cfg, Partition partition,
                 const std::string& ckpt_path, const std::string& out) {
  Checkpoint ckpt = read_checkpoint(ckpt_path);
  LabeledEmbeddingSet set = sample_surrogate_dataset(ckpt.bank, partition, cfg);
  write_embeddings(set, out);
  std::printf("sampled %zu embeddings (%lld classes, dim %zu) to %s\n", set.size(),
              static_cast<long long>(set.class_count()), set.dim(), out.c_str());
  return 0;
}

int run_export_tsne(const std::string& data_path, const std::string& out) {
  LabeledEmbeddingSet data = read_embeddings(data_path);
  write_tsne_csv(data, out);
  std::printf("wrote %zu rows to %s\n", data.size(), out.c_str());
  return 0;
}

int run_check_grad(std::size_t dim, std::size_t classes, std::size_t batch, double margin,
                   double scale, double step, std::size_t trials, std::uint64_t seed,
                   double fail_above) {
  ArcFaceConfig cfg{margin, scale};
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    GradCheckInstance inst =
        make_gradcheck_instance(batch == 0 ? classes : batch, classes, dim,
                                derive_seed(seed, t));
    worst = std::max(worst, gradient_check(inst, cfg, step));
  }
  std::printf("max relative error: %.3g (%zu trials)\n", worst, trials);
  if (fail_above > 0.0 && worst > fail_above) {
    std::fprintf(stderr, "error: gradient error %.3g exceeds bound %.3g\n", worst, fail_above);
    return 1;
  }
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"prototype-bank training and synthetic-embedding audit pipeline"};
  app.require_subcommand(1);
  int rc = 0;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic clustered corpus");
  struct {
    std::string config, out;
    DataGenConfig cfg;
  } g;
  gen->add_option("--config", g.config, "run config file");
  gen->add_option("--out", g.out, "output embedding file")->required();
  auto* g_n = gen->add_option("--n-ids", g.cfg.n_ids, "identity count");
  auto* g_p = gen->add_option("--per-id", g.cfg.per_id, "samples per identity");
  auto* g_d = gen->add_option("--dim", g.cfg.dim, "embedding dimension");
  auto* g_j = gen->add_option("--jitter", g.cfg.jitter, "member noise scale");
  auto* g_c = gen->add_option("--concentration", g.cfg.concentration,
                              "pull of id means toward a shared axis (0 = uniform)");
  auto* g_s = gen->add_option("--seed", g.cfg.seed, "random seed");
  gen->callback([&] {
    ConfigLayer layer;
    layer.load(g.config);
    layer.fill(g_n, g.cfg.n_ids, [](const RunConfig& c) { return c.data.n_ids; });
    layer.fill(g_p, g.cfg.per_id, [](const RunConfig& c) { return c.data.per_id; });
    layer.fill(g_d, g.cfg.dim, [](const RunConfig& c) { return c.data.dim; });
    layer.fill(g_j, g.cfg.jitter, [](const RunConfig& c) { return c.data.jitter; });
    layer.fill(g_c, g.cfg.concentration,
               [](const RunConfig& c) { return c.data.concentration; });
    layer.fill(g_s, g.cfg.seed, [](const RunConfig& c) { return c.data.seed; });
    rc = run_gen_data(g.cfg, g.out);
  });

  // train
  auto* tr = app.add_subcommand("train", "train real+virtual prototypes on a corpus");
  struct {
    std::string config, data, out_ckpt, out_csv, out_report, init_ckpt;
    TrainRunConfig cfg;
  } t;
  tr->add_option("--config", t.config, "run config file");
  tr->add_option("--data", t.data, "input embedding file")->required();
  tr->add_option("--out-checkpoint", t.out_ckpt, "output checkpoint file");
  tr->add_option("--out-csv", t.out_csv, "checkpoint time-series CSV");
  tr->add_option("--out-report", t.out_report, "text report");
  tr->add_option("--init-checkpoint", t.init_ckpt, "resume from this checkpoint");
  auto* t_k = tr->add_option("--k-virtual", t.cfg.k_virtual, "virtual identity count");
  auto* t_b = tr->add_option("--batch-real", t.cfg.batch_real, "real rows per step");
  auto* t_i = tr->add_option("--iterations", t.cfg.iterations, "training steps");
  auto* t_lr = tr->add_option("--learning-rate", t.cfg.lr.initial, "initial learning rate");
  auto* t_di = tr->add_option("--decay-iterations", t.cfg.lr.decay_iterations,
                              "iterations at which the rate decays");
  auto* t_df = tr->add_option("--decay-factor", t.cfg.lr.decay_factor, "decay multiplier");
  auto* t_mo = tr->add_option("--momentum", t.cfg.momentum, "SGD momentum");
  auto* t_m = tr->add_option("--margin", t.cfg.margin, "angular margin (radians)");
  auto* t_s = tr->add_option("--scale", t.cfg.scale, "logit scale");
  auto* t_a = tr->add_option("--sigma-alpha", t.cfg.sigma_alpha, "sigma EMA coefficient");
  auto* t_ab = tr->add_flag("--ablation-no-virtual-embeddings", t.cfg.ablation_no_virtual_embeddings,
                            "train without virtual embedding rows");
  auto* t_se = tr->add_option("--seed", t.cfg.seed, "random seed");
  auto* t_ci = tr->add_option("--checkpoint-interval", t.cfg.checkpoint_interval,
                              "stats cadence in iterations");
  tr->callback([&] {
    ConfigLayer layer;
    layer.load(t.config);
    layer.fill(t_k, t.cfg.k_virtual, [](const RunConfig& c) { return c.train.k_virtual; });
    layer.fill(t_b, t.cfg.batch_real, [](const RunConfig& c) { return c.train.batch_real; });
    layer.fill(t_i, t.cfg.iterations, [](const RunConfig& c) { return c.train.iterations; });
    layer.fill(t_lr, t.cfg.lr.initial, [](const RunConfig& c) { return c.train.lr.initial; });
    layer.fill(t_di, t.cfg.lr.decay_iterations,
               [](const RunConfig& c) { return c.train.lr.decay_iterations; });
    layer.fill(t_df, t.cfg.lr.decay_factor,
               [](const RunConfig& c) { return c.train.lr.decay_factor; });
    layer.fill(t_mo, t.cfg.momentum, [](const RunConfig& c) { return c.train.momentum; });
    layer.fill(t_m, t.cfg.margin, [](const RunConfig& c) { return c.train.margin; });
    layer.fill(t_s, t.cfg.scale, [](const RunConfig& c) { return c.train.scale; });
    layer.fill(t_a, t.cfg.sigma_alpha, [](const RunConfig& c) { return c.train.sigma_alpha; });
    layer.fill(t_ab, t.cfg.ablation_no_virtual_embeddings,
               [](const RunConfig& c) { return c.train.ablation_no_virtual_embeddings; });
    layer.fill(t_se, t.cfg.seed, [](const RunConfig& c) { return c.train.seed; });
    layer.fill(t_ci, t.cfg.checkpoint_interval,
               [](const RunConfig& c) { return c.train.checkpoint_interval; });
    rc = run_train(t.cfg, t.data, t.out_ckpt, t.out_csv, t.out_report, t.init_ckpt);
  });

  // metrics
  auto* me = app.add_subcommand("metrics", "per-class consistency/separability/diversity CSV");
  struct {
    std::string config, data, scores, baseline, out;
  } m;
  me->add_option("--config", m.config, "run config file");
  me->add_option("--data", m.data, "input embedding file")->required();
  me->add_option("--scores", m.scores, "per-row quality scores (one per line)");
  me->add_option("--baseline", m.baseline, "property CSV to normalize averages against");
  me->add_option("--out", m.out, "output property CSV")->required();
  me->callback([&] {
    ConfigLayer layer;
    layer.load(m.config);  // metrics has no numeric knobs beyond the files
    rc = run_metrics(m.data, m.scores, m.baseline, m.out);
  });

  // distrib
  auto* di = app.add_subcommand("distrib", "similarity histograms CSV");
  struct {
    std::string config, data, out_prefix;
    MetricsParams cfg;
  } d;
  di->add_option("--config", d.config, "run config file");
  di->add_option("--data", d.data, "input embedding file")->required();
  di->add_option("--out-prefix", d.out_prefix, "output CSV path prefix")->required();
  auto* d_b = di->add_option("--bins", d.cfg.bins, "histogram bins");
  auto* d_m = di->add_option("--max-pairs", d.cfg.max_pairs_per_class,
                             "per-class pair sampling cap");
  auto* d_s = di->add_option("--seed", d.cfg.seed, "sampling seed");
  di->callback([&] {
    ConfigLayer layer;
    layer.load(d.config);
    layer.fill(d_b, d.cfg.bins, [](const RunConfig& c) { return c.metrics.bins; });
    layer.fill(d_m, d.cfg.max_pairs_per_class,
               [](const RunConfig& c) { return c.metrics.max_pairs_per_class; });
    layer.fill(d_s, d.cfg.seed, [](const RunConfig& c) { return c.metrics.seed; });
    rc = run_distrib(d.cfg, d.data, d.out_prefix);
  });

  // audit
  auto* au = app.add_subcommand("audit", "nearest-reference leakage audit");
  struct {
    std::string config, queries, reference, out_csv, hist_prefix;
    std::string queries_partition = "virtual", reference_partition = "real";
    AuditParams cfg;
  } a;
  au->add_option("--config", a.config, "run config file");
  au->add_option("--queries", a.queries, "query embeddings or checkpoint")->required();
  au->add_option("--queries-partition", a.queries_partition,
                 "partition when --queries is a checkpoint (real|virtual|both)");
  au->add_option("--reference", a.reference, "reference embeddings or checkpoint")->required();
  au->add_option("--reference-partition", a.reference_partition,
                 "partition when --reference is a checkpoint");
  au->add_option("--out-csv", a.out_csv, "per-query top-j CSV");
  au->add_option("--hist-prefix", a.hist_prefix, "write top-1/baseline histogram CSVs");
  auto* a_j = au->add_option("--top-j", a.cfg.top_j, "neighbors per query");
  auto* a_q = au->add_option("--quantile", a.cfg.quantile, "verdict quantile in (0,1]");
  auto* a_b = au->add_option("--bins", a.cfg.bins, "histogram bins");
  auto* a_k = au->add_option("--block", a.cfg.block, "kernel block rows");
  au->callback([&] {
    ConfigLayer layer;
    layer.load(a.config);
    layer.fill(a_j, a.cfg.top_j, [](const RunConfig& c) { return c.audit.top_j; });
    layer.fill(a_q, a.cfg.quantile, [](const RunConfig& c) { return c.audit.quantile; });
    layer.fill(a_b, a.cfg.bins, [](const RunConfig& c) { return c.audit.bins; });
    layer.fill(a_k, a.cfg.block, [](const RunConfig& c) { return c.audit.block; });
    rc = run_audit(a.cfg, a.queries, a.queries_partition, a.reference,
                   a.reference_partition, a.out_csv, a.hist_prefix);
  });

  // simulate
  auto* si = app.add_subcommand("simulate", "sample a surrogate corpus from a checkpoint");
  struct {
    std::string config, ckpt, out, partition = "virtual";
    SurrogateConfig cfg;
  } s;
  si->add_option("--config", s.config, "run config file");
  si->add_option("--checkpoint", s.ckpt, "input checkpoint file")->required();
  si->add_option("--out", s.out, "output embedding file")->required();
  auto* s_p = si->add_option("--partition", s.partition, "real|virtual|both");
  auto* s_n = si->add_option("--samples", s.cfg.samples_per_class, "samples per class");
  auto* s_sp = si->add_option("--spread", s.cfg.spread,
                              "noise scale (scalar or one value per dimension)");
  auto* s_t = si->add_option("--tightness", s.cfg.tightness, "shrink toward prototype (0,1]");
  auto* s_se = si->add_option("--seed", s.cfg.seed, "random seed");
  si->callback([&] {
    ConfigLayer layer;
    layer.load(s.config);
    layer.fill(s_n, s.cfg.samples_per_class,
               [](const RunConfig& c) { return c.surrogate.samples_per_class; });
    layer.fill(s_sp, s.cfg.spread, [](const RunConfig& c) { return c.surrogate.spread; });
    layer.fill(s_t, s.cfg.tightness, [](const RunConfig& c) { return c.surrogate.tightness; });
    layer.fill(s_se, s.cfg.seed, [](const RunConfig& c) { return c.surrogate.seed; });
    Partition p = parse_partition(s.partition);
    if (s_p->count() == 0 && layer.file) p = layer.file->surrogate_partition;
    rc = run_simulate(s.cfg, p, s.ckpt, s.out);
  });

  // export-tsne-csv
  auto* ex = app.add_subcommand("export-tsne-csv", "dump embeddings+labels as plain CSV");
  struct {
    std::string data, out;
  } e;
  ex->add_option("--data", e.data, "input embedding file")->required();
  ex->add_option("--out", e.out, "output CSV")->required();
  ex->callback([&] { rc = run_export_tsne(e.data, e.out); });

  // check-grad
  auto* cg = app.add_subcommand("check-grad", "finite-difference gradient harness");
  struct {
    std::size_t dim = 8, classes = 5, batch = 0, trials = 3;
    double margin = 0.5, scale = 30.0, step = 1e-5, fail_above = 0.0;
    std::uint64_t seed = 7;
  } c;
  cg->add_option("--dim", c.dim, "embedding dimension");
  cg->add_option("--classes", c.classes, "prototype count");
  cg->add_option("--batch", c.batch, "batch rows (default: classes)");
  cg->add_option("--margin", c.margin, "angular margin (radians)");
  cg->add_option("--scale", c.scale, "logit scale");
  cg->add_option("--step", c.step, "central-difference step");
  cg->add_option("--trials", c.trials, "random instances to try");
  cg->add_option("--seed", c.seed, "random seed");
  cg->add_option("--fail-above", c.fail_above, "exit 1 if the error exceeds this bound");
  cg->callback([&] {
    rc = run_check_grad(c.dim, c.classes, c.batch, c.margin, c.scale, c.step, c.trials,
                        c.seed, c.fail_above);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 1;
  } catch (const IoError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 2;
  } catch (const ValidationError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  } catch (const Error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return rc;
}

int dispatch(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.push_back("protobank");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const std::string& s : full) argv.push_back(s.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace protobank::cli
