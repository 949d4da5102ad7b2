#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "protobank/cli.hpp"
#include "protobank/io.hpp"

using protobank::cli::dispatch;
using testutil::TempDir;

namespace {

// Runs the whole pipeline into `dir` with fixed seeds; returns the file paths
// written, in a stable order, for byte-level comparison between runs.
std::vector<std::string> run_pipeline(const TempDir& dir) {
  std::string corpus = dir.file("corpus.vige");
  std::string ckpt = dir.file("bank.vigp");
  std::string train_csv = dir.file("train.csv");
  std::string surrogate = dir.file("surrogate.vige");
  std::string props = dir.file("props.csv");
  std::string hist = dir.file("dist");
  std::string leak = dir.file("leak.csv");

  REQUIRE(dispatch({"gen-data", "--out", corpus, "--n-ids", "12", "--per-id", "6", "--dim",
                    "24", "--jitter", "0.08", "--seed", "5"}) == 0);
  REQUIRE(dispatch({"train", "--data", corpus, "--out-checkpoint", ckpt, "--out-csv",
                    train_csv, "--k-virtual", "4", "--batch-real", "24", "--iterations", "80",
                    "--learning-rate", "0.5", "--seed", "11", "--checkpoint-interval",
                    "20"}) == 0);
  REQUIRE(dispatch({"simulate", "--checkpoint", ckpt, "--out", surrogate, "--partition",
                    "both", "--samples", "5", "--spread", "0.05", "--seed", "13"}) == 0);
  REQUIRE(dispatch({"metrics", "--data", surrogate, "--out", props}) == 0);
  REQUIRE(dispatch({"distrib", "--data", surrogate, "--out-prefix", hist, "--bins", "16",
                    "--seed", "17"}) == 0);
  REQUIRE(dispatch({"audit", "--queries", ckpt, "--queries-partition", "virtual",
                    "--reference", corpus, "--out-csv", leak}) == 0);

  return {corpus,
          corpus + ".labels",
          ckpt,
          train_csv,
          surrogate,
          surrogate + ".labels",
          props,
          hist + "_positive.csv",
          hist + "_negative_centers.csv",
          hist + "_negative_members.csv",
          leak};
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("the full pipeline runs and is byte-reproducible") {
  TempDir first, second;
  std::vector<std::string> a = run_pipeline(first);
  std::vector<std::string> b = run_pipeline(second);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::string bytes = testutil::slurp(a[i]);
    CHECK_FALSE(bytes.empty());
    CHECK(bytes == testutil::slurp(b[i]));
  }

  // Spot-check the surrogate corpus produced by the pipeline.
  protobank::LabeledEmbeddingSet surrogate = protobank::read_embeddings(a[4]);
  CHECK(surrogate.class_count() == 16);  // 12 real + 4 virtual prototypes
  CHECK(surrogate.size() == 16 * 5);
  CHECK(surrogate.unit());
}

TEST_CASE("audit output is identical across worker counts") {
  TempDir dir;
  std::string corpus = dir.file("c.vige");
  REQUIRE(dispatch({"gen-data", "--out", corpus, "--n-ids", "30", "--per-id", "4", "--dim",
                    "16", "--seed", "21"}) == 0);
  std::string serial_csv = dir.file("serial.csv");
  std::string parallel_csv = dir.file("parallel.csv");
  {
    testutil::WorkerGuard g(1);
    REQUIRE(dispatch({"audit", "--queries", corpus, "--reference", corpus, "--top-j", "3",
                      "--out-csv", serial_csv}) == 0);
  }
  {
    testutil::WorkerGuard g(4);
    REQUIRE(dispatch({"audit", "--queries", corpus, "--reference", corpus, "--top-j", "3",
                      "--block", "7", "--out-csv", parallel_csv}) == 0);
  }
  CHECK(testutil::slurp(serial_csv) == testutil::slurp(parallel_csv));
}

TEST_CASE("config file fills gaps and explicit flags win") {
  TempDir dir;
  std::string cfg_path = dir.file("run.cfg");
  {
    std::ofstream out(cfg_path);
    out << "[data]\nn_ids = 7\nper_id = 3\ndim = 12\nseed = 2\n";
  }
  std::string corpus = dir.file("c.vige");
  REQUIRE(dispatch({"gen-data", "--config", cfg_path, "--out", corpus, "--n-ids", "9"}) == 0);
  protobank::LabeledEmbeddingSet set = protobank::read_embeddings(corpus);
  CHECK(set.class_count() == 9);  // flag beats file
  CHECK(set.size() == 9 * 3);     // per_id from file
  CHECK(set.dim() == 12);         // dim from file
}

TEST_CASE("train resumes from a checkpoint file") {
  TempDir dir;
  std::string corpus = dir.file("c.vige");
  std::string ckpt1 = dir.file("s1.vigp");
  std::string ckpt2 = dir.file("s2.vigp");
  REQUIRE(dispatch({"gen-data", "--out", corpus, "--n-ids", "8", "--per-id", "5", "--dim",
                    "16", "--seed", "31"}) == 0);
  REQUIRE(dispatch({"train", "--data", corpus, "--out-checkpoint", ckpt1, "--k-virtual", "2",
                    "--iterations", "40", "--batch-real", "16", "--seed", "32"}) == 0);
  REQUIRE(dispatch({"train", "--data", corpus, "--init-checkpoint", ckpt1,
                    "--out-checkpoint", ckpt2, "--k-virtual", "2", "--iterations", "40",
                    "--batch-real", "16", "--seed", "33"}) == 0);
  protobank::Checkpoint resumed = protobank::read_checkpoint(ckpt2);
  CHECK(resumed.bank.n_real() == 8);
  CHECK(resumed.bank.k_virtual() == 2);
  // Resuming kept training: the tracker has seen both runs' updates.
  CHECK(resumed.tracker.iteration() == 80);
}

TEST_CASE("metrics on a near-zero-spread surrogate reports consistency one") {
  TempDir dir;
  std::string corpus = dir.file("c.vige");
  std::string ckpt = dir.file("s.vigp");
  std::string surrogate = dir.file("sur.vige");
  std::string props = dir.file("p.csv");
  REQUIRE(dispatch({"gen-data", "--out", corpus, "--n-ids", "6", "--per-id", "4", "--dim",
                    "12", "--seed", "41"}) == 0);
  REQUIRE(dispatch({"train", "--data", corpus, "--out-checkpoint", ckpt, "--k-virtual", "3",
                    "--iterations", "20", "--batch-real", "12", "--seed", "42"}) == 0);
  REQUIRE(dispatch({"simulate", "--checkpoint", ckpt, "--out", surrogate, "--samples", "4",
                    "--spread", "0"}) == 0);
  REQUIRE(dispatch({"metrics", "--data", surrogate, "--out", props}) == 0);
  protobank::PropertyReport rep = protobank::read_property_report_csv(props);
  REQUIRE(rep.rows.size() == 3);  // default partition is virtual
  CHECK(std::abs(rep.avg_consistency - 1.0) < 1e-9);
  for (const auto& row : rep.rows) CHECK(row.member_count == 4);
}

TEST_CASE("check-grad runs and honors --fail-above") {
  CHECK(dispatch({"check-grad", "--dim", "6", "--classes", "4", "--trials", "2", "--step",
                  "1e-5"}) == 0);
  CHECK(dispatch({"check-grad", "--dim", "6", "--classes", "4", "--trials", "1",
                  "--fail-above", "1e-30"}) == 1);
}

TEST_CASE("exit codes separate usage, validation, and io failures") {
  TempDir dir;
  // Usage problems (CLI11 parse errors).
  CHECK(dispatch({"no-such-command"}) == 1);
  CHECK(dispatch({"gen-data"}) == 1);                       // missing --out
  CHECK(dispatch({"train", "--data"}) == 1);                // dangling value
  CHECK(dispatch(std::vector<std::string>{}) == 1);         // no subcommand

  // Validation problems in otherwise well-formed invocations.
  CHECK(dispatch({"gen-data", "--out", dir.file("x.vige"), "--jitter", "-1"}) == 1);
  std::string corpus = dir.file("c.vige");
  REQUIRE(dispatch({"gen-data", "--out", corpus, "--n-ids", "4", "--per-id", "3", "--dim",
                    "8", "--seed", "51"}) == 0);
  CHECK(dispatch({"train", "--data", corpus, "--margin", "3.0"}) == 1);
  CHECK(dispatch({"train", "--data", corpus, "--momentum", "1.5"}) == 1);

  // I/O problems: missing and malformed files.
  CHECK(dispatch({"train", "--data", dir.file("absent.vige")}) == 2);
  std::string junk = dir.file("junk.vige");
  {
    std::ofstream out(junk);
    out << "this is not an embedding file";
  }
  CHECK(dispatch({"train", "--data", junk}) == 2);
  CHECK(dispatch({"metrics", "--data", junk, "--out", dir.file("m.csv")}) == 2);
  CHECK(dispatch({"simulate", "--checkpoint", junk, "--out", dir.file("s.vige")}) == 2);
  CHECK(dispatch({"audit", "--queries", junk, "--reference", corpus}) == 2);

  // A checkpoint handed to a command expecting embeddings is a bad-magic IO
  // failure, not a crash.
  std::string ckpt = dir.file("bank.vigp");
  REQUIRE(dispatch({"train", "--data", corpus, "--out-checkpoint", ckpt, "--iterations",
                    "5", "--batch-real", "4", "--seed", "52"}) == 0);
  CHECK(dispatch({"metrics", "--data", ckpt, "--out", dir.file("m2.csv")}) == 2);
}

TEST_CASE("audit prints a leaked verdict without failing") {
  TempDir dir;
  std::string corpus = dir.file("c.vige");
  REQUIRE(dispatch({"gen-data", "--out", corpus, "--n-ids", "10", "--per-id", "4", "--dim",
                    "16", "--seed", "61"}) == 0);
  // Self-audit: queries == references, top-1 cosine 1 for every class.
  CHECK(dispatch({"audit", "--queries", corpus, "--reference", corpus}) == 0);
}

TEST_CASE("export-tsne-csv writes one row per embedding") {
  TempDir dir;
  std::string corpus = dir.file("c.vige");
  REQUIRE(dispatch({"gen-data", "--out", corpus, "--n-ids", "3", "--per-id", "2", "--dim",
                    "4", "--seed", "71"}) == 0);
  std::string out = dir.file("t.csv");
  REQUIRE(dispatch({"export-tsne-csv", "--data", corpus, "--out", out}) == 0);
  std::string text = testutil::slurp(out);
  CHECK(text.rfind("label,e0,e1,e2,e3\n", 0) == 0);
  std::size_t newlines = 0;
  for (char ch : text)
    if (ch == '\n') ++newlines;
  CHECK(newlines == 7);
}

TEST_SUITE_END();
