#include "protobank/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "detail/dot_kernel.hpp"
#include "protobank/errors.hpp"
#include "protobank/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace protobank {

namespace {

constexpr char kEmbeddingMagic[4] = {'V', 'I', 'G', 'E'};
constexpr char kCheckpointMagic[4] = {'V', 'I', 'G', 'P'};
constexpr std::uint16_t kFormatVersion = 1;

void append_bytes(std::string& buf, const void* p, std::size_t n) {
  buf.append(static_cast<const char*>(p), n);
}

template <typename T>
void append_pod(std::string& buf, T v) {
  append_bytes(buf, &v, sizeof(v));
}

template <typename T>
T read_pod(const std::string& buf, std::size_t& off) {
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(v));
  off += sizeof(v);
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof()) throw IoError("read failed on " + path);
  return std::move(ss).str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out.good()) throw IoError("write failed on " + path);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::string raw = read_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < raw.size()) {
    std::size_t end = raw.find('\n', start);
    if (end == std::string::npos) end = raw.size();
    std::string line = raw.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t end = line.find(',', start);
    if (end == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::string labels_path(const std::string& path) { return path + ".labels"; }

}  // namespace

void write_embeddings(const LabeledEmbeddingSet& set, const std::string& path) {
  std::string buf;
  buf.reserve(22 + set.size() * set.dim() * 4);
  append_bytes(buf, kEmbeddingMagic, 4);
  append_pod(buf, kFormatVersion);
  append_pod(buf, static_cast<std::uint32_t>(set.dim()));
  append_pod(buf, static_cast<std::uint64_t>(set.size()));
  append_pod(buf, static_cast<std::uint32_t>(set.unit() ? 1 : 0));
  for (std::size_t i = 0; i < set.size() * set.dim(); ++i)
    append_pod(buf, static_cast<float>(set.matrix().data()[i]));
  write_file(path, buf);

  std::string lab;
  for (std::int64_t v : set.labels()) {
    lab += std::to_string(v);
    lab += '\n';
  }
  write_file(labels_path(path), lab);
}

LabeledEmbeddingSet read_embeddings(const std::string& path) {
  std::string buf = read_file(path);
  if (buf.size() < 4 || std::memcmp(buf.data(), kEmbeddingMagic, 4) != 0)
    throw BadMagic(path, "VIGE");
  constexpr std::size_t kHeader = 4 + 2 + 4 + 8 + 4;
  if (buf.size() < kHeader) throw TruncatedPayload(path, kHeader - 4, buf.size() - 4);
  std::size_t off = 4;
  auto version = read_pod<std::uint16_t>(buf, off);
  if (version != kFormatVersion)
    throw IoError("unsupported format version " + std::to_string(version) + " in " + path);
  auto dim = read_pod<std::uint32_t>(buf, off);
  auto count = read_pod<std::uint64_t>(buf, off);
  auto flags = read_pod<std::uint32_t>(buf, off);
  if (dim == 0) throw IoError("zero dim in " + path);
  std::size_t want = static_cast<std::size_t>(count) * dim * 4;
  std::size_t got = buf.size() - kHeader;
  if (got < want) throw TruncatedPayload(path, want, got);
  if (got > want) throw IoError("trailing bytes after payload in " + path);

  Matrix m(static_cast<std::size_t>(count), dim);
  for (std::size_t i = 0; i < m.rows() * m.cols(); ++i)
    m.data()[i] = static_cast<double>(read_pod<float>(buf, off));

  std::vector<std::string> lines = read_lines(labels_path(path));
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() != count) throw LabelCountMismatch(labels_path(path), lines.size(), count);
  std::vector<std::int64_t> labels(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(lines[i].data(), lines[i].data() + lines[i].size(), v);
    if (ec != std::errc() || p != lines[i].data() + lines[i].size())
      throw ValidationError("bad label '" + lines[i] + "' at line " + std::to_string(i + 1) +
                            " of " + labels_path(path));
    labels[i] = v;
  }
  std::int64_t class_count = 1;
  for (std::int64_t v : labels) class_count = std::max(class_count, v + 1);
  return LabeledEmbeddingSet(std::move(m), std::move(labels), class_count, (flags & 1u) != 0);
}

void write_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const PrototypeBank& bank = ckpt.bank;
  const SigmaTracker& tracker = ckpt.tracker;
  if (tracker.sigma().size() != bank.dim())
    throw DimensionMismatch(tracker.sigma().size(), bank.dim());
  std::string buf;
  buf.reserve(26 + (bank.rows() + 2) * bank.dim() * 8);
  append_bytes(buf, kCheckpointMagic, 4);
  append_pod(buf, kFormatVersion);
  append_pod(buf, static_cast<std::uint32_t>(bank.dim()));
  append_pod(buf, static_cast<std::uint64_t>(bank.n_real()));
  append_pod(buf, static_cast<std::uint64_t>(bank.k_virtual()));
  for (std::size_t i = 0; i < bank.rows() * bank.dim(); ++i)
    append_pod(buf, bank.matrix().data()[i]);
  append_pod(buf, tracker.alpha());
  append_pod(buf, static_cast<std::uint64_t>(tracker.iteration()));
  for (double v : tracker.sigma()) append_pod(buf, v);
  write_file(path, buf);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::string buf = read_file(path);
  if (buf.size() < 4 || std::memcmp(buf.data(), kCheckpointMagic, 4) != 0)
    throw BadMagic(path, "VIGP");
  constexpr std::size_t kHeader = 4 + 2 + 4 + 8 + 8;
  if (buf.size() < kHeader) throw TruncatedPayload(path, kHeader - 4, buf.size() - 4);
  std::size_t off = 4;
  auto version = read_pod<std::uint16_t>(buf, off);
  if (version != kFormatVersion)
    throw IoError("unsupported format version " + std::to_string(version) + " in " + path);
  auto dim = read_pod<std::uint32_t>(buf, off);
  auto n_real = read_pod<std::uint64_t>(buf, off);
  auto k_virtual = read_pod<std::uint64_t>(buf, off);
  if (dim == 0) throw IoError("zero dim in " + path);
  std::size_t rows = static_cast<std::size_t>(n_real + k_virtual);
  std::size_t want = rows * dim * 8 + 8 + 8 + static_cast<std::size_t>(dim) * 8;
  std::size_t got = buf.size() - kHeader;
  if (got < want) throw TruncatedPayload(path, want, got);
  if (got > want) throw IoError("trailing bytes after payload in " + path);

  Matrix m(rows, dim);
  for (std::size_t i = 0; i < rows * dim; ++i) m.data()[i] = read_pod<double>(buf, off);
  double alpha = read_pod<double>(buf, off);
  auto iteration = read_pod<std::uint64_t>(buf, off);
  std::vector<double> sigma(dim);
  for (std::size_t d = 0; d < dim; ++d) sigma[d] = read_pod<double>(buf, off);
  return Checkpoint{PrototypeBank(std::move(m), static_cast<std::size_t>(n_real),
                                  static_cast<std::size_t>(k_virtual)),
                    SigmaTracker(std::move(sigma), alpha, iteration)};
}

LabeledEmbeddingSet generate_synthetic_clusters(std::size_t n_ids, std::size_t per_id,
                                                std::size_t dim, double jitter,
                                                std::uint64_t seed,
                                                double concentration) {
  if (n_ids < 1 || per_id < 1 || dim < 1)
    throw ConfigInvalid("generate_synthetic_clusters needs counts >= 1");
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw ConfigInvalid("jitter must be >= 0");
  if (!(concentration >= 0.0) || !std::isfinite(concentration))
    throw ConfigInvalid("concentration must be >= 0");
  Matrix rows(n_ids * per_id, dim);
  std::vector<std::int64_t> labels(rows.rows());
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> axis(dim, 0.0);
  if (concentration > 0.0) {
    auto eng = make_engine(derive_seed(seed, 0xC04E00000001ull));
    double n = 0.0;
    do {
      for (std::size_t d = 0; d < dim; ++d) axis[d] = normal(eng);
      n = std::sqrt(detail::dot_pair(axis.data(), axis.data(), dim));
    } while (n <= 1e-12);
    for (std::size_t d = 0; d < dim; ++d) axis[d] *= concentration / n;
  }
  std::vector<double> mean(dim);
  for (std::size_t id = 0; id < n_ids; ++id) {
    auto eng = make_engine(derive_seed(seed, id));
    double n = 0.0;
    do {
      for (std::size_t d = 0; d < dim; ++d) mean[d] = axis[d] + normal(eng);
      n = std::sqrt(detail::dot_pair(mean.data(), mean.data(), dim));
    } while (n <= 1e-12);
    for (std::size_t d = 0; d < dim; ++d) mean[d] /= n;
    for (std::size_t s = 0; s < per_id; ++s) {
      std::size_t r = id * per_id + s;
      double* dst = rows.row(r);
      double rn = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dst[d] = mean[d] + normal(eng) * jitter;
      rn = std::sqrt(detail::dot_pair(dst, dst, dim));
      if (rn <= 1e-12) throw ZeroNormRow(r, "synthetic cluster sample");
      for (std::size_t d = 0; d < dim; ++d) dst[d] /= rn;
      labels[r] = static_cast<std::int64_t>(id);
    }
  }
  return LabeledEmbeddingSet(std::move(rows), std::move(labels),
                             static_cast<std::int64_t>(n_ids), true);
}

QualityScoreSet read_quality_scores(const std::string& path, std::size_t expected_count) {
  std::vector<std::string> lines = read_lines(path);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() != expected_count)
    throw LengthMismatch("quality scores in " + path, lines.size(), expected_count);
  std::vector<double> scores(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) scores[i] = parse_double(lines[i]);
  return QualityScoreSet(std::move(scores));
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& text) {
  if (text.empty()) throw ValidationError("empty numeric field");
  char* end = nullptr;
  double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size())
    throw ValidationError("bad numeric field '" + text + "'");
  return v;
}

namespace {

std::string opt_str(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

std::optional<double> opt_parse(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

}  // namespace

void write_property_report_csv(const PropertyReport& report, const std::string& path) {
  std::string out;
  if (report.baseline_id) out += "# baseline_id=" + *report.baseline_id + "\n";
  out += "class_id,member_count,consistency,separability,quality_mean,diversity\n";
  for (const ClassPropertyRow& row : report.rows) {
    out += std::to_string(row.class_id) + ',' + std::to_string(row.member_count) + ',' +
           format_double(row.consistency) + ',' + format_double(row.separability) + ',' +
           opt_str(row.quality_mean) + ',' + opt_str(row.diversity) + '\n';
  }
  out += "avg,," + format_double(report.avg_consistency) + ',' +
         format_double(report.avg_separability) + ',' + opt_str(report.avg_quality_mean) +
         ',' + opt_str(report.avg_diversity) + '\n';
  if (report.baseline_id) {
    out += "rel_vs_baseline,," + opt_str(report.rel_consistency) + ',' +
           opt_str(report.rel_separability) + ',' + opt_str(report.rel_quality_mean) + ',' +
           opt_str(report.rel_diversity) + '\n';
  }
  write_file(path, out);
}

PropertyReport read_property_report_csv(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  PropertyReport report;
  bool saw_header = false, saw_avg = false;
  for (const std::string& line : lines) {
    if (line.empty()) continue;
    if (line.rfind("# baseline_id=", 0) == 0) {
      report.baseline_id = line.substr(14);
      continue;
    }
    if (!saw_header) {
      if (line.rfind("class_id,", 0) != 0)
        throw ValidationError("bad property CSV header in " + path);
      saw_header = true;
      continue;
    }
    std::vector<std::string> f = split_csv(line);
    if (f.size() != 6) throw ValidationError("bad property CSV row in " + path);
    if (f[0] == "avg") {
      report.avg_consistency = parse_double(f[2]);
      report.avg_separability = parse_double(f[3]);
      report.avg_quality_mean = opt_parse(f[4]);
      report.avg_diversity = opt_parse(f[5]);
      saw_avg = true;
    } else if (f[0] == "rel_vs_baseline") {
      report.rel_consistency = opt_parse(f[2]);
      report.rel_separability = opt_parse(f[3]);
      report.rel_quality_mean = opt_parse(f[4]);
      report.rel_diversity = opt_parse(f[5]);
    } else {
      ClassPropertyRow row;
      row.class_id = static_cast<std::int64_t>(parse_double(f[0]));
      row.member_count = static_cast<std::size_t>(parse_double(f[1]));
      row.consistency = parse_double(f[2]);
      row.separability = parse_double(f[3]);
      row.quality_mean = opt_parse(f[4]);
      row.diversity = opt_parse(f[5]);
      report.rows.push_back(row);
    }
  }
  if (!saw_header || !saw_avg)
    throw ValidationError("property CSV " + path + " is missing header or avg row");
  return report;
}

void write_histogram_csv(const Histogram& hist, const std::string& path) {
  std::string out = "bin_left,bin_right,count\n";
  for (std::size_t i = 0; i < hist.counts.size(); ++i)
    out += format_double(hist.bin_left(i)) + ',' + format_double(hist.bin_right(i)) + ',' +
           std::to_string(hist.counts[i]) + '\n';
  write_file(path, out);
}

Histogram read_histogram_csv(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty() || lines[0].rfind("bin_left,", 0) != 0)
    throw ValidationError("bad histogram CSV header in " + path);
  std::vector<std::uint64_t> counts;
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<std::string> f = split_csv(lines[i]);
    if (f.size() != 3) throw ValidationError("bad histogram CSV row in " + path);
    if (counts.empty()) lo = parse_double(f[0]);
    hi = parse_double(f[1]);
    counts.push_back(static_cast<std::uint64_t>(parse_double(f[2])));
  }
  if (counts.size() < 2) throw ValidationError("histogram CSV " + path + " has < 2 bins");
  Histogram hist(lo, hi, counts.size());
  hist.counts = std::move(counts);
  return hist;
}

void write_leakage_csv(const LeakageReport& report, const std::string& path) {
  std::string out = "query_id,rank,ref_id,cosine\n";
  for (const QueryTopMatches& q : report.queries)
    for (std::size_t r = 0; r < q.top.size(); ++r)
      out += std::to_string(q.query_id) + ',' + std::to_string(r + 1) + ',' +
             std::to_string(q.top[r].ref_id) + ',' + format_double(q.top[r].cosine) + '\n';
  write_file(path, out);
}

std::vector<LeakageCsvRow> read_leakage_csv(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty() || lines[0].rfind("query_id,", 0) != 0)
    throw ValidationError("bad leakage CSV header in " + path);
  std::vector<LeakageCsvRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<std::string> f = split_csv(lines[i]);
    if (f.size() != 4) throw ValidationError("bad leakage CSV row in " + path);
    rows.push_back(LeakageCsvRow{static_cast<std::int64_t>(parse_double(f[0])),
                                 static_cast<std::size_t>(parse_double(f[1])),
                                 static_cast<std::int64_t>(parse_double(f[2])),
                                 parse_double(f[3])});
  }
  return rows;
}

void write_train_report_csv(const TrainReport& report, const std::string& path) {
  std::string out =
      "iteration,loss,learning_rate,rr_mean,rr_max,rv_mean,rv_max,vv_mean,vv_max\n";
  for (const CheckpointStats& st : report.checkpoints)
    out += std::to_string(st.iteration) + ',' + format_double(st.loss) + ',' +
           format_double(st.learning_rate) + ',' + format_double(st.real_real.mean) + ',' +
           format_double(st.real_real.max) + ',' + format_double(st.real_virtual.mean) + ',' +
           format_double(st.real_virtual.max) + ',' + format_double(st.virtual_virtual.mean) +
           ',' + format_double(st.virtual_virtual.max) + '\n';
  write_file(path, out);
}

std::vector<CheckpointStats> read_train_report_csv(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty() || lines[0].rfind("iteration,", 0) != 0)
    throw ValidationError("bad train CSV header in " + path);
  std::vector<CheckpointStats> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<std::string> f = split_csv(lines[i]);
    if (f.size() != 9) throw ValidationError("bad train CSV row in " + path);
    CheckpointStats st;
    st.iteration = static_cast<std::uint64_t>(parse_double(f[0]));
    st.loss = parse_double(f[1]);
    st.learning_rate = parse_double(f[2]);
    st.real_real = {parse_double(f[3]), parse_double(f[4])};
    st.real_virtual = {parse_double(f[5]), parse_double(f[6])};
    st.virtual_virtual = {parse_double(f[7]), parse_double(f[8])};
    out.push_back(st);
  }
  return out;
}

void write_train_report_text(const TrainReport& report, const TrainRunConfig& config,
                             const std::string& path) {
  const CheckpointStats& last = report.checkpoints.back();
  double sig_mean = 0.0, sig_max = 0.0;
  for (double v : report.tracker.sigma()) {
    sig_mean += v;
    sig_max = std::max(sig_max, v);
  }
  if (!report.tracker.sigma().empty())
    sig_mean /= static_cast<double>(report.tracker.sigma().size());

  std::ostringstream out;
  out << "prototype training report\n"
      << "bank: n_real=" << report.bank.n_real() << " k_virtual=" << report.bank.k_virtual()
      << " dim=" << report.bank.dim() << "\n"
      << "iterations: " << config.iterations << " (batch_real=" << config.batch_real
      << ", margin=" << config.margin << ", scale=" << config.scale << ")\n"
      << "ablation_no_virtual_embeddings: " << (config.ablation_no_virtual_embeddings ? "true" : "false")
      << "\n"
      << "seed: " << config.seed << "\n"
      << "final loss: " << format_double(last.loss) << "\n"
      << "sigma: mean=" << format_double(sig_mean) << " max=" << format_double(sig_max)
      << " (updates=" << report.tracker.iteration() << ")\n"
      << "real-real cosine mean/max: " << format_double(last.real_real.mean) << " / "
      << format_double(last.real_real.max) << "\n"
      << "real-virtual cosine mean/max: " << format_double(last.real_virtual.mean) << " / "
      << format_double(last.real_virtual.max) << "\n"
      << "virtual-virtual cosine mean/max: " << format_double(last.virtual_virtual.mean)
      << " / " << format_double(last.virtual_virtual.max) << "\n"
      << "checkpoints: " << report.checkpoints.size() << "\n";
  write_file(path, out.str());
}

void write_tsne_csv(const LabeledEmbeddingSet& set, const std::string& path) {
  std::string out = "label";
  for (std::size_t d = 0; d < set.dim(); ++d) out += ",e" + std::to_string(d);
  out += '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    out += std::to_string(set.labels()[i]);
    const double* row = set.matrix().row(i);
    for (std::size_t d = 0; d < set.dim(); ++d) out += ',' + format_double(row[d]);
    out += '\n';
  }
  write_file(path, out);
}

}  // namespace protobank
