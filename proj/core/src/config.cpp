#include "protobank/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "protobank/errors.hpp"
#include "protobank/io.hpp"

namespace protobank {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigInvalid("key '" + key + "' needs a nonnegative integer, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigInvalid("key '" + key + "' needs true or false, got '" + s + "'");
}

double parse_real(const std::string& s, const std::string& key) {
  try {
    return parse_double(s);
  } catch (const ValidationError&) {
    throw ConfigInvalid("key '" + key + "' needs a number, got '" + s + "'");
  }
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& s, Parse parse) {
  std::vector<T> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    std::size_t end = s.find(',', start);
    std::string item = trim(end == std::string::npos ? s.substr(start)
                                                     : s.substr(start, end - start));
    out.push_back(parse(item));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

template <typename T>
std::string join_list(const std::vector<T>& v, std::string (*fmt)(T)) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt(v[i]);
  }
  return out;
}

std::string fmt_u64(std::uint64_t v) { return std::to_string(v); }

}  // namespace

std::string partition_name(Partition p) {
  switch (p) {
    case Partition::kReal: return "real";
    case Partition::kVirtual: return "virtual";
    case Partition::kBoth: return "both";
  }
  throw ConfigInvalid("unknown partition value");
}

Partition parse_partition(const std::string& name) {
  if (name == "real") return Partition::kReal;
  if (name == "virtual") return Partition::kVirtual;
  if (name == "both") return Partition::kBoth;
  throw ConfigInvalid("partition must be real, virtual, or both; got '" + name + "'");
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigInvalid("unterminated section header at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      if (section != "data" && section != "train" && section != "surrogate" &&
          section != "metrics" && section != "audit")
        throw ConfigInvalid("unknown section [" + section + "]");
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigInvalid("expected key = value at line " + std::to_string(lineno));
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigInvalid("key '" + key + "' appears before any section header");

    auto unknown = [&]() -> ConfigInvalid {
      return ConfigInvalid("unknown key '" + key + "' in section [" + section + "]");
    };
    if (section == "data") {
      if (key == "n_ids") cfg.data.n_ids = parse_u64(value, key);
      else if (key == "per_id") cfg.data.per_id = parse_u64(value, key);
      else if (key == "dim") cfg.data.dim = parse_u64(value, key);
      else if (key == "jitter") cfg.data.jitter = parse_real(value, key);
      else if (key == "concentration") cfg.data.concentration = parse_real(value, key);
      else if (key == "seed") cfg.data.seed = parse_u64(value, key);
      else throw unknown();
    } else if (section == "train") {
      if (key == "k_virtual") cfg.train.k_virtual = parse_u64(value, key);
      else if (key == "batch_real") cfg.train.batch_real = parse_u64(value, key);
      else if (key == "iterations") cfg.train.iterations = parse_u64(value, key);
      else if (key == "learning_rate") cfg.train.lr.initial = parse_real(value, key);
      else if (key == "decay_iterations")
        cfg.train.lr.decay_iterations =
            parse_list<std::uint64_t>(value, [&](const std::string& s) {
              return parse_u64(s, key);
            });
      else if (key == "decay_factor") cfg.train.lr.decay_factor = parse_real(value, key);
      else if (key == "momentum") cfg.train.momentum = parse_real(value, key);
      else if (key == "margin") cfg.train.margin = parse_real(value, key);
      else if (key == "scale") cfg.train.scale = parse_real(value, key);
      else if (key == "sigma_alpha") cfg.train.sigma_alpha = parse_real(value, key);
      else if (key == "ablation_no_virtual_embeddings")
        cfg.train.ablation_no_virtual_embeddings = parse_bool(value, key);
      else if (key == "seed") cfg.train.seed = parse_u64(value, key);
      else if (key == "checkpoint_interval")
        cfg.train.checkpoint_interval = parse_u64(value, key);
      else throw unknown();
    } else if (section == "surrogate") {
      if (key == "samples_per_class") cfg.surrogate.samples_per_class = parse_u64(value, key);
      else if (key == "spread")
        cfg.surrogate.spread = parse_list<double>(value, [&](const std::string& s) {
          return parse_real(s, key);
        });
      else if (key == "tightness") cfg.surrogate.tightness = parse_real(value, key);
      else if (key == "seed") cfg.surrogate.seed = parse_u64(value, key);
      else if (key == "partition") cfg.surrogate_partition = parse_partition(value);
      else throw unknown();
    } else if (section == "metrics") {
      if (key == "bins") cfg.metrics.bins = parse_u64(value, key);
      else if (key == "max_pairs_per_class")
        cfg.metrics.max_pairs_per_class = parse_u64(value, key);
      else if (key == "seed") cfg.metrics.seed = parse_u64(value, key);
      else throw unknown();
    } else {  // audit
      if (key == "top_j") cfg.audit.top_j = parse_u64(value, key);
      else if (key == "quantile") cfg.audit.quantile = parse_real(value, key);
      else if (key == "bins") cfg.audit.bins = parse_u64(value, key);
      else if (key == "block") cfg.audit.block = parse_u64(value, key);
      else throw unknown();
    }
  }
  if (cfg.surrogate.spread.empty())
    throw ConfigInvalid("surrogate spread needs at least one value");
  return cfg;
}

std::string serialize_run_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "[data]\n"
      << "n_ids = " << cfg.data.n_ids << "\n"
      << "per_id = " << cfg.data.per_id << "\n"
      << "dim = " << cfg.data.dim << "\n"
      << "jitter = " << format_double(cfg.data.jitter) << "\n"
      << "concentration = " << format_double(cfg.data.concentration) << "\n"
      << "seed = " << cfg.data.seed << "\n\n";
  out << "[train]\n"
      << "k_virtual = " << cfg.train.k_virtual << "\n"
      << "batch_real = " << cfg.train.batch_real << "\n"
      << "iterations = " << cfg.train.iterations << "\n"
      << "learning_rate = " << format_double(cfg.train.lr.initial) << "\n"
      << "decay_iterations = " << join_list(cfg.train.lr.decay_iterations, fmt_u64) << "\n"
      << "decay_factor = " << format_double(cfg.train.lr.decay_factor) << "\n"
      << "momentum = " << format_double(cfg.train.momentum) << "\n"
      << "margin = " << format_double(cfg.train.margin) << "\n"
      << "scale = " << format_double(cfg.train.scale) << "\n"
      << "sigma_alpha = " << format_double(cfg.train.sigma_alpha) << "\n"
      << "ablation_no_virtual_embeddings = "
      << (cfg.train.ablation_no_virtual_embeddings ? "true" : "false") << "\n"
      << "seed = " << cfg.train.seed << "\n"
      << "checkpoint_interval = " << cfg.train.checkpoint_interval << "\n\n";
  out << "[surrogate]\n"
      << "samples_per_class = " << cfg.surrogate.samples_per_class << "\n"
      << "spread = " << join_list(cfg.surrogate.spread, +[](double v) {
           return format_double(v);
         }) << "\n"
      << "tightness = " << format_double(cfg.surrogate.tightness) << "\n"
      << "partition = " << partition_name(cfg.surrogate_partition) << "\n"
      << "seed = " << cfg.surrogate.seed << "\n\n";
  out << "[metrics]\n"
      << "bins = " << cfg.metrics.bins << "\n"
      << "max_pairs_per_class = " << cfg.metrics.max_pairs_per_class << "\n"
      << "seed = " << cfg.metrics.seed << "\n\n";
  out << "[audit]\n"
      << "top_j = " << cfg.audit.top_j << "\n"
      << "quantile = " << format_double(cfg.audit.quantile) << "\n"
      << "bins = " << cfg.audit.bins << "\n"
      << "block = " << cfg.audit.block << "\n";
  return out.str();
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

void save_run_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << serialize_run_config(config);
  if (!out.good()) throw IoError("write failed on " + path);
}

}  // namespace protobank
