#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "protobank/embedding.hpp"
#include "protobank/matrix.hpp"
#include "protobank/rng.hpp"

namespace testutil {

inline protobank::Matrix random_matrix(std::size_t rows, std::size_t cols,
                                       std::uint64_t seed, double scale = 1.0) {
  protobank::Matrix m(rows, cols);
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < rows * cols; ++i) m.data()[i] = normal(eng) * scale;
  return m;
}

inline protobank::Matrix random_unit_matrix(std::size_t rows, std::size_t cols,
                                            std::uint64_t seed) {
  return protobank::normalize_rows(random_matrix(rows, cols, seed));
}

inline double naive_dot(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t t = 0; t < d; ++t) s += a[t] * b[t];
  return s;
}

inline double naive_cosine(const protobank::Matrix& a, std::size_t i,
                           const protobank::Matrix& b, std::size_t j) {
  double num = naive_dot(a.row(i), b.row(j), a.cols());
  double na = std::sqrt(naive_dot(a.row(i), a.row(i), a.cols()));
  double nb = std::sqrt(naive_dot(b.row(j), b.row(j), b.cols()));
  return num / (na * nb);
}

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "pbtestXXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
    path = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Worker-count override that restores the previous value on destruction.
struct WorkerGuard {
  std::string saved;
  bool had = false;

  explicit WorkerGuard(std::size_t workers) {
    if (const char* v = std::getenv("PROTOBANK_WORKERS")) {
      saved = v;
      had = true;
    }
    setenv("PROTOBANK_WORKERS", std::to_string(workers).c_str(), 1);
  }
  ~WorkerGuard() {
    if (had)
      setenv("PROTOBANK_WORKERS", saved.c_str(), 1);
    else
      unsetenv("PROTOBANK_WORKERS");
  }
};

}  // namespace testutil
