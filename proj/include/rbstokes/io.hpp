// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "rbstokes/errors.hpp"

namespace rbstokes::io {

// Shortest text that parses back to the same double.
inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string hex64(std::uint64_t x) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, x);
  return buf;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << content;
  if (!out) throw ConfigError("write failed for " + p.string());
}

// ---------------------------------------------------------------------------------------------
// MatrixMarket

inline std::string matrix_market_array(const Eigen::MatrixXd& A) {
  std::string s = "%%MatrixMarket matrix array real general\n";
  s += std::to_string(A.rows()) + " " + std::to_string(A.cols()) + "\n";
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i) s += fmt(A(i, j)) + "\n";
  return s;
}

inline std::string matrix_market_coordinate(const Eigen::SparseMatrix<double>& A) {
  std::string s = "%%MatrixMarket matrix coordinate real general\n";
  s += std::to_string(A.rows()) + " " + std::to_string(A.cols()) + " " + std::to_string(A.nonZeros()) + "\n";
  for (Eigen::Index c = 0; c < A.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, c); it; ++it)
      s += std::to_string(it.row() + 1) + " " + std::to_string(it.col() + 1) + " " + fmt(it.value()) + "\n";
  return s;
}

inline Eigen::MatrixXd parse_matrix_market(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket matrix", 0) != 0)
    throw SchemaError(what + ": missing MatrixMarket header");
  const bool coordinate = line.find("coordinate") != std::string::npos;
  if (!coordinate && line.find("array") == std::string::npos) throw SchemaError(what + ": unsupported MatrixMarket layout");
  if (line.find("real") == std::string::npos || line.find("general") == std::string::npos)
    throw SchemaError(what + ": only real general matrices are supported");
  while (std::getline(in, line) && !line.empty() && line[0] == '%') {
  }
  std::istringstream dims(line);
  long rows = -1, cols = -1, nnz = -1;
  dims >> rows >> cols;
  if (coordinate) dims >> nnz;
  if (!dims || rows < 0 || cols < 0) throw SchemaError(what + ": bad size line");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, cols);
  std::string tok;
  auto number = [&](const std::string& t) {
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str() || *end != '\0') throw SchemaError(what + ": bad value '" + t + "'");
    return v;
  };
  if (coordinate) {
    for (long k = 0; k < nnz; ++k) {
      long i = 0, j = 0;
      if (!(in >> i >> j >> tok) || i < 1 || j < 1 || i > rows || j > cols)
        throw SchemaError(what + ": bad entry " + std::to_string(k));
      A(i - 1, j - 1) += number(tok);
    }
  } else {
    for (long j = 0; j < cols; ++j)
      for (long i = 0; i < rows; ++i) {
        if (!(in >> tok)) throw SchemaError(what + ": truncated array data");
        A(i, j) = number(tok);
      }
  }
  if (in >> tok) throw SchemaError(what + ": trailing data");
  return A;
}

inline Eigen::MatrixXd read_matrix_market(const std::filesystem::path& p) {
  return parse_matrix_market(read_file(p), p.filename().string());
}

// ---------------------------------------------------------------------------------------------
// Little-endian binary helpers (the on-disk byte order is fixed regardless of the host).

class ByteWriter {
 public:
  void u8(std::uint8_t x) { buf_.push_back(static_cast<char>(x)); }
  void u32(std::uint32_t x) {
    for (int k = 0; k < 4; ++k) buf_.push_back(static_cast<char>((x >> (8 * k)) & 0xFF));
  }
  void u64(std::uint64_t x) {
    for (int k = 0; k < 8; ++k) buf_.push_back(static_cast<char>((x >> (8 * k)) & 0xFF));
  }
  void f64(double x) {
    std::uint64_t b;
    std::memcpy(&b, &x, sizeof b);
    u64(b);
  }
  void bytes(const std::string& s) { buf_ += s; }
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string data, std::string what) : data_(std::move(data)), what_(std::move(what)) {}
  std::uint8_t u8(const char* field) { return static_cast<std::uint8_t>(take(1, field)[0]); }
  std::uint32_t u32(const char* field) {
    const char* p = take(4, field);
    std::uint32_t x = 0;
    for (int k = 0; k < 4; ++k) x |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[k])) << (8 * k);
    return x;
  }
  std::uint64_t u64(const char* field) {
    const char* p = take(8, field);
    std::uint64_t x = 0;
    for (int k = 0; k < 8; ++k) x |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[k])) << (8 * k);
    return x;
  }
  double f64(const char* field) {
    const std::uint64_t b = u64(field);
    double x;
    std::memcpy(&x, &b, sizeof x);
    return x;
  }
  std::string bytes(std::size_t n, const char* field) { return std::string(take(n, field), n); }
  bool done() const { return pos_ == data_.size(); }

 private:
  const char* take(std::size_t n, const char* field) {
    if (pos_ + n > data_.size()) throw SchemaError(what_ + ": truncated while reading " + field);
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::string data_, what_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------------------------
// key = value text (manifests and config files). '#' starts a comment.

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& what) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(what + ":" + std::to_string(no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(what + ":" + std::to_string(no) + ": empty key");
    if (!out.emplace(key, trim(line.substr(eq + 1))).second)
      throw ConfigError(what + ":" + std::to_string(no) + ": duplicate key '" + key + "'");
  }
  return out;
}

inline std::string format_key_values(const KeyValues& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + " = " + v + "\n";
  return s;
}

}  // namespace rbstokes::io
