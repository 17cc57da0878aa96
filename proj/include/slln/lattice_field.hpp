#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "slln/common.hpp"
#include "slln/multi_index.hpp"

namespace slln {

// Generator tags recorded in field headers.
enum class GeneratorId : std::uint64_t {
  Zero = 0,
  IidGaussian = 1,
  IidStable = 2,
  OrthogonalGaussian = 3,
  QuasiStationaryAr = 4,
  FractionalStableIncrements = 5,
  Custom = 15,
};

// Dense scalar field on the box [origin, origin + shape), row-major with the
// last coordinate fastest.
class LatticeField {
 public:
  LatticeField() = default;
  LatticeField(MultiIndex shape, MultiIndex origin, GeneratorId gen, std::uint64_t seed)
      : shape_(std::move(shape)), origin_(std::move(origin)), gen_(gen), seed_(seed) {
    check_dim(origin_, d(), "LatticeField origin");
    std::int64_t total = 1;
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (shape_[i] <= 0) {
        throw std::invalid_argument("LatticeField: shape coordinate " + fmt_int(static_cast<std::int64_t>(i)) +
                                    " must be positive, got " + fmt_int(shape_[i]));
      }
      total *= shape_[i];
    }
    values_.assign(static_cast<std::size_t>(total), 0.0);
  }

  int d() const { return static_cast<int>(shape_.size()); }
  const MultiIndex& shape() const { return shape_; }
  const MultiIndex& origin() const { return origin_; }
  GeneratorId generator() const { return gen_; }
  std::uint64_t seed() const { return seed_; }
  std::int64_t size() const { return static_cast<std::int64_t>(values_.size()); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool contains(const MultiIndex& abs) const {
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (abs[i] < origin_[i] || abs[i] >= origin_[i] + shape_[i]) return false;
    }
    return true;
  }

  std::int64_t flat(const MultiIndex& abs) const {
    std::int64_t idx = 0;
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      std::int64_t rel = abs[i] - origin_[i];
      if (rel < 0 || rel >= shape_[i]) {
        throw std::out_of_range("LatticeField: coordinate " + fmt_int(static_cast<std::int64_t>(i)) + " of " +
                                to_string(abs) + " outside box [" + to_string(origin_) + ", origin+shape)");
      }
      idx = idx * shape_[i] + rel;
    }
    return idx;
  }

  double at(const MultiIndex& abs) const { return values_[static_cast<std::size_t>(flat(abs))]; }
  double& at(const MultiIndex& abs) { return values_[static_cast<std::size_t>(flat(abs))]; }

  // Moves the box in absolute coordinates; the values stay put.
  void rebase(MultiIndex origin) {
    check_dim(origin, d(), "LatticeField origin");
    origin_ = std::move(origin);
  }

 private:
  MultiIndex shape_;
  MultiIndex origin_;
  GeneratorId gen_ = GeneratorId::Zero;
  std::uint64_t seed_ = 0;
  std::vector<double> values_;
};

// Flat binary layout, little-endian: u64 d, u64 shape[d], u64 offset[d],
// u64 generator id, u64 seed, then row-major IEEE-754 doubles.
inline void write_field_binary(const LatticeField& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_field_binary: cannot open " + path);
  auto put_u64 = [&out](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 8);
  };
  put_u64(static_cast<std::uint64_t>(f.d()));
  for (auto v : f.shape()) put_u64(static_cast<std::uint64_t>(v));
  for (auto v : f.origin()) put_u64(static_cast<std::uint64_t>(v));
  put_u64(static_cast<std::uint64_t>(f.generator()));
  put_u64(f.seed());
  for (double x : f.values()) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    put_u64(bits);
  }
  if (!out) throw std::runtime_error("write_field_binary: write failed for " + path);
}

inline LatticeField read_field_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_field_binary: cannot open " + path);
  auto get_u64 = [&in, &path]() {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("read_field_binary: truncated file " + path);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  };
  std::uint64_t d = get_u64();
  if (d < 1 || d > 8) throw std::runtime_error("read_field_binary: bad dimension in " + path);
  MultiIndex shape(d), origin(d);
  for (auto& v : shape) v = static_cast<std::int64_t>(get_u64());
  for (auto& v : origin) v = static_cast<std::int64_t>(get_u64());
  GeneratorId gen = static_cast<GeneratorId>(get_u64());
  std::uint64_t seed = get_u64();
  LatticeField f(shape, origin, gen, seed);
  for (auto& x : f.values()) {
    std::uint64_t bits = get_u64();
    std::memcpy(&x, &bits, 8);
  }
  return f;
}

// Debug dump: header row "c0,...,c<d-1>,value", one row per lattice point in
// row-major order, '.' decimal separator, LF line endings.
inline void write_field_csv(const LatticeField& f, std::ostream& out) {
  for (int i = 0; i < f.d(); ++i) out << "c" << i << ",";
  out << "value\n";
  MultiIndex k = f.origin();
  const MultiIndex& shape = f.shape();
  const MultiIndex& origin = f.origin();
  for (std::int64_t idx = 0; idx < f.size(); ++idx) {
    for (std::size_t i = 0; i < k.size(); ++i) out << fmt_int(k[i]) << ",";
    out << fmt_double(f.values()[static_cast<std::size_t>(idx)]) << "\n";
    int axis = f.d() - 1;
    while (axis >= 0) {
      auto a = static_cast<std::size_t>(axis);
      ++k[a];
      if (k[a] < origin[a] + shape[a]) break;
      k[a] = origin[a];
      --axis;
    }
  }
}

}  // namespace slln
