// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The LRT Authors
 *
 * @file   params.hpp
 * @brief  Named parameter storage with stable iteration order, and the
 *         binary checkpoint format.
 */

#ifndef LRT_PARAMS_HPP_
#define LRT_PARAMS_HPP_

#include <cstdint>
#include <filesystem>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lrt/tensor.hpp"

namespace lrt {

template <typename Scalar> struct Parameter {
  std::string name;
  /// Declared shape (rank 1 or 2). Rank-1 parameters are stored as 1 x k.
  std::vector<std::uint32_t> shape;
  ad::Matrix<Scalar> value;

  std::size_t numel() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, std::uint32_t b) { return a * b; });
  }
};

/// Parameters in insertion order; names are unique.
template <typename Scalar> class ParamRegistry {
public:
  using Mat = ad::Matrix<Scalar>;

  Parameter<Scalar> &add(std::string name, std::vector<std::uint32_t> shape, Mat value) {
    if (shape.empty() || shape.size() > 2)
      throw std::invalid_argument("parameter " + name + ": rank must be 1 or 2");
    const auto rows = shape.size() == 2 ? shape[0] : 1u;
    const auto cols = shape.back();
    if (value.rows() != static_cast<ad::Index>(rows) ||
        value.cols() != static_cast<ad::Index>(cols))
      throw ad::ShapeError("parameter " + name + ": value " +
                           ad::shape_str(value.rows(), value.cols()) +
                           " does not match declared shape");
    if (index_.count(name))
      throw std::invalid_argument("duplicate parameter name " + name);
    index_.emplace(name, entries_.size());
    entries_.push_back({std::move(name), std::move(shape), std::move(value)});
    return entries_.back();
  }

  bool contains(const std::string &name) const { return index_.count(name) != 0; }

  Parameter<Scalar> &at(const std::string &name) { return entries_[slot(name)]; }
  const Parameter<Scalar> &at(const std::string &name) const { return entries_[slot(name)]; }
  std::size_t slot(const std::string &name) const {
    auto it = index_.find(name);
    if (it == index_.end())
      throw std::out_of_range("unknown parameter " + name);
    return it->second;
  }

  std::size_t size() const { return entries_.size(); }
  Parameter<Scalar> &operator[](std::size_t i) { return entries_[i]; }
  const Parameter<Scalar> &operator[](std::size_t i) const { return entries_[i]; }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto &p : entries_)
      n += p.numel();
    return n;
  }

  template <typename To> ParamRegistry<To> cast() const {
    ParamRegistry<To> out;
    for (const auto &p : entries_)
      out.add(p.name, p.shape, p.value.template cast<To>());
    return out;
  }

private:
  std::vector<Parameter<Scalar>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Checkpoint file
//
//   "LRTCKPT1"
//   u32 box_size, d_model, n_layers, n_heads, t_max
//   per parameter, in registry order:
//     u32 name length, name bytes, u32 rank, u32 dims[rank],
//     f32 values (row-major)
//
// All integers and floats little-endian.
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'L', 'R', 'T', 'C', 'K', 'P', 'T', '1'};

class CorruptCheckpoint : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct CheckpointHeader {
  std::uint32_t box_size = 0;
  std::uint32_t d_model = 0;
  std::uint32_t n_layers = 0;
  std::uint32_t n_heads = 0;
  std::uint32_t t_max = 0;
  friend bool operator==(const CheckpointHeader &, const CheckpointHeader &) = default;
};

struct Checkpoint {
  CheckpointHeader header;
  ParamRegistry<float> params;
};

void write_checkpoint(const std::filesystem::path &path, const CheckpointHeader &header,
                      const ParamRegistry<float> &params);
Checkpoint read_checkpoint(const std::filesystem::path &path);

template <typename Scalar>
void save_checkpoint(const std::filesystem::path &path, const CheckpointHeader &header,
                     const ParamRegistry<Scalar> &params) {
  write_checkpoint(path, header, params.template cast<float>());
}

} // namespace lrt

#endif // LRT_PARAMS_HPP_
