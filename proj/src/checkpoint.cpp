// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The LRT Authors
 *
 * @file   checkpoint.cpp
 * @brief  Little-endian checkpoint reader and writer.
 */

#include "lrt/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace lrt {

namespace {

void put_u32(std::string &buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f32(std::string &buf, float f) { put_u32(buf, std::bit_cast<std::uint32_t>(f)); }

class Reader {
public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::uint32_t u32(const char *what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  float f32(const char *what) { return std::bit_cast<float>(u32(what)); }

  std::string take(std::size_t n, const char *what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

private:
  void need(std::size_t n, const char *what) {
    if (bytes_.size() - pos_ < n)
      throw CorruptCheckpoint(std::string("checkpoint truncated while reading ") + what);
  }

  std::string bytes_;
  std::size_t pos_ = 0;
};

} // namespace

void write_checkpoint(const std::filesystem::path &path, const CheckpointHeader &header,
                      const ParamRegistry<float> &params) {
  std::string buf(kCheckpointMagic, sizeof(kCheckpointMagic));
  for (auto v : {header.box_size, header.d_model, header.n_layers, header.n_heads, header.t_max})
    put_u32(buf, v);
  for (const auto &p : params) {
    put_u32(buf, static_cast<std::uint32_t>(p.name.size()));
    buf += p.name;
    put_u32(buf, static_cast<std::uint32_t>(p.shape.size()));
    for (auto dim : p.shape)
      put_u32(buf, dim);
    const float *data = p.value.data();
    for (Eigen::Index i = 0; i < p.value.size(); ++i)
      put_f32(buf, data[i]);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out.flush())
    throw std::runtime_error("write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));

  if (r.take(sizeof(kCheckpointMagic), "magic") !=
      std::string(kCheckpointMagic, sizeof(kCheckpointMagic)))
    throw CorruptCheckpoint("bad magic: not an LRT checkpoint");

  Checkpoint ck;
  ck.header.box_size = r.u32("box_size");
  ck.header.d_model = r.u32("d_model");
  ck.header.n_layers = r.u32("n_layers");
  ck.header.n_heads = r.u32("n_heads");
  ck.header.t_max = r.u32("t_max");

  while (!r.done()) {
    const auto name_len = r.u32("name length");
    if (name_len == 0 || name_len > 4096)
      throw CorruptCheckpoint("implausible parameter name length " + std::to_string(name_len));
    std::string name = r.take(name_len, "parameter name");
    const auto rank = r.u32("rank");
    if (rank < 1 || rank > 2)
      throw CorruptCheckpoint("parameter " + name + " has unsupported rank " +
                              std::to_string(rank));
    std::vector<std::uint32_t> shape;
    for (std::uint32_t i = 0; i < rank; ++i)
      shape.push_back(r.u32("dimension"));
    const auto rows = rank == 2 ? shape[0] : 1u;
    const auto cols = shape.back();
    if (rows == 0 || cols == 0 || static_cast<std::uint64_t>(rows) * cols > (1u << 28))
      throw CorruptCheckpoint("parameter " + name + " has implausible shape");
    ad::Matrix<float> value(rows, cols);
    for (Eigen::Index i = 0; i < value.size(); ++i)
      value.data()[i] = r.f32("parameter values");
    try {
      ck.params.add(std::move(name), std::move(shape), std::move(value));
    } catch (const std::invalid_argument &e) {
      throw CorruptCheckpoint(e.what());
    }
  }
  return ck;
}

} // namespace lrt
