// Copyright 2026 The ConvForm Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "convform/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "convform/error.hpp"
#include "convform/random.hpp"
#include "json.hpp"

namespace convform {

namespace {

constexpr char kCkptMagic[4] = {'D', 'C', 'K', 'P'};
constexpr std::uint32_t kCkptVersion = 1;
constexpr char kSbtMagic[4] = {'S', 'B', 'T', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  Reader(const std::string& data, std::string name)
      : data_(data), name_(std::move(name)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::vector<std::byte> take_bytes(std::size_t n) {
    need(n);
    std::vector<std::byte> b(n);
    std::memcpy(b.data(), data_.data() + pos_, n);
    pos_ += n;
    return b;
  }

  void expect_magic(const char (&magic)[4]) {
    need(4);
    if (std::memcmp(data_.data() + pos_, magic, 4) != 0) {
      throw FormatError(name_ + ": bad magic");
    }
    pos_ += 4;
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) {
    if (pos_ + n > data_.size()) {
      throw FormatError(name_ + ": truncated (need " + std::to_string(n) +
                        " bytes at offset " + std::to_string(pos_) + ")");
    }
  }

  const std::string& data_;
  std::string name_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for write");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

DType dtype_from_code(std::uint8_t code, const std::string& where) {
  switch (code) {
    case 0: return DType::F32;
    case 1: return DType::I8;
    case 2: return DType::I32;
    default:
      throw FormatError(where + ": unknown dtype code " +
                        std::to_string(code));
  }
}

std::uint8_t dtype_code(DType t) { return static_cast<std::uint8_t>(t); }

}  // namespace

void Checkpoint::add(const std::string& name, Tensor t) {
  if (name.empty()) throw ParamError("checkpoint entry name is empty");
  if (t.empty()) throw ParamError("checkpoint entry '" + name + "' is empty");
  if (!tensors_.emplace(name, std::move(t)).second) {
    throw ParamError("duplicate checkpoint entry '" + name + "'");
  }
  order_.push_back(name);
}

bool Checkpoint::contains(const std::string& name) const {
  return tensors_.count(name) != 0;
}

const Tensor& Checkpoint::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw ParamError("checkpoint has no entry '" + name + "'");
  }
  return it->second;
}

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path) {
  nlohmann::json manifest;
  manifest["meta"] = {{"variant", ckpt.meta.variant},
                      {"distilled", ckpt.meta.distilled},
                      {"num_classes", ckpt.meta.num_classes}};
  nlohmann::json tensors = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& name : ckpt.names()) {
    const Tensor& t = ckpt.at(name);
    tensors.push_back({{"name", name},
                       {"dtype", dtype_name(t.dtype())},
                       {"shape", t.shape()},
                       {"offset", offset},
                       {"nbytes", t.nbytes()}});
    offset += t.nbytes();
  }
  manifest["tensors"] = std::move(tensors);
  const std::string mjson = manifest.dump();

  std::string out;
  out.reserve(16 + mjson.size() + offset);
  out.append(kCkptMagic, 4);
  put_u32(out, kCkptVersion);
  put_u64(out, mjson.size());
  out += mjson;
  for (const auto& name : ckpt.names()) {
    auto b = ckpt.at(name).bytes();
    out.append(reinterpret_cast<const char*>(b.data()), b.size());
  }
  write_file(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  Reader r(data, path.string());
  r.expect_magic(kCkptMagic);
  const std::uint32_t version = r.u32();
  if (version != kCkptVersion) {
    throw FormatError(path.string() + ": unsupported version " +
                      std::to_string(version));
  }
  const std::uint64_t mlen = r.u64();
  const std::string mjson = r.take(mlen);

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mjson);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": manifest does not parse: " +
                      e.what());
  }
  Checkpoint ckpt;
  try {
    const auto& meta = manifest.at("meta");
    ckpt.meta.variant = meta.at("variant").get<std::string>();
    ckpt.meta.distilled = meta.at("distilled").get<bool>();
    ckpt.meta.num_classes = meta.at("num_classes").get<std::int64_t>();

    const std::size_t blob_size = r.remaining();
    std::uint64_t expected_offset = 0;
    for (const auto& jt : manifest.at("tensors")) {
      const auto name = jt.at("name").get<std::string>();
      const DType dtype = dtype_from_name(jt.at("dtype").get<std::string>());
      const Shape shape = jt.at("shape").get<Shape>();
      const auto offset = jt.at("offset").get<std::uint64_t>();
      const auto nbytes = jt.at("nbytes").get<std::uint64_t>();
      if (offset != expected_offset) {
        throw FormatError(path.string() + ": tensor '" + name +
                          "' offset is not contiguous");
      }
      const auto want =
          static_cast<std::uint64_t>(shape_numel(shape)) * dtype_size(dtype);
      if (nbytes != want) {
        throw FormatError(path.string() + ": tensor '" + name + "' declares " +
                          std::to_string(nbytes) + " bytes for shape " +
                          shape_str(shape));
      }
      expected_offset += nbytes;
      if (expected_offset > blob_size) {
        throw FormatError(path.string() + ": blob truncated at tensor '" +
                          name + "'");
      }
      ckpt.add(name, Tensor::from_bytes(dtype, shape, r.take_bytes(nbytes)));
    }
    if (r.remaining() != 0) {
      throw FormatError(path.string() + ": trailing bytes after blob");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": manifest is malformed: " + e.what());
  }
  return ckpt;
}

void save_tensor_sbt(const Tensor& t, const std::filesystem::path& path) {
  if (t.empty()) throw FormatError("cannot save empty tensor");
  std::string out;
  out.append(kSbtMagic, 4);
  out.push_back(static_cast<char>(dtype_code(t.dtype())));
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::int64_t d : t.shape()) {
    if (d > 0xffffffffLL) throw FormatError("dim too large for sbt");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  auto b = t.bytes();
  out.append(reinterpret_cast<const char*>(b.data()), b.size());
  write_file(path, out);
}

Tensor load_tensor_sbt(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  Reader r(data, path.string());
  r.expect_magic(kSbtMagic);
  const DType dtype = dtype_from_code(r.u8(), path.string());
  const std::uint32_t ndim = r.u32();
  if (ndim == 0 || ndim > 8) {
    throw FormatError(path.string() + ": implausible rank " +
                      std::to_string(ndim));
  }
  Shape shape;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    shape.push_back(static_cast<std::int64_t>(r.u32()));
  }
  const auto nbytes =
      static_cast<std::size_t>(shape_numel(shape)) * dtype_size(dtype);
  if (r.remaining() != nbytes) {
    throw FormatError(path.string() + ": payload is " +
                      std::to_string(r.remaining()) + " bytes, shape " +
                      shape_str(shape) + " needs " + std::to_string(nbytes));
  }
  return Tensor::from_bytes(dtype, shape, r.take_bytes(nbytes));
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Checkpoint random_checkpoint(const Graph& g, std::uint64_t seed,
                             CheckpointMeta meta) {
  Rng rng(seed);
  Checkpoint ckpt;
  ckpt.meta = std::move(meta);
  for (const auto& [name, info] : g.params) {
    if (info.dtype != DType::F32) {
      throw ParamError("param '" + name + "' is not f32");
    }
    const auto n = static_cast<std::size_t>(shape_numel(info.shape));
    std::vector<float> buf(n);
    if (info.synth) {
      for (auto& v : buf) v = static_cast<float>(info.fill);
    } else if (ends_with(name, ".gamma")) {
      for (auto& v : buf) v = static_cast<float>(rng.normal(1.0, 0.05));
    } else if (ends_with(name, ".beta")) {
      for (auto& v : buf) v = static_cast<float>(rng.normal(0.0, 0.05));
    } else {
      for (auto& v : buf) v = static_cast<float>(rng.normal(0.0, 0.02));
    }
    ckpt.add(name, Tensor::from_f32(info.shape, std::move(buf)));
  }
  return ckpt;
}

Checkpoint inherit_weights(const Checkpoint& src, const Graph& lowered) {
  Checkpoint out;
  out.meta = src.meta;
  std::size_t copied = 0;
  for (const auto& [name, info] : lowered.params) {
    if (info.synth) {
      out.add(name, Tensor::full_f32(info.shape,
                                     static_cast<float>(info.fill)));
      continue;
    }
    if (!src.contains(name)) {
      throw ParamError("source checkpoint is missing param '" + name + "'");
    }
    const Tensor& t = src.at(name);
    if (t.numel() != shape_numel(info.shape)) {
      throw ParamError("param '" + name + "' has " + std::to_string(t.numel()) +
                       " elements, graph declares " + shape_str(info.shape));
    }
    out.add(name, t.reshaped(info.shape));
    ++copied;
  }
  if (copied != src.size()) {
    for (const auto& name : src.names()) {
      if (lowered.params.find(name) == lowered.params.end()) {
        throw ParamError("source checkpoint param '" + name +
                         "' has no place in the lowered graph");
      }
    }
  }
  return out;
}

Checkpoint overlay(const Checkpoint& base, const Checkpoint& over) {
  Checkpoint out;
  out.meta = base.meta;
  for (const auto& name : base.names()) {
    out.add(name, over.contains(name) ? over.at(name) : base.at(name));
  }
  for (const auto& name : over.names()) {
    if (!base.contains(name)) out.add(name, over.at(name));
  }
  return out;
}

}  // namespace convform
