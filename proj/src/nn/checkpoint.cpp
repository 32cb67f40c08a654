#include "gesture/nn/checkpoint.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <set>
#include <sstream>

#include "gesture/binary_io.hpp"
#include "gesture/error.hpp"

namespace gesture::nn {

const Tensor& ModelParams::at(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw Error(ErrorCode::MissingCheckpoint, "no tensor named " + name);
}

ModelParams collect_params(const std::vector<Parameter*>& params, std::uint64_t init_seed) {
  ModelParams out;
  out.init_seed = init_seed;
  std::set<std::string> seen;
  for (const Parameter* p : params) {
    if (!seen.insert(p->name).second) throw Error(ErrorCode::InvalidConfig, "duplicate parameter name " + p->name);
    out.tensors.emplace_back(p->name, p->value);
  }
  return out;
}

void assign_params(const ModelParams& source, const std::vector<Parameter*>& params) {
  if (source.tensors.size() != params.size())
    throw Error(ErrorCode::ShapeMismatch, "checkpoint has " + std::to_string(source.tensors.size()) +
                                              " tensors, model has " + std::to_string(params.size()));
  for (Parameter* p : params) {
    const Tensor& t = source.at(p->name);
    require_same_shape(p->value, t, p->name.c_str());
    p->value = t;
  }
}

void round_to_f32(const std::vector<Parameter*>& params) {
  for (Parameter* p : params)
    for (double& x : p->value.values()) x = io::to_f32(x);
}

void write_checkpoint(const ModelParams& params, std::ostream& out) {
  io::write_magic(out, "CKP1");
  io::write_le<std::uint32_t>(out, params.version);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& [name, t] : params.tensors) {
    if (name.size() > 0xFFFF) throw Error(ErrorCode::BadFormat, "tensor name too long");
    if (t.rank() > 0xFF) throw Error(ErrorCode::BadFormat, "tensor rank too large");
    io::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double x : t.values()) io::write_le<float>(out, static_cast<float>(x));
  }
}

ModelParams read_checkpoint(std::istream& in) {
  io::expect_magic(in, "CKP1");
  ModelParams out;
  out.version = io::read_le<std::uint32_t>(in);
  const auto count = io::read_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = io::read_le<std::uint16_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) throw Error(ErrorCode::BadFormat, "truncated tensor name");
    const auto rank = io::read_le<std::uint8_t>(in);
    std::vector<std::size_t> shape;
    for (std::uint8_t r = 0; r < rank; ++r) shape.push_back(io::read_le<std::uint32_t>(in));
    Tensor t(shape);
    for (double& x : t.values()) x = io::read_le<float>(in);
    out.tensors.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_checkpoint(params, out);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingCheckpoint, path.string());
  return read_checkpoint(in);
}

std::string checkpoint_bytes(const ModelParams& params) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(params, out);
  return out.str();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::Io, "sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) {
    const unsigned char c = digest[i];
    hex += kHex[c >> 4];
    hex += kHex[c & 0xF];
  }
  return hex;
}

}  // namespace gesture::nn
