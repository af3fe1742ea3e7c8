#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cgre/model.hpp"

namespace cgre {

namespace detail {

constexpr char kCheckpointMagic[8] = {'C', 'G', 'R', 'E', 'C', 'K', 'P', '1'};

inline void write_u32(std::ostream& os, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

inline void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(os, bits);
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t read_u32(std::istream& is) {
  char buf[4];
  if (!is.read(buf, 4)) throw ParseError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& is) {
  char buf[8];
  if (!is.read(buf, 8)) throw ParseError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

inline double read_f64(std::istream& is) {
  std::uint64_t bits = read_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline std::string read_string(std::istream& is) {
  const std::uint32_t len = read_u32(is);
  if (len > (1u << 24)) throw ParseError("checkpoint: implausible string length");
  std::string s(len, '\0');
  if (len && !is.read(s.data(), len))
    throw ParseError("checkpoint: truncated string");
  return s;
}

inline void write_tensor(std::ostream& os, const std::string& name,
                         const Tensor& t) {
  write_string(os, name);
  write_u32(os, static_cast<std::uint32_t>(t.ndim()));
  for (int d : t.shape) write_u32(os, static_cast<std::uint32_t>(d));
  for (std::size_t i = 0; i < t.numel(); ++i) write_f64(os, t.at(i));
}

}  // namespace detail

// Self-contained binary snapshot: schema, dimensions, vocabulary and every
// named tensor. Contains no timestamps or machine state, so identical runs
// produce byte-identical files.
inline void save_checkpoint(const std::string& path, const ModelParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot write " + path);
  os.write(detail::kCheckpointMagic, 8);
  detail::write_u64(os, params.schema.hash());

  detail::write_u32(os, static_cast<std::uint32_t>(params.schema.num_relations()));
  for (const auto& r : params.schema.relations()) detail::write_string(os, r);
  detail::write_u32(os, static_cast<std::uint32_t>(params.schema.num_types()));
  for (const auto& t : params.schema.types()) detail::write_string(os, t);

  detail::write_u32(os, static_cast<std::uint32_t>(params.variant));
  const ModelDims& d = params.dims;
  for (int v : {d.d_w, d.d_p, d.kernels, d.window, d.max_len, d.d_v,
                d.gcn_hidden, d.gcn_layers, static_cast<int>(d.gcn_output),
                d.type_dim})
    detail::write_u32(os, static_cast<std::uint32_t>(v));
  detail::write_f64(os, d.lambda);
  detail::write_f64(os, d.dropout);

  detail::write_u32(os, static_cast<std::uint32_t>(params.vocab.words.size()));
  for (const auto& w : params.vocab.words) detail::write_string(os, w);

  auto named = const_cast<ModelParams&>(params).named_params();
  detail::write_u32(os, static_cast<std::uint32_t>(named.size()));
  for (auto& [name, tensor] : named) detail::write_tensor(os, name, *tensor);
  if (!os) throw ParseError("checkpoint: write failed for " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open " + path);
  char magic[8];
  if (!is.read(magic, 8) ||
      std::memcmp(magic, detail::kCheckpointMagic, 8) != 0)
    throw ParseError("checkpoint: bad magic in " + path);
  const std::uint64_t stored_hash = detail::read_u64(is);

  const std::uint32_t n_r = detail::read_u32(is);
  std::vector<std::string> relations;
  relations.reserve(n_r);
  for (std::uint32_t i = 0; i < n_r; ++i)
    relations.push_back(detail::read_string(is));
  const std::uint32_t n_t = detail::read_u32(is);
  std::vector<std::string> types;
  types.reserve(n_t);
  for (std::uint32_t i = 0; i < n_t; ++i) types.push_back(detail::read_string(is));
  Schema schema = Schema::from_lists(std::move(relations), std::move(types));
  if (schema.hash() != stored_hash)
    throw SchemaError("checkpoint: schema hash mismatch in " + path);

  const VariantMode variant = static_cast<VariantMode>(detail::read_u32(is));
  ModelDims d;
  int* ints[] = {&d.d_w, &d.d_p, &d.kernels, &d.window, &d.max_len,
                 &d.d_v, &d.gcn_hidden, &d.gcn_layers, nullptr, &d.type_dim};
  for (int i = 0; i < 10; ++i) {
    const std::uint32_t v = detail::read_u32(is);
    if (i == 8)
      d.gcn_output = static_cast<GcnOutput>(v);
    else
      *ints[i] = static_cast<int>(v);
  }
  d.lambda = detail::read_f64(is);
  d.dropout = detail::read_f64(is);

  const std::uint32_t vocab_size = detail::read_u32(is);
  std::vector<std::string> words;
  words.reserve(vocab_size);
  for (std::uint32_t i = 0; i < vocab_size; ++i)
    words.push_back(detail::read_string(is));
  if (vocab_size < 2 || words[0] != "<pad>" || words[1] != "<unk>")
    throw ParseError("checkpoint: malformed vocabulary");

  // Rebuild the parameter structure, then overwrite every tensor by name.
  Vocabulary vocab;
  vocab.words = std::move(words);
  vocab.rebuild_index();
  vocab.d_w = d.d_w;
  vocab.d_p = d.d_p;
  vocab.max_len = d.max_len;
  vocab.word_emb = Tensor::zeros({vocab.size(), d.d_w});
  vocab.pos_emb = Tensor::zeros({2 * d.max_len + 1, d.d_p});
  Rng scratch(0);
  ModelParams params =
      ModelParams::init(std::move(schema), std::move(vocab), variant, d, scratch);

  auto named = params.named_params();
  const std::uint32_t tensor_count = detail::read_u32(is);
  if (tensor_count != named.size())
    throw ParseError("checkpoint: expected " + std::to_string(named.size()) +
                     " tensors, found " + std::to_string(tensor_count));
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    const std::string name = detail::read_string(is);
    if (name != named[i].first)
      throw ParseError("checkpoint: tensor '" + name + "' where '" +
                       named[i].first + "' was expected");
    const std::uint32_t ndim = detail::read_u32(is);
    std::vector<int> shape;
    for (std::uint32_t k = 0; k < ndim; ++k)
      shape.push_back(static_cast<int>(detail::read_u32(is)));
    Tensor& t = *named[i].second;
    if (shape != t.shape)
      throw ParseError("checkpoint: tensor '" + name + "' has shape " +
                       Tensor::shape_string(shape) + ", expected " +
                       t.shape_str());
    for (std::size_t k = 0; k < t.numel(); ++k) t.at(k) = detail::read_f64(is);
  }
  is.peek();
  if (!is.eof()) throw ParseError("checkpoint: trailing bytes in " + path);
  return params;
}

}  // namespace cgre
