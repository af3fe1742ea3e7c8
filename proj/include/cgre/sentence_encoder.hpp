#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cgre/corpus.hpp"
#include "cgre/nn.hpp"
#include "cgre/ops.hpp"

namespace cgre {

// Entity-aware gate + piecewise convolutional sentence encoder.
//
// Two token views are blended per position: the position-aware view
// [word; pos_head; pos_tail] projected through a tanh layer, and the
// entity-aware view [word; head_word; tail_word]. A sigmoid gate
// A = sigmoid(lambda * (X_e W_e + b_e)) mixes them as
// X = A * X_e + (1 - A) * tanh(X_p W_p + b_p), after which m kernels of the
// given window convolve X and are max-pooled over the three segments
// delimited by the entity positions. The final sentence vector has width 3m.
struct SentEncoderParams {
  Tensor gate_w, gate_b;  // (3*d_w, 3*d_w), (3*d_w)
  Tensor proj_w, proj_b;  // (d_w + 2*d_p, 3*d_w), (3*d_w)
  Tensor conv_w, conv_b;  // (m, window*3*d_w), (m)
  double lambda = 1.0;    // gate sharpness
  int window = 3;
  int d_w = 0, d_p = 0, kernels = 0;

  static SentEncoderParams init(int d_w, int d_p, int kernels, int window,
                                double lambda, Rng& rng) {
    if (d_w < 1 || d_p < 1 || kernels < 1 || window < 1)
      throw ConfigError("sentence encoder: dimensions must be positive");
    SentEncoderParams p;
    p.d_w = d_w;
    p.d_p = d_p;
    p.kernels = kernels;
    p.window = window;
    p.lambda = lambda;
    const int de = 3 * d_w;
    p.gate_w = xavier_init({de, de}, rng).set_requires_grad(true);
    p.gate_b = Tensor::zeros({de}).set_requires_grad(true);
    p.proj_w = xavier_init({d_w + 2 * d_p, de}, rng).set_requires_grad(true);
    p.proj_b = Tensor::zeros({de}).set_requires_grad(true);
    p.conv_w = xavier_init({kernels, window * de}, rng).set_requires_grad(true);
    p.conv_b = Tensor::zeros({kernels}).set_requires_grad(true);
    return p;
  }

  int sentence_dim() const { return 3 * kernels; }

  void push_params(std::vector<std::pair<std::string, Tensor*>>& out) {
    out.emplace_back("sent.gate_w", &gate_w);
    out.emplace_back("sent.gate_b", &gate_b);
    out.emplace_back("sent.proj_w", &proj_w);
    out.emplace_back("sent.proj_b", &proj_b);
    out.emplace_back("sent.conv_w", &conv_w);
    out.emplace_back("sent.conv_b", &conv_b);
  }
};

// Embedding lookup for one encoded sentence. Both matrices cover all max_len
// rows (PAD included): X_p rows are [word; pos_head; pos_tail] and X_e rows
// are [word; head_word; tail_word], where head_word/tail_word are the word
// embeddings at the entity anchors, repeated down the rows.
inline std::pair<Tensor, Tensor> embed_tokens(const EncodedInstance& enc,
                                              const Vocabulary& vocab) {
  Tensor words = rows(vocab.word_emb, enc.token_ids);
  Tensor p1 = rows(vocab.pos_emb, enc.head_offsets);
  Tensor p2 = rows(vocab.pos_emb, enc.tail_offsets);
  Tensor xp = concat_cols({words, p1, p2});

  const int rows_n = static_cast<int>(enc.token_ids.size());
  Tensor head_word =
      row(vocab.word_emb, enc.token_ids[static_cast<std::size_t>(enc.head_pos)]);
  Tensor tail_word =
      row(vocab.word_emb, enc.token_ids[static_cast<std::size_t>(enc.tail_pos)]);
  Tensor xe = concat_cols(
      {words, tile_row(head_word, rows_n), tile_row(tail_word, rows_n)});
  return {xp, xe};
}

// Gate blend of the two views; output width is 3*d_w.
inline Tensor entity_aware_gate(const Tensor& xp, const Tensor& xe,
                                const SentEncoderParams& p) {
  Tensor gate_in = scale(add_row_bias(matmul(xe, p.gate_w), p.gate_b), p.lambda);
  Tensor a = sigmoid(gate_in);
  Tensor projected = cgre::tanh(add_row_bias(matmul(xp, p.proj_w), p.proj_b));
  Tensor ones = Tensor::full(a.shape, 1.0);
  return add(mul(a, xe), mul(sub(ones, a), projected));
}

// Convolution + piecewise max pooling + ReLU over the blended rows.
inline Tensor pcnn_encode(const Tensor& x, int head_pos, int tail_pos,
                          const SentEncoderParams& p) {
  Tensor h = conv1d(x, p.conv_w, p.conv_b, p.window);
  Tensor pooled = piecewise_max_pool(h, head_pos, tail_pos);
  return relu(pooled);
}

// Full path from an encoded instance to its sentence vector. PAD rows are
// dropped before the convolution so sentence length does not leak into the
// representation.
inline Tensor encode_sentence(const EncodedInstance& enc,
                              const Vocabulary& vocab,
                              const SentEncoderParams& p) {
  auto [xp, xe] = embed_tokens(enc, vocab);
  Tensor xp_used = slice_rows(xp, 0, enc.length);
  Tensor xe_used = slice_rows(xe, 0, enc.length);
  Tensor x = entity_aware_gate(xp_used, xe_used, p);
  return pcnn_encode(x, enc.head_pos, enc.tail_pos, p);
}

}  // namespace cgre
