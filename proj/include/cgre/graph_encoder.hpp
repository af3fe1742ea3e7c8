#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cgre/constraint_graph.hpp"
#include "cgre/nn.hpp"
#include "cgre/ops.hpp"

namespace cgre {

// Which representations feed the encoder output. With K layers the encoder
// produces K+1 representations V^0..V^K (V^0 is the node embedding table);
// `last` emits V^K, the concat variants join the trailing 2 or 3
// representations column-wise and project them linearly to the output width.
enum class GcnOutput { last, last_two, last_three };

inline const char* to_string(GcnOutput o) {
  switch (o) {
    case GcnOutput::last: return "last";
    case GcnOutput::last_two: return "last_two";
    case GcnOutput::last_three: return "last_three";
  }
  return "?";
}

// One graph convolution: row i of the result aggregates every out-neighbor j
// (adjacency row i) of node i, v_i' = relu(sum_j A_ij (v_j W) + b).
inline Tensor gcn_layer(const Tensor& v, const Tensor& adjacency,
                        const Tensor& w, const Tensor& b) {
  if (adjacency.ndim() != 2 || adjacency.shape[0] != adjacency.shape[1])
    throw ShapeError("gcn_layer: adjacency must be square, got " +
                     adjacency.shape_str());
  if (v.ndim() != 2 || v.shape[0] != adjacency.shape[0])
    throw ShapeError("gcn_layer: nodes " + v.shape_str() + " vs adjacency " +
                     adjacency.shape_str());
  return relu(add_row_bias(matmul(adjacency, matmul(v, w)), b));
}

// Stacked graph convolutions over the constraint graph. Node embeddings V^0
// are trained; adjacency is a fixed constant. d_out is the width handed to
// the rest of the model.
struct GraphEncoderParams {
  Tensor v0;  // (n, d_v)
  std::vector<Tensor> layer_w;
  std::vector<Tensor> layer_b;
  Tensor proj_w, proj_b;  // only for the concat outputs
  GcnOutput output = GcnOutput::last;
  int d_out = 0;

  int layers() const { return static_cast<int>(layer_w.size()); }

  // Representation widths V^0..V^K.
  static std::vector<int> rep_widths(int d_v, int hidden, int d_out, int k,
                                     GcnOutput output) {
    std::vector<int> w{d_v};
    for (int i = 1; i <= k; ++i)
      w.push_back(i < k ? hidden
                        : (output == GcnOutput::last ? d_out : hidden));
    return w;
  }

  static GraphEncoderParams init(int nodes, int d_v, int hidden, int d_out,
                                 int k, GcnOutput output, Rng& rng) {
    if (nodes < 1 || d_v < 1 || d_out < 1)
      throw ConfigError("graph encoder: dimensions must be positive");
    if (k < 0) throw ConfigError("graph encoder: negative layer count");
    if (k > 0 && hidden < 1)
      throw ConfigError("graph encoder: hidden width must be positive");
    if (output == GcnOutput::last_two && k < 1)
      throw ConfigError("graph encoder: last_two output needs at least 1 layer");
    if (output == GcnOutput::last_three && k < 2)
      throw ConfigError("graph encoder: last_three output needs at least 2 layers");
    if (output == GcnOutput::last && k == 0 && d_v != d_out)
      throw ConfigError(
          "graph encoder: with 0 layers the embedding width must equal the "
          "output width");

    GraphEncoderParams p;
    p.output = output;
    p.d_out = d_out;
    p.v0 = xavier_init({nodes, d_v}, rng).set_requires_grad(true);
    const std::vector<int> widths = rep_widths(d_v, hidden, d_out, k, output);
    for (int i = 1; i <= k; ++i) {
      p.layer_w.push_back(
          xavier_init({widths[static_cast<std::size_t>(i - 1)], widths[static_cast<std::size_t>(i)]}, rng)
              .set_requires_grad(true));
      p.layer_b.push_back(
          Tensor::zeros({widths[static_cast<std::size_t>(i)]}).set_requires_grad(true));
    }
    if (output != GcnOutput::last) {
      const int take = output == GcnOutput::last_two ? 2 : 3;
      int in = 0;
      for (int i = k + 1 - take; i <= k; ++i) in += widths[static_cast<std::size_t>(i)];
      p.proj_w = xavier_init({in, d_out}, rng).set_requires_grad(true);
      p.proj_b = Tensor::zeros({d_out}).set_requires_grad(true);
    }
    return p;
  }

  void push_params(std::vector<std::pair<std::string, Tensor*>>& out) {
    out.emplace_back("graph.v0", &v0);
    for (std::size_t i = 0; i < layer_w.size(); ++i) {
      out.emplace_back("graph.layer" + std::to_string(i) + ".w", &layer_w[i]);
      out.emplace_back("graph.layer" + std::to_string(i) + ".b", &layer_b[i]);
    }
    if (output != GcnOutput::last) {
      out.emplace_back("graph.proj_w", &proj_w);
      out.emplace_back("graph.proj_b", &proj_b);
    }
  }
};

// Runs the stack and assembles the configured output, one row per node.
inline Tensor graph_encode(const GraphEncoderParams& p, const Tensor& adjacency) {
  std::vector<Tensor> reps{p.v0};
  for (int i = 0; i < p.layers(); ++i)
    reps.push_back(gcn_layer(reps.back(), adjacency,
                             p.layer_w[static_cast<std::size_t>(i)],
                             p.layer_b[static_cast<std::size_t>(i)]));
  if (p.output == GcnOutput::last) return reps.back();
  const int take = p.output == GcnOutput::last_two ? 2 : 3;
  if (static_cast<int>(reps.size()) < take)
    throw ConfigError("graph encoder: not enough layers for concat output");
  std::vector<Tensor> tail(reps.end() - take, reps.end());
  return add_row_bias(matmul(concat_cols(tail), p.proj_w), p.proj_b);
}

// Node representations split into the relation block and the type block.
struct GraphReprs {
  Tensor relations;  // (n_r, d_out)
  Tensor types;      // (n_t, d_out)
};

inline GraphReprs encode_graph(const GraphEncoderParams& p,
                               const ConstraintGraph& g) {
  Tensor all = graph_encode(p, g.adjacency);
  GraphReprs out;
  out.relations = slice_rows(all, 0, g.num_relations());
  out.types = slice_rows(all, g.num_relations(), g.num_nodes());
  return out;
}

}  // namespace cgre
