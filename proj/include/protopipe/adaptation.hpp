#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "protopipe/numerics.hpp"

namespace protopipe {

struct AttentionHead {
  Matrix w_q;  // d x d/h
  Matrix w_k;  // d x d/h
  Matrix w_v;  // d x d/h
};

// Parameters of a single post-norm transformer encoder block.
struct TransformerWeights {
  std::size_t d = 0;
  std::size_t h = 1;
  std::size_t d_ff = 0;
  double eps = 1e-5;
  std::vector<AttentionHead> heads;
  Matrix w_o;  // d x d
  Matrix w1;   // d x d_ff
  Vector b1;   // d_ff
  Matrix w2;   // d_ff x d
  Vector b2;   // d
  Vector ln1_gain, ln1_bias;
  Vector ln2_gain, ln2_bias;

  std::size_t head_dim() const { return d / h; }

  // Throws InvariantViolation when d % h != 0 and ShapeMismatch(field) for
  // the first parameter whose shape disagrees with (d, h, d_ff).
  void validate() const;
};

// Pre-softmax scores of one head: (P Wq)(P Wk)^T / sqrt(d/h).
Matrix attention_logits(const Matrix& prototypes, const AttentionHead& head, std::size_t head_dim);

// Row-stochastic attention matrix of every head, N x N each.
std::vector<Matrix> attention_maps(const Matrix& prototypes, const TransformerWeights& w);

// concat_i(A_i P Wv_i) Wo.
Matrix self_attention(const Matrix& prototypes, const TransformerWeights& w);

// Z = LN1(P + SelfAttention(P)); out = LN2(Z + FFN(Z)), FFN = relu(Z W1 + b1) W2 + b2.
// Row i of the output belongs to the same class as row i of the input.
Matrix adapt_prototypes(const Matrix& prototypes, const TransformerWeights& w);

// Normal(0, 1/fan_in) projections, gains near 1 and small biases.
TransformerWeights random_transformer_weights(std::size_t d, std::size_t h, std::size_t d_ff,
                                              std::uint64_t seed);

// All projections and biases zero, gains 1: the block reduces to LN(LN(P)).
TransformerWeights zero_transformer_weights(std::size_t d, std::size_t h, std::size_t d_ff);

// Uniform attention with W_V = -strength*I and W_O = I, so the residual
// branch subtracts strength times the prototype mean before normalization.
// FFN is zero. Pushes class prototypes apart without any training.
TransformerWeights centering_transformer_weights(std::size_t d, std::size_t d_ff,
                                                 double strength = 1.0);

TransformerWeights parse_transformer_weights(const nlohmann::json& doc);
TransformerWeights load_transformer_weights(const std::filesystem::path& path);
nlohmann::json transformer_weights_to_json(const TransformerWeights& w);

}  // namespace protopipe
