#include "protopipe/adaptation.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "protopipe/error.hpp"

namespace protopipe {

using nlohmann::json;

namespace {

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& field) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(ErrorCode::kShapeMismatch,
                field + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                    ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void expect_len(const Vector& v, std::size_t n, const std::string& field) {
  if (v.size() != n) {
    throw Error(ErrorCode::kShapeMismatch, field + " has length " + std::to_string(v.size()) +
                                               ", expected " + std::to_string(n));
  }
}

void check_input(const Matrix& p, const TransformerWeights& w) {
  if (p.rows() < 1) throw Error(ErrorCode::kEmptyInput, "no prototypes to adapt");
  if (p.cols() != w.d) {
    throw Error(ErrorCode::kDimensionMismatch, "prototypes have dim " + std::to_string(p.cols()) +
                                                   ", adapter expects " + std::to_string(w.d));
  }
}

}  // namespace

void TransformerWeights::validate() const {
  if (d < 1 || h < 1 || d_ff < 1) {
    throw Error(ErrorCode::kInvariantViolation, "d, h and d_ff must be positive");
  }
  if (d % h != 0) {
    throw Error(ErrorCode::kInvariantViolation,
                "d=" + std::to_string(d) + " is not divisible by h=" + std::to_string(h));
  }
  if (!(eps > 0.0)) throw Error(ErrorCode::kInvariantViolation, "eps must be positive");
  if (heads.size() != h) {
    throw Error(ErrorCode::kShapeMismatch, "heads has " + std::to_string(heads.size()) +
                                               " entries, expected " + std::to_string(h));
  }
  for (std::size_t i = 0; i < h; ++i) {
    const std::string prefix = "heads[" + std::to_string(i) + "].";
    expect_shape(heads[i].w_q, d, head_dim(), prefix + "W_Q");
    expect_shape(heads[i].w_k, d, head_dim(), prefix + "W_K");
    expect_shape(heads[i].w_v, d, head_dim(), prefix + "W_V");
  }
  expect_shape(w_o, d, d, "W_O");
  expect_shape(w1, d, d_ff, "W1");
  expect_len(b1, d_ff, "b1");
  expect_shape(w2, d_ff, d, "W2");
  expect_len(b2, d, "b2");
  expect_len(ln1_gain, d, "ln1.gain");
  expect_len(ln1_bias, d, "ln1.bias");
  expect_len(ln2_gain, d, "ln2.gain");
  expect_len(ln2_bias, d, "ln2.bias");
}

Matrix attention_logits(const Matrix& prototypes, const AttentionHead& head,
                        std::size_t head_dim) {
  const Matrix q = matmul(prototypes, head.w_q);
  const Matrix k = matmul(prototypes, head.w_k);
  return scale(matmul(q, k.transpose()), 1.0 / std::sqrt(static_cast<double>(head_dim)));
}

std::vector<Matrix> attention_maps(const Matrix& prototypes, const TransformerWeights& w) {
  check_input(prototypes, w);
  std::vector<Matrix> maps;
  maps.reserve(w.h);
  for (const auto& head : w.heads) {
    maps.push_back(softmax_rows(attention_logits(prototypes, head, w.head_dim())));
  }
  return maps;
}

Matrix self_attention(const Matrix& prototypes, const TransformerWeights& w) {
  const auto maps = attention_maps(prototypes, w);
  std::vector<Matrix> outputs;
  outputs.reserve(w.h);
  for (std::size_t i = 0; i < w.h; ++i) {
    outputs.push_back(matmul(maps[i], matmul(prototypes, w.heads[i].w_v)));
  }
  return matmul(hconcat(outputs), w.w_o);
}

Matrix adapt_prototypes(const Matrix& prototypes, const TransformerWeights& w) {
  check_input(prototypes, w);
  const Matrix z = layer_norm_rows(add(prototypes, self_attention(prototypes, w)), w.ln1_gain,
                                   w.ln1_bias, w.eps);
  const Matrix hidden = relu(add_row_bias(matmul(z, w.w1), w.b1));
  const Matrix ffn = add_row_bias(matmul(hidden, w.w2), w.b2);
  return layer_norm_rows(add(z, ffn), w.ln2_gain, w.ln2_bias, w.eps);
}

namespace {

TransformerWeights shaped_zero(std::size_t d, std::size_t h, std::size_t d_ff) {
  if (h == 0 || d % h != 0) {
    throw Error(ErrorCode::kInvariantViolation,
                "d=" + std::to_string(d) + " is not divisible by h=" + std::to_string(h));
  }
  TransformerWeights w;
  w.d = d;
  w.h = h;
  w.d_ff = d_ff;
  for (std::size_t i = 0; i < h; ++i) {
    w.heads.push_back({Matrix(d, d / h), Matrix(d, d / h), Matrix(d, d / h)});
  }
  w.w_o = Matrix(d, d);
  w.w1 = Matrix(d, d_ff);
  w.b1 = Vector(d_ff, 0.0);
  w.w2 = Matrix(d_ff, d);
  w.b2 = Vector(d, 0.0);
  w.ln1_gain = Vector(d, 1.0);
  w.ln1_bias = Vector(d, 0.0);
  w.ln2_gain = Vector(d, 1.0);
  w.ln2_bias = Vector(d, 0.0);
  return w;
}

}  // namespace

TransformerWeights zero_transformer_weights(std::size_t d, std::size_t h, std::size_t d_ff) {
  auto w = shaped_zero(d, h, d_ff);
  w.validate();
  return w;
}

TransformerWeights random_transformer_weights(std::size_t d, std::size_t h, std::size_t d_ff,
                                              std::uint64_t seed) {
  auto w = shaped_zero(d, h, d_ff);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto fill = [&](Matrix& m) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(m.rows()));
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (double& x : m.row(r)) x = sd * gauss(rng);
  };
  auto fill_vec = [&](Vector& v, double center, double sd) {
    for (double& x : v) x = center + sd * gauss(rng);
  };
  for (auto& head : w.heads) {
    fill(head.w_q);
    fill(head.w_k);
    fill(head.w_v);
  }
  fill(w.w_o);
  fill(w.w1);
  fill_vec(w.b1, 0.0, 0.1);
  fill(w.w2);
  fill_vec(w.b2, 0.0, 0.1);
  fill_vec(w.ln1_gain, 1.0, 0.1);
  fill_vec(w.ln1_bias, 0.0, 0.1);
  fill_vec(w.ln2_gain, 1.0, 0.1);
  fill_vec(w.ln2_bias, 0.0, 0.1);
  w.validate();
  return w;
}

TransformerWeights centering_transformer_weights(std::size_t d, std::size_t d_ff,
                                                 double strength) {
  auto w = shaped_zero(d, 1, d_ff);
  for (std::size_t i = 0; i < d; ++i) {
    w.heads[0].w_v(i, i) = -strength;
    w.w_o(i, i) = 1.0;
  }
  w.validate();
  return w;
}

namespace {

Matrix matrix_field(const json& doc, const std::string& key, const std::string& field) {
  const json& j = doc.at(key);
  if (!j.is_array()) throw Error(ErrorCode::kShapeMismatch, field);
  std::vector<Vector> rows;
  for (const auto& r : j) {
    if (!r.is_array()) throw Error(ErrorCode::kShapeMismatch, field);
    rows.push_back(r.get<Vector>());
  }
  if (rows.empty()) return {};
  try {
    return Matrix::from_rows(rows);
  } catch (const Error&) {
    throw Error(ErrorCode::kShapeMismatch, field + " is ragged");
  }
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(m.row_vector(r));
  return rows;
}

}  // namespace

TransformerWeights parse_transformer_weights(const json& doc) {
  TransformerWeights w;
  try {
    w.d = doc.at("d").get<std::size_t>();
    w.h = doc.at("h").get<std::size_t>();
    w.d_ff = doc.at("d_ff").get<std::size_t>();
    w.eps = doc.value("eps", 1e-5);
    if (w.h == 0 || w.d % w.h != 0) {
      throw Error(ErrorCode::kInvariantViolation,
                  "d=" + std::to_string(w.d) + " is not divisible by h=" + std::to_string(w.h));
    }
    const json& heads = doc.at("heads");
    for (std::size_t i = 0; i < heads.size(); ++i) {
      const std::string prefix = "heads[" + std::to_string(i) + "].";
      w.heads.push_back({matrix_field(heads[i], "W_Q", prefix + "W_Q"),
                         matrix_field(heads[i], "W_K", prefix + "W_K"),
                         matrix_field(heads[i], "W_V", prefix + "W_V")});
    }
    w.w_o = matrix_field(doc, "W_O", "W_O");
    w.w1 = matrix_field(doc, "W1", "W1");
    w.b1 = doc.at("b1").get<Vector>();
    w.w2 = matrix_field(doc, "W2", "W2");
    w.b2 = doc.at("b2").get<Vector>();
    w.ln1_gain = doc.at("ln1").at("gain").get<Vector>();
    w.ln1_bias = doc.at("ln1").at("bias").get<Vector>();
    w.ln2_gain = doc.at("ln2").at("gain").get<Vector>();
    w.ln2_bias = doc.at("ln2").at("bias").get<Vector>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  w.validate();
  return w;
}

TransformerWeights load_transformer_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  return parse_transformer_weights(doc);
}

json transformer_weights_to_json(const TransformerWeights& w) {
  json heads = json::array();
  for (const auto& head : w.heads) {
    heads.push_back(
        {{"W_Q", matrix_json(head.w_q)}, {"W_K", matrix_json(head.w_k)}, {"W_V", matrix_json(head.w_v)}});
  }
  return {{"d", w.d},
          {"h", w.h},
          {"d_ff", w.d_ff},
          {"eps", w.eps},
          {"heads", std::move(heads)},
          {"W_O", matrix_json(w.w_o)},
          {"W1", matrix_json(w.w1)},
          {"b1", w.b1},
          {"W2", matrix_json(w.w2)},
          {"b2", w.b2},
          {"ln1", {{"gain", w.ln1_gain}, {"bias", w.ln1_bias}}},
          {"ln2", {{"gain", w.ln2_gain}, {"bias", w.ln2_bias}}}};
}

}  // namespace protopipe
