#pragma once

// The learned transformation from slide embeddings to the common space:
// an affine map (optionally with one ReLU hidden layer) whose output rows
// are L2-normalized. Backward applies the exact chain rule, including the
// normalization Jacobian (I - u_hat u_hat^T) / ||u||.

#include <cmath>
#include <filesystem>
#include <vector>

#include "scda/core.hpp"
#include "scda/io.hpp"
#include "scda/parallel.hpp"
#include "scda/rng.hpp"
#include "scda/types.hpp"

namespace scda {

struct DenseLayer {
  MatrixXd weight;  // out x in
  VectorXd bias;    // out
};

enum class HeadShape { Linear, Mlp };

struct AdapterHead {
  std::vector<DenseLayer> layers;  // size 1: linear; size 2: linear-relu-linear

  int input_dim() const { return static_cast<int>(layers.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().weight.rows()); }

  void validate() const {
    require(!layers.empty() && layers.size() <= 2, ErrorCode::ShapeMismatch,
            "head must have one or two affine layers");
    require(output_dim() >= 2, ErrorCode::BadDimension, "output dimension must be >= 2");
    for (const auto& l : layers) {
      require(l.bias.size() == l.weight.rows(), ErrorCode::ShapeMismatch,
              "bias length does not match weight rows");
      require(l.weight.allFinite() && l.bias.allFinite(), ErrorCode::NonFiniteInput,
              "head parameters must be finite");
    }
    if (layers.size() == 2)
      require(layers[0].weight.rows() == layers[1].weight.cols(),
              ErrorCode::ShapeMismatch, "hidden layer widths do not agree");
  }
};

namespace detail {
inline DenseLayer glorot_layer(int out, int in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  DenseLayer l;
  l.weight.resize(out, in);
  for (Eigen::Index i = 0; i < out; ++i)
    for (Eigen::Index j = 0; j < in; ++j) l.weight(i, j) = rng.uniform(-bound, bound);
  l.bias = VectorXd::Zero(out);
  return l;
}
}  // namespace detail

// Glorot-uniform weights, zero biases; output dimension equals the input.
inline AdapterHead init_head(int d_in, HeadShape shape, int hidden_dim,
                             std::uint64_t seed) {
  require(d_in >= 2, ErrorCode::BadDimension, "input dimension must be >= 2");
  Rng rng(mix_seed({seed, 0x68656164ULL}));
  AdapterHead head;
  if (shape == HeadShape::Linear) {
    head.layers.push_back(detail::glorot_layer(d_in, d_in, rng));
  } else {
    require(hidden_dim >= 1, ErrorCode::BadDimension, "hidden dimension must be >= 1");
    head.layers.push_back(detail::glorot_layer(hidden_dim, d_in, rng));
    head.layers.push_back(detail::glorot_layer(d_in, hidden_dim, rng));
  }
  return head;
}

struct ForwardCache {
  MatrixXd input;       // B x d_in
  MatrixXd hidden_pre;  // B x h (two-layer heads)
  MatrixXd hidden_act;  // B x h
  MatrixXd prenorm;     // B x d_out
  VectorXd norms;       // B
  MatrixXd output;      // B x d_out, unit rows
};

inline ForwardCache forward_cached(const AdapterHead& head, const MatrixXd& input) {
  head.validate();
  require(input.cols() == head.input_dim(), ErrorCode::ShapeMismatch,
          "input dimension does not match the head");
  ForwardCache cache;
  cache.input = input;
  const auto affine = [](const DenseLayer& l, const MatrixXd& x) -> MatrixXd {
    return (x * l.weight.transpose()).rowwise() + l.bias.transpose();
  };
  if (head.layers.size() == 2) {
    cache.hidden_pre = affine(head.layers[0], input);
    cache.hidden_act = cache.hidden_pre.cwiseMax(0.0);
    cache.prenorm = affine(head.layers[1], cache.hidden_act);
  } else {
    cache.prenorm = affine(head.layers[0], input);
  }
  cache.norms = cache.prenorm.rowwise().norm();
  for (Eigen::Index i = 0; i < cache.norms.size(); ++i)
    require(cache.norms[i] >= kZeroNormTol, ErrorCode::ZeroOutput,
            "row " + std::to_string(i) + " collapsed to zero before normalization");
  cache.output = cache.prenorm.array().colwise() / cache.norms.array();
  return cache;
}

inline MatrixXd forward(const AdapterHead& head, const MatrixXd& input) {
  return forward_cached(head, input).output;
}

struct HeadGradients {
  std::vector<DenseLayer> layers;  // same shapes as the head
};

inline HeadGradients backward(const AdapterHead& head, const ForwardCache& cache,
                              const MatrixXd& upstream) {
  require(upstream.rows() == cache.output.rows() &&
              upstream.cols() == cache.output.cols(),
          ErrorCode::ShapeMismatch, "upstream gradient shape mismatch");

  // Through c = u / ||u||:  dL/du = (g - (g.c) c) / ||u||.
  MatrixXd d_prenorm(upstream.rows(), upstream.cols());
  for (Eigen::Index b = 0; b < upstream.rows(); ++b) {
    const double g_dot_c = upstream.row(b).dot(cache.output.row(b));
    d_prenorm.row(b) =
        (upstream.row(b) - g_dot_c * cache.output.row(b)) / cache.norms[b];
  }

  HeadGradients grads;
  grads.layers.resize(head.layers.size());
  if (head.layers.size() == 2) {
    grads.layers[1].weight = d_prenorm.transpose() * cache.hidden_act;
    grads.layers[1].bias = d_prenorm.colwise().sum().transpose();
    MatrixXd d_hidden = d_prenorm * head.layers[1].weight;
    d_hidden = (cache.hidden_pre.array() > 0.0).select(d_hidden, 0.0);
    grads.layers[0].weight = d_hidden.transpose() * cache.input;
    grads.layers[0].bias = d_hidden.colwise().sum().transpose();
  } else {
    grads.layers[0].weight = d_prenorm.transpose() * cache.input;
    grads.layers[0].bias = d_prenorm.colwise().sum().transpose();
  }
  return grads;
}

inline HeadGradients backward(const AdapterHead& head, const MatrixXd& input,
                              const MatrixXd& upstream) {
  return backward(head, forward_cached(head, input), upstream);
}

// Applies the head slide-by-slide (parallelizable, fixed output ordering).
// Provenance stays with the manifest; rows keep their order.
inline MatrixXd transform_embeddings(const AdapterHead& head, const MatrixRf& Z) {
  head.validate();
  require(Z.cols() == head.input_dim(), ErrorCode::ShapeMismatch,
          "embedding dimension does not match the head");
  MatrixXd out(Z.rows(), head.output_dim());
  parallel_for(static_cast<std::size_t>(Z.rows()), [&](std::size_t i) {
    const MatrixXd row = Z.row(static_cast<Eigen::Index>(i)).cast<double>();
    out.row(static_cast<Eigen::Index>(i)) = forward(head, row);
  });
  return out;
}

// SCDH head file: magic "SCDH" | version u32 = 1 | layer count u32 | per
// layer rows u64, cols u64, float32 weights row-major, float32 biases.

inline void save_head(const std::filesystem::path& path, const AdapterHead& head) {
  head.validate();
  std::string buf;
  buf.append("SCDH", 4);
  detail::put_u32(buf, 1u);
  detail::put_u32(buf, static_cast<std::uint32_t>(head.layers.size()));
  for (const auto& l : head.layers) {
    detail::put_u64(buf, static_cast<std::uint64_t>(l.weight.rows()));
    detail::put_u64(buf, static_cast<std::uint64_t>(l.weight.cols()));
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j)
        detail::put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(l.weight(i, j))));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i)
      detail::put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(l.bias[i])));
  }
  detail::write_file(path, buf);
}

inline AdapterHead load_head(const std::filesystem::path& path) {
  const std::string data = detail::read_file(path);
  require(data.size() >= 12, ErrorCode::TruncatedFile,
          "'" + path.string() + "' is shorter than the SCDH header");
  const auto* p = reinterpret_cast<const unsigned char*>(data.data());
  require(std::memcmp(p, "SCDH", 4) == 0, ErrorCode::BadMagic,
          "'" + path.string() + "' is not an SCDH file");
  require(detail::get_u32(p + 4) == 1u, ErrorCode::VersionMismatch,
          "unsupported SCDH version in '" + path.string() + "'");
  const std::uint32_t n_layers = detail::get_u32(p + 8);
  AdapterHead head;
  std::size_t off = 12;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    require(data.size() >= off + 16, ErrorCode::TruncatedFile,
            "'" + path.string() + "' truncated in layer header");
    const std::uint64_t rows = detail::get_u64(p + off);
    const std::uint64_t cols = detail::get_u64(p + off + 8);
    off += 16;
    const std::size_t need = (rows * cols + rows) * 4;
    require(data.size() >= off + need, ErrorCode::TruncatedFile,
            "'" + path.string() + "' truncated in layer payload");
    DenseLayer layer;
    layer.weight.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j, off += 4)
        layer.weight(i, j) = std::bit_cast<float>(detail::get_u32(p + off));
    layer.bias.resize(static_cast<Eigen::Index>(rows));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i, off += 4)
      layer.bias[i] = std::bit_cast<float>(detail::get_u32(p + off));
    head.layers.push_back(std::move(layer));
  }
  require(off == data.size(), ErrorCode::TruncatedFile,
          "'" + path.string() + "' has trailing bytes");
  head.validate();
  return head;
}

}  // namespace scda
