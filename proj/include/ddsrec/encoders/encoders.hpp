#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ddsrec/numerics/parameters.hpp"

namespace ddsrec::encoders {

struct TransformerConfig {
    std::size_t d = 64;
    std::size_t blocks = 2;
    std::size_t heads = 2;
    std::size_t ffn_mult = 4;
    double dropout = 0.1;
    double emb_dropout = 0.3;
    std::size_t max_len = 50;

    /// Throws std::invalid_argument on d % heads != 0, rates outside [0, 1), or zero sizes.
    void validate() const;
};

inline constexpr double kLayerNormEps = 1e-8;

/// M (|I| x d) and P (n x d).
struct EmbeddingIds {
    ParamId items = 0;
    ParamId positions = 0;
};

struct BlockIds {
    ParamId wq = 0, wk = 0, wv = 0, wh = 0;
    ParamId ln1_gain = 0, ln1_bias = 0;
    ParamId ffn_w1 = 0, ffn_b1 = 0, ffn_w2 = 0, ffn_b2 = 0;
    ParamId ln2_gain = 0, ln2_bias = 0;
};

struct TransformerIds {
    std::vector<BlockIds> blocks;
    ParamId empty = 0;  // returned for an empty trend sequence
};

struct DiscreteMlpIds {
    ParamId w1 = 0, b1 = 0, w2 = 0, b2 = 0;
    ParamId empty = 0;  // returned for an empty discrete sequence
};

EmbeddingIds add_embedding_params(ParameterStore& store, std::size_t num_items, const TransformerConfig& cfg,
                                  std::mt19937_64& rng);
TransformerIds add_transformer_params(ParameterStore& store, const TransformerConfig& cfg, std::mt19937_64& rng);
DiscreteMlpIds add_discrete_params(ParameterStore& store, std::size_t d, std::mt19937_64& rng);

/// Rows M_{seq[j]} + P_j, with embedding dropout in training mode.
DiffMatrix embed_with_positions(ForwardContext& ctx, const EmbeddingIds& emb, std::span<const std::size_t> seq,
                                const TransformerConfig& cfg);

/// Causal multi-head self-attention with 1/sqrt(d/h) scaling, heads
/// concatenated and projected by W_H.
DiffMatrix mhsa(ForwardContext& ctx, DiffMatrix input, const BlockIds& block, const TransformerConfig& cfg);

/// Position-wise d -> ffn -> d network with ReLU.
DiffMatrix ffn(ForwardContext& ctx, DiffMatrix input, const BlockIds& block);

/// Full stack: each block is LN(x + drop(MHSA(x))) then LN(x + drop(FFN(x))).
/// Returns the 1 x d representation at the last position, or the learned
/// empty vector for an empty sequence.
DiffMatrix transformer_encode(ForwardContext& ctx, const EmbeddingIds& emb, const TransformerIds& tr,
                              std::span<const std::size_t> seq, const TransformerConfig& cfg);

/// Order-free mean of the item embeddings (1 x d).
DiffMatrix mean_pool_items(ForwardContext& ctx, const EmbeddingIds& emb, std::span<const std::size_t> seq);

/// Mean pooling followed by a d -> d -> d ReLU MLP; the learned empty vector
/// for an empty sequence.
DiffMatrix mlp_encode_discrete(ForwardContext& ctx, const EmbeddingIds& emb, const DiscreteMlpIds& mlp,
                               std::span<const std::size_t> seq);

}  // namespace ddsrec::encoders
