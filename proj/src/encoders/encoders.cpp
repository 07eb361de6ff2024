#include "ddsrec/encoders/encoders.hpp"

#include <cmath>
#include <stdexcept>

#include "ddsrec/errors.hpp"
#include "ddsrec/numerics/ops.hpp"

namespace ddsrec::encoders {

void TransformerConfig::validate() const {
    if (d == 0 || heads == 0 || ffn_mult == 0 || max_len == 0) {
        throw std::invalid_argument("model.d, model.heads, model.ffn_mult and model.max_len must be >= 1");
    }
    if (d % heads != 0) throw std::invalid_argument("model.d must be divisible by model.heads");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("model.dropout must lie in [0, 1)");
    if (!(emb_dropout >= 0.0 && emb_dropout < 1.0)) throw std::invalid_argument("model.emb_dropout must lie in [0, 1)");
}

EmbeddingIds add_embedding_params(ParameterStore& store, std::size_t num_items, const TransformerConfig& cfg,
                                  std::mt19937_64& rng) {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(cfg.d));
    EmbeddingIds ids;
    ids.items = store.add_normal("item_embedding", num_items, cfg.d, stddev, rng);
    ids.positions = store.add_normal("position_embedding", cfg.max_len, cfg.d, stddev, rng);
    return ids;
}

TransformerIds add_transformer_params(ParameterStore& store, const TransformerConfig& cfg, std::mt19937_64& rng) {
    TransformerIds ids;
    const std::size_t d = cfg.d, f = cfg.d * cfg.ffn_mult;
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        const std::string pre = "block" + std::to_string(b) + ".";
        BlockIds k;
        k.wq = store.add_glorot(pre + "attn.wq", d, d, rng);
        k.wk = store.add_glorot(pre + "attn.wk", d, d, rng);
        k.wv = store.add_glorot(pre + "attn.wv", d, d, rng);
        k.wh = store.add_glorot(pre + "attn.wh", d, d, rng);
        k.ln1_gain = store.add(pre + "ln1.gain", Matrix(1, d, 1.0));
        k.ln1_bias = store.add(pre + "ln1.bias", Matrix(1, d));
        k.ffn_w1 = store.add_glorot(pre + "ffn.w1", d, f, rng);
        k.ffn_b1 = store.add(pre + "ffn.b1", Matrix(1, f));
        k.ffn_w2 = store.add_glorot(pre + "ffn.w2", f, d, rng);
        k.ffn_b2 = store.add(pre + "ffn.b2", Matrix(1, d));
        k.ln2_gain = store.add(pre + "ln2.gain", Matrix(1, d, 1.0));
        k.ln2_bias = store.add(pre + "ln2.bias", Matrix(1, d));
        ids.blocks.push_back(k);
    }
    ids.empty = store.add("trend.empty", Matrix(1, d));
    return ids;
}

DiscreteMlpIds add_discrete_params(ParameterStore& store, std::size_t d, std::mt19937_64& rng) {
    DiscreteMlpIds ids;
    ids.w1 = store.add_glorot("discrete.w1", d, d, rng);
    ids.b1 = store.add("discrete.b1", Matrix(1, d));
    ids.w2 = store.add_glorot("discrete.w2", d, d, rng);
    ids.b2 = store.add("discrete.b2", Matrix(1, d));
    ids.empty = store.add("discrete.empty", Matrix(1, d));
    return ids;
}

DiffMatrix embed_with_positions(ForwardContext& ctx, const EmbeddingIds& emb, std::span<const std::size_t> seq,
                                const TransformerConfig& cfg) {
    if (seq.size() > ctx.value(emb.positions).rows()) {
        throw ShapeError("embed_with_positions: sequence length " + std::to_string(seq.size()) + " exceeds max_len " +
                         std::to_string(ctx.value(emb.positions).rows()));
    }
    auto items = ops::gather_rows(ctx.param(emb.items), seq);
    auto pos = ops::slice_rows(ctx.param(emb.positions), 0, seq.size());
    return ctx.dropout(ops::add(items, pos), cfg.emb_dropout);
}

DiffMatrix mhsa(ForwardContext& ctx, DiffMatrix input, const BlockIds& block, const TransformerConfig& cfg) {
    const std::size_t dh = cfg.d / cfg.heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    auto q = ops::matmul(input, ctx.param(block.wq));
    auto k = ops::matmul(input, ctx.param(block.wk));
    auto v = ops::matmul(input, ctx.param(block.wv));
    std::vector<DiffMatrix> heads;
    heads.reserve(cfg.heads);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        auto qh = cfg.heads == 1 ? q : ops::slice_cols(q, h * dh, dh);
        auto kh = cfg.heads == 1 ? k : ops::slice_cols(k, h * dh, dh);
        auto vh = cfg.heads == 1 ? v : ops::slice_cols(v, h * dh, dh);
        auto weights = ops::causal_softmax_rows(ops::scale(ops::matmul_nt(qh, kh), inv_sqrt));
        heads.push_back(ops::matmul(weights, vh));
    }
    auto joined = cfg.heads == 1 ? heads.front() : ops::concat_cols(heads);
    return ops::matmul(joined, ctx.param(block.wh));
}

DiffMatrix ffn(ForwardContext& ctx, DiffMatrix input, const BlockIds& block) {
    auto hidden = ops::relu(affine(ctx, input, block.ffn_w1, block.ffn_b1));
    return affine(ctx, hidden, block.ffn_w2, block.ffn_b2);
}

DiffMatrix transformer_encode(ForwardContext& ctx, const EmbeddingIds& emb, const TransformerIds& tr,
                              std::span<const std::size_t> seq, const TransformerConfig& cfg) {
    if (seq.empty()) return ctx.param(tr.empty);
    auto x = embed_with_positions(ctx, emb, seq, cfg);
    for (const auto& block : tr.blocks) {
        auto attn = ctx.dropout(mhsa(ctx, x, block, cfg), cfg.dropout);
        x = ops::layer_norm_rows(ops::add(x, attn), ctx.param(block.ln1_gain), ctx.param(block.ln1_bias), kLayerNormEps);
        auto ff = ctx.dropout(ffn(ctx, x, block), cfg.dropout);
        x = ops::layer_norm_rows(ops::add(x, ff), ctx.param(block.ln2_gain), ctx.param(block.ln2_bias), kLayerNormEps);
    }
    return ops::slice_rows(x, seq.size() - 1, 1);
}

DiffMatrix mean_pool_items(ForwardContext& ctx, const EmbeddingIds& emb, std::span<const std::size_t> seq) {
    return ops::rowwise_reduce(ops::gather_rows(ctx.param(emb.items), seq), ops::Reduce::kMean);
}

DiffMatrix mlp_encode_discrete(ForwardContext& ctx, const EmbeddingIds& emb, const DiscreteMlpIds& mlp,
                               std::span<const std::size_t> seq) {
    if (seq.empty()) return ctx.param(mlp.empty);
    auto pooled = mean_pool_items(ctx, emb, seq);
    auto hidden = ops::relu(affine(ctx, pooled, mlp.w1, mlp.b1));
    return affine(ctx, hidden, mlp.w2, mlp.b2);
}

}  // namespace ddsrec::encoders
