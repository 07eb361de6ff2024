#include "ddsrec/train/model.hpp"

#include <stdexcept>

#include "ddsrec/numerics/ops.hpp"
#include "ddsrec/random.hpp"

namespace ddsrec::train {

Variant parse_variant(const std::string& name) {
    if (name == "full") return Variant::kFull;
    if (name == "wo_dd") return Variant::kWithoutDD;
    if (name == "wo_sd") return Variant::kWithoutSD;
    if (name == "wo_rd") return Variant::kWithoutRD;
    throw std::invalid_argument("unknown variant '" + name + "' (expected full, wo_dd, wo_sd or wo_rd)");
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::kFull: return "full";
        case Variant::kWithoutDD: return "wo_dd";
        case Variant::kWithoutSD: return "wo_sd";
        case Variant::kWithoutRD: return "wo_rd";
    }
    return "full";
}

void ModelConfig::validate() const {
    transformer.validate();
    mask.validate(transformer.max_len);
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw std::invalid_argument("adv.lambda1 and adv.lambda2 must be >= 0");
}

ModelParams init_model(const ModelConfig& config, std::size_t num_items, std::size_t num_categories,
                       std::uint64_t seed) {
    config.validate();
    if (num_items == 0 || num_categories == 0) throw std::invalid_argument("init_model: empty catalog");
    ModelParams m;
    m.config = config;
    m.num_items = num_items;
    m.num_categories = num_categories;
    const std::size_t d = config.transformer.d;
    const Variant v = config.variant;
    const bool masking = v == Variant::kFull || v == Variant::kWithoutRD;
    const bool adversarial = v == Variant::kFull || v == Variant::kWithoutSD;

    // One stream per component so optional parts never shift the others.
    auto rng_emb = make_rng(seed, "init.embedding");
    m.embedding = encoders::add_embedding_params(m.store, num_items, config.transformer, rng_emb);
    auto rng_tr = make_rng(seed, "init.transformer");
    m.transformer = encoders::add_transformer_params(m.store, config.transformer, rng_tr);
    if (masking) {
        auto rng = make_rng(seed, "init.proxy");
        m.proxy_transform = m.store.add_glorot("proxy.ws", d, d, rng);
        auto rng_d = make_rng(seed, "init.discrete");
        m.discrete = encoders::add_discrete_params(m.store, d, rng_d);
    }
    if (adversarial) {
        auto rng_t = make_rng(seed, "init.repdis.trend");
        m.trend_branch = repdis::add_branch_params(m.store, "trend", d, num_categories, rng_t);
        if (masking) {
            auto rng_dd = make_rng(seed, "init.repdis.discrete");
            m.discrete_branch = repdis::add_branch_params(m.store, "discrete", d, num_categories, rng_dd);
        }
        auto rng_f = make_rng(seed, "init.fusion");
        FusionIds f;
        f.inner1_w = m.store.add_glorot("fusion.inner1.w", 2 * d, d, rng_f);
        f.inner1_b = m.store.add("fusion.inner1.b", Matrix(1, d));
        f.inner2_w = m.store.add_glorot("fusion.inner2.w", 2 * d, d, rng_f);
        f.inner2_b = m.store.add("fusion.inner2.b", Matrix(1, d));
        f.outer_w = m.store.add_glorot("fusion.outer.w", 2 * d, d, rng_f);
        f.outer_b = m.store.add("fusion.outer.b", Matrix(1, d));
        m.fusion = f;
    } else if (masking) {
        auto rng_c = make_rng(seed, "init.concat");
        ConcatFusionIds c;
        c.w = m.store.add_glorot("concat.w", 2 * d, d, rng_c);
        c.b = m.store.add("concat.b", Matrix(1, d));
        m.concat_fusion = c;
    }
    return m;
}

DiffMatrix cross_fuse(ForwardContext& ctx, const FusionIds& fusion, DiffMatrix trend_related,
                      DiffMatrix trend_independent, DiffMatrix discrete_related, DiffMatrix discrete_independent) {
    const DiffMatrix first_pair[] = {trend_related, discrete_independent};
    const DiffMatrix second_pair[] = {trend_independent, discrete_related};
    auto a = ops::relu(affine(ctx, ops::concat_cols(first_pair), fusion.inner1_w, fusion.inner1_b));
    auto b = ops::relu(affine(ctx, ops::concat_cols(second_pair), fusion.inner2_w, fusion.inner2_b));
    const DiffMatrix both[] = {a, b};
    return affine(ctx, ops::concat_cols(both), fusion.outer_w, fusion.outer_b);
}

DiffMatrix score_items(DiffMatrix user_vector, DiffMatrix item_table) { return ops::matmul_nt(user_vector, item_table); }

TotalLoss total_loss(DiffMatrix logits, std::size_t target, std::span<const repdis::AdversarialLosses> trend,
                     std::span<const repdis::AdversarialLosses> discrete, double lambda1, double lambda2) {
    TotalLoss out;
    auto ce = ops::cross_entropy_softmax(logits, target);
    out.terms.ce = ce.scalar();
    DiffMatrix objective = ce;
    double related_sum = 0.0, independent_sum = 0.0;
    auto add_branch = [&](std::span<const repdis::AdversarialLosses> terms, double& related, double& independent) {
        for (const auto& t : terms) {
            related += t.related.scalar();
            independent += t.independent.scalar();
            if (lambda1 != 0.0) objective = ops::add(objective, ops::scale(t.related, lambda1));
            if (lambda2 != 0.0) objective = ops::add(objective, ops::scale(t.independent, lambda2));
        }
    };
    add_branch(trend, out.terms.trend_related, out.terms.trend_independent);
    add_branch(discrete, out.terms.discrete_related, out.terms.discrete_independent);
    related_sum = out.terms.trend_related + out.terms.discrete_related;
    independent_sum = out.terms.trend_independent + out.terms.discrete_independent;
    out.terms.reported = out.terms.ce + lambda1 * related_sum - lambda2 * independent_sum;
    out.objective = objective;
    return out;
}

ForwardOutput forward(ForwardContext& ctx, const ModelParams& model, std::span<const std::size_t> seq,
                      const data::Catalog& catalog, std::optional<std::size_t> target) {
    const auto& cfg = model.config;
    if (seq.empty()) throw std::invalid_argument("forward: empty input sequence");
    if (seq.size() > cfg.transformer.max_len) seq = seq.subspan(seq.size() - cfg.transformer.max_len);
    ForwardOutput out;
    auto items = ctx.param(model.embedding.items);

    DiffMatrix trend_repr, discrete_repr;
    if (model.uses_masking()) {
        auto proxy = seqdis::proxy_vector(items, seq, ctx.param(*model.proxy_transform), cfg.mask.proxy_window);
        auto mask = seqdis::adaptive_mask(items.value(), seq, proxy.value().row(0), cfg.mask.theta_m);
        out.degenerate_cosines = mask.degenerate;
        out.split = seqdis::split_sequence(seq, mask.bits);
        const auto trend_items = out.split.trend_items(seq);
        const auto discrete_items = out.split.discrete_items(seq);
        trend_repr = encoders::transformer_encode(ctx, model.embedding, model.transformer, trend_items, cfg.transformer);
        discrete_repr = encoders::mlp_encode_discrete(ctx, model.embedding, *model.discrete, discrete_items);
    } else {
        out.split = seqdis::split_sequence(seq, std::vector<bool>(seq.size(), true));
        trend_repr = encoders::transformer_encode(ctx, model.embedding, model.transformer, seq, cfg.transformer);
    }

    std::vector<bool> categories;
    if (target) {
        if (*target >= catalog.item_count()) throw std::out_of_range("forward: target item out of range");
        categories = catalog.multi_hot(*target);
    }

    std::vector<repdis::AdversarialLosses> trend_losses, discrete_losses;
    switch (cfg.variant) {
        case Variant::kFull: {
            auto tc = repdis::project_components(ctx, trend_repr, model.trend_branch->projection);
            auto dc = repdis::project_components(ctx, discrete_repr, model.discrete_branch->projection);
            out.user_vector = cross_fuse(ctx, *model.fusion, tc.related, tc.independent, dc.related, dc.independent);
            if (target) {
                trend_losses.push_back(repdis::adversarial_losses(ctx, tc, model.trend_branch->discriminator, categories));
                discrete_losses.push_back(
                    repdis::adversarial_losses(ctx, dc, model.discrete_branch->discriminator, categories));
            }
            out.trend_components = tc;
            out.discrete_components = dc;
            break;
        }
        case Variant::kWithoutSD: {
            // Single representation plays both cross-fusion roles.
            auto tc = repdis::project_components(ctx, trend_repr, model.trend_branch->projection);
            out.user_vector = cross_fuse(ctx, *model.fusion, tc.related, tc.independent, tc.related, tc.independent);
            if (target) {
                trend_losses.push_back(repdis::adversarial_losses(ctx, tc, model.trend_branch->discriminator, categories));
            }
            out.trend_components = tc;
            break;
        }
        case Variant::kWithoutRD: {
            const DiffMatrix parts[] = {trend_repr, discrete_repr};
            out.user_vector = affine(ctx, ops::concat_cols(parts), model.concat_fusion->w, model.concat_fusion->b);
            break;
        }
        case Variant::kWithoutDD:
            out.user_vector = trend_repr;
            break;
    }

    out.logits = score_items(out.user_vector, items);
    if (target) {
        out.loss = total_loss(out.logits, *target, trend_losses, discrete_losses, cfg.lambda1, cfg.lambda2);
    }
    return out;
}

}  // namespace ddsrec::train
