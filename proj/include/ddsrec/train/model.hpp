#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddsrec/data/records.hpp"
#include "ddsrec/encoders/encoders.hpp"
#include "ddsrec/repdis/disentangle.hpp"
#include "ddsrec/seqdis/masking.hpp"

namespace ddsrec::train {

/// Pipeline wiring. kFull: mask -> dual encoders -> dual disentanglement ->
/// cross fusion. kWithoutDD: whole sequence -> transformer -> score.
/// kWithoutSD: whole sequence -> transformer -> disentanglement -> fusion.
/// kWithoutRD: mask -> dual encoders -> concat MLP -> score.
enum class Variant { kFull, kWithoutDD, kWithoutSD, kWithoutRD };

/// Accepts full, wo_dd, wo_sd, wo_rd. Throws std::invalid_argument otherwise.
Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

struct ModelConfig {
    encoders::TransformerConfig transformer;
    seqdis::MaskConfig mask;
    Variant variant = Variant::kFull;
    double lambda1 = 0.5;
    double lambda2 = 0.5;

    void validate() const;
};

/// Inner maps on concat(h_m^C, h_d^⊥C) and concat(h_m^⊥C, h_d^C), outer map
/// on the concatenation of their outputs.
struct FusionIds {
    ParamId inner1_w = 0, inner1_b = 0;
    ParamId inner2_w = 0, inner2_b = 0;
    ParamId outer_w = 0, outer_b = 0;
};

/// Direct concatenation map used when representation disentanglement is off.
struct ConcatFusionIds {
    ParamId w = 0, b = 0;
};

struct ModelParams {
    ModelConfig config;
    std::size_t num_items = 0;
    std::size_t num_categories = 0;
    ParameterStore store;

    encoders::EmbeddingIds embedding;
    encoders::TransformerIds transformer;
    std::optional<ParamId> proxy_transform;  // W_s
    std::optional<encoders::DiscreteMlpIds> discrete;
    std::optional<repdis::BranchIds> trend_branch;
    std::optional<repdis::BranchIds> discrete_branch;
    std::optional<FusionIds> fusion;
    std::optional<ConcatFusionIds> concat_fusion;

    bool uses_masking() const noexcept { return proxy_transform.has_value(); }
    bool uses_adversarial() const noexcept { return trend_branch.has_value(); }
};

ModelParams init_model(const ModelConfig& config, std::size_t num_items, std::size_t num_categories,
                       std::uint64_t seed);

DiffMatrix cross_fuse(ForwardContext& ctx, const FusionIds& fusion, DiffMatrix trend_related,
                      DiffMatrix trend_independent, DiffMatrix discrete_related, DiffMatrix discrete_independent);

/// Inner products of the user vector with every item embedding (1 x |I|).
DiffMatrix score_items(DiffMatrix user_vector, DiffMatrix item_table);

/// Logged values of one training example. Adversarial terms are zero when
/// the corresponding branch does not exist.
struct LossTerms {
    double ce = 0.0;
    double trend_related = 0.0;
    double trend_independent = 0.0;
    double discrete_related = 0.0;
    double discrete_independent = 0.0;
    double reported = 0.0;  // CE + l1 * (related terms) - l2 * (independent terms)
};

struct TotalLoss {
    DiffMatrix objective;  // what backward runs on
    LossTerms terms;
};

/// Combines the recommendation CE with the adversarial terms. The objective
/// adds lambda2 * independent terms; the sign flip for everything upstream of
/// h^⊥C comes from the reversal boundary inside the terms themselves.
TotalLoss total_loss(DiffMatrix logits, std::size_t target, std::span<const repdis::AdversarialLosses> trend,
                     std::span<const repdis::AdversarialLosses> discrete, double lambda1, double lambda2);

struct ForwardOutput {
    DiffMatrix user_vector;
    DiffMatrix logits;
    seqdis::SequenceSplit split;
    std::size_t degenerate_cosines = 0;
    std::optional<repdis::Components> trend_components;
    std::optional<repdis::Components> discrete_components;
    std::optional<TotalLoss> loss;  // present when a target was given
};

/// Runs the configured pipeline on one input sequence. With a target, the
/// target's category multi-hot supervises the discriminators and the total
/// loss is assembled.
ForwardOutput forward(ForwardContext& ctx, const ModelParams& model, std::span<const std::size_t> seq,
                      const data::Catalog& catalog, std::optional<std::size_t> target);

}  // namespace ddsrec::train
