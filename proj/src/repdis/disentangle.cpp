#include "ddsrec/repdis/disentangle.hpp"

#include "ddsrec/numerics/ops.hpp"

namespace ddsrec::repdis {

BranchIds add_branch_params(ParameterStore& store, const std::string& prefix, std::size_t d, std::size_t categories,
                            std::mt19937_64& rng) {
    BranchIds ids;
    ids.projection.related_w = store.add_glorot(prefix + ".proj.related.w", d, d, rng);
    ids.projection.related_b = store.add(prefix + ".proj.related.b", Matrix(1, d));
    ids.projection.independent_w = store.add_glorot(prefix + ".proj.independent.w", d, d, rng);
    ids.projection.independent_b = store.add(prefix + ".proj.independent.b", Matrix(1, d));
    ids.discriminator.w1 = store.add_glorot(prefix + ".disc.w1", d, d, rng);
    ids.discriminator.b1 = store.add(prefix + ".disc.b1", Matrix(1, d));
    ids.discriminator.w2 = store.add_glorot(prefix + ".disc.w2", d, categories, rng);
    ids.discriminator.b2 = store.add(prefix + ".disc.b2", Matrix(1, categories));
    return ids;
}

Components project_components(ForwardContext& ctx, DiffMatrix h, const ProjectionIds& pair) {
    return {affine(ctx, h, pair.related_w, pair.related_b), affine(ctx, h, pair.independent_w, pair.independent_b)};
}

DiffMatrix discriminate(ForwardContext& ctx, DiffMatrix h, const DiscriminatorIds& disc) {
    auto hidden = ops::relu(affine(ctx, h, disc.w1, disc.b1));
    return affine(ctx, hidden, disc.w2, disc.b2);
}

AdversarialLosses adversarial_losses(ForwardContext& ctx, const Components& comps, const DiscriminatorIds& disc,
                                     const std::vector<bool>& categories, double reversal) {
    auto related = ops::multilabel_cross_entropy(discriminate(ctx, comps.related, disc), categories);
    auto boundary = reversal == 1.0 ? comps.independent : ops::grad_reverse(comps.independent, reversal);
    auto independent = ops::multilabel_cross_entropy(discriminate(ctx, boundary, disc), categories);
    return {related, independent};
}

DualOutput dual_disentangle(ForwardContext& ctx, DiffMatrix trend, DiffMatrix discrete, const BranchIds& trend_branch,
                            const BranchIds& discrete_branch, const std::vector<bool>& categories) {
    DualOutput out;
    out.trend = project_components(ctx, trend, trend_branch.projection);
    out.discrete = project_components(ctx, discrete, discrete_branch.projection);
    out.trend_losses = adversarial_losses(ctx, out.trend, trend_branch.discriminator, categories);
    out.discrete_losses = adversarial_losses(ctx, out.discrete, discrete_branch.discriminator, categories);
    return out;
}

}  // namespace ddsrec::repdis
