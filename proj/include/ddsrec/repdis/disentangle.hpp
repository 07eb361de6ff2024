#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "ddsrec/numerics/parameters.hpp"

namespace ddsrec::repdis {

/// Two affine maps d -> d: one for the category-related component, one for
/// the category-independent component.
struct ProjectionIds {
    ParamId related_w = 0, related_b = 0;
    ParamId independent_w = 0, independent_b = 0;
};

/// MLP d -> d -> |C| producing category logits.
struct DiscriminatorIds {
    ParamId w1 = 0, b1 = 0, w2 = 0, b2 = 0;
};

/// Projection pair plus the discriminator shared by both of its components.
struct BranchIds {
    ProjectionIds projection;
    DiscriminatorIds discriminator;
};

BranchIds add_branch_params(ParameterStore& store, const std::string& prefix, std::size_t d, std::size_t categories,
                            std::mt19937_64& rng);

struct Components {
    DiffMatrix related;      // h^C
    DiffMatrix independent;  // h^⊥C
};

Components project_components(ForwardContext& ctx, DiffMatrix h, const ProjectionIds& pair);

DiffMatrix discriminate(ForwardContext& ctx, DiffMatrix h, const DiscriminatorIds& disc);

/// Raw-valued adversarial terms for one branch.
///
/// `related` is the multi-label CE of D(h^C) against the target's categories.
/// `independent` is the same loss on h^⊥C, evaluated through a reversal
/// boundary with factor `reversal` (default -1) between h^⊥C and D. The
/// caller weights it by lambda2, so the discriminator minimizes
/// lambda2 * L^⊥C while everything upstream of h^⊥C receives -lambda2 times
/// the raw gradient. Pass reversal = 1 to get the unreversed clone.
struct AdversarialLosses {
    DiffMatrix related;
    DiffMatrix independent;
};

AdversarialLosses adversarial_losses(ForwardContext& ctx, const Components& comps, const DiscriminatorIds& disc,
                                     const std::vector<bool>& categories, double reversal = -1.0);

struct DualOutput {
    Components trend;
    Components discrete;
    AdversarialLosses trend_losses;
    AdversarialLosses discrete_losses;
};

/// Independent projections and discriminators for the trend and discrete representations.
DualOutput dual_disentangle(ForwardContext& ctx, DiffMatrix trend, DiffMatrix discrete, const BranchIds& trend_branch,
                            const BranchIds& discrete_branch, const std::vector<bool>& categories);

}  // namespace ddsrec::repdis
