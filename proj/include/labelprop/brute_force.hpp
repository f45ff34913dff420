#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "labelprop/grid.hpp"
#include "labelprop/propagator.hpp"

namespace labelprop::oracle {

/// Largest grid the dense reference accepts.
inline constexpr std::size_t kMaxCells = 64;

/// Dense reference propagator: full P x N affinity matrices, explicit L x P x N masks and
/// a full sort per column. Refuses grids with more than kMaxCells cells.
std::vector<LabelGrid> brute_force_propagate(std::span<const FeatureGrid> features, const LabelGrid& init,
                                             const PropagationConfig& cfg);

/// A single dense step: `context` features/labels (one grid each, oldest first, anchor
/// first when present) predict `target`. Features are used as given.
LabelGrid brute_force_step(std::span<const FeatureGrid> context, std::span<const LabelGrid> labels,
                           const FeatureGrid& target, const PropagationConfig& cfg);

}  // namespace labelprop::oracle
