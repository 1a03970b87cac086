#pragma once

#include "emowatch/models.hpp"

namespace emowatch::detail {

ForestParams fit_forest(const FeatureMatrix& normalized, const ForestConfig& c, std::uint64_t seed,
                        unsigned jobs);

}  // namespace emowatch::detail
