#pragma once

#include <variant>

#include "drccmdp/moments.hpp"
#include "drccmdp/phidiv.hpp"
#include "drccmdp/wasserstein.hpp"

namespace drccmdp {

/// Deterministic reward vector: plain nominal LP.
struct NominalSpec {
    vec reward;
};

/// Gaussian chance-constrained baseline with exactly known distribution.
struct GaussianSpec {
    vec mu;
    Matrix sigma;
    prec_t epsilon = 0.1;
};

/// Tagged union over every supported uncertainty description.
using AmbiguitySpec =
    std::variant<NominalSpec, GaussianSpec, MomentAmbiguity, PhiAmbiguity, WassersteinAmbiguity>;

std::string ambiguity_name(const AmbiguitySpec& spec);

}  // namespace drccmdp
