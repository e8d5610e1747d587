#pragma once

#include <string>
#include <vector>

#include "modemfuse/channel.hpp"
#include "modemfuse/constellation.hpp"
#include "modemfuse/em.hpp"
#include "modemfuse/types.hpp"

namespace modemfuse {

enum class Method { EmHml, Alrt, MomHlrt };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

// Ordered candidate modulation set with implicit uniform prior.
struct CandidateSet {
    std::vector<ConstellationSpec> specs;
};

// 16-QAM, 32-QAM, 64-QAM in catalog order.
CandidateSet default_candidates();

// Throws ConfigError unless the set has at least two distinct formats.
void validate(const CandidateSet& candidates);

struct ClassificationResult {
    int decision_index{};  // argmax of per_hypothesis_llf, lowest index on ties
    RVector per_hypothesis_llf;
    std::vector<EmResult> per_hypothesis_em;  // empty for ALRT / MoM
    Method method{};
};

// Hybrid-ML decision: per hypothesis, moments initialization followed by EM,
// then argmax over the converged log-likelihoods.
ClassificationResult classify_em_hml(const ObservationBlock& block,
                                     const CandidateSet& candidates, const EmOptions& options);

// Clairvoyant bound: likelihoods evaluated at the true channel parameters,
// no estimation.
ClassificationResult classify_alrt(const ObservationBlock& block, const CandidateSet& candidates,
                                   const ChannelRealization& true_channel);

// Moments-only baseline: likelihoods evaluated at the raw initializer output
// (grid refinement disabled), no EM.
ClassificationResult classify_mom(const ObservationBlock& block, const CandidateSet& candidates);

}  // namespace modemfuse
