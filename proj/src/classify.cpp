#include "modemfuse/classify.hpp"

#include <limits>

#include "modemfuse/errors.hpp"

namespace modemfuse {

namespace {

int argmax_first(const RVector& values) {
    int best = 0;
    for (Eigen::Index i = 1; i < values.size(); ++i)
        if (values(i) > values(best)) best = static_cast<int>(i);
    return best;
}

}  // namespace

std::string to_string(Method method) {
    switch (method) {
        case Method::EmHml:
            return "em_hml";
        case Method::Alrt:
            return "alrt";
        case Method::MomHlrt:
            return "mom_hlrt";
    }
    return "unknown";
}

Method method_from_string(const std::string& name) {
    if (name == "em_hml" || name == "em") return Method::EmHml;
    if (name == "alrt") return Method::Alrt;
    if (name == "mom_hlrt" || name == "mom") return Method::MomHlrt;
    throw ConfigError("unknown classifier '" + name + "'");
}

CandidateSet default_candidates() {
    CandidateSet candidates;
    candidates.specs.push_back(build_constellation(Format::Qam16));
    candidates.specs.push_back(build_constellation(Format::Qam32));
    candidates.specs.push_back(build_constellation(Format::Qam64));
    return candidates;
}

void validate(const CandidateSet& candidates) {
    if (candidates.specs.size() < 2)
        throw ConfigError("candidate set needs at least two hypotheses");
    for (std::size_t a = 0; a < candidates.specs.size(); ++a)
        for (std::size_t b = a + 1; b < candidates.specs.size(); ++b)
            if (candidates.specs[a].name == candidates.specs[b].name)
                throw ConfigError("duplicate candidate format '" + candidates.specs[a].name + "'");
}

ClassificationResult classify_em_hml(const ObservationBlock& block,
                                     const CandidateSet& candidates, const EmOptions& options) {
    const auto hypothesis_count = static_cast<Eigen::Index>(candidates.specs.size());
    ClassificationResult result;
    result.method = Method::EmHml;
    result.per_hypothesis_llf.resize(hypothesis_count);
    result.per_hypothesis_em.reserve(candidates.specs.size());
    for (Eigen::Index i = 0; i < hypothesis_count; ++i) {
        try {
            EmResult em = run_em(block, candidates.specs[static_cast<std::size_t>(i)], options);
            result.per_hypothesis_llf(i) = em.final_llf;
            result.per_hypothesis_em.push_back(std::move(em));
        } catch (const NumericError& error) {
            throw NumericError("hypothesis '" +
                               candidates.specs[static_cast<std::size_t>(i)].name +
                               "': " + error.what());
        }
    }
    result.decision_index = argmax_first(result.per_hypothesis_llf);
    return result;
}

ClassificationResult classify_alrt(const ObservationBlock& block, const CandidateSet& candidates,
                                   const ChannelRealization& true_channel) {
    if (true_channel.sensor_count() != block.sensor_count())
        throw ConfigError("true channel dimensions do not match the block");
    ClassificationResult result;
    result.method = Method::Alrt;
    result.per_hypothesis_llf.resize(static_cast<Eigen::Index>(candidates.specs.size()));
    for (std::size_t i = 0; i < candidates.specs.size(); ++i)
        result.per_hypothesis_llf(static_cast<Eigen::Index>(i)) =
            log_likelihood(block, true_channel, candidates.specs[i]);
    result.decision_index = argmax_first(result.per_hypothesis_llf);
    return result;
}

ClassificationResult classify_mom(const ObservationBlock& block, const CandidateSet& candidates) {
    EmOptions options;
    options.grid_refine = false;  // raw moment estimates only
    ClassificationResult result;
    result.method = Method::MomHlrt;
    result.per_hypothesis_llf.resize(static_cast<Eigen::Index>(candidates.specs.size()));
    for (std::size_t i = 0; i < candidates.specs.size(); ++i) {
        const InitResult init = initialize(block, candidates.specs[i], options);
        result.per_hypothesis_llf(static_cast<Eigen::Index>(i)) =
            log_likelihood(block, init.estimate, candidates.specs[i]);
    }
    result.decision_index = argmax_first(result.per_hypothesis_llf);
    return result;
}

}  // namespace modemfuse
