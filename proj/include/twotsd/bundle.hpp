#pragma once

#include "twotsd/domain.hpp"
#include "twotsd/matching.hpp"

#include <string>
#include <vector>

namespace twotsd {

// A qualified collaborator: trust semantics with the match verdict folded in.
struct Candidate {
    TrustSemantics semantics;
    bool matched = false;
    std::vector<StageResult> stages;
    bool operator==(const Candidate&) const = default;
};

// Teacher -> student transfer. Only trusted, matched candidates; sorted by device.
struct CandidateBundle {
    std::string task_id;
    std::vector<Candidate> candidates;
    Timestamp generated_at = 0;
    bool operator==(const CandidateBundle&) const = default;
};

// Throws Error(invalid_field) if a candidate is unqualified or ordering is broken.
void validate_bundle(const CandidateBundle& bundle);

} // namespace twotsd
