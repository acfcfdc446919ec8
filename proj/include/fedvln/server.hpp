#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fedvln/param_core.hpp"

// The federation server. It sees flat parameter vectors and sample counts and
// nothing else: no environments, no episodes, no observations. That isolation
// is the privacy boundary of the protocol and is enforced by a build-time
// check over this translation unit's includes and tokens.

namespace fedvln {

struct ServerState {
    int round = 0;       // completed rounds
    ParamVector global;  // authoritative values for the shared segments
};

// One round as the coordinator saw it; sr fields are filled by whoever can
// actually evaluate models (never the server itself).
struct RoundRecord {
    int round = 0;
    std::vector<int> participants;
    double mean_loss = 0.0;       // sample-weighted mean of participant losses
    std::uint64_t cum_steps = 0;  // optimizer steps across all rounds so far
    std::optional<double> sr_seen;
    std::optional<double> sr_unseen;
};

// Applies one weighted-average step to the global vector and advances the
// round counter. Validation and weighting semantics are those of aggregate().
void server_apply(ServerState& server, std::vector<WeightedUpdate> updates, double eta);

} // namespace fedvln
