#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedvln/federation.hpp"

namespace fedvln {

// Every tunable of the pipeline, loadable from a "key = value" file with
// '#' comments. Unknown keys and malformed values are ConfigErrors: a typo
// must never silently fall back to a default.
struct RunConfig {
    // Federated navigation training.
    double eta = 1.0;
    double lambda = 0.1;
    int tau = 3;
    double r = 0.2;
    int rounds = 150;

    // Federated pre-exploration.
    int tau1 = 1;
    double r1_unseen = 0.5;
    double r2_seen = 0.18;
    int pre_rounds = 60;
    std::vector<std::string> shared_segments{kLangEncoderSegment};

    // Speaker training.
    int speaker_rounds = 40;
    int speaker_tau = 5;
    double speaker_lambda = 0.5;

    // Dataset shape.
    int seen_envs = 12;
    int unseen_envs = 4;
    int episodes_per_env = 40;
    int val_seen_per_env = 10;
    int val_unseen_per_env = 40;
    int env_width = 8;
    int env_height = 8;
    double obstacle_density = 0.2;
    int min_moves = 2;
    int max_moves = 10;
    int augment_count = 40;

    // Model shape.
    int embed_dim = 8;
    int hidden_dim = 16;

    // Optimization and evaluation.
    int minibatch = kMinibatch;
    double d_success = 1.0;
    double d_th = 1.0;
    int max_steps_factor = 4;

    static RunConfig load(const std::string& path); // ConfigError on any problem
    static RunConfig parse(const std::string& text, const std::string& origin);

    void validate() const; // throws ConfigError

    // Deterministic round-trip form, one sorted "key = value" line per field.
    std::string serialize() const;

    ModelDims model_dims() const;
    EvalOptions eval_options() const; // max_steps filled per environment
    AugmentOptions augment_options() const;

    // Phase-specific federation knobs; seed is the phase seed.
    FederationConfig train_federation(std::uint64_t seed) const;
    FederationConfig pre_explore_federation(std::uint64_t seed) const;
    FederationConfig speaker_federation(std::uint64_t seed) const;
};

} // namespace fedvln
