#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedvln/gridworld.hpp"
#include "fedvln/param_core.hpp"
#include "fedvln/rng.hpp"

namespace fedvln {

// Layer sizes of the navigation agent. Observation and action widths are
// fixed by the environment; vocabulary by the instruction template.
struct ModelDims {
    int vocab = vocab::kSize;
    int embed = 8;
    int hidden = 16;
    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Flat layout, three segments:
//   lang_encoder : token embeddings (vocab x embed), W_L (hidden x embed), b_L
//   traj_encoder : W_T (hidden x 11), b_T            (11 = obs + prev action)
//   decision_head: W_M (5 x 2*hidden), b_M
PartitionSpec agent_partition(const ModelDims& dims);

struct AgentParams {
    ModelDims dims;
    PartitionSpec spec;
    ParamVector params;
};

inline constexpr int kNoAction = -1;

// All weights uniform in [-0.1, 0.1], drawn in layout order.
AgentParams init_agent(const ModelDims& dims, std::uint64_t seed);

// Mean-pooled bag-of-words embedding pushed through a tanh affine layer.
std::vector<double> encode_instruction(const AgentParams& agent, const Instruction& instr);

// Action logits for one step given the cached instruction encoding, the
// current observation and the previous action (kNoAction at the first step).
std::vector<double> policy_step(const AgentParams& agent, const std::vector<double>& lang,
                                const Observation& obs, int prev_action);

struct LossGrad {
    double loss = 0.0;
    ParamVector grad;
};

// Teacher-forced cross-entropy over the episode's expert actions (the path's
// moves followed by STOP), averaged over steps. The gradient is analytic and
// covers every coordinate; embeddings of absent tokens get exact zeros.
LossGrad imitation_loss_grad(const AgentParams& agent, const Environment& env,
                             const Episode& episode);

// Non-owning view used to pool episodes from several environments.
struct EnvEpisode {
    const Environment* env = nullptr;
    const Episode* episode = nullptr;
};

struct UpdateResult {
    AgentParams params;
    double mean_loss = 0.0;     // episode loss averaged over all passes
    std::uint64_t steps = 0;    // optimizer steps taken
};

inline constexpr int kMinibatch = 8;

// Plain minibatch SGD: per epoch one shuffled pass, gradients averaged within
// each batch, params -= lr * grad. The rng drives only the shuffles.
UpdateResult client_update(const AgentParams& start, std::span<const EnvEpisode> data,
                           int epochs, double lr, SeededRng& rng, int batch = kMinibatch);

struct Trajectory {
    std::vector<Cell> cells;  // starts at the rollout start cell
    std::vector<int> actions; // one per step, move codes then possibly STOP
    bool terminated = false;  // true iff STOP was emitted within the step limit
};

// Greedy rollout: argmax action each step (lowest id wins ties), illegal moves
// keep the agent in place, stops on STOP or after max_steps actions.
Trajectory rollout(const AgentParams& agent, const Environment& env, const Instruction& instr,
                   Cell start, int max_steps);

// Speaker: a single affine vocab classifier applied to per-slot feature
// encodings of an instruction leg (direction slot and step-count slot).
struct SpeakerDims {
    int vocab = vocab::kSize;
    friend bool operator==(const SpeakerDims&, const SpeakerDims&) = default;
};

inline constexpr int kSpeakerFeatures = 8; // onehot4 dir, count/10, x/w, y/h, bias 1

struct SpeakerParams {
    SpeakerDims dims;
    ParamVector params; // [W: vocab x features][b: vocab]
};

SpeakerParams init_speaker(const SpeakerDims& dims, std::uint64_t seed);

// Back-translates a route: per leg argmax token for the direction slot and the
// count slot (full vocabulary, lowest id wins ties), framed as
// "go <dir> <count> steps ... stop". Untrained speakers emit malformed slots;
// consumers treat instructions as bags of words, so that is permitted.
Instruction speaker_generate(const SpeakerParams& speaker, const Environment& env,
                             const Path& path);

// Cross-entropy of the speaker on the episode's true leg tokens, averaged
// over slots, with analytic gradient.
LossGrad speaker_loss_grad(const SpeakerParams& speaker, const Environment& env,
                           const Episode& episode);

struct SpeakerUpdateResult {
    SpeakerParams params;
    double mean_loss = 0.0;
    std::uint64_t steps = 0;
};

SpeakerUpdateResult speaker_client_update(const SpeakerParams& start,
                                          std::span<const EnvEpisode> data, int epochs,
                                          double lr, SeededRng& rng, int batch = kMinibatch);

} // namespace fedvln
