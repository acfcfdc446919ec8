#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedvln/gridworld.hpp"
#include "fedvln/metrics.hpp"
#include "fedvln/param_core.hpp"
#include "fedvln/server.hpp"
#include "fedvln/vln_model.hpp"

namespace fedvln {

// Knobs of one federated run. `seed` is the phase seed: round t draws its
// participants from derive_seed(seed, t) and client c trains with
// derive_seed(derive_seed(seed, t), c), so runs can be replayed or resumed
// from any round without replaying earlier ones.
struct FederationConfig {
    std::uint64_t seed = 0;
    int rounds = 1;       // T
    double eta = 1.0;     // server step size
    double lambda = 0.05; // client SGD learning rate
    int tau = 3;          // local epochs per selected client
    int tau1 = 1;         // local epochs during pre-exploration
    double r = 0.2;       // participation rate
    double r1_unseen = 0.5; // unseen-client rate during pre-exploration
    double r2_seen = 0.18;  // seen-client rate during pre-exploration
    std::vector<std::string> shared_segments{kLangEncoderSegment};
    int batch = kMinibatch;

    void validate() const; // rates in [0,1], eta > 0, tau/tau1/rounds >= 1
};

struct ClientState {
    int id = 0;
    Environment env;
    std::vector<Episode> data;      // labeled episodes for this environment
    std::vector<Episode> augmented; // speaker-labeled pseudo episodes
    AgentParams local;
};

enum class DataSelection { Original, OriginalPlusAugmented, AugmentedOnly };

std::vector<EnvEpisode> selected_views(const ClientState& client, DataSelection sel);

// One synchronous round: sample participants at cfg.r, overwrite each
// selected client's params with the server vector, train tau local epochs,
// upload raw deltas weighted by local dataset size, aggregate with eta.
// Non-selected clients are untouched. prev_cum_steps seeds the cumulative
// step counter carried in the returned record.
RoundRecord run_fed_round(ServerState& server, std::vector<ClientState>& clients,
                          const FederationConfig& cfg, DataSelection selection,
                          std::uint64_t prev_cum_steps = 0);

// Per-round validation snapshot of the current global model.
struct EvalSnapshot {
    std::optional<double> sr_seen;
    std::optional<double> sr_unseen;
};
using EvalHook = std::function<EvalSnapshot(const AgentParams& global, int round)>;

struct FedRunResult {
    AgentParams final_model;
    AgentParams best_model; // highest unseen-validation SR; final if never scored
    int best_round = 0;     // 0 when best_model is the final model by default
    std::vector<RoundRecord> log; // only the rounds run by this call
};

// Where to pick a run back up. Because every round derives its streams from
// the phase seed alone, continuing from (completed_rounds, params-at-that-
// round) replays exactly the rounds a single longer run would have produced.
struct ResumePoint {
    int completed_rounds = 0;
    std::uint64_t cum_steps = 0;
    double best_sr = -1.0; // best unseen-val SR seen so far, -1 = never scored
    int best_round = 0;
};

// The training stream of client `client_id` in round `round`, identical
// across every runner so protocol variants can be compared bit for bit.
SeededRng round_client_rng(std::uint64_t phase_seed, int round, int client_id);

FedRunResult run_federated_training(std::vector<ClientState>& clients,
                                    const FederationConfig& cfg, const AgentParams& init,
                                    DataSelection selection, const EvalHook& hook,
                                    const ResumePoint& resume = {},
                                    const AgentParams* best_so_far = nullptr);

// Matched single-worker baseline: one model, cfg.rounds rounds of cfg.tau
// epochs over the pooled episodes, using the stream a lone client with id 0
// would get. Callers match compute to a federated run by scaling cfg.rounds
// before the call.
FedRunResult run_centralized_training(std::span<const EnvEpisode> pool,
                                      const FederationConfig& cfg, const AgentParams& init,
                                      const EvalHook& hook, const ResumePoint& resume = {},
                                      const AgentParams* best_so_far = nullptr);

// Rounds of federated training a centralized baseline gets so both sides see
// the same optimizer-step budget: fed_rounds * participants / clients.
int matched_centralized_rounds(int fed_rounds, int n_clients, double rate);

// Speaker federation mirrors the agent protocol; the best model is picked by
// corpus BLEU on val_seen (final model when val_seen is empty).
struct SpeakerClientState {
    int id = 0;
    Environment env;
    std::vector<Episode> data;
    SpeakerParams local;
};

struct SpeakerRoundRecord {
    int round = 0;
    std::vector<int> participants;
    double mean_loss = 0.0;
    std::uint64_t cum_steps = 0;
    std::optional<double> bleu_seen;
    std::optional<double> bleu_unseen;
};

struct SpeakerRunResult {
    SpeakerParams final_model;
    SpeakerParams best_model;
    int best_round = 0;
    std::vector<SpeakerRoundRecord> log;
};

SpeakerRunResult run_federated_speaker_training(std::vector<SpeakerClientState>& clients,
                                                const FederationConfig& cfg,
                                                const SpeakerParams& init,
                                                std::span<const EnvEpisode> val_seen,
                                                std::span<const EnvEpisode> val_unseen);

// Pooled-data speaker baseline, mirroring run_centralized_training.
SpeakerRunResult run_centralized_speaker_training(std::span<const EnvEpisode> pool,
                                                  const FederationConfig& cfg,
                                                  const SpeakerParams& init,
                                                  std::span<const EnvEpisode> val_seen,
                                                  std::span<const EnvEpisode> val_unseen);

// Replaces client.augmented with `count` freshly sampled routes from the
// client's own environment, labeled by the speaker instead of the template.
void augment_client(ClientState& client, const SpeakerParams& speaker, int count,
                    int min_moves, int max_moves, SeededRng& rng);

struct AugmentOptions {
    int count = 40;
    int min_moves = 2;
    int max_moves = 10;
};

// How pre-exploration adapts to unseen environments:
//   centralized : unseen pseudo data pooled on one worker (privacy ceiling)
//   env_based   : each unseen client trains alone, nothing shared
//   fed_full    : federation over unseen clients, the whole model shared
//   fed_lan     : federation over unseen clients, language encoder shared
//   fed_lan_seen: fed_lan plus seen clients mixed in at r2_seen
enum class PreExploreStrategy { Centralized, EnvBased, FedFull, FedLan, FedLanSeen };

PreExploreStrategy strategy_from_name(std::string_view name);
std::string_view strategy_name(PreExploreStrategy s);

// One pre-exploration round. Seen clients are sampled at r2_seen and train on
// their labeled data; unseen clients at r1_unseen on their pseudo data; both
// train tau1 epochs from locals whose cfg.shared_segments coordinates were
// overwritten by the server vector, and upload deltas masked to those
// segments. With every segment shared and no seen clients this reduces
// bitwise to run_fed_round, which is covered by a test.
RoundRecord run_pre_exploration_round(ServerState& server, std::vector<ClientState>& seen,
                                      std::vector<ClientState>& unseen,
                                      const FederationConfig& cfg,
                                      std::uint64_t prev_cum_steps = 0);

// Models the strategy leaves behind for validation: one per unseen client in
// input order, except Centralized which yields a single pooled model.
using UnseenEvalHook =
    std::function<std::optional<double>(std::span<const AgentParams> models, int round)>;

struct PreExploreResult {
    std::vector<AgentParams> models;
    std::vector<RoundRecord> log;
};

PreExploreResult run_pre_exploration(PreExploreStrategy strategy,
                                     std::vector<ClientState>& seen,
                                     std::vector<ClientState>& unseen,
                                     const SpeakerParams& speaker, const AugmentOptions& aug,
                                     const FederationConfig& cfg, const AgentParams& init,
                                     const UnseenEvalHook& hook);

} // namespace fedvln
