#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "fedvln/dataset_io.hpp"
#include "fedvln/federation.hpp"
#include "fedvln/metrics.hpp"

namespace fedvln::experiment {

// Salts fanning one run seed into independent phase seeds. Dataset generation
// has its own salts inside generate_dataset; these cover everything else.
inline constexpr std::uint64_t kAgentInitSalt = 11;
inline constexpr std::uint64_t kSpeakerInitSalt = 12;
inline constexpr std::uint64_t kTrainPhaseSalt = 13;
inline constexpr std::uint64_t kSpeakerPhaseSalt = 14;
inline constexpr std::uint64_t kPreExplorePhaseSalt = 15;
inline constexpr std::uint64_t kAugmentPhaseSalt = 16;

enum class Mode { Federated, Centralized };
Mode mode_from_name(std::string_view name);
std::string_view mode_name(Mode m);

enum class DataKind { Original, Augmented };
DataKind data_kind_from_name(std::string_view name);
std::string_view data_kind_name(DataKind k);

// One client per seen environment holding its labeled episodes; ids 0..n-1 in
// dataset order. Unseen clients continue the id range and start with no data.
std::vector<ClientState> make_seen_clients(const Dataset& ds);
std::vector<ClientState> make_unseen_clients(const Dataset& ds);

// Views into a dataset's episode list with environments resolved by id. The
// views borrow from both arguments.
std::vector<EnvEpisode> dataset_views(const Dataset& ds, std::span<const Episode> episodes);

// Speaker-relabeled fresh routes for every seen environment, augment_count
// per client, deterministic in (run_seed, client order).
std::vector<Episode> make_augmented(const Dataset& ds, const SpeakerParams& speaker,
                                    std::uint64_t run_seed);

// Pools per-model scores: model i covers the episodes of unseen environment i,
// except a single model, which covers them all.
EvalReport evaluate_unseen_models(const Dataset& ds, std::span<const AgentParams> models,
                                  const EvalOptions& opts);

struct TrainOutcome {
    FedRunResult run;
    EvalReport best_seen_val;
    EvalReport best_unseen_val;
};

// The main seen-environment training phase. `speaker` is required for
// DataKind::Augmented and ignored otherwise. Centralized mode pools all
// episodes on one worker with the round count scaled by the expected
// federated participation (matched_centralized_rounds). A resumed run passes
// the parameters saved at the resume point as `start`; a fresh run leaves it
// null and starts from the seeded initializer.
TrainOutcome train_agent(const Dataset& ds, std::uint64_t run_seed, Mode mode, DataKind kind,
                         const SpeakerParams* speaker, const ResumePoint& resume = {},
                         const AgentParams* start = nullptr,
                         const AgentParams* best_so_far = nullptr);

struct SpeakerOutcome {
    SpeakerRunResult run;
};

SpeakerOutcome train_speaker(const Dataset& ds, std::uint64_t run_seed, Mode mode);

struct PreExploreOutcome {
    PreExploreResult run;
    // Ids labeling run.models: unseen client ids, or {0} for the pooled model.
    std::vector<int> model_ids;
    EvalReport final_unseen_val;
};

// Adapts a trained agent to the unseen environments with the given strategy.
PreExploreOutcome pre_explore(const Dataset& ds, std::uint64_t run_seed,
                              PreExploreStrategy strategy, const AgentParams& start,
                              const SpeakerParams& speaker);

struct SweepRow {
    int local_epochs = 0;
    std::vector<std::optional<int>> rounds_to_target; // aligned with targets
    double best_sr_unseen = 0.0;
    std::vector<RoundRecord> log;
};

struct SweepOutcome {
    std::vector<double> targets;
    std::vector<SweepRow> rows; // one per requested epoch count, input order
};

// Reruns federated training per local-epoch count from one shared init and
// reports the first round whose unseen-validation SR reaches each target.
SweepOutcome sweep_local_epochs(const Dataset& ds, std::uint64_t run_seed,
                                const std::vector<int>& epoch_values,
                                const std::vector<double>& targets);

} // namespace fedvln::experiment
