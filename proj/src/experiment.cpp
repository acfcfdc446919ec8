#include "fedvln/experiment.hpp"

#include <algorithm>

#include "fedvln/errors.hpp"

namespace fedvln::experiment {

Mode mode_from_name(std::string_view name) {
    if (name == "federated") return Mode::Federated;
    if (name == "centralized") return Mode::Centralized;
    throw ValidationError("unknown mode '" + std::string(name) + "'");
}

std::string_view mode_name(Mode m) {
    return m == Mode::Federated ? "federated" : "centralized";
}

DataKind data_kind_from_name(std::string_view name) {
    if (name == "original") return DataKind::Original;
    if (name == "augmented") return DataKind::Augmented;
    throw ValidationError("unknown data kind '" + std::string(name) + "'");
}

std::string_view data_kind_name(DataKind k) {
    return k == DataKind::Original ? "original" : "augmented";
}

std::vector<ClientState> make_seen_clients(const Dataset& ds) {
    std::vector<ClientState> clients;
    clients.reserve(ds.seen.size());
    for (std::size_t i = 0; i < ds.seen.size(); ++i) {
        ClientState c;
        c.id = static_cast<int>(i);
        c.env = ds.seen[i];
        for (const Episode& ep : ds.train)
            if (ep.env_id == c.env.id) c.data.push_back(ep);
        if (c.data.empty())
            throw ValidationError("dataset: seen environment " + c.env.id +
                                  " has no training episodes");
        clients.push_back(std::move(c));
    }
    return clients;
}

std::vector<ClientState> make_unseen_clients(const Dataset& ds) {
    std::vector<ClientState> clients;
    clients.reserve(ds.unseen.size());
    for (std::size_t i = 0; i < ds.unseen.size(); ++i) {
        ClientState c;
        c.id = static_cast<int>(ds.seen.size() + i);
        c.env = ds.unseen[i];
        clients.push_back(std::move(c));
    }
    return clients;
}

std::vector<EnvEpisode> dataset_views(const Dataset& ds, std::span<const Episode> episodes) {
    std::vector<EnvEpisode> views;
    views.reserve(episodes.size());
    for (const Episode& ep : episodes) views.push_back({&ds.environment(ep.env_id), &ep});
    return views;
}

std::vector<Episode> make_augmented(const Dataset& ds, const SpeakerParams& speaker,
                                    std::uint64_t run_seed) {
    const AugmentOptions aug = ds.config.augment_options();
    std::vector<Episode> out;
    out.reserve(ds.seen.size() * static_cast<std::size_t>(aug.count));
    for (std::size_t i = 0; i < ds.seen.size(); ++i) {
        ClientState scratch;
        scratch.id = static_cast<int>(i);
        scratch.env = ds.seen[i];
        SeededRng rng(derive_seed(derive_seed(run_seed, kAugmentPhaseSalt), i));
        augment_client(scratch, speaker, aug.count, aug.min_moves, aug.max_moves, rng);
        for (Episode& ep : scratch.augmented) out.push_back(std::move(ep));
    }
    return out;
}

EvalReport evaluate_unseen_models(const Dataset& ds, std::span<const AgentParams> models,
                                  const EvalOptions& opts) {
    if (models.empty()) throw ValidationError("evaluate_unseen_models: no models");
    if (models.size() != 1 && models.size() != ds.unseen.size())
        throw DimensionError("evaluate_unseen_models: expected one model or one per unseen env");
    std::vector<EpisodeScore> scores;
    scores.reserve(ds.unseen_val.size());
    for (std::size_t i = 0; i < ds.unseen.size(); ++i) {
        const AgentParams& model = models.size() == 1 ? models[0] : models[i];
        const Environment& env = ds.unseen[i];
        for (const Episode& ep : ds.unseen_val) {
            if (ep.env_id != env.id) continue;
            const int max_steps = opts.max_steps > 0 ? opts.max_steps : default_max_steps(env);
            const Trajectory traj = rollout(model, env, ep.instruction, ep.start, max_steps);
            scores.push_back(score_trajectory(env, ep, traj, opts));
        }
    }
    return summarize(scores);
}

namespace {

EvalHook make_val_hook(const Dataset& ds, const std::vector<EnvEpisode>& seen_val,
                       const std::vector<EnvEpisode>& unseen_val) {
    const EvalOptions opts = ds.config.eval_options();
    return [&seen_val, &unseen_val, opts](const AgentParams& global, int) {
        EvalSnapshot snap;
        snap.sr_seen = evaluate_agent(global, seen_val, opts).sr;
        snap.sr_unseen = evaluate_agent(global, unseen_val, opts).sr;
        return snap;
    };
}

} // namespace

TrainOutcome train_agent(const Dataset& ds, std::uint64_t run_seed, Mode mode, DataKind kind,
                         const SpeakerParams* speaker, const ResumePoint& resume,
                         const AgentParams* start, const AgentParams* best_so_far) {
    const AgentParams init =
        start != nullptr
            ? *start
            : init_agent(ds.config.model_dims(), derive_seed(run_seed, kAgentInitSalt));
    FederationConfig cfg = ds.config.train_federation(derive_seed(run_seed, kTrainPhaseSalt));
    cfg.validate();

    std::vector<ClientState> clients = make_seen_clients(ds);
    std::vector<Episode> augmented;
    if (kind == DataKind::Augmented) {
        if (speaker == nullptr)
            throw ValidationError("train_agent: augmented training needs a speaker");
        augmented = make_augmented(ds, *speaker, run_seed);
        for (ClientState& c : clients)
            for (const Episode& ep : augmented)
                if (ep.env_id == c.env.id) c.augmented.push_back(ep);
    }
    const DataSelection selection = kind == DataKind::Augmented
                                        ? DataSelection::OriginalPlusAugmented
                                        : DataSelection::Original;

    const std::vector<EnvEpisode> seen_val = dataset_views(ds, ds.seen_val);
    const std::vector<EnvEpisode> unseen_val = dataset_views(ds, ds.unseen_val);
    const EvalHook hook = make_val_hook(ds, seen_val, unseen_val);

    TrainOutcome out;
    if (mode == Mode::Federated) {
        out.run = run_federated_training(clients, cfg, init, selection, hook, resume,
                                         best_so_far);
    } else {
        std::vector<EnvEpisode> pool;
        for (const ClientState& c : clients)
            for (const EnvEpisode& v : selected_views(c, selection)) pool.push_back(v);
        cfg.rounds = matched_centralized_rounds(cfg.rounds, static_cast<int>(clients.size()),
                                                cfg.r);
        out.run = run_centralized_training(pool, cfg, init, hook, resume, best_so_far);
    }
    const EvalOptions opts = ds.config.eval_options();
    out.best_seen_val = evaluate_agent(out.run.best_model, seen_val, opts);
    out.best_unseen_val = evaluate_agent(out.run.best_model, unseen_val, opts);
    return out;
}

SpeakerOutcome train_speaker(const Dataset& ds, std::uint64_t run_seed, Mode mode) {
    const SpeakerParams init =
        init_speaker(SpeakerDims{}, derive_seed(run_seed, kSpeakerInitSalt));
    FederationConfig cfg =
        ds.config.speaker_federation(derive_seed(run_seed, kSpeakerPhaseSalt));
    cfg.validate();

    const std::vector<EnvEpisode> val_seen = dataset_views(ds, ds.seen_val);
    const std::vector<EnvEpisode> val_unseen = dataset_views(ds, ds.unseen_val);

    SpeakerOutcome out;
    if (mode == Mode::Federated) {
        std::vector<SpeakerClientState> clients;
        for (const ClientState& c : make_seen_clients(ds))
            clients.push_back({c.id, c.env, c.data, init});
        out.run = run_federated_speaker_training(clients, cfg, init, val_seen, val_unseen);
    } else {
        const std::vector<EnvEpisode> pool = dataset_views(ds, ds.train);
        cfg.rounds = matched_centralized_rounds(cfg.rounds, static_cast<int>(ds.seen.size()),
                                                cfg.r);
        out.run = run_centralized_speaker_training(pool, cfg, init, val_seen, val_unseen);
    }
    return out;
}

PreExploreOutcome pre_explore(const Dataset& ds, std::uint64_t run_seed,
                              PreExploreStrategy strategy, const AgentParams& start,
                              const SpeakerParams& speaker) {
    FederationConfig cfg =
        ds.config.pre_explore_federation(derive_seed(run_seed, kPreExplorePhaseSalt));
    cfg.validate();
    std::vector<ClientState> seen = make_seen_clients(ds);
    std::vector<ClientState> unseen = make_unseen_clients(ds);
    const EvalOptions opts = ds.config.eval_options();

    const UnseenEvalHook hook = [&ds, opts](std::span<const AgentParams> models, int) {
        return std::optional<double>(evaluate_unseen_models(ds, models, opts).sr);
    };

    PreExploreOutcome out;
    out.run = run_pre_exploration(strategy, seen, unseen, speaker, ds.config.augment_options(),
                                  cfg, start, hook);
    if (strategy == PreExploreStrategy::Centralized)
        out.model_ids = {0};
    else
        for (const ClientState& c : unseen) out.model_ids.push_back(c.id);
    out.final_unseen_val = evaluate_unseen_models(ds, out.run.models, opts);
    return out;
}

SweepOutcome sweep_local_epochs(const Dataset& ds, std::uint64_t run_seed,
                                const std::vector<int>& epoch_values,
                                const std::vector<double>& targets) {
    if (epoch_values.empty()) throw ValidationError("sweep: no epoch values");
    if (targets.empty()) throw ValidationError("sweep: no targets");
    for (double t : targets)
        if (!(t > 0.0 && t <= 1.0))
            throw ValidationError("sweep: targets must lie in (0, 1]");

    SweepOutcome out;
    out.targets = targets;
    for (int epochs : epoch_values) {
        if (epochs < 1) throw ValidationError("sweep: epoch counts must be >= 1");
        // Same pipeline as train_agent, with only the local epoch count moved.
        Dataset variant = ds;
        variant.config.tau = epochs;
        const TrainOutcome res =
            train_agent(variant, run_seed, Mode::Federated, DataKind::Original, nullptr);

        SweepRow row;
        row.local_epochs = epochs;
        row.best_sr_unseen = 0.0;
        for (double target : targets) {
            std::optional<int> hit;
            for (const RoundRecord& rec : res.run.log)
                if (rec.sr_unseen && *rec.sr_unseen >= target) {
                    hit = rec.round;
                    break;
                }
            row.rounds_to_target.push_back(hit);
        }
        for (const RoundRecord& rec : res.run.log)
            if (rec.sr_unseen) row.best_sr_unseen = std::max(row.best_sr_unseen, *rec.sr_unseen);
        row.log = res.run.log;
        out.rows.push_back(std::move(row));
    }
    return out;
}

} // namespace fedvln::experiment
