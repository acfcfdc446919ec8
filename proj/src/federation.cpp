#include "fedvln/federation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fedvln/errors.hpp"

namespace fedvln {

void FederationConfig::validate() const {
    auto rate_ok = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!rate_ok(r) || !rate_ok(r1_unseen) || !rate_ok(r2_seen))
        throw ValidationError("federation config: participation rates must lie in [0, 1]");
    if (!(eta > 0.0) || !std::isfinite(eta))
        throw ValidationError("federation config: eta must be positive");
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw ValidationError("federation config: lambda must be positive");
    if (rounds < 1 || tau < 1 || tau1 < 1)
        throw ValidationError("federation config: rounds, tau and tau1 must be >= 1");
    if (batch < 1) throw ValidationError("federation config: batch must be >= 1");
    if (shared_segments.empty())
        throw ValidationError("federation config: at least one shared segment");
}

std::vector<EnvEpisode> selected_views(const ClientState& client, DataSelection sel) {
    std::vector<EnvEpisode> views;
    if (sel != DataSelection::AugmentedOnly)
        for (const Episode& ep : client.data) views.push_back({&client.env, &ep});
    if (sel != DataSelection::Original)
        for (const Episode& ep : client.augmented) views.push_back({&client.env, &ep});
    return views;
}

SeededRng round_client_rng(std::uint64_t phase_seed, int round, int client_id) {
    return SeededRng(derive_seed(derive_seed(phase_seed, static_cast<std::uint64_t>(round)),
                                 static_cast<std::uint64_t>(client_id)));
}

namespace {

std::vector<int> client_ids(const std::vector<ClientState>& clients) {
    std::vector<int> ids;
    ids.reserve(clients.size());
    for (const auto& c : clients) ids.push_back(c.id);
    return ids;
}

ClientState& client_by_id(std::vector<ClientState>& clients, int id) {
    for (auto& c : clients)
        if (c.id == id) return c;
    throw ProtocolError("federation: no client with id " + std::to_string(id));
}

struct TrainedUpdate {
    int id;
    AgentParams local;
    WeightedUpdate update;
    double loss;
    std::uint64_t steps;
};

// Broadcast-overwrite, local training, masked delta for one client.
TrainedUpdate train_selected(ClientState& client, const ParamVector& global,
                             const std::vector<std::string>& shared, DataSelection sel,
                             int epochs, const FederationConfig& cfg, int round) {
    AgentParams start = client.local;
    for (const auto& name : shared) {
        const Segment& seg = start.spec.segment(name);
        std::copy(global.begin() + static_cast<std::ptrdiff_t>(seg.offset),
                  global.begin() + static_cast<std::ptrdiff_t>(seg.offset + seg.length),
                  start.params.begin() + static_cast<std::ptrdiff_t>(seg.offset));
    }
    const std::vector<EnvEpisode> views = selected_views(client, sel);
    if (views.empty())
        throw ProtocolError("federation: client " + std::to_string(client.id) +
                            " was selected with no training data");
    SeededRng rng = round_client_rng(cfg.seed, round, client.id);
    UpdateResult res = client_update(start, views, epochs, cfg.lambda, rng, cfg.batch);

    ParamVector delta(start.params.size());
    for (std::size_t k = 0; k < delta.size(); ++k)
        delta[k] = res.params.params[k] - start.params[k];
    WeightedUpdate up{client.id, mask_to_segments(delta, start.spec, shared),
                      static_cast<std::uint64_t>(views.size())};
    return {client.id, std::move(res.params), std::move(up), res.mean_loss, res.steps};
}

RoundRecord finish_round(ServerState& server, std::vector<ClientState>& clients,
                         std::vector<TrainedUpdate> trained, const FederationConfig& cfg,
                         std::vector<int> participants, std::uint64_t prev_cum_steps) {
    RoundRecord rec;
    rec.round = server.round + 1;
    rec.participants = std::move(participants);
    rec.cum_steps = prev_cum_steps;

    std::vector<WeightedUpdate> updates;
    updates.reserve(trained.size());
    double loss_weighted = 0.0;
    std::uint64_t samples = 0;
    for (auto& t : trained) {
        loss_weighted += t.loss * static_cast<double>(t.update.sample_count);
        samples += t.update.sample_count;
        rec.cum_steps += t.steps;
        updates.push_back(std::move(t.update));
    }
    server_apply(server, std::move(updates), cfg.eta); // throws before any state is touched
    for (auto& t : trained) client_by_id(clients, t.id).local = std::move(t.local);
    rec.mean_loss = samples == 0 ? 0.0 : loss_weighted / static_cast<double>(samples);
    return rec;
}

// All-segment name list of a client partition, for full-model sharing.
std::vector<std::string> all_segments(const std::vector<ClientState>& clients) {
    if (clients.empty()) throw ValidationError("federation: no clients");
    std::vector<std::string> names;
    for (const Segment& s : clients.front().local.spec.segments()) names.push_back(s.name);
    return names;
}

} // namespace

RoundRecord run_fed_round(ServerState& server, std::vector<ClientState>& clients,
                          const FederationConfig& cfg, DataSelection selection,
                          std::uint64_t prev_cum_steps) {
    if (clients.empty()) throw ValidationError("run_fed_round: no clients");
    const int t = server.round + 1;
    SeededRng round_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(t)));
    const std::vector<int> chosen = sample_participants(client_ids(clients), cfg.r, round_rng);
    if (chosen.empty()) throw ProtocolError("run_fed_round: r = 0 selects nobody");

    const std::vector<std::string> shared = all_segments(clients);
    std::vector<TrainedUpdate> trained;
    trained.reserve(chosen.size());
    for (int id : chosen)
        trained.push_back(train_selected(client_by_id(clients, id), server.global, shared,
                                         selection, cfg.tau, cfg, t));
    return finish_round(server, clients, std::move(trained), cfg, chosen, prev_cum_steps);
}

namespace {

FedRunResult run_rounds(std::vector<ClientState>& clients, const FederationConfig& cfg,
                        const AgentParams& init, DataSelection selection, const EvalHook& hook,
                        bool centralized, std::span<const EnvEpisode> pool,
                        const ResumePoint& resume, const AgentParams* best_so_far) {
    if (resume.completed_rounds < 0)
        throw ValidationError("training: negative resume round");
    ServerState server{resume.completed_rounds, init.params};
    FedRunResult out{init, best_so_far ? *best_so_far : init, resume.best_round, {}};
    AgentParams model = init; // the single worker of the centralized path
    if (!centralized)
        for (ClientState& c : clients) c.local = init;
    double best_sr = resume.best_sr;
    std::uint64_t cum = resume.cum_steps;

    for (int t = resume.completed_rounds + 1; t <= cfg.rounds; ++t) {
        RoundRecord rec;
        if (centralized) {
            SeededRng rng = round_client_rng(cfg.seed, t, 0);
            const UpdateResult res =
                client_update(model, pool, cfg.tau, cfg.lambda, rng, cfg.batch);
            // Committed through the same delta arithmetic as a server round so a
            // one-client federation with eta = 1 reproduces this path bit for bit.
            for (std::size_t k = 0; k < model.params.size(); ++k)
                model.params[k] += res.params.params[k] - model.params[k];
            cum += res.steps;
            rec.round = t;
            rec.participants = {0};
            rec.mean_loss = res.mean_loss;
            rec.cum_steps = cum;
        } else {
            rec = run_fed_round(server, clients, cfg, selection, cum);
            cum = rec.cum_steps;
        }
        if (hook) {
            AgentParams current{init.dims, init.spec,
                                centralized ? model.params : server.global};
            const EvalSnapshot snap = hook(current, t);
            rec.sr_seen = snap.sr_seen;
            rec.sr_unseen = snap.sr_unseen;
            if (snap.sr_unseen && *snap.sr_unseen > best_sr) {
                best_sr = *snap.sr_unseen;
                out.best_model = std::move(current);
                out.best_round = t;
            }
        }
        out.log.push_back(std::move(rec));
    }
    out.final_model.params = centralized ? model.params : server.global;
    if (best_sr < 0.0) { // never scored: the final model is the best we know
        out.best_model = out.final_model;
        out.best_round = cfg.rounds;
    }
    return out;
}

} // namespace

FedRunResult run_federated_training(std::vector<ClientState>& clients,
                                    const FederationConfig& cfg, const AgentParams& init,
                                    DataSelection selection, const EvalHook& hook,
                                    const ResumePoint& resume, const AgentParams* best_so_far) {
    return run_rounds(clients, cfg, init, selection, hook, false, {}, resume, best_so_far);
}

FedRunResult run_centralized_training(std::span<const EnvEpisode> pool,
                                      const FederationConfig& cfg, const AgentParams& init,
                                      const EvalHook& hook, const ResumePoint& resume,
                                      const AgentParams* best_so_far) {
    std::vector<ClientState> none;
    return run_rounds(none, cfg, init, DataSelection::Original, hook, true, pool, resume,
                      best_so_far);
}

int matched_centralized_rounds(int fed_rounds, int n_clients, double rate) {
    if (fed_rounds < 1 || n_clients < 1)
        throw ValidationError("matched_centralized_rounds: counts must be >= 1");
    const auto k = std::max<long long>(
        1, std::llround(rate * static_cast<double>(n_clients)));
    return static_cast<int>(std::max<long long>(
        1, std::llround(static_cast<double>(fed_rounds) * static_cast<double>(k) /
                        static_cast<double>(n_clients))));
}

SpeakerRunResult run_federated_speaker_training(std::vector<SpeakerClientState>& clients,
                                                const FederationConfig& cfg,
                                                const SpeakerParams& init,
                                                std::span<const EnvEpisode> val_seen,
                                                std::span<const EnvEpisode> val_unseen) {
    if (clients.empty()) throw ValidationError("speaker training: no clients");
    ServerState server{0, init.params};
    SpeakerRunResult out{init, init, 0, {}};
    double best_bleu = -1.0;
    std::uint64_t cum = 0;

    auto corpus_of = [](const SpeakerParams& model, std::span<const EnvEpisode> val) {
        std::vector<Instruction> cand, ref;
        cand.reserve(val.size());
        ref.reserve(val.size());
        for (const EnvEpisode& v : val) {
            cand.push_back(speaker_generate(model, *v.env, v.episode->path));
            ref.push_back(v.episode->instruction);
        }
        return corpus_bleu(cand, ref);
    };

    for (int t = 1; t <= cfg.rounds; ++t) {
        SeededRng round_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(t)));
        std::vector<int> ids;
        for (const auto& c : clients) ids.push_back(c.id);
        const std::vector<int> chosen = sample_participants(ids, cfg.r, round_rng);
        if (chosen.empty()) throw ProtocolError("speaker training: r = 0 selects nobody");

        std::vector<WeightedUpdate> updates;
        std::map<int, SpeakerParams> staged;
        double loss_weighted = 0.0;
        std::uint64_t samples = 0;
        for (int id : chosen) {
            auto it = std::find_if(clients.begin(), clients.end(),
                                   [id](const SpeakerClientState& c) { return c.id == id; });
            SpeakerParams start = it->local;
            start.params = server.global; // whole speaker is shared
            std::vector<EnvEpisode> views;
            for (const Episode& ep : it->data) views.push_back({&it->env, &ep});
            SeededRng rng = round_client_rng(cfg.seed, t, id);
            SpeakerUpdateResult res =
                speaker_client_update(start, views, cfg.tau, cfg.lambda, rng, cfg.batch);
            ParamVector delta(start.params.size());
            for (std::size_t k = 0; k < delta.size(); ++k)
                delta[k] = res.params.params[k] - start.params[k];
            updates.push_back({id, std::move(delta), views.size()});
            loss_weighted += res.mean_loss * static_cast<double>(views.size());
            samples += views.size();
            cum += res.steps;
            staged.emplace(id, std::move(res.params));
        }
        server_apply(server, std::move(updates), cfg.eta);
        for (auto& [id, params] : staged) {
            auto it = std::find_if(clients.begin(), clients.end(),
                                   [id = id](const SpeakerClientState& c) { return c.id == id; });
            it->local = std::move(params);
        }

        SpeakerRoundRecord rec;
        rec.round = t;
        rec.participants = chosen;
        rec.mean_loss = samples == 0 ? 0.0 : loss_weighted / static_cast<double>(samples);
        rec.cum_steps = cum;
        SpeakerParams global{init.dims, server.global};
        if (!val_seen.empty()) {
            rec.bleu_seen = corpus_of(global, val_seen);
            if (*rec.bleu_seen > best_bleu) {
                best_bleu = *rec.bleu_seen;
                out.best_model = global;
                out.best_round = t;
            }
        }
        if (!val_unseen.empty()) rec.bleu_unseen = corpus_of(global, val_unseen);
        out.log.push_back(std::move(rec));
    }
    out.final_model.params = server.global;
    if (best_bleu < 0.0) {
        out.best_model = out.final_model;
        out.best_round = cfg.rounds;
    }
    return out;
}

SpeakerRunResult run_centralized_speaker_training(std::span<const EnvEpisode> pool,
                                                  const FederationConfig& cfg,
                                                  const SpeakerParams& init,
                                                  std::span<const EnvEpisode> val_seen,
                                                  std::span<const EnvEpisode> val_unseen) {
    SpeakerRunResult out{init, init, 0, {}};
    SpeakerParams model = init;
    double best_bleu = -1.0;
    std::uint64_t cum = 0;

    auto corpus_of = [](const SpeakerParams& m, std::span<const EnvEpisode> val) {
        std::vector<Instruction> cand, ref;
        for (const EnvEpisode& v : val) {
            cand.push_back(speaker_generate(m, *v.env, v.episode->path));
            ref.push_back(v.episode->instruction);
        }
        return corpus_bleu(cand, ref);
    };

    for (int t = 1; t <= cfg.rounds; ++t) {
        SeededRng rng = round_client_rng(cfg.seed, t, 0);
        const SpeakerUpdateResult res =
            speaker_client_update(model, pool, cfg.tau, cfg.lambda, rng, cfg.batch);
        // Delta-applied like a server round; see run_rounds.
        for (std::size_t k = 0; k < model.params.size(); ++k)
            model.params[k] += res.params.params[k] - model.params[k];
        cum += res.steps;

        SpeakerRoundRecord rec;
        rec.round = t;
        rec.participants = {0};
        rec.mean_loss = res.mean_loss;
        rec.cum_steps = cum;
        if (!val_seen.empty()) {
            rec.bleu_seen = corpus_of(model, val_seen);
            if (*rec.bleu_seen > best_bleu) {
                best_bleu = *rec.bleu_seen;
                out.best_model = model;
                out.best_round = t;
            }
        }
        if (!val_unseen.empty()) rec.bleu_unseen = corpus_of(model, val_unseen);
        out.log.push_back(std::move(rec));
    }
    out.final_model = std::move(model);
    if (best_bleu < 0.0) {
        out.best_model = out.final_model;
        out.best_round = cfg.rounds;
    }
    return out;
}

void augment_client(ClientState& client, const SpeakerParams& speaker, int count,
                    int min_moves, int max_moves, SeededRng& rng) {
    if (count < 1) throw ValidationError("augment_client: count must be >= 1");
    client.augmented.clear();
    client.augmented.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Episode ep = sample_episode(client.env, rng, min_moves, max_moves);
        ep.instruction = speaker_generate(speaker, client.env, ep.path);
        client.augmented.push_back(std::move(ep));
    }
}

PreExploreStrategy strategy_from_name(std::string_view name) {
    if (name == "centralized") return PreExploreStrategy::Centralized;
    if (name == "env_based") return PreExploreStrategy::EnvBased;
    if (name == "fed_full") return PreExploreStrategy::FedFull;
    if (name == "fed_lan") return PreExploreStrategy::FedLan;
    if (name == "fed_lan_seen") return PreExploreStrategy::FedLanSeen;
    throw ValidationError("unknown pre-exploration strategy '" + std::string(name) + "'");
}

std::string_view strategy_name(PreExploreStrategy s) {
    switch (s) {
        case PreExploreStrategy::Centralized: return "centralized";
        case PreExploreStrategy::EnvBased: return "env_based";
        case PreExploreStrategy::FedFull: return "fed_full";
        case PreExploreStrategy::FedLan: return "fed_lan";
        case PreExploreStrategy::FedLanSeen: return "fed_lan_seen";
    }
    throw ValidationError("strategy_name: bad strategy value");
}

RoundRecord run_pre_exploration_round(ServerState& server, std::vector<ClientState>& seen,
                                      std::vector<ClientState>& unseen,
                                      const FederationConfig& cfg,
                                      std::uint64_t prev_cum_steps) {
    if (seen.empty() && unseen.empty())
        throw ValidationError("run_pre_exploration_round: no clients");
    const int t = server.round + 1;
    SeededRng round_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(t)));
    // Absent groups consume no draws, so a round over unseen clients alone
    // replays the same stream as run_fed_round with r = r1_unseen.
    const std::vector<int> sel_seen =
        seen.empty() ? std::vector<int>{}
                     : sample_participants(client_ids(seen), cfg.r2_seen, round_rng);
    const std::vector<int> sel_unseen =
        unseen.empty() ? std::vector<int>{}
                       : sample_participants(client_ids(unseen), cfg.r1_unseen, round_rng);
    if (sel_seen.empty() && sel_unseen.empty())
        throw ProtocolError("run_pre_exploration_round: nobody selected");

    std::vector<TrainedUpdate> trained;
    for (int id : sel_seen)
        trained.push_back(train_selected(client_by_id(seen, id), server.global,
                                         cfg.shared_segments, DataSelection::Original,
                                         cfg.tau1, cfg, t));
    for (int id : sel_unseen)
        trained.push_back(train_selected(client_by_id(unseen, id), server.global,
                                         cfg.shared_segments, DataSelection::AugmentedOnly,
                                         cfg.tau1, cfg, t));

    // Commit locals into whichever group each participant came from.
    std::vector<int> participants(sel_seen);
    participants.insert(participants.end(), sel_unseen.begin(), sel_unseen.end());
    std::sort(participants.begin(), participants.end());

    RoundRecord rec;
    rec.round = t;
    rec.participants = participants;
    rec.cum_steps = prev_cum_steps;
    std::vector<WeightedUpdate> updates;
    double loss_weighted = 0.0;
    std::uint64_t samples = 0;
    for (auto& tr : trained) {
        loss_weighted += tr.loss * static_cast<double>(tr.update.sample_count);
        samples += tr.update.sample_count;
        rec.cum_steps += tr.steps;
        updates.push_back(std::move(tr.update));
    }
    server_apply(server, std::move(updates), cfg.eta);
    for (auto& tr : trained) {
        auto in_seen = std::find_if(seen.begin(), seen.end(),
                                    [&](const ClientState& c) { return c.id == tr.id; });
        if (in_seen != seen.end())
            in_seen->local = std::move(tr.local);
        else
            client_by_id(unseen, tr.id).local = std::move(tr.local);
    }
    rec.mean_loss = samples == 0 ? 0.0 : loss_weighted / static_cast<double>(samples);
    return rec;
}

namespace {

// Non-federated strategies train every client (or the pool) each round, so
// they get r1 * rounds of them to match the optimizer steps a client expects
// to take across a federated run.
int local_pre_rounds(const FederationConfig& cfg) {
    return static_cast<int>(std::max<long long>(
        1, std::llround(cfg.r1_unseen * static_cast<double>(cfg.rounds))));
}

} // namespace

PreExploreResult run_pre_exploration(PreExploreStrategy strategy,
                                     std::vector<ClientState>& seen,
                                     std::vector<ClientState>& unseen,
                                     const SpeakerParams& speaker, const AugmentOptions& aug,
                                     const FederationConfig& cfg, const AgentParams& init,
                                     const UnseenEvalHook& hook) {
    if (unseen.empty()) throw ValidationError("run_pre_exploration: no unseen clients");

    // Unseen environments have no labels; their data is always pseudo-labeled
    // routes sampled by the client itself.
    constexpr std::uint64_t kAugmentSalt = 0x617567; // disjoint from round indices
    for (ClientState& c : unseen) {
        SeededRng rng(derive_seed(derive_seed(cfg.seed, kAugmentSalt),
                                  static_cast<std::uint64_t>(c.id)));
        augment_client(c, speaker, aug.count, aug.min_moves, aug.max_moves, rng);
        c.local = init;
    }
    for (ClientState& c : seen) c.local = init;

    PreExploreResult out;
    auto snapshot_models = [&]() {
        std::vector<AgentParams> models;
        models.reserve(unseen.size());
        for (const ClientState& c : unseen) models.push_back(c.local);
        return models;
    };
    auto log_round = [&](RoundRecord rec, std::span<const AgentParams> models, int t) {
        if (hook) rec.sr_unseen = hook(models, t);
        out.log.push_back(std::move(rec));
    };

    switch (strategy) {
        case PreExploreStrategy::Centralized: {
            std::vector<EnvEpisode> pool;
            for (const ClientState& c : unseen)
                for (const Episode& ep : c.augmented) pool.push_back({&c.env, &ep});
            AgentParams model = init;
            const int rounds = local_pre_rounds(cfg);
            std::uint64_t cum = 0;
            for (int t = 1; t <= rounds; ++t) {
                SeededRng rng = round_client_rng(cfg.seed, t, 0);
                UpdateResult res =
                    client_update(model, pool, cfg.tau1, cfg.lambda, rng, cfg.batch);
                model = std::move(res.params);
                cum += res.steps;
                RoundRecord rec;
                rec.round = t;
                rec.participants = {0};
                rec.mean_loss = res.mean_loss;
                rec.cum_steps = cum;
                log_round(std::move(rec), {&model, 1}, t);
            }
            out.models = {std::move(model)};
            return out;
        }
        case PreExploreStrategy::EnvBased: {
            const int rounds = local_pre_rounds(cfg);
            std::uint64_t cum = 0;
            for (int t = 1; t <= rounds; ++t) {
                RoundRecord rec;
                rec.round = t;
                double loss_weighted = 0.0;
                std::uint64_t samples = 0;
                for (ClientState& c : unseen) {
                    const std::vector<EnvEpisode> views =
                        selected_views(c, DataSelection::AugmentedOnly);
                    SeededRng rng = round_client_rng(cfg.seed, t, c.id);
                    UpdateResult res =
                        client_update(c.local, views, cfg.tau1, cfg.lambda, rng, cfg.batch);
                    c.local = std::move(res.params);
                    cum += res.steps;
                    loss_weighted += res.mean_loss * static_cast<double>(views.size());
                    samples += views.size();
                    rec.participants.push_back(c.id);
                }
                std::sort(rec.participants.begin(), rec.participants.end());
                rec.mean_loss = samples == 0 ? 0.0 : loss_weighted / static_cast<double>(samples);
                rec.cum_steps = cum;
                log_round(std::move(rec), snapshot_models(), t);
            }
            break;
        }
        case PreExploreStrategy::FedFull:
        case PreExploreStrategy::FedLan:
        case PreExploreStrategy::FedLanSeen: {
            FederationConfig round_cfg = cfg;
            if (strategy == PreExploreStrategy::FedFull) {
                round_cfg.shared_segments.clear();
                for (const Segment& s : init.spec.segments())
                    round_cfg.shared_segments.push_back(s.name);
            }
            std::vector<ClientState> no_seen;
            std::vector<ClientState>& seen_group =
                strategy == PreExploreStrategy::FedLanSeen ? seen : no_seen;
            ServerState server{0, init.params};
            std::uint64_t cum = 0;
            for (int t = 1; t <= cfg.rounds; ++t) {
                RoundRecord rec =
                    run_pre_exploration_round(server, seen_group, unseen, round_cfg, cum);
                cum = rec.cum_steps;
                log_round(std::move(rec), snapshot_models(), t);
            }
            break;
        }
    }
    out.models = snapshot_models();
    return out;
}

} // namespace fedvln
