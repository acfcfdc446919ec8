#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fedvln/errors.hpp"
#include "fedvln/federation.hpp"
#include "fedvln/metrics.hpp"
#include "fedvln/rng.hpp"
#include "fedvln/server.hpp"

using namespace fedvln;

namespace {

constexpr ModelDims kSmallDims{vocab::kSize, 4, 8};

bool same_bits(const ParamVector& a, const ParamVector& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

ClientState make_client(int id, std::uint64_t env_seed, int n_data, int n_aug,
                        const AgentParams& init) {
    ClientState c;
    c.id = id;
    c.env = generate_environment(env_seed, 6, 6, 0.1);
    c.env.id = "env-" + std::to_string(id);
    SeededRng rng(derive_seed(env_seed, 1));
    for (int i = 0; i < n_data; ++i) c.data.push_back(sample_episode(c.env, rng, 2, 6));
    for (int i = 0; i < n_aug; ++i) c.augmented.push_back(sample_episode(c.env, rng, 2, 6));
    c.local = init;
    return c;
}

std::vector<EnvEpisode> pool_of(const std::vector<ClientState>& clients, DataSelection sel) {
    std::vector<EnvEpisode> pool;
    for (const ClientState& c : clients) {
        const auto views = selected_views(c, sel);
        pool.insert(pool.end(), views.begin(), views.end());
    }
    return pool;
}

std::vector<std::string> all_segment_names(const AgentParams& agent) {
    std::vector<std::string> names;
    for (const Segment& s : agent.spec.segments()) names.push_back(s.name);
    return names;
}

bool segment_equal(const ParamVector& a, const ParamVector& b, const Segment& seg) {
    return std::memcmp(a.data() + seg.offset, b.data() + seg.offset,
                       seg.length * sizeof(double)) == 0;
}

} // namespace

TEST_CASE("federation config validation") {
    FederationConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    auto broken = [&](auto&& mutate) {
        FederationConfig bad = cfg;
        mutate(bad);
        CHECK_THROWS_AS(bad.validate(), ValidationError);
    };
    broken([](FederationConfig& c) { c.r = -0.1; });
    broken([](FederationConfig& c) { c.r = 1.1; });
    broken([](FederationConfig& c) { c.r1_unseen = 2.0; });
    broken([](FederationConfig& c) { c.r2_seen = -1.0; });
    broken([](FederationConfig& c) { c.eta = 0.0; });
    broken([](FederationConfig& c) { c.lambda = 0.0; });
    broken([](FederationConfig& c) { c.rounds = 0; });
    broken([](FederationConfig& c) { c.tau = 0; });
    broken([](FederationConfig& c) { c.tau1 = 0; });
    broken([](FederationConfig& c) { c.batch = 0; });
    broken([](FederationConfig& c) { c.shared_segments.clear(); });
}

TEST_CASE("selected_views exposes the chosen slice of a client") {
    const AgentParams init = init_agent(kSmallDims, 1);
    const ClientState c = make_client(3, 10, 2, 3, init);
    CHECK(selected_views(c, DataSelection::Original).size() == 2);
    CHECK(selected_views(c, DataSelection::AugmentedOnly).size() == 3);
    CHECK(selected_views(c, DataSelection::OriginalPlusAugmented).size() == 5);
    for (const EnvEpisode& v : selected_views(c, DataSelection::OriginalPlusAugmented)) {
        CHECK(v.env == &c.env);
        CHECK(v.episode->env_id == c.env.id);
    }
}

TEST_CASE("round_client_rng streams are deterministic and distinct") {
    CHECK(round_client_rng(7, 1, 0).next_u64() == round_client_rng(7, 1, 0).next_u64());
    std::set<std::uint64_t> firsts;
    for (int round = 1; round <= 4; ++round)
        for (int client = 0; client < 4; ++client)
            firsts.insert(round_client_rng(7, round, client).next_u64());
    CHECK(firsts.size() == 16);
    CHECK(round_client_rng(8, 1, 0).next_u64() != round_client_rng(7, 1, 0).next_u64());
}

TEST_CASE("run_fed_round matches a hand-traced client_update plus aggregate") {
    const AgentParams init = init_agent(kSmallDims, 2);
    std::vector<ClientState> clients{make_client(0, 20, 3, 0, init),
                                     make_client(1, 21, 5, 0, init)};
    // Stale locals must be irrelevant: the broadcast overwrites everything.
    for (ClientState& c : clients)
        for (double& v : c.local.params) v += 0.5;

    FederationConfig cfg;
    cfg.seed = 77;
    cfg.r = 1.0;
    cfg.tau = 2;
    cfg.lambda = 0.05;
    cfg.eta = 0.7;
    cfg.batch = 2;

    ServerState server{0, init.params};
    const RoundRecord rec = run_fed_round(server, clients, cfg, DataSelection::Original);

    // Oracle: broadcast-start, local SGD, delta aggregation, all by hand.
    std::vector<WeightedUpdate> ups;
    double loss_weighted = 0.0;
    std::uint64_t samples = 0, steps = 0;
    for (const ClientState& c : clients) {
        AgentParams start = init; // global equals init before the round
        const auto views = selected_views(c, DataSelection::Original);
        SeededRng rng = round_client_rng(cfg.seed, 1, c.id);
        const UpdateResult res = client_update(start, views, cfg.tau, cfg.lambda, rng, cfg.batch);
        ParamVector delta(res.params.params.size());
        for (std::size_t k = 0; k < delta.size(); ++k)
            delta[k] = res.params.params[k] - init.params[k];
        ups.push_back({c.id, delta, views.size()});
        loss_weighted += res.mean_loss * static_cast<double>(views.size());
        samples += views.size();
        steps += res.steps;
        CHECK(same_bits(c.local.params, res.params.params)); // locals took the trained model
    }
    CHECK(same_bits(server.global, aggregate(init.params, ups, cfg.eta)));
    CHECK(server.round == 1);
    CHECK(rec.round == 1);
    CHECK(rec.participants == std::vector<int>{0, 1});
    CHECK(rec.mean_loss == loss_weighted / static_cast<double>(samples));
    CHECK(rec.cum_steps == steps);
    CHECK_FALSE(rec.sr_seen.has_value());
}

TEST_CASE("a zero server step leaves the global model untouched") {
    const AgentParams init = init_agent(kSmallDims, 3);
    std::vector<ClientState> clients{make_client(0, 30, 3, 0, init),
                                     make_client(1, 31, 3, 0, init)};
    FederationConfig cfg;
    cfg.seed = 5;
    cfg.r = 1.0;
    cfg.eta = 0.0; // outside validate(); the round must still mechanically work
    ServerState server{0, init.params};
    run_fed_round(server, clients, cfg, DataSelection::Original);
    CHECK(same_bits(server.global, init.params));
    CHECK(server.round == 1);
    for (const ClientState& c : clients) CHECK_FALSE(same_bits(c.local.params, init.params));
}

TEST_CASE("non-participants keep their local models bit for bit") {
    const AgentParams init = init_agent(kSmallDims, 4);
    std::vector<ClientState> clients;
    for (int id = 0; id < 3; ++id) clients.push_back(make_client(id, 40 + id, 3, 0, init));

    FederationConfig cfg;
    cfg.seed = 11;
    cfg.r = 0.34; // selects exactly one of three
    ServerState server{0, init.params};
    const RoundRecord rec = run_fed_round(server, clients, cfg, DataSelection::Original);
    REQUIRE(rec.participants.size() == 1);
    const int chosen = rec.participants[0];
    for (const ClientState& c : clients) {
        if (c.id == chosen)
            CHECK_FALSE(same_bits(c.local.params, init.params));
        else
            CHECK(same_bits(c.local.params, init.params));
    }
}

TEST_CASE("run_fed_round rejects impossible rounds") {
    const AgentParams init = init_agent(kSmallDims, 5);
    std::vector<ClientState> none;
    FederationConfig cfg;
    ServerState server{0, init.params};
    CHECK_THROWS_AS(run_fed_round(server, none, cfg, DataSelection::Original), ValidationError);

    std::vector<ClientState> clients{make_client(0, 50, 2, 0, init)};
    cfg.r = 0.0;
    CHECK_THROWS_AS(run_fed_round(server, clients, cfg, DataSelection::Original), ProtocolError);

    cfg.r = 1.0;
    std::vector<ClientState> starved{make_client(0, 51, 0, 0, init)};
    CHECK_THROWS_AS(run_fed_round(server, starved, cfg, DataSelection::Original), ProtocolError);
    CHECK(server.round == 0); // nothing committed by the failed rounds
}

TEST_CASE("run_federated_training logs every round and tracks the best model") {
    const AgentParams init = init_agent(kSmallDims, 6);
    std::vector<ClientState> clients{make_client(0, 60, 3, 0, init),
                                     make_client(1, 61, 4, 0, init),
                                     make_client(2, 62, 3, 0, init)};
    FederationConfig cfg;
    cfg.seed = 13;
    cfg.rounds = 4;
    cfg.r = 0.67;
    cfg.lambda = 0.05;

    SUBCASE("without a hook the final model is the best model") {
        const FedRunResult out =
            run_federated_training(clients, cfg, init, DataSelection::Original, nullptr);
        REQUIRE(out.log.size() == 4);
        std::uint64_t prev = 0;
        for (std::size_t i = 0; i < out.log.size(); ++i) {
            CHECK(out.log[i].round == static_cast<int>(i) + 1);
            CHECK(out.log[i].cum_steps > prev);
            prev = out.log[i].cum_steps;
            CHECK_FALSE(out.log[i].sr_unseen.has_value());
            CHECK(std::is_sorted(out.log[i].participants.begin(),
                                 out.log[i].participants.end()));
            CHECK(out.log[i].participants.size() == 2); // round(0.67 * 3)
        }
        CHECK(same_bits(out.best_model.params, out.final_model.params));
        CHECK(out.best_round == 4);
        CHECK_FALSE(same_bits(out.final_model.params, init.params));
    }

    SUBCASE("the hook snapshots globals and elects the best round") {
        std::vector<ParamVector> snapshots;
        const std::vector<double> srs{0.3, 0.9, 0.5, 0.9};
        EvalHook hook = [&](const AgentParams& global, int round) {
            snapshots.push_back(global.params);
            EvalSnapshot snap;
            snap.sr_unseen = srs[static_cast<std::size_t>(round - 1)];
            if (round == 1) snap.sr_seen = 0.25;
            return snap;
        };
        const FedRunResult out =
            run_federated_training(clients, cfg, init, DataSelection::Original, hook);
        REQUIRE(out.log.size() == 4);
        CHECK(out.log[0].sr_seen == 0.25);
        CHECK_FALSE(out.log[1].sr_seen.has_value());
        for (int i = 0; i < 4; ++i)
            CHECK(out.log[static_cast<std::size_t>(i)].sr_unseen ==
                  srs[static_cast<std::size_t>(i)]);
        CHECK(out.best_round == 2); // strictly-greater keeps the earliest peak
        CHECK(same_bits(out.best_model.params, snapshots[1]));
        CHECK(same_bits(out.final_model.params, snapshots[3]));
    }

    SUBCASE("training is reproducible") {
        std::vector<ClientState> again{make_client(0, 60, 3, 0, init),
                                       make_client(1, 61, 4, 0, init),
                                       make_client(2, 62, 3, 0, init)};
        const FedRunResult a =
            run_federated_training(clients, cfg, init, DataSelection::Original, nullptr);
        const FedRunResult b =
            run_federated_training(again, cfg, init, DataSelection::Original, nullptr);
        CHECK(same_bits(a.final_model.params, b.final_model.params));
    }
}

TEST_CASE("a resumed run replays the tail of an uninterrupted run") {
    const AgentParams init = init_agent(kSmallDims, 7);

    SUBCASE("federated") {
        std::vector<ClientState> clients{make_client(0, 70, 3, 0, init),
                                         make_client(1, 71, 3, 0, init)};
        FederationConfig cfg;
        cfg.seed = 23;
        cfg.rounds = 6;
        cfg.r = 0.5;
        const FedRunResult full =
            run_federated_training(clients, cfg, init, DataSelection::Original, nullptr);

        FederationConfig head_cfg = cfg;
        head_cfg.rounds = 3;
        std::vector<ClientState> head_clients{make_client(0, 70, 3, 0, init),
                                              make_client(1, 71, 3, 0, init)};
        const FedRunResult head = run_federated_training(head_clients, head_cfg, init,
                                                         DataSelection::Original, nullptr);

        const ResumePoint resume{3, head.log.back().cum_steps, -1.0, 0};
        const FedRunResult tail = run_federated_training(
            head_clients, cfg, head.final_model, DataSelection::Original, nullptr, resume);
        REQUIRE(tail.log.size() == 3);
        CHECK(same_bits(tail.final_model.params, full.final_model.params));
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(tail.log[i].round == full.log[i + 3].round);
            CHECK(tail.log[i].participants == full.log[i + 3].participants);
            CHECK(tail.log[i].mean_loss == full.log[i + 3].mean_loss);
            CHECK(tail.log[i].cum_steps == full.log[i + 3].cum_steps);
        }
    }

    SUBCASE("centralized") {
        std::vector<ClientState> clients{make_client(0, 72, 4, 0, init)};
        const auto pool = pool_of(clients, DataSelection::Original);
        FederationConfig cfg;
        cfg.seed = 29;
        cfg.rounds = 6;
        const FedRunResult full = run_centralized_training(pool, cfg, init, nullptr);

        FederationConfig head_cfg = cfg;
        head_cfg.rounds = 3;
        const FedRunResult head = run_centralized_training(pool, head_cfg, init, nullptr);
        const ResumePoint resume{3, head.log.back().cum_steps, -1.0, 0};
        const FedRunResult tail =
            run_centralized_training(pool, cfg, head.final_model, nullptr, resume);
        CHECK(same_bits(tail.final_model.params, full.final_model.params));
        REQUIRE(tail.log.size() == 3);
        CHECK(tail.log.back().cum_steps == full.log.back().cum_steps);
    }
}

TEST_CASE("one-client federation reduces to the centralized baseline") {
    const AgentParams init = init_agent(kSmallDims, 8);
    std::vector<ClientState> clients{make_client(0, 80, 5, 0, init)};
    const auto pool = pool_of(clients, DataSelection::Original);

    FederationConfig cfg;
    cfg.seed = 31;
    cfg.rounds = 5;
    cfg.r = 1.0;
    cfg.eta = 1.0;
    cfg.tau = 1;

    const FedRunResult fed =
        run_federated_training(clients, cfg, init, DataSelection::Original, nullptr);
    const FedRunResult central = run_centralized_training(pool, cfg, init, nullptr);
    CHECK(same_bits(fed.final_model.params, central.final_model.params));
    REQUIRE(fed.log.size() == central.log.size());
    for (std::size_t i = 0; i < fed.log.size(); ++i) {
        CHECK(fed.log[i].mean_loss == central.log[i].mean_loss);
        CHECK(fed.log[i].cum_steps == central.log[i].cum_steps);
    }
}

TEST_CASE("matched_centralized_rounds balances optimizer budgets") {
    CHECK(matched_centralized_rounds(150, 12, 0.2) == 25);
    CHECK(matched_centralized_rounds(1, 1, 1.0) == 1);
    CHECK(matched_centralized_rounds(10, 4, 0.5) == 5);
    CHECK(matched_centralized_rounds(7, 3, 0.1) == 2);  // floor of one participant
    CHECK(matched_centralized_rounds(1, 8, 0.2) == 1);  // never below one round
    CHECK_THROWS_AS(matched_centralized_rounds(0, 3, 0.5), ValidationError);
    CHECK_THROWS_AS(matched_centralized_rounds(3, 0, 0.5), ValidationError);
}

TEST_CASE("pre-exploration rounds reduce to plain federation when everything is shared") {
    const AgentParams init = init_agent(kSmallDims, 9);
    auto fresh = [&] {
        std::vector<ClientState> clients;
        for (int id = 0; id < 3; ++id) clients.push_back(make_client(id, 90 + id, 0, 4, init));
        return clients;
    };
    std::vector<ClientState> fed_clients = fresh();
    std::vector<ClientState> pre_clients = fresh();
    std::vector<ClientState> no_seen;

    FederationConfig fed_cfg;
    fed_cfg.seed = 37;
    fed_cfg.r = 0.5;
    fed_cfg.tau = 2;
    fed_cfg.lambda = 0.05;
    fed_cfg.eta = 0.9;

    FederationConfig pre_cfg = fed_cfg;
    pre_cfg.r1_unseen = fed_cfg.r;
    pre_cfg.tau1 = fed_cfg.tau;
    pre_cfg.shared_segments = all_segment_names(init);

    ServerState fed_server{0, init.params};
    ServerState pre_server{0, init.params};
    std::uint64_t fed_cum = 0, pre_cum = 0;
    for (int t = 1; t <= 3; ++t) {
        const RoundRecord a =
            run_fed_round(fed_server, fed_clients, fed_cfg, DataSelection::AugmentedOnly, fed_cum);
        const RoundRecord b =
            run_pre_exploration_round(pre_server, no_seen, pre_clients, pre_cfg, pre_cum);
        fed_cum = a.cum_steps;
        pre_cum = b.cum_steps;
        CHECK(a.participants == b.participants);
        CHECK(a.mean_loss == b.mean_loss);
        CHECK(a.cum_steps == b.cum_steps);
        CHECK(same_bits(fed_server.global, pre_server.global));
    }
    for (std::size_t i = 0; i < fed_clients.size(); ++i)
        CHECK(same_bits(fed_clients[i].local.params, pre_clients[i].local.params));
}

TEST_CASE("language-only sharing pins the other global segments") {
    const AgentParams init = init_agent(kSmallDims, 10);
    std::vector<ClientState> unseen;
    for (int id = 0; id < 2; ++id) unseen.push_back(make_client(id, 95 + id, 0, 4, init));
    std::vector<ClientState> no_seen;

    FederationConfig cfg;
    cfg.seed = 41;
    cfg.r1_unseen = 1.0;
    cfg.shared_segments = {kLangEncoderSegment};

    ServerState server{0, init.params};
    const RoundRecord rec = run_pre_exploration_round(server, no_seen, unseen, cfg);
    REQUIRE(rec.participants.size() == 2);

    const Segment& lang = init.spec.segment(kLangEncoderSegment);
    const Segment& traj = init.spec.segment(kTrajEncoderSegment);
    const Segment& head = init.spec.segment(kDecisionHeadSegment);
    CHECK(segment_equal(server.global, init.params, traj));
    CHECK(segment_equal(server.global, init.params, head));
    CHECK_FALSE(segment_equal(server.global, init.params, lang));

    // Clients train their full models even though only language is shared.
    for (const ClientState& c : unseen) {
        CHECK_FALSE(segment_equal(c.local.params, init.params, traj));
        CHECK_FALSE(segment_equal(c.local.params, init.params, head));
    }
}

TEST_CASE("pre-exploration round mixes seen and unseen pools") {
    const AgentParams init = init_agent(kSmallDims, 11);
    std::vector<ClientState> seen{make_client(0, 100, 4, 0, init),
                                  make_client(1, 101, 4, 0, init)};
    std::vector<ClientState> unseen{make_client(10, 102, 0, 4, init),
                                    make_client(11, 103, 0, 4, init)};

    FederationConfig cfg;
    cfg.seed = 43;
    cfg.r2_seen = 0.5;
    cfg.r1_unseen = 1.0;
    ServerState server{0, init.params};
    const RoundRecord rec = run_pre_exploration_round(server, seen, unseen, cfg);

    // One of two seen clients and both unseen clients, sorted together.
    REQUIRE(rec.participants.size() == 3);
    CHECK(std::is_sorted(rec.participants.begin(), rec.participants.end()));
    CHECK(rec.participants[0] < 10);
    CHECK(rec.participants[1] == 10);
    CHECK(rec.participants[2] == 11);

    std::vector<ClientState> empty_unseen;
    std::vector<ClientState> no_clients;
    CHECK_THROWS_AS(run_pre_exploration_round(server, no_clients, empty_unseen, cfg),
                    ValidationError);
}

TEST_CASE("run_pre_exploration drives every strategy deterministically") {
    const AgentParams init = init_agent(kSmallDims, 12);
    const SpeakerParams speaker = init_speaker(SpeakerDims{}, 12);
    const AugmentOptions aug{6, 2, 6};

    auto fresh_seen = [&] {
        return std::vector<ClientState>{make_client(0, 110, 4, 0, init),
                                        make_client(1, 111, 4, 0, init)};
    };
    auto fresh_unseen = [&] {
        std::vector<ClientState> u{make_client(10, 112, 0, 0, init),
                                   make_client(11, 113, 0, 0, init)};
        SeededRng stale(1);
        u[0].augmented.push_back(sample_episode(u[0].env, stale, 2, 4)); // replaced on entry
        return u;
    };

    FederationConfig cfg;
    cfg.seed = 99;
    cfg.rounds = 4;
    cfg.tau1 = 1;
    cfg.lambda = 0.05;
    cfg.r1_unseen = 1.0;
    cfg.r2_seen = 0.5;
    cfg.shared_segments = {kLangEncoderSegment};

    SUBCASE("centralized pools pseudo data into one model") {
        auto seen = fresh_seen();
        auto unseen = fresh_unseen();
        std::vector<std::size_t> hook_sizes;
        const PreExploreResult out = run_pre_exploration(
            PreExploreStrategy::Centralized, seen, unseen, speaker, aug, cfg, init,
            [&](std::span<const AgentParams> models, int round) {
                hook_sizes.push_back(models.size());
                return std::optional<double>(0.1 * round);
            });
        CHECK(out.models.size() == 1);
        REQUIRE(out.log.size() == 4); // round(r1_unseen * rounds)
        CHECK(hook_sizes == std::vector<std::size_t>(4, 1));
        for (std::size_t i = 0; i < out.log.size(); ++i) {
            CHECK(out.log[i].participants == std::vector<int>{0});
            CHECK(out.log[i].sr_unseen == 0.1 * static_cast<double>(i + 1));
        }
    }

    SUBCASE("env_based trains every unseen client in isolation") {
        auto seen = fresh_seen();
        auto unseen = fresh_unseen();
        const PreExploreResult out = run_pre_exploration(PreExploreStrategy::EnvBased, seen,
                                                         unseen, speaker, aug, cfg, init, nullptr);
        REQUIRE(out.models.size() == 2);
        CHECK(out.log.size() == 4);
        for (const RoundRecord& rec : out.log)
            CHECK(rec.participants == std::vector<int>{10, 11});
        CHECK_FALSE(same_bits(out.models[0].params, out.models[1].params));
        // Pseudo data was regenerated: stale content replaced, speaker labels applied.
        for (const ClientState& c : unseen) {
            REQUIRE(c.augmented.size() == 6);
            for (const Episode& ep : c.augmented) {
                CHECK(ep.instruction == speaker_generate(speaker, c.env, ep.path));
                const int moves = static_cast<int>(ep.path.moves());
                CHECK(moves >= 2);
                CHECK(moves <= 6);
            }
        }
    }

    SUBCASE("federated strategies run cfg.rounds rounds over unseen clients") {
        for (PreExploreStrategy strategy :
             {PreExploreStrategy::FedFull, PreExploreStrategy::FedLan}) {
            auto seen = fresh_seen();
            auto unseen = fresh_unseen();
            const PreExploreResult out =
                run_pre_exploration(strategy, seen, unseen, speaker, aug, cfg, init, nullptr);
            CHECK(out.models.size() == 2);
            CHECK(out.log.size() == 4);
            for (const RoundRecord& rec : out.log)
                for (int id : rec.participants) CHECK(id >= 10);
        }
    }

    SUBCASE("fed_lan_seen pulls seen clients into the rounds") {
        auto seen = fresh_seen();
        auto unseen = fresh_unseen();
        const PreExploreResult out = run_pre_exploration(PreExploreStrategy::FedLanSeen, seen,
                                                         unseen, speaker, aug, cfg, init, nullptr);
        CHECK(out.models.size() == 2);
        bool saw_seen = false;
        for (const RoundRecord& rec : out.log)
            for (int id : rec.participants) saw_seen = saw_seen || id < 10;
        CHECK(saw_seen);
    }

    SUBCASE("strategies are reproducible") {
        auto seen_a = fresh_seen();
        auto unseen_a = fresh_unseen();
        auto seen_b = fresh_seen();
        auto unseen_b = fresh_unseen();
        const PreExploreResult a = run_pre_exploration(PreExploreStrategy::FedLan, seen_a,
                                                       unseen_a, speaker, aug, cfg, init, nullptr);
        const PreExploreResult b = run_pre_exploration(PreExploreStrategy::FedLan, seen_b,
                                                       unseen_b, speaker, aug, cfg, init, nullptr);
        REQUIRE(a.models.size() == b.models.size());
        for (std::size_t i = 0; i < a.models.size(); ++i)
            CHECK(same_bits(a.models[i].params, b.models[i].params));
    }

    SUBCASE("no unseen clients is an error") {
        auto seen = fresh_seen();
        std::vector<ClientState> none;
        CHECK_THROWS_AS(run_pre_exploration(PreExploreStrategy::FedLan, seen, none, speaker, aug,
                                            cfg, init, nullptr),
                        ValidationError);
    }
}

TEST_CASE("strategy names round-trip") {
    for (PreExploreStrategy s :
         {PreExploreStrategy::Centralized, PreExploreStrategy::EnvBased,
          PreExploreStrategy::FedFull, PreExploreStrategy::FedLan,
          PreExploreStrategy::FedLanSeen})
        CHECK(strategy_from_name(strategy_name(s)) == s);
    CHECK_THROWS_AS(strategy_from_name("fed_everything"), ValidationError);
}

TEST_CASE("augment_client resamples speaker-labeled routes") {
    const AgentParams init = init_agent(kSmallDims, 13);
    const SpeakerParams speaker = init_speaker(SpeakerDims{}, 14);
    ClientState c = make_client(5, 120, 2, 3, init);

    SeededRng rng1(55);
    augment_client(c, speaker, 7, 2, 5, rng1);
    REQUIRE(c.augmented.size() == 7);
    for (const Episode& ep : c.augmented) {
        CHECK(ep.env_id == c.env.id);
        const int moves = static_cast<int>(ep.path.moves());
        CHECK(moves >= 2);
        CHECK(moves <= 5);
        CHECK(ep.instruction == speaker_generate(speaker, c.env, ep.path));
        CHECK(ep.instruction.back() == vocab::kStop);
    }

    ClientState again = make_client(5, 120, 2, 3, init);
    SeededRng rng2(55);
    augment_client(again, speaker, 7, 2, 5, rng2);
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(again.augmented[i].path.cells == c.augmented[i].path.cells);
        CHECK(again.augmented[i].instruction == c.augmented[i].instruction);
    }

    SeededRng rng3(56);
    CHECK_THROWS_AS(augment_client(c, speaker, 0, 2, 5, rng3), ValidationError);
}

TEST_CASE("speaker federation trains, logs, and elects by seen BLEU") {
    const SpeakerParams init = init_speaker(SpeakerDims{}, 15);
    auto make_speaker_client = [&](int id, std::uint64_t env_seed, int n) {
        SpeakerClientState c;
        c.id = id;
        c.env = generate_environment(env_seed, 6, 6, 0.1);
        c.env.id = "env-" + std::to_string(id);
        SeededRng rng(derive_seed(env_seed, 1));
        for (int i = 0; i < n; ++i) c.data.push_back(sample_episode(c.env, rng, 2, 6));
        c.local = init;
        return c;
    };
    std::vector<SpeakerClientState> clients{make_speaker_client(0, 130, 8),
                                            make_speaker_client(1, 131, 8)};
    std::vector<Episode> val_eps;
    std::vector<EnvEpisode> val;
    {
        SeededRng rng(7);
        for (const SpeakerClientState& c : clients)
            for (int i = 0; i < 4; ++i) val_eps.push_back(sample_episode(c.env, rng, 2, 6));
        for (const Episode& ep : val_eps)
            val.push_back({ep.env_id == clients[0].env.id ? &clients[0].env : &clients[1].env,
                           &ep});
    }

    FederationConfig cfg;
    cfg.seed = 47;
    cfg.rounds = 4;
    cfg.r = 1.0;
    cfg.tau = 2;
    cfg.lambda = 0.5;

    SUBCASE("with validation the best round is the earliest BLEU peak") {
        const SpeakerRunResult out =
            run_federated_speaker_training(clients, cfg, init, val, val);
        REQUIRE(out.log.size() == 4);
        double best = -1.0;
        int best_round = 0;
        for (const SpeakerRoundRecord& rec : out.log) {
            REQUIRE(rec.bleu_seen.has_value());
            REQUIRE(rec.bleu_unseen.has_value());
            CHECK(*rec.bleu_seen == *rec.bleu_unseen); // same corpus both ways here
            if (*rec.bleu_seen > best) {
                best = *rec.bleu_seen;
                best_round = rec.round;
            }
        }
        CHECK(out.best_round == best_round);

        // The elected model reproduces the recorded BLEU.
        std::vector<Instruction> cand, ref;
        for (const EnvEpisode& v : val) {
            cand.push_back(speaker_generate(out.best_model, *v.env, v.episode->path));
            ref.push_back(v.episode->instruction);
        }
        CHECK(corpus_bleu(cand, ref) == best);
    }

    SUBCASE("without validation the final model is elected") {
        for (SpeakerClientState& c : clients) c.local = init;
        const SpeakerRunResult out = run_federated_speaker_training(clients, cfg, init, {}, {});
        for (const SpeakerRoundRecord& rec : out.log) {
            CHECK_FALSE(rec.bleu_seen.has_value());
            CHECK_FALSE(rec.bleu_unseen.has_value());
        }
        CHECK(same_bits(out.best_model.params, out.final_model.params));
        CHECK(out.best_round == cfg.rounds);
    }

    SUBCASE("one-client speaker federation reduces to the centralized baseline") {
        std::vector<SpeakerClientState> lone{make_speaker_client(0, 132, 6)};
        std::vector<EnvEpisode> pool;
        for (const Episode& ep : lone[0].data) pool.push_back({&lone[0].env, &ep});
        FederationConfig lone_cfg = cfg;
        lone_cfg.eta = 1.0;
        const SpeakerRunResult fed =
            run_federated_speaker_training(lone, lone_cfg, init, {}, {});
        const SpeakerRunResult central =
            run_centralized_speaker_training(pool, lone_cfg, init, {}, {});
        CHECK(same_bits(fed.final_model.params, central.final_model.params));
        for (std::size_t i = 0; i < fed.log.size(); ++i) {
            CHECK(fed.log[i].mean_loss == central.log[i].mean_loss);
            CHECK(fed.log[i].cum_steps == central.log[i].cum_steps);
        }
    }

    SUBCASE("zero rounds degenerate to the initial model") {
        FederationConfig empty_cfg = cfg;
        empty_cfg.rounds = 0;
        const SpeakerRunResult out =
            run_federated_speaker_training(clients, empty_cfg, init, val, val);
        CHECK(out.log.empty());
        CHECK(same_bits(out.final_model.params, init.params));
        CHECK(same_bits(out.best_model.params, init.params));
    }
}

TEST_CASE("server_apply is transactional") {
    ServerState server{5, {1.0, 2.0}};
    CHECK_THROWS_AS(server_apply(server, {}, 1.0), ValidationError);
    CHECK(server.round == 5);
    CHECK(server.global == ParamVector{1.0, 2.0});

    server_apply(server, {{0, {1.0, -1.0}, 2}}, 0.5);
    CHECK(server.round == 6);
    CHECK(server.global == ParamVector{1.5, 1.5});
}
