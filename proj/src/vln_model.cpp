#include "fedvln/vln_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedvln/errors.hpp"

namespace fedvln {

namespace {

constexpr int kPolicyInput = kObsFeatures + kActionCount; // obs features + prev-action one-hot

// Offsets of each weight block inside the flat agent vector.
struct AgentLayout {
    int vocab, embed, hidden;
    std::size_t emb, w_lang, b_lang; // lang_encoder
    std::size_t w_traj, b_traj;      // traj_encoder
    std::size_t w_head, b_head;      // decision_head
    std::size_t total;
};

AgentLayout layout_of(const ModelDims& d) {
    if (d.vocab != vocab::kSize)
        throw ValidationError("agent dims: vocabulary size is fixed by the instruction template");
    if (d.embed < 1 || d.hidden < 1) throw ValidationError("agent dims: layer sizes must be >= 1");
    AgentLayout l{};
    l.vocab = d.vocab;
    l.embed = d.embed;
    l.hidden = d.hidden;
    const auto V = static_cast<std::size_t>(d.vocab);
    const auto de = static_cast<std::size_t>(d.embed);
    const auto dh = static_cast<std::size_t>(d.hidden);
    l.emb = 0;
    l.w_lang = l.emb + V * de;
    l.b_lang = l.w_lang + dh * de;
    l.w_traj = l.b_lang + dh;
    l.b_traj = l.w_traj + dh * kPolicyInput;
    l.w_head = l.b_traj + dh;
    l.b_head = l.w_head + static_cast<std::size_t>(kActionCount) * 2 * dh;
    l.total = l.b_head + kActionCount;
    return l;
}

void check_params(const AgentParams& a, const char* what) {
    if (a.params.size() != layout_of(a.dims).total)
        throw DimensionError(std::string(what) + ": parameter vector does not match dims");
}

std::vector<double> softmax(const std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - m);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

int argmax_lowest(const std::vector<double>& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
    return best;
}

// Expert action sequence of an episode: one move code per path step, then STOP.
std::vector<int> expert_actions(const Episode& ep) {
    std::vector<int> actions;
    for (const PathLeg& leg : path_legs(ep.path))
        actions.insert(actions.end(), static_cast<std::size_t>(leg.count),
                       static_cast<int>(leg.dir));
    actions.push_back(kActionStop);
    return actions;
}

std::array<double, kPolicyInput> policy_input(const Observation& obs, int prev_action) {
    if (prev_action < kNoAction || prev_action >= kActionCount)
        throw ValidationError("policy input: bad previous action");
    std::array<double, kPolicyInput> u{};
    std::copy(obs.begin(), obs.end(), u.begin());
    if (prev_action != kNoAction) u[static_cast<std::size_t>(kObsFeatures + prev_action)] = 1.0;
    return u;
}

ParamVector uniform_init(std::size_t n, std::uint64_t seed) {
    SeededRng rng(seed);
    ParamVector p(n);
    for (double& v : p) v = 0.2 * rng.next_double() - 0.1;
    return p;
}

} // namespace

PartitionSpec agent_partition(const ModelDims& dims) {
    const AgentLayout l = layout_of(dims);
    return PartitionSpec({{kLangEncoderSegment, 0, l.w_traj},
                          {kTrajEncoderSegment, l.w_traj, l.w_head - l.w_traj},
                          {kDecisionHeadSegment, l.w_head, l.total - l.w_head}});
}

AgentParams init_agent(const ModelDims& dims, std::uint64_t seed) {
    const AgentLayout l = layout_of(dims);
    return {dims, agent_partition(dims), uniform_init(l.total, seed)};
}

namespace {

// Token occurrence counts; summing by ascending token id makes the pooled
// embedding exactly invariant under token permutation.
std::vector<int> token_counts(const Instruction& instr, int vocab, const char* who) {
    if (instr.empty()) throw ValidationError(std::string(who) + ": empty instruction");
    std::vector<int> counts(static_cast<std::size_t>(vocab), 0);
    for (int t : instr) {
        if (t < 0 || t >= vocab)
            throw ValidationError(std::string(who) + ": token out of range");
        ++counts[static_cast<std::size_t>(t)];
    }
    return counts;
}

std::vector<double> pool_embeddings(const double* P, const AgentLayout& l,
                                    const std::vector<int>& counts, std::size_t n_tokens) {
    std::vector<double> pooled(static_cast<std::size_t>(l.embed), 0.0);
    for (int t = 0; t < l.vocab; ++t) {
        if (counts[static_cast<std::size_t>(t)] == 0) continue;
        const double w = static_cast<double>(counts[static_cast<std::size_t>(t)]);
        const double* row = P + l.emb + static_cast<std::size_t>(t) * l.embed;
        for (int c = 0; c < l.embed; ++c)
            pooled[static_cast<std::size_t>(c)] += w * row[c];
    }
    for (double& v : pooled) v /= static_cast<double>(n_tokens);
    return pooled;
}

} // namespace

std::vector<double> encode_instruction(const AgentParams& agent, const Instruction& instr) {
    check_params(agent, "encode_instruction");
    const AgentLayout l = layout_of(agent.dims);
    const double* P = agent.params.data();
    const std::vector<int> counts = token_counts(instr, l.vocab, "encode_instruction");
    const std::vector<double> pooled = pool_embeddings(P, l, counts, instr.size());

    std::vector<double> h(static_cast<std::size_t>(l.hidden));
    for (int r = 0; r < l.hidden; ++r) {
        double z = P[l.b_lang + static_cast<std::size_t>(r)];
        const double* row = P + l.w_lang + static_cast<std::size_t>(r) * l.embed;
        for (int c = 0; c < l.embed; ++c) z += row[c] * pooled[static_cast<std::size_t>(c)];
        h[static_cast<std::size_t>(r)] = std::tanh(z);
    }
    return h;
}

std::vector<double> policy_step(const AgentParams& agent, const std::vector<double>& lang,
                                const Observation& obs, int prev_action) {
    check_params(agent, "policy_step");
    const AgentLayout l = layout_of(agent.dims);
    if (lang.size() != static_cast<std::size_t>(l.hidden))
        throw DimensionError("policy_step: language vector has wrong width");
    const double* P = agent.params.data();
    const auto u = policy_input(obs, prev_action);

    std::vector<double> ht(static_cast<std::size_t>(l.hidden));
    for (int r = 0; r < l.hidden; ++r) {
        double z = P[l.b_traj + static_cast<std::size_t>(r)];
        const double* row = P + l.w_traj + static_cast<std::size_t>(r) * kPolicyInput;
        for (int c = 0; c < kPolicyInput; ++c) z += row[c] * u[static_cast<std::size_t>(c)];
        ht[static_cast<std::size_t>(r)] = std::tanh(z);
    }

    std::vector<double> logits(kActionCount);
    const auto dh = static_cast<std::size_t>(l.hidden);
    for (int a = 0; a < kActionCount; ++a) {
        double z = P[l.b_head + static_cast<std::size_t>(a)];
        const double* row = P + l.w_head + static_cast<std::size_t>(a) * 2 * dh;
        for (std::size_t j = 0; j < dh; ++j) z += row[j] * lang[j];
        for (std::size_t j = 0; j < dh; ++j) z += row[dh + j] * ht[j];
        logits[static_cast<std::size_t>(a)] = z;
    }
    return logits;
}

LossGrad imitation_loss_grad(const AgentParams& agent, const Environment& env,
                             const Episode& episode) {
    check_params(agent, "imitation_loss_grad");
    if (episode.path.cells.empty())
        throw ValidationError("imitation_loss_grad: episode has an empty path");
    const AgentLayout l = layout_of(agent.dims);
    const double* P = agent.params.data();
    const auto de = static_cast<std::size_t>(l.embed);
    const auto dh = static_cast<std::size_t>(l.hidden);

    // Forward: pooled embedding and language encoding, kept for the backward pass.
    const Instruction& instr = episode.instruction;
    const std::vector<int> counts = token_counts(instr, l.vocab, "imitation_loss_grad");
    const std::vector<double> pooled = pool_embeddings(P, l, counts, instr.size());
    std::vector<double> hl(dh);
    for (std::size_t r = 0; r < dh; ++r) {
        double z = P[l.b_lang + r];
        const double* row = P + l.w_lang + r * de;
        for (std::size_t c = 0; c < de; ++c) z += row[c] * pooled[c];
        hl[r] = std::tanh(z);
    }

    const std::vector<int> targets = expert_actions(episode);
    const auto S = targets.size();
    const double inv_s = 1.0 / static_cast<double>(S);

    LossGrad out;
    out.grad.assign(agent.params.size(), 0.0);
    double* G = out.grad.data();
    std::vector<double> dhl(dh, 0.0); // language encoding grad pooled across steps

    // At step t the agent sits on path cell t; the final step stops on the goal.
    int prev = kNoAction;
    for (std::size_t t = 0; t < S; ++t) {
        const auto u = policy_input(observe(env, episode.path.cells[t]), prev);

        std::vector<double> pre(dh), ht(dh);
        for (std::size_t r = 0; r < dh; ++r) {
            double z = P[l.b_traj + r];
            const double* row = P + l.w_traj + r * kPolicyInput;
            for (int c = 0; c < kPolicyInput; ++c) z += row[c] * u[static_cast<std::size_t>(c)];
            pre[r] = z;
            ht[r] = std::tanh(z);
        }

        std::vector<double> logits(kActionCount);
        for (int a = 0; a < kActionCount; ++a) {
            double z = P[l.b_head + static_cast<std::size_t>(a)];
            const double* row = P + l.w_head + static_cast<std::size_t>(a) * 2 * dh;
            for (std::size_t j = 0; j < dh; ++j) z += row[j] * hl[j] + row[dh + j] * ht[j];
            logits[static_cast<std::size_t>(a)] = z;
        }
        const std::vector<double> p = softmax(logits);
        const int target = targets[t];
        out.loss -= inv_s * std::log(p[static_cast<std::size_t>(target)]);

        // dL/dz for this step, already carrying the 1/S factor.
        std::vector<double> dz(kActionCount);
        for (int a = 0; a < kActionCount; ++a)
            dz[static_cast<std::size_t>(a)] =
                inv_s * (p[static_cast<std::size_t>(a)] - (a == target ? 1.0 : 0.0));

        std::vector<double> dht(dh, 0.0);
        for (int a = 0; a < kActionCount; ++a) {
            const double d = dz[static_cast<std::size_t>(a)];
            const double* row = P + l.w_head + static_cast<std::size_t>(a) * 2 * dh;
            double* grow = G + l.w_head + static_cast<std::size_t>(a) * 2 * dh;
            for (std::size_t j = 0; j < dh; ++j) {
                grow[j] += d * hl[j];
                grow[dh + j] += d * ht[j];
                dhl[j] += d * row[j];
                dht[j] += d * row[dh + j];
            }
            G[l.b_head + static_cast<std::size_t>(a)] += d;
        }

        for (std::size_t r = 0; r < dh; ++r) {
            const double dpre = dht[r] * (1.0 - ht[r] * ht[r]);
            double* grow = G + l.w_traj + r * kPolicyInput;
            for (int c = 0; c < kPolicyInput; ++c)
                grow[static_cast<std::size_t>(c)] += dpre * u[static_cast<std::size_t>(c)];
            G[l.b_traj + r] += dpre;
        }

        prev = target;
    }

    // Language branch backward, shared by every step.
    std::vector<double> dpooled(de, 0.0);
    for (std::size_t r = 0; r < dh; ++r) {
        const double dpre = dhl[r] * (1.0 - hl[r] * hl[r]);
        const double* row = P + l.w_lang + r * de;
        double* grow = G + l.w_lang + r * de;
        for (std::size_t c = 0; c < de; ++c) {
            grow[c] += dpre * pooled[c];
            dpooled[c] += dpre * row[c];
        }
        G[l.b_lang + r] += dpre;
    }
    const double inv_tokens = 1.0 / static_cast<double>(instr.size());
    for (int t = 0; t < l.vocab; ++t) {
        if (counts[static_cast<std::size_t>(t)] == 0) continue;
        const double w = counts[static_cast<std::size_t>(t)] * inv_tokens;
        double* grow = G + l.emb + static_cast<std::size_t>(t) * de;
        for (std::size_t c = 0; c < de; ++c) grow[c] += w * dpooled[c];
    }
    return out;
}

namespace {

// Shared minibatch SGD loop; Grad computes one item's loss and gradient.
template <typename Params, typename Grad>
std::pair<double, std::uint64_t> sgd_epochs(Params& model, std::size_t n, Grad&& grad_of,
                                            int epochs, double lr, SeededRng& rng, int batch) {
    if (epochs < 0) throw ValidationError("client_update: negative epoch count");
    if (batch < 1) throw ValidationError("client_update: batch must be >= 1");
    if (!(lr >= 0.0) || !std::isfinite(lr))
        throw ValidationError("client_update: bad learning rate");
    if (n == 0) throw ValidationError("client_update: empty dataset");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    double loss_sum = 0.0;
    std::uint64_t steps = 0;
    ParamVector acc(model.params.size());
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        for (std::size_t lo = 0; lo < n; lo += static_cast<std::size_t>(batch)) {
            const std::size_t hi = std::min(n, lo + static_cast<std::size_t>(batch));
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t i = lo; i < hi; ++i) {
                LossGrad lg = grad_of(model, order[i]);
                loss_sum += lg.loss;
                for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += lg.grad[k];
            }
            const double scale = lr / static_cast<double>(hi - lo);
            for (std::size_t k = 0; k < acc.size(); ++k) model.params[k] -= scale * acc[k];
            ++steps;
        }
    }
    const double denom = static_cast<double>(n) * std::max(epochs, 1);
    return {loss_sum / denom, steps};
}

void check_views(std::span<const EnvEpisode> data, const char* what) {
    for (const auto& v : data) {
        if (v.env == nullptr || v.episode == nullptr)
            throw ValidationError(std::string(what) + ": null dataset entry");
        if (v.episode->env_id != v.env->id)
            throw ValidationError(std::string(what) + ": episode is paired with the wrong environment");
    }
}

} // namespace

UpdateResult client_update(const AgentParams& start, std::span<const EnvEpisode> data,
                           int epochs, double lr, SeededRng& rng, int batch) {
    check_params(start, "client_update");
    check_views(data, "client_update");
    UpdateResult res{start, 0.0, 0};
    auto grad_of = [&data](const AgentParams& m, std::size_t i) {
        return imitation_loss_grad(m, *data[i].env, *data[i].episode);
    };
    std::tie(res.mean_loss, res.steps) =
        sgd_epochs(res.params, data.size(), grad_of, epochs, lr, rng, batch);
    return res;
}

Trajectory rollout(const AgentParams& agent, const Environment& env, const Instruction& instr,
                   Cell start, int max_steps) {
    check_params(agent, "rollout");
    if (!env.free_cell(start)) throw ValidationError("rollout: start cell is blocked");
    if (max_steps < 1) throw ValidationError("rollout: max_steps must be >= 1");
    const std::vector<double> lang = encode_instruction(agent, instr);

    Trajectory traj;
    traj.cells.push_back(start);
    Cell at = start;
    int prev = kNoAction;
    for (int t = 0; t < max_steps; ++t) {
        const auto logits = policy_step(agent, lang, observe(env, at), prev);
        const int a = argmax_lowest(logits);
        traj.actions.push_back(a);
        if (a == kActionStop) {
            traj.terminated = true;
            break;
        }
        const auto delta = direction_delta(static_cast<Direction>(a));
        const Cell next{at.x + delta[0], at.y + delta[1]};
        if (env.free_cell(next)) at = next; // illegal moves keep the position
        traj.cells.push_back(at);
        prev = a;
    }
    return traj;
}

namespace {

constexpr std::size_t kSpeakerWeights =
    static_cast<std::size_t>(vocab::kSize) * kSpeakerFeatures;

void check_speaker(const SpeakerParams& s, const char* what) {
    if (s.dims.vocab != vocab::kSize)
        throw ValidationError(std::string(what) + ": vocabulary size is fixed");
    if (s.params.size() != kSpeakerWeights + vocab::kSize)
        throw DimensionError(std::string(what) + ": parameter vector does not match dims");
}

// Per-slot feature encodings for one leg. The direction slot sees the leg
// direction, the count slot the normalized run length; both see where the leg
// starts and a bias input.
std::array<double, kSpeakerFeatures> dir_features(const Environment& env, const PathLeg& leg) {
    std::array<double, kSpeakerFeatures> f{};
    f[static_cast<std::size_t>(leg.dir)] = 1.0;
    f[5] = static_cast<double>(leg.start.x) / env.width;
    f[6] = static_cast<double>(leg.start.y) / env.height;
    f[7] = 1.0;
    return f;
}

std::array<double, kSpeakerFeatures> count_features(const Environment& env, const PathLeg& leg) {
    std::array<double, kSpeakerFeatures> f{};
    f[4] = static_cast<double>(leg.count) / 10.0;
    f[5] = static_cast<double>(leg.start.x) / env.width;
    f[6] = static_cast<double>(leg.start.y) / env.height;
    f[7] = 1.0;
    return f;
}

std::vector<double> speaker_logits(const SpeakerParams& s,
                                   const std::array<double, kSpeakerFeatures>& f) {
    std::vector<double> z(static_cast<std::size_t>(s.dims.vocab));
    const double* P = s.params.data();
    for (int v = 0; v < s.dims.vocab; ++v) {
        double acc = P[kSpeakerWeights + static_cast<std::size_t>(v)];
        const double* row = P + static_cast<std::size_t>(v) * kSpeakerFeatures;
        for (int c = 0; c < kSpeakerFeatures; ++c) acc += row[c] * f[static_cast<std::size_t>(c)];
        z[static_cast<std::size_t>(v)] = acc;
    }
    return z;
}

} // namespace

SpeakerParams init_speaker(const SpeakerDims& dims, std::uint64_t seed) {
    if (dims.vocab != vocab::kSize)
        throw ValidationError("init_speaker: vocabulary size is fixed");
    return {dims, uniform_init(kSpeakerWeights + static_cast<std::size_t>(dims.vocab), seed)};
}

Instruction speaker_generate(const SpeakerParams& speaker, const Environment& env,
                             const Path& path) {
    check_speaker(speaker, "speaker_generate");
    if (path.cells.empty()) throw ValidationError("speaker_generate: empty path");
    Instruction out;
    for (const PathLeg& leg : instruction_legs(path)) {
        out.push_back(vocab::kGo);
        out.push_back(argmax_lowest(speaker_logits(speaker, dir_features(env, leg))));
        out.push_back(argmax_lowest(speaker_logits(speaker, count_features(env, leg))));
        out.push_back(vocab::kSteps);
    }
    out.push_back(vocab::kStop);
    return out;
}

LossGrad speaker_loss_grad(const SpeakerParams& speaker, const Environment& env,
                           const Episode& episode) {
    check_speaker(speaker, "speaker_loss_grad");
    const std::vector<PathLeg> legs = instruction_legs(episode.path);
    LossGrad out;
    out.grad.assign(speaker.params.size(), 0.0);
    if (legs.empty()) return out; // single-cell path: nothing to label

    const double inv_slots = 1.0 / static_cast<double>(2 * legs.size());
    double* G = out.grad.data();
    auto accumulate = [&](const std::array<double, kSpeakerFeatures>& f, int label) {
        const std::vector<double> p = softmax(speaker_logits(speaker, f));
        out.loss -= inv_slots * std::log(p[static_cast<std::size_t>(label)]);
        for (int v = 0; v < speaker.dims.vocab; ++v) {
            const double d =
                inv_slots * (p[static_cast<std::size_t>(v)] - (v == label ? 1.0 : 0.0));
            double* row = G + static_cast<std::size_t>(v) * kSpeakerFeatures;
            for (int c = 0; c < kSpeakerFeatures; ++c)
                row[c] += d * f[static_cast<std::size_t>(c)];
            G[kSpeakerWeights + static_cast<std::size_t>(v)] += d;
        }
    };
    for (const PathLeg& leg : legs) {
        accumulate(dir_features(env, leg), vocab::direction_word(leg.dir));
        accumulate(count_features(env, leg), vocab::count_word(leg.count));
    }
    return out;
}

SpeakerUpdateResult speaker_client_update(const SpeakerParams& start,
                                          std::span<const EnvEpisode> data, int epochs,
                                          double lr, SeededRng& rng, int batch) {
    check_speaker(start, "speaker_client_update");
    check_views(data, "speaker_client_update");
    SpeakerUpdateResult res{start, 0.0, 0};
    auto grad_of = [&data](const SpeakerParams& m, std::size_t i) {
        return speaker_loss_grad(m, *data[i].env, *data[i].episode);
    };
    std::tie(res.mean_loss, res.steps) =
        sgd_epochs(res.params, data.size(), grad_of, epochs, lr, rng, batch);
    return res;
}

} // namespace fedvln
