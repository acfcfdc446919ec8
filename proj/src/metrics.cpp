#include "fedvln/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>

#include "fedvln/errors.hpp"

namespace fedvln {

namespace {

double euclid(Cell a, Cell b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

void check_d_th(double d_th) {
    if (!(d_th > 0.0)) throw ValidationError("metrics: d_th must be positive");
}

} // namespace

int default_max_steps(const Environment& env, int factor) {
    return factor * (env.width + env.height);
}

double travelled_moves(std::span<const Cell> cells) {
    double moves = 0.0;
    for (std::size_t i = 0; i + 1 < cells.size(); ++i)
        if (!(cells[i] == cells[i + 1])) moves += 1.0;
    return moves;
}

double navigation_error(const Environment& env, const Trajectory& traj, Cell goal) {
    if (traj.cells.empty()) throw ValidationError("navigation_error: empty trajectory");
    return geodesic_distance(env, traj.cells.back(), goal);
}

bool success(const Environment& env, const Trajectory& traj, Cell goal, double d_success) {
    return traj.terminated && navigation_error(env, traj, goal) <= d_success;
}

bool oracle_success(const Environment& env, const Trajectory& traj, Cell goal, double d_success) {
    for (Cell c : traj.cells)
        if (geodesic_distance(env, c, goal) <= d_success) return true;
    return false;
}

double spl(std::span<const SplItem> items) {
    if (items.empty()) throw ValidationError("spl: no items");
    double sum = 0.0;
    for (const SplItem& it : items) {
        if (!it.success) continue;
        const double denom = std::max(it.shortest, it.travelled);
        sum += denom == 0.0 ? 1.0 : it.shortest / denom;
    }
    return sum / static_cast<double>(items.size());
}

double ndtw(std::span<const Cell> reference, std::span<const Cell> predicted, double d_th) {
    check_d_th(d_th);
    if (reference.empty() || predicted.empty())
        throw ValidationError("ndtw: empty path");
    const std::size_t n = reference.size();
    const std::size_t m = predicted.size();
    constexpr double kInf = std::numeric_limits<double>::infinity();
    // Rolling-row DTW table over (reference x predicted).
    std::vector<double> prev(m + 1, kInf), cur(m + 1, kInf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = kInf;
        for (std::size_t j = 1; j <= m; ++j) {
            const double d = euclid(reference[i - 1], predicted[j - 1]);
            cur[j] = d + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return std::exp(-prev[m] / (static_cast<double>(n) * d_th));
}

double cls(std::span<const Cell> reference, std::span<const Cell> predicted, double d_th) {
    check_d_th(d_th);
    if (reference.empty() || predicted.empty())
        throw ValidationError("cls: empty path");
    double coverage = 0.0;
    for (Cell r : reference) {
        double nearest = std::numeric_limits<double>::infinity();
        for (Cell q : predicted) nearest = std::min(nearest, euclid(r, q));
        coverage += std::exp(-nearest / d_th);
    }
    coverage /= static_cast<double>(reference.size());

    const double len_ref = travelled_moves(reference);
    const double len_pred = travelled_moves(predicted);
    const double expected = coverage * len_ref;
    const double denom = expected + std::abs(expected - len_pred);
    if (denom == 0.0) return coverage; // both paths degenerate
    return coverage * expected / denom;
}

namespace {

// Pooled clipped n-gram matches and candidate totals for one order.
void ngram_counts(const Instruction& cand, const Instruction& ref, std::size_t order,
                  std::uint64_t* matched, std::uint64_t* total) {
    if (cand.size() < order) return;
    std::map<std::vector<int>, std::uint64_t> want;
    if (ref.size() >= order)
        for (std::size_t i = 0; i + order <= ref.size(); ++i)
            ++want[std::vector<int>(ref.begin() + static_cast<std::ptrdiff_t>(i),
                                    ref.begin() + static_cast<std::ptrdiff_t>(i + order))];
    for (std::size_t i = 0; i + order <= cand.size(); ++i) {
        ++*total;
        const std::vector<int> gram(cand.begin() + static_cast<std::ptrdiff_t>(i),
                                    cand.begin() + static_cast<std::ptrdiff_t>(i + order));
        auto it = want.find(gram);
        if (it != want.end() && it->second > 0) {
            --it->second;
            ++*matched;
        }
    }
}

} // namespace

double corpus_bleu(const std::vector<Instruction>& candidates,
                   const std::vector<Instruction>& references) {
    if (candidates.size() != references.size())
        throw DimensionError("corpus_bleu: candidate and reference counts differ");
    if (candidates.empty()) throw ValidationError("corpus_bleu: empty corpus");

    std::uint64_t cand_len = 0, ref_len = 0;
    for (const auto& c : candidates) cand_len += c.size();
    for (const auto& r : references) ref_len += r.size();
    if (cand_len == 0) return 0.0;

    double log_sum = 0.0;
    for (std::size_t order = 1; order <= 4; ++order) {
        std::uint64_t matched = 0, total = 0;
        for (std::size_t i = 0; i < candidates.size(); ++i)
            ngram_counts(candidates[i], references[i], order, &matched, &total);
        double p;
        if (order == 1)
            p = matched > 0 ? static_cast<double>(matched) / static_cast<double>(total)
                            : 1.0 / static_cast<double>(total + 1);
        else
            p = static_cast<double>(matched + 1) / static_cast<double>(total + 1);
        log_sum += 0.25 * std::log(p);
    }
    const double bp =
        cand_len >= ref_len
            ? 1.0
            : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
    return bp * std::exp(log_sum);
}

EpisodeScore score_trajectory(const Environment& env, const Episode& episode,
                              const Trajectory& traj, const EvalOptions& opts) {
    EpisodeScore s;
    s.success = success(env, traj, episode.goal, opts.d_success);
    s.oracle = oracle_success(env, traj, episode.goal, opts.d_success);
    s.ne = navigation_error(env, traj, episode.goal);
    const SplItem item{s.success, static_cast<double>(episode.path.moves()),
                       travelled_moves(traj.cells)};
    s.spl = spl({&item, 1});
    s.ndtw = ndtw(episode.path.cells, traj.cells, opts.d_th);
    s.cls = cls(episode.path.cells, traj.cells, opts.d_th);
    return s;
}

EvalReport summarize(std::span<const EpisodeScore> scores) {
    EvalReport rep;
    rep.count = scores.size();
    if (scores.empty()) return rep;
    for (const EpisodeScore& s : scores) {
        rep.sr += s.success ? 1.0 : 0.0;
        rep.osr += s.oracle ? 1.0 : 0.0;
        rep.spl += s.spl;
        rep.ne += s.ne;
        rep.ndtw += s.ndtw;
        rep.cls += s.cls;
    }
    const auto n = static_cast<double>(scores.size());
    rep.sr /= n;
    rep.osr /= n;
    rep.spl /= n;
    rep.ne /= n;
    rep.ndtw /= n;
    rep.cls /= n;
    return rep;
}

EvalReport evaluate_agent(const AgentParams& agent, std::span<const EnvEpisode> episodes,
                          const EvalOptions& opts) {
    std::vector<EpisodeScore> scores;
    scores.reserve(episodes.size());
    for (const EnvEpisode& v : episodes) {
        const int max_steps =
            opts.max_steps > 0 ? opts.max_steps : default_max_steps(*v.env);
        const Trajectory traj =
            rollout(agent, *v.env, v.episode->instruction, v.episode->start, max_steps);
        scores.push_back(score_trajectory(*v.env, *v.episode, traj, opts));
    }
    return summarize(scores);
}

} // namespace fedvln
