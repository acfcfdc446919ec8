#pragma once

#include <span>
#include <vector>

#include "fedvln/gridworld.hpp"
#include "fedvln/vln_model.hpp"

namespace fedvln {

struct EvalOptions {
    double d_success = 1.0; // goal radius in geodesic moves
    double d_th = 1.0;      // distance scale for path-fidelity scores
    int max_steps = 0;      // 0: use 4 * (width + height) of the episode's grid
};

int default_max_steps(const Environment& env, int factor = 4);

// Cells actually traversed: in-place repeats from blocked moves add nothing.
double travelled_moves(std::span<const Cell> cells);

// Final-cell geodesic distance to goal, in moves.
double navigation_error(const Environment& env, const Trajectory& traj, Cell goal);

// Deliberate stop within d_success of the goal; running out of steps on the
// goal cell does not count.
bool success(const Environment& env, const Trajectory& traj, Cell goal, double d_success);

// Success anywhere along the trajectory, start cell included.
bool oracle_success(const Environment& env, const Trajectory& traj, Cell goal, double d_success);

struct SplItem {
    bool success = false;
    double shortest = 0.0;  // geodesic start->goal
    double travelled = 0.0; // moves actually made
};

// Mean of success * shortest / max(shortest, travelled); an item with both
// lengths zero contributes its bare success value. Empty input is a
// ValidationError.
double spl(std::span<const SplItem> items);

// exp(-DTW(ref, pred) / (|ref| * d_th)) with Euclidean cell distances and
// |ref| counted in cells.
double ndtw(std::span<const Cell> reference, std::span<const Cell> predicted, double d_th);

// Coverage-weighted length score: coverage = mean over reference cells of
// exp(-nearest predicted distance / d_th), expected length = coverage *
// len(ref), score = coverage * expected / (expected + |expected - len(pred)|)
// with lengths in moves. Degenerates to bare coverage when both lengths and
// the expected length are zero.
double cls(std::span<const Cell> reference, std::span<const Cell> predicted, double d_th);

// Corpus BLEU-4 with one reference per candidate. Modified n-gram precisions
// are pooled over the corpus; orders two to four use add-one smoothing and a
// zero unigram numerator falls back to 1 / (total + 1) so the geometric mean
// never collapses. The brevity penalty is exp(1 - ref_len / cand_len), capped
// at one.
double corpus_bleu(const std::vector<Instruction>& candidates,
                   const std::vector<Instruction>& references);

struct EpisodeScore {
    bool success = false;
    bool oracle = false;
    double ne = 0.0;
    double spl = 0.0;
    double ndtw = 0.0;
    double cls = 0.0;
};

EpisodeScore score_trajectory(const Environment& env, const Episode& episode,
                              const Trajectory& traj, const EvalOptions& opts);

struct EvalReport {
    std::size_t count = 0;
    double sr = 0.0;
    double osr = 0.0;
    double spl = 0.0;
    double ne = 0.0;
    double ndtw = 0.0;
    double cls = 0.0;
};

EvalReport summarize(std::span<const EpisodeScore> scores);

// Greedy-rollout evaluation of one agent over pooled episodes.
EvalReport evaluate_agent(const AgentParams& agent, std::span<const EnvEpisode> episodes,
                          const EvalOptions& opts);

} // namespace fedvln
