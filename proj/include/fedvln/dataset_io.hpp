#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedvln/config.hpp"
#include "fedvln/gridworld.hpp"

namespace fedvln {

// A generated benchmark: labeled training episodes on seen environments,
// held-out validation episodes on both seen and unseen environments, plus the
// config snapshot and seed that produced everything.
struct Dataset {
    RunConfig config;
    std::uint64_t seed = 0;
    std::vector<Environment> seen;
    std::vector<Environment> unseen;
    std::vector<Episode> train;      // seen environments
    std::vector<Episode> seen_val;   // seen environments, held out
    std::vector<Episode> unseen_val; // unseen environments

    const Environment& environment(std::string_view id) const; // throws ValidationError
};

// Draws environments and episodes from streams fanned out of `seed`, so any
// piece is reproducible in isolation. Environment ids are "seen-NN" and
// "unseen-NN" in generation order.
Dataset generate_dataset(const RunConfig& cfg, std::uint64_t seed);

// Text serialization under a directory:
//   envs.txt     one environment per line
//   episodes_{train,seen_val,unseen_val}.txt
//   manifest.txt seed plus the config snapshot
// All files are deterministic byte-for-byte given the dataset.
void write_dataset(const Dataset& ds, const std::string& dir);

// Throws MissingArtifactError when files are absent or malformed.
Dataset load_dataset(const std::string& dir);

std::string format_environment(const Environment& env);
Environment parse_environment(const std::string& line);

std::string format_episode(const Episode& ep);
Episode parse_episode(const std::string& line);

// Shared by the dataset and by speaker-augmented episode dumps.
void write_episode_file(const std::string& path, const std::vector<Episode>& episodes);
std::vector<Episode> read_episode_file(const std::string& path);

} // namespace fedvln
