#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fedvln/rng.hpp"

namespace fedvln {

struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

enum class Direction : int { North = 0, East = 1, South = 2, West = 3 };

// Grid step for each direction; y grows southward (row-major screen layout).
std::array<int, 2> direction_delta(Direction d);

enum class Split { Seen, Unseen };

struct Environment {
    std::string id;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> obstacles; // row-major width*height, 1 = blocked
    Split split = Split::Seen;

    bool in_bounds(Cell c) const {
        return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height;
    }
    bool blocked(Cell c) const {
        return !in_bounds(c) || obstacles[static_cast<std::size_t>(c.y) * width + c.x] != 0;
    }
    bool free_cell(Cell c) const { return in_bounds(c) && !blocked(c); }
};

struct Path {
    std::vector<Cell> cells; // adjacent 4-connected free cells
    std::size_t moves() const { return cells.empty() ? 0 : cells.size() - 1; }
};

// Instruction token ids; fixed vocabulary shared by agent and speaker.
using Instruction = std::vector<int>;

namespace vocab {

inline constexpr int kGo = 0;
inline constexpr int kNorth = 1;
inline constexpr int kEast = 2;
inline constexpr int kSouth = 3;
inline constexpr int kWest = 4;
inline constexpr int kSteps = 5;
inline constexpr int kStop = 6;
inline constexpr int kOne = 7; // 7..16 are "one".."ten"
inline constexpr int kSize = 17;

std::string_view word(int token);
int token(std::string_view word); // throws ValidationError on unknown words
bool is_direction_word(int token);
bool is_count_word(int token);
int direction_word(Direction d);
int count_word(int count); // count in [1, 10]
Direction word_direction(int token);
int word_count(int token);

} // namespace vocab

struct Episode {
    std::string env_id;
    Cell start;
    Cell goal;
    Path path;               // a shortest start->goal route
    Instruction instruction; // templated description of path
};

// Egocentric observation at a free cell: four adjacency bits in N,E,S,W order
// then normalized coordinates x/width, y/height.
inline constexpr int kObsFeatures = 6;
using Observation = std::array<double, kObsFeatures>;

// Actions: the four moves (same codes as Direction) plus STOP.
inline constexpr int kActionStop = 4;
inline constexpr int kActionCount = 5;

// Obstacle layout drawn from the seed: round(density * cells) blocked cells,
// then obstacles removed (highest cell index first) until the free cells are
// 4-connected. width and height must be >= 4, density in [0, 0.4].
Environment generate_environment(std::uint64_t seed, int width, int height, double density);

// BFS shortest path visiting free cells only, expanding neighbors in N,E,S,W
// order so ties break deterministically. Throws NoPathError if disconnected
// and ValidationError if either endpoint is blocked.
Path shortest_path(const Environment& env, Cell from, Cell to);

// Number of moves along a shortest route, same rules as shortest_path.
int geodesic_distance(const Environment& env, Cell from, Cell to);

// Rejection-samples a (start, goal) pair uniformly from the free cells until
// the geodesic lies in [min_moves, max_moves], then records the BFS route and
// its rendered instruction. Throws SamplingExhaustedError after 1000 draws.
Episode sample_episode(const Environment& env, SeededRng& rng, int min_moves, int max_moves);

// Run-length encoding of a path into axis-aligned legs; start is the cell the
// leg begins at.
struct PathLeg {
    Direction dir = Direction::North;
    int count = 0;
    Cell start;
};
std::vector<PathLeg> path_legs(const Path& path);

// Same legs with runs longer than ten steps split greedily; these are the
// legs instructions are rendered from, one "go <dir> <count> steps" each.
std::vector<PathLeg> instruction_legs(const Path& path);

// Templated instruction: per leg "go <dir> <count> steps", runs longer than
// ten split greedily, and a trailing "stop". A single-cell path is just "stop".
Instruction render_instruction(const Path& path);

// True iff tokens form zero or more well-shaped legs followed by stop.
bool is_well_formed(const Instruction& instr);

// Replays a templated instruction from start, ignoring the environment.
// Used to check instructions against the paths they describe.
Path replay_instruction(const Instruction& instr, Cell start);

Observation observe(const Environment& env, Cell at); // throws on blocked cells

std::string tokens_to_text(const Instruction& instr);
Instruction text_to_tokens(std::string_view text);

} // namespace fedvln
