#include "fedvln/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

#include "fedvln/errors.hpp"

namespace fedvln {

std::array<int, 2> direction_delta(Direction d) {
    switch (d) {
        case Direction::North: return {0, -1};
        case Direction::East: return {1, 0};
        case Direction::South: return {0, 1};
        case Direction::West: return {-1, 0};
    }
    throw ValidationError("direction_delta: bad direction");
}

namespace vocab {

namespace {
constexpr std::string_view kWords[kSize] = {
    "go",  "north", "east",  "south", "west", "steps", "stop", "one", "two",
    "three", "four", "five", "six",   "seven", "eight", "nine", "ten"};
}

std::string_view word(int token) {
    if (token < 0 || token >= kSize) throw ValidationError("vocab: token id out of range");
    return kWords[token];
}

int token(std::string_view w) {
    for (int i = 0; i < kSize; ++i)
        if (kWords[i] == w) return i;
    throw ValidationError("vocab: unknown word '" + std::string(w) + "'");
}

bool is_direction_word(int t) { return t >= kNorth && t <= kWest; }
bool is_count_word(int t) { return t >= kOne && t < kSize; }

int direction_word(Direction d) { return kNorth + static_cast<int>(d); }

int count_word(int count) {
    if (count < 1 || count > 10) throw ValidationError("vocab: count word out of range");
    return kOne + count - 1;
}

Direction word_direction(int t) {
    if (!is_direction_word(t)) throw ValidationError("vocab: not a direction word");
    return static_cast<Direction>(t - kNorth);
}

int word_count(int t) {
    if (!is_count_word(t)) throw ValidationError("vocab: not a count word");
    return t - kOne + 1;
}

} // namespace vocab

namespace {

std::size_t cell_index(const Environment& env, Cell c) {
    return static_cast<std::size_t>(c.y) * env.width + c.x;
}

// Flood fill over free cells; returns number reached from the first free cell.
std::size_t reachable_free(const Environment& env) {
    const std::size_t n = env.obstacles.size();
    std::size_t first = n;
    for (std::size_t i = 0; i < n; ++i)
        if (!env.obstacles[i]) {
            first = i;
            break;
        }
    if (first == n) return 0;
    std::vector<std::uint8_t> seen(n, 0);
    std::deque<std::size_t> queue{first};
    seen[first] = 1;
    std::size_t count = 0;
    while (!queue.empty()) {
        const std::size_t i = queue.front();
        queue.pop_front();
        ++count;
        const Cell c{static_cast<int>(i % env.width), static_cast<int>(i / env.width)};
        for (int d = 0; d < 4; ++d) {
            const auto delta = direction_delta(static_cast<Direction>(d));
            const Cell nb{c.x + delta[0], c.y + delta[1]};
            if (!env.free_cell(nb)) continue;
            const std::size_t j = cell_index(env, nb);
            if (!seen[j]) {
                seen[j] = 1;
                queue.push_back(j);
            }
        }
    }
    return count;
}

std::size_t free_count(const Environment& env) {
    return env.obstacles.size() -
           static_cast<std::size_t>(
               std::count(env.obstacles.begin(), env.obstacles.end(), std::uint8_t{1}));
}

} // namespace

Environment generate_environment(std::uint64_t seed, int width, int height, double density) {
    if (width < 4 || height < 4)
        throw ValidationError("generate_environment: grid must be at least 4x4");
    if (!(density >= 0.0 && density <= 0.4))
        throw ValidationError("generate_environment: density must lie in [0, 0.4]");

    Environment env;
    env.id = "env-" + std::to_string(seed);
    env.width = width;
    env.height = height;
    env.obstacles.assign(static_cast<std::size_t>(width) * height, 0);

    const std::size_t n = env.obstacles.size();
    auto wanted = static_cast<std::size_t>(std::llround(density * static_cast<double>(n)));
    wanted = std::min(wanted, n - 1);

    SeededRng rng(seed);
    std::vector<std::size_t> cells(n);
    std::iota(cells.begin(), cells.end(), std::size_t{0});
    for (std::size_t i = 0; i < wanted; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
        std::swap(cells[i], cells[j]);
        env.obstacles[cells[i]] = 1;
    }

    // Carve obstacles (highest index first) until the free region is connected.
    std::vector<std::size_t> placed(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(wanted));
    std::sort(placed.begin(), placed.end());
    while (reachable_free(env) != free_count(env)) {
        env.obstacles[placed.back()] = 0;
        placed.pop_back();
    }
    return env;
}

namespace {

// BFS parents; kNoParent marks unvisited, start points at itself.
std::vector<std::size_t> bfs_parents(const Environment& env, Cell from, Cell to,
                                     bool* found) {
    constexpr auto kNoParent = static_cast<std::size_t>(-1);
    std::vector<std::size_t> parent(env.obstacles.size(), kNoParent);
    const std::size_t src = cell_index(env, from);
    const std::size_t dst = cell_index(env, to);
    parent[src] = src;
    std::deque<std::size_t> queue{src};
    while (!queue.empty()) {
        const std::size_t i = queue.front();
        queue.pop_front();
        if (i == dst) break;
        const Cell c{static_cast<int>(i % env.width), static_cast<int>(i / env.width)};
        for (int d = 0; d < 4; ++d) {
            const auto delta = direction_delta(static_cast<Direction>(d));
            const Cell nb{c.x + delta[0], c.y + delta[1]};
            if (!env.free_cell(nb)) continue;
            const std::size_t j = cell_index(env, nb);
            if (parent[j] == kNoParent) {
                parent[j] = i;
                queue.push_back(j);
            }
        }
    }
    *found = parent[dst] != kNoParent;
    return parent;
}

} // namespace

Path shortest_path(const Environment& env, Cell from, Cell to) {
    if (!env.free_cell(from) || !env.free_cell(to))
        throw ValidationError("shortest_path: endpoint is blocked or out of bounds");
    bool found = false;
    const auto parent = bfs_parents(env, from, to, &found);
    if (!found)
        throw NoPathError("shortest_path: no route in " + env.id);
    Path path;
    std::size_t i = cell_index(env, to);
    const std::size_t src = cell_index(env, from);
    while (true) {
        path.cells.push_back({static_cast<int>(i % env.width), static_cast<int>(i / env.width)});
        if (i == src) break;
        i = parent[i];
    }
    std::reverse(path.cells.begin(), path.cells.end());
    return path;
}

int geodesic_distance(const Environment& env, Cell from, Cell to) {
    return static_cast<int>(shortest_path(env, from, to).moves());
}

Episode sample_episode(const Environment& env, SeededRng& rng, int min_moves, int max_moves) {
    if (min_moves < 1 || max_moves < min_moves)
        throw ValidationError("sample_episode: need 1 <= min_moves <= max_moves");
    std::vector<Cell> free;
    for (int y = 0; y < env.height; ++y)
        for (int x = 0; x < env.width; ++x)
            if (!env.blocked({x, y})) free.push_back({x, y});
    if (free.size() < 2) throw ValidationError("sample_episode: fewer than two free cells");

    constexpr int kMaxAttempts = 1000;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        const Cell start = free[static_cast<std::size_t>(rng.next_below(free.size()))];
        const Cell goal = free[static_cast<std::size_t>(rng.next_below(free.size()))];
        if (start == goal) continue;
        const Path path = shortest_path(env, start, goal); // env is connected by construction
        const auto moves = static_cast<int>(path.moves());
        if (moves < min_moves || moves > max_moves) continue;
        Episode ep;
        ep.env_id = env.id;
        ep.start = start;
        ep.goal = goal;
        ep.path = path;
        ep.instruction = render_instruction(path);
        return ep;
    }
    throw SamplingExhaustedError("sample_episode: no qualifying pair in " +
                                 std::to_string(kMaxAttempts) + " draws for " + env.id);
}

std::vector<PathLeg> path_legs(const Path& path) {
    std::vector<PathLeg> legs;
    for (std::size_t i = 0; i + 1 < path.cells.size(); ++i) {
        const Cell a = path.cells[i];
        const Cell b = path.cells[i + 1];
        const int dx = b.x - a.x;
        const int dy = b.y - a.y;
        Direction dir;
        if (dx == 0 && dy == -1)
            dir = Direction::North;
        else if (dx == 1 && dy == 0)
            dir = Direction::East;
        else if (dx == 0 && dy == 1)
            dir = Direction::South;
        else if (dx == -1 && dy == 0)
            dir = Direction::West;
        else
            throw ValidationError("path_legs: cells are not 4-adjacent");
        if (!legs.empty() && legs.back().dir == dir)
            ++legs.back().count;
        else
            legs.push_back({dir, 1, a});
    }
    return legs;
}

std::vector<PathLeg> instruction_legs(const Path& path) {
    std::vector<PathLeg> out;
    for (const PathLeg& leg : path_legs(path)) {
        const auto delta = direction_delta(leg.dir);
        int done = 0;
        while (done < leg.count) {
            const int chunk = std::min(leg.count - done, 10);
            out.push_back({leg.dir, chunk,
                           {leg.start.x + delta[0] * done, leg.start.y + delta[1] * done}});
            done += chunk;
        }
    }
    return out;
}

Instruction render_instruction(const Path& path) {
    if (path.cells.empty()) throw ValidationError("render_instruction: empty path");
    Instruction out;
    for (const PathLeg& leg : instruction_legs(path)) {
        out.push_back(vocab::kGo);
        out.push_back(vocab::direction_word(leg.dir));
        out.push_back(vocab::count_word(leg.count));
        out.push_back(vocab::kSteps);
    }
    out.push_back(vocab::kStop);
    return out;
}

bool is_well_formed(const Instruction& instr) {
    if (instr.empty()) return false;
    for (int t : instr)
        if (t < 0 || t >= vocab::kSize) return false;
    const std::size_t n = instr.size();
    if (instr[n - 1] != vocab::kStop) return false;
    if ((n - 1) % 4 != 0) return false;
    for (std::size_t i = 0; i + 1 < n; i += 4) {
        if (instr[i] != vocab::kGo) return false;
        if (!vocab::is_direction_word(instr[i + 1])) return false;
        if (!vocab::is_count_word(instr[i + 2])) return false;
        if (instr[i + 3] != vocab::kSteps) return false;
    }
    return true;
}

Path replay_instruction(const Instruction& instr, Cell start) {
    if (!is_well_formed(instr)) throw ValidationError("replay_instruction: malformed instruction");
    Path path;
    path.cells.push_back(start);
    Cell at = start;
    for (std::size_t i = 0; i + 1 < instr.size(); i += 4) {
        const auto delta = direction_delta(vocab::word_direction(instr[i + 1]));
        for (int k = 0; k < vocab::word_count(instr[i + 2]); ++k) {
            at = {at.x + delta[0], at.y + delta[1]};
            path.cells.push_back(at);
        }
    }
    return path;
}

Observation observe(const Environment& env, Cell at) {
    if (!env.free_cell(at)) throw ValidationError("observe: cell is blocked or out of bounds");
    Observation obs{};
    for (int d = 0; d < 4; ++d) {
        const auto delta = direction_delta(static_cast<Direction>(d));
        obs[static_cast<std::size_t>(d)] =
            env.blocked({at.x + delta[0], at.y + delta[1]}) ? 1.0 : 0.0;
    }
    obs[4] = static_cast<double>(at.x) / env.width;
    obs[5] = static_cast<double>(at.y) / env.height;
    return obs;
}

std::string tokens_to_text(const Instruction& instr) {
    std::string out;
    for (std::size_t i = 0; i < instr.size(); ++i) {
        if (i > 0) out += ' ';
        out += vocab::word(instr[i]);
    }
    return out;
}

Instruction text_to_tokens(std::string_view text) {
    Instruction out;
    std::istringstream in{std::string(text)};
    std::string w;
    while (in >> w) out.push_back(vocab::token(w));
    return out;
}

} // namespace fedvln
