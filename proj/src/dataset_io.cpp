#include "fedvln/dataset_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedvln/errors.hpp"

namespace fedvln {

namespace {

// Stream salts; every phase of generation gets an independent child stream.
constexpr std::uint64_t kSeenEnvSalt = 101;
constexpr std::uint64_t kUnseenEnvSalt = 102;
constexpr std::uint64_t kTrainSalt = 103;
constexpr std::uint64_t kSeenValSalt = 104;
constexpr std::uint64_t kUnseenValSalt = 105;

std::string pad2(int i) { return (i < 10 ? "0" : "") + std::to_string(i); }

} // namespace

const Environment& Dataset::environment(std::string_view id) const {
    for (const Environment& e : seen)
        if (e.id == id) return e;
    for (const Environment& e : unseen)
        if (e.id == id) return e;
    throw ValidationError("dataset: unknown environment '" + std::string(id) + "'");
}

Dataset generate_dataset(const RunConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Dataset ds;
    ds.config = cfg;
    ds.seed = seed;

    auto make_envs = [&](int count, std::uint64_t salt, Split split, const char* prefix) {
        std::vector<Environment> envs;
        envs.reserve(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) {
            Environment env = generate_environment(
                derive_seed(derive_seed(seed, salt), static_cast<std::uint64_t>(i)),
                cfg.env_width, cfg.env_height, cfg.obstacle_density);
            env.id = std::string(prefix) + pad2(i);
            env.split = split;
            envs.push_back(std::move(env));
        }
        return envs;
    };
    ds.seen = make_envs(cfg.seen_envs, kSeenEnvSalt, Split::Seen, "seen-");
    ds.unseen = make_envs(cfg.unseen_envs, kUnseenEnvSalt, Split::Unseen, "unseen-");

    auto sample = [&](const std::vector<Environment>& envs, int per_env, std::uint64_t salt) {
        std::vector<Episode> eps;
        eps.reserve(envs.size() * static_cast<std::size_t>(per_env));
        for (std::size_t i = 0; i < envs.size(); ++i) {
            SeededRng rng(derive_seed(derive_seed(seed, salt), i));
            for (int k = 0; k < per_env; ++k)
                eps.push_back(sample_episode(envs[i], rng, cfg.min_moves, cfg.max_moves));
        }
        return eps;
    };
    ds.train = sample(ds.seen, cfg.episodes_per_env, kTrainSalt);
    ds.seen_val = sample(ds.seen, cfg.val_seen_per_env, kSeenValSalt);
    ds.unseen_val = sample(ds.unseen, cfg.val_unseen_per_env, kUnseenValSalt);
    return ds;
}

std::string format_environment(const Environment& env) {
    std::string out = env.id;
    out += ' ';
    out += std::to_string(env.width);
    out += ' ';
    out += std::to_string(env.height);
    out += ' ';
    out += env.split == Split::Seen ? "seen" : "unseen";
    for (int y = 0; y < env.height; ++y) {
        out += ' ';
        for (int x = 0; x < env.width; ++x)
            out += env.blocked({x, y}) ? '1' : '0';
    }
    return out;
}

Environment parse_environment(const std::string& line) {
    std::istringstream in(line);
    Environment env;
    std::string split;
    if (!(in >> env.id >> env.width >> env.height >> split))
        throw MissingArtifactError("envs: malformed line: " + line);
    if (split != "seen" && split != "unseen")
        throw MissingArtifactError("envs: bad split '" + split + "'");
    env.split = split == "seen" ? Split::Seen : Split::Unseen;
    if (env.width < 1 || env.height < 1)
        throw MissingArtifactError("envs: bad dimensions in: " + line);
    env.obstacles.assign(static_cast<std::size_t>(env.width) * env.height, 0);
    for (int y = 0; y < env.height; ++y) {
        std::string row;
        if (!(in >> row) || row.size() != static_cast<std::size_t>(env.width))
            throw MissingArtifactError("envs: bad row in: " + line);
        for (int x = 0; x < env.width; ++x) {
            if (row[static_cast<std::size_t>(x)] != '0' && row[static_cast<std::size_t>(x)] != '1')
                throw MissingArtifactError("envs: bad cell in: " + line);
            env.obstacles[static_cast<std::size_t>(y) * env.width + x] =
                row[static_cast<std::size_t>(x)] == '1';
        }
    }
    std::string extra;
    if (in >> extra) throw MissingArtifactError("envs: trailing data in: " + line);
    return env;
}

std::string format_episode(const Episode& ep) {
    std::ostringstream out;
    out << ep.env_id << ' ' << ep.start.x << ' ' << ep.start.y << ' ' << ep.goal.x << ' '
        << ep.goal.y << ' ' << ep.path.cells.size();
    for (const Cell& c : ep.path.cells) out << ' ' << c.x << ' ' << c.y;
    out << ' ' << ep.instruction.size();
    for (int t : ep.instruction) out << ' ' << vocab::word(t);
    return out.str();
}

Episode parse_episode(const std::string& line) {
    std::istringstream in(line);
    Episode ep;
    std::size_t ncells = 0;
    if (!(in >> ep.env_id >> ep.start.x >> ep.start.y >> ep.goal.x >> ep.goal.y >> ncells))
        throw MissingArtifactError("episodes: malformed line: " + line);
    ep.path.cells.resize(ncells);
    for (Cell& c : ep.path.cells)
        if (!(in >> c.x >> c.y))
            throw MissingArtifactError("episodes: truncated path in: " + line);
    std::size_t ntokens = 0;
    if (!(in >> ntokens)) throw MissingArtifactError("episodes: missing instruction in: " + line);
    ep.instruction.reserve(ntokens);
    for (std::size_t i = 0; i < ntokens; ++i) {
        std::string w;
        if (!(in >> w)) throw MissingArtifactError("episodes: truncated instruction in: " + line);
        try {
            ep.instruction.push_back(vocab::token(w));
        } catch (const ValidationError&) {
            throw MissingArtifactError("episodes: unknown word '" + w + "' in: " + line);
        }
    }
    std::string extra;
    if (in >> extra) throw MissingArtifactError("episodes: trailing data in: " + line);
    return ep;
}

void write_episode_file(const std::string& path, const std::vector<Episode>& episodes) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("dataset: cannot write " + path);
    for (const Episode& ep : episodes) out << format_episode(ep) << '\n';
    if (!out) throw IoError("dataset: short write to " + path);
}

std::vector<Episode> read_episode_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("dataset: cannot read " + path);
    std::vector<Episode> eps;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        eps.push_back(parse_episode(line));
    }
    return eps;
}

void write_dataset(const Dataset& ds, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("dataset: cannot create " + dir + ": " + ec.message());

    const auto file = [&dir](const char* name) {
        return (std::filesystem::path(dir) / name).string();
    };
    {
        std::ofstream out(file("envs.txt"), std::ios::trunc);
        if (!out) throw IoError("dataset: cannot write envs.txt under " + dir);
        for (const Environment& e : ds.seen) out << format_environment(e) << '\n';
        for (const Environment& e : ds.unseen) out << format_environment(e) << '\n';
        if (!out) throw IoError("dataset: short write to envs.txt under " + dir);
    }
    write_episode_file(file("episodes_train.txt"), ds.train);
    write_episode_file(file("episodes_seen_val.txt"), ds.seen_val);
    write_episode_file(file("episodes_unseen_val.txt"), ds.unseen_val);
    {
        std::ofstream out(file("manifest.txt"), std::ios::trunc);
        if (!out) throw IoError("dataset: cannot write manifest.txt under " + dir);
        out << "seed = " << ds.seed << '\n' << ds.config.serialize();
        if (!out) throw IoError("dataset: short write to manifest.txt under " + dir);
    }
}

Dataset load_dataset(const std::string& dir) {
    const auto file = [&dir](const char* name) {
        return (std::filesystem::path(dir) / name).string();
    };
    Dataset ds;
    {
        std::ifstream in(file("manifest.txt"));
        if (!in) throw MissingArtifactError("dataset: no manifest.txt under " + dir);
        std::string first;
        if (!std::getline(in, first) || first.rfind("seed = ", 0) != 0)
            throw MissingArtifactError("dataset: manifest.txt must start with 'seed = '");
        try {
            ds.seed = std::stoull(first.substr(7));
        } catch (const std::exception&) {
            throw MissingArtifactError("dataset: bad seed in manifest.txt");
        }
        std::ostringstream rest;
        rest << in.rdbuf();
        try {
            ds.config = RunConfig::parse(rest.str(), file("manifest.txt"));
        } catch (const ConfigError& e) {
            throw MissingArtifactError(std::string("dataset: ") + e.what());
        }
    }
    {
        std::ifstream in(file("envs.txt"));
        if (!in) throw MissingArtifactError("dataset: no envs.txt under " + dir);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            Environment env = parse_environment(line);
            (env.split == Split::Seen ? ds.seen : ds.unseen).push_back(std::move(env));
        }
    }
    if (ds.seen.empty() || ds.unseen.empty())
        throw MissingArtifactError("dataset: envs.txt lists no seen or no unseen environments");

    ds.train = read_episode_file(file("episodes_train.txt"));
    ds.seen_val = read_episode_file(file("episodes_seen_val.txt"));
    ds.unseen_val = read_episode_file(file("episodes_unseen_val.txt"));
    for (const auto* eps : {&ds.train, &ds.seen_val, &ds.unseen_val})
        for (const Episode& ep : *eps)
            try {
                ds.environment(ep.env_id); // existence check
            } catch (const ValidationError& e) {
                throw MissingArtifactError(std::string("dataset: ") + e.what());
            }
    return ds;
}

} // namespace fedvln
