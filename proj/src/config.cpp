#include "fedvln/config.hpp"

#include <cmath>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "fedvln/errors.hpp"

namespace fedvln {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

int parse_int(const std::string& v, const std::string& key) {
    int out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ConfigError("config: bad integer for '" + key + "': " + v);
    return out;
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(out)) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for '" + key + "': " + v);
    }
}

std::vector<std::string> parse_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ',';
        out += items[i];
    }
    return out;
}

std::string format_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

// Field table shared by parse and serialize so the two cannot drift apart.
struct Field {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = [] {
        std::map<std::string, Field> f;
        auto add_int = [&f](const std::string& key, int RunConfig::* member) {
            f[key] = {[member](RunConfig& c, const std::string& v, const std::string& k) {
                          c.*member = parse_int(v, k);
                      },
                      [member](const RunConfig& c) { return std::to_string(c.*member); }};
        };
        auto add_double = [&f](const std::string& key, double RunConfig::* member) {
            f[key] = {[member](RunConfig& c, const std::string& v, const std::string& k) {
                          c.*member = parse_double(v, k);
                      },
                      [member](const RunConfig& c) { return format_double(c.*member); }};
        };
        add_double("eta", &RunConfig::eta);
        add_double("lambda", &RunConfig::lambda);
        add_int("tau", &RunConfig::tau);
        add_double("r", &RunConfig::r);
        add_int("rounds", &RunConfig::rounds);
        add_int("tau1", &RunConfig::tau1);
        add_double("r1_unseen", &RunConfig::r1_unseen);
        add_double("r2_seen", &RunConfig::r2_seen);
        add_int("pre_rounds", &RunConfig::pre_rounds);
        add_int("speaker_rounds", &RunConfig::speaker_rounds);
        add_int("speaker_tau", &RunConfig::speaker_tau);
        add_double("speaker_lambda", &RunConfig::speaker_lambda);
        add_int("seen_envs", &RunConfig::seen_envs);
        add_int("unseen_envs", &RunConfig::unseen_envs);
        add_int("episodes_per_env", &RunConfig::episodes_per_env);
        add_int("val_seen_per_env", &RunConfig::val_seen_per_env);
        add_int("val_unseen_per_env", &RunConfig::val_unseen_per_env);
        add_int("env_width", &RunConfig::env_width);
        add_int("env_height", &RunConfig::env_height);
        add_double("obstacle_density", &RunConfig::obstacle_density);
        add_int("min_moves", &RunConfig::min_moves);
        add_int("max_moves", &RunConfig::max_moves);
        add_int("augment_count", &RunConfig::augment_count);
        add_int("embed_dim", &RunConfig::embed_dim);
        add_int("hidden_dim", &RunConfig::hidden_dim);
        add_int("minibatch", &RunConfig::minibatch);
        add_double("d_success", &RunConfig::d_success);
        add_double("d_th", &RunConfig::d_th);
        add_int("max_steps_factor", &RunConfig::max_steps_factor);
        f["shared_segments"] = {
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.shared_segments = parse_list(v);
                if (c.shared_segments.empty())
                    throw ConfigError("config: '" + k + "' needs at least one segment");
            },
            [](const RunConfig& c) { return join(c.shared_segments); }};
        return f;
    }();
    return table;
}

} // namespace

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        const auto it = fields().find(key);
        if (it == fields().end())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" + key +
                              "'");
        it->second.set(cfg, value, key);
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

void RunConfig::validate() const {
    try {
        train_federation(0).validate();
        pre_explore_federation(0).validate();
        speaker_federation(0).validate();
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (seen_envs < 1 || unseen_envs < 1)
        throw ConfigError("config: need at least one seen and one unseen environment");
    if (episodes_per_env < 1 || val_seen_per_env < 1 || val_unseen_per_env < 1)
        throw ConfigError("config: episode counts must be >= 1");
    if (env_width < 4 || env_height < 4)
        throw ConfigError("config: environments must be at least 4x4");
    if (!(obstacle_density >= 0.0 && obstacle_density <= 0.4))
        throw ConfigError("config: obstacle_density must lie in [0, 0.4]");
    if (min_moves < 1 || max_moves < min_moves)
        throw ConfigError("config: need 1 <= min_moves <= max_moves");
    if (augment_count < 1) throw ConfigError("config: augment_count must be >= 1");
    if (embed_dim < 1 || hidden_dim < 1)
        throw ConfigError("config: model widths must be >= 1");
    if (!(d_success >= 0.0)) throw ConfigError("config: d_success must be >= 0");
    if (!(d_th > 0.0)) throw ConfigError("config: d_th must be positive");
    if (max_steps_factor < 1) throw ConfigError("config: max_steps_factor must be >= 1");
    if (pre_rounds < 1) throw ConfigError("config: pre_rounds must be >= 1");
    if (speaker_rounds < 1) throw ConfigError("config: speaker_rounds must be >= 1");
    for (const auto& name : shared_segments)
        if (name != kLangEncoderSegment && name != kTrajEncoderSegment &&
            name != kDecisionHeadSegment)
            throw ConfigError("config: unknown shared segment '" + name + "'");
}

std::string RunConfig::serialize() const {
    std::string out;
    for (const auto& [key, field] : fields()) out += key + " = " + field.get(*this) + "\n";
    return out;
}

ModelDims RunConfig::model_dims() const { return {vocab::kSize, embed_dim, hidden_dim}; }

EvalOptions RunConfig::eval_options() const { return {d_success, d_th, 0}; }

AugmentOptions RunConfig::augment_options() const {
    return {augment_count, min_moves, max_moves};
}

FederationConfig RunConfig::train_federation(std::uint64_t seed) const {
    FederationConfig f;
    f.seed = seed;
    f.rounds = rounds;
    f.eta = eta;
    f.lambda = lambda;
    f.tau = tau;
    f.tau1 = tau1;
    f.r = r;
    f.r1_unseen = r1_unseen;
    f.r2_seen = r2_seen;
    f.shared_segments = shared_segments;
    f.batch = minibatch;
    return f;
}

FederationConfig RunConfig::pre_explore_federation(std::uint64_t seed) const {
    FederationConfig f = train_federation(seed);
    f.rounds = pre_rounds;
    return f;
}

FederationConfig RunConfig::speaker_federation(std::uint64_t seed) const {
    FederationConfig f = train_federation(seed);
    f.rounds = speaker_rounds;
    f.tau = speaker_tau;
    f.lambda = speaker_lambda;
    return f;
}

} // namespace fedvln
