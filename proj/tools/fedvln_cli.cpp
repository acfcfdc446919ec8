// Command-line front end: dataset generation, agent/speaker training,
// augmentation, pre-exploration, evaluation, epoch sweeps, and report
// comparison over one output directory.
//
// Exit codes: 0 ok, 2 bad configuration or usage, 3 missing artifact,
// 4 any other failure.

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedvln/checkpoint.hpp"
#include "fedvln/config.hpp"
#include "fedvln/dataset_io.hpp"
#include "fedvln/errors.hpp"
#include "fedvln/experiment.hpp"
#include "fedvln/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fedvln;
using namespace fedvln::experiment;

namespace {

struct OutDirs {
    fs::path root, data, checkpoints, logs, reports;
};

OutDirs out_dirs(const std::string& root) {
    OutDirs d;
    d.root = root;
    d.data = d.root / "data";
    d.checkpoints = d.root / "checkpoints";
    d.logs = d.root / "logs";
    d.reports = d.root / "reports";
    fs::create_directories(d.root);
    return d;
}

// Exclusive advisory lock on the output directory for the span of a command.
class OutLock {
public:
    explicit OutLock(const fs::path& root) : path_(root / "fedvln.lock") {
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0)
            throw Error("output directory is locked by " + path_.string() +
                        "; remove the file if no other run is active");
        const std::string body = std::to_string(::getpid()) + "\n";
        if (::write(fd, body.data(), body.size()) < 0) { /* lock still holds */
        }
        ::close(fd);
    }
    ~OutLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    OutLock(const OutLock&) = delete;
    OutLock& operator=(const OutLock&) = delete;

private:
    fs::path path_;
};

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string eval_report_text(const EvalReport& r) {
    std::ostringstream s;
    s << "count " << r.count << '\n'
      << "sr " << fmt6(r.sr) << '\n'
      << "osr " << fmt6(r.osr) << '\n'
      << "spl " << fmt6(r.spl) << '\n'
      << "ne " << fmt6(r.ne) << '\n'
      << "ndtw " << fmt6(r.ndtw) << '\n'
      << "cls " << fmt6(r.cls) << '\n';
    return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    out << text;
    if (!out) throw IoError("cannot write " + path.string());
}

json round_json(const RoundRecord& r) {
    json j{{"round", r.round},
           {"participants", r.participants},
           {"mean_loss", r.mean_loss},
           {"cum_steps", r.cum_steps}};
    if (r.sr_seen) j["sr_seen"] = *r.sr_seen;
    if (r.sr_unseen) j["sr_unseen"] = *r.sr_unseen;
    return j;
}

json speaker_round_json(const SpeakerRoundRecord& r) {
    json j{{"round", r.round},
           {"participants", r.participants},
           {"mean_loss", r.mean_loss},
           {"cum_steps", r.cum_steps}};
    if (r.bleu_seen) j["bleu_seen"] = *r.bleu_seen;
    if (r.bleu_unseen) j["bleu_unseen"] = *r.bleu_unseen;
    return j;
}

void write_jsonl(const fs::path& path, const std::vector<json>& lines, bool append) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    for (const json& j : lines) out << j.dump() << '\n';
    if (!out) throw IoError("cannot write " + path.string());
}

// Reconstructs the resume point from a round log written by a previous run.
ResumePoint parse_resume_log(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("resume: cannot read " + path.string());
    ResumePoint rp;
    bool any = false;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw MissingArtifactError("resume: bad log line in " + path.string() + ": " +
                                       e.what());
        }
        any = true;
        rp.completed_rounds = j.at("round").get<int>();
        rp.cum_steps = j.at("cum_steps").get<std::uint64_t>();
        if (j.contains("sr_unseen")) {
            const double sr = j["sr_unseen"].get<double>();
            if (sr > rp.best_sr) {
                rp.best_sr = sr;
                rp.best_round = rp.completed_rounds;
            }
        }
    }
    if (!any) throw MissingArtifactError("resume: no completed rounds in " + path.string());
    return rp;
}

// Keys describing data already on disk; a config passed to a post-generation
// command may change phase knobs but must agree with these.
const std::map<std::string, std::string> dataset_shape(const RunConfig& c) {
    return {{"seen_envs", std::to_string(c.seen_envs)},
            {"unseen_envs", std::to_string(c.unseen_envs)},
            {"episodes_per_env", std::to_string(c.episodes_per_env)},
            {"val_seen_per_env", std::to_string(c.val_seen_per_env)},
            {"val_unseen_per_env", std::to_string(c.val_unseen_per_env)},
            {"env_width", std::to_string(c.env_width)},
            {"env_height", std::to_string(c.env_height)},
            {"obstacle_density", fmt6(c.obstacle_density)},
            {"min_moves", std::to_string(c.min_moves)},
            {"max_moves", std::to_string(c.max_moves)}};
}

RunConfig config_or_defaults(const std::string& path) {
    if (path.empty()) {
        RunConfig cfg;
        cfg.validate();
        return cfg;
    }
    return RunConfig::load(path);
}

// Loads the generated dataset; an explicit --config overrides phase knobs but
// must describe the same data.
Dataset load_run_dataset(const OutDirs& dirs, const std::string& config_path) {
    Dataset ds = [&] {
        try {
            return load_dataset(dirs.data.string());
        } catch (const MissingArtifactError& e) {
            throw MissingArtifactError(std::string(e.what()) + " (run gen-data first)");
        }
    }();
    if (!config_path.empty()) {
        RunConfig cfg = RunConfig::load(config_path);
        if (dataset_shape(cfg) != dataset_shape(ds.config))
            throw ConfigError("config: dataset-shape keys differ from the generated data in " +
                              dirs.data.string());
        ds.config = cfg;
    }
    return ds;
}

struct CommonOpts {
    std::string config;
    std::string out;
    std::uint64_t seed = 42;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config, "config file (key = value lines)");
    cmd->add_option("--seed", o.seed, "run seed")->capture_default_str();
    cmd->add_option("--out", o.out, "output directory")->required();
}

// ---------------------------------------------------------------- gen-data

void cmd_gen_data(const CommonOpts& o) {
    const OutDirs dirs = out_dirs(o.out);
    OutLock lock(dirs.root);
    const RunConfig cfg = config_or_defaults(o.config);
    const Dataset ds = generate_dataset(cfg, o.seed);
    fs::create_directories(dirs.data);
    write_dataset(ds, dirs.data.string());
    std::cout << "environments " << ds.seen.size() << " seen, " << ds.unseen.size()
              << " unseen\n"
              << "episodes train " << ds.train.size() << ", seen_val " << ds.seen_val.size()
              << ", unseen_val " << ds.unseen_val.size() << '\n'
              << "wrote " << dirs.data.string() << '\n';
}

// -------------------------------------------------------------------- train

void cmd_train(const CommonOpts& o, const std::string& mode_s, const std::string& data_s,
               const std::string& speaker_path, bool resume_flag) {
    const OutDirs dirs = out_dirs(o.out);
    OutLock lock(dirs.root);
    fs::create_directories(dirs.checkpoints);
    fs::create_directories(dirs.logs);
    fs::create_directories(dirs.reports);

    const Mode mode = mode_from_name(mode_s);
    const DataKind kind = data_kind_from_name(data_s);
    const Dataset ds = load_run_dataset(dirs, o.config);

    std::optional<SpeakerParams> speaker;
    if (kind == DataKind::Augmented) {
        if (speaker_path.empty())
            throw ConfigError("train: --data augmented needs --speaker");
        try {
            speaker = load_speaker_checkpoint(speaker_path);
        } catch (const MissingArtifactError& e) {
            throw MissingArtifactError(std::string(e.what()) + " (run train-speaker first)");
        }
    }

    const std::string base = std::string("train_") + mode_s + "_" + data_s;
    const fs::path log_path = dirs.logs / (base + ".jsonl");
    const fs::path ck_final = dirs.checkpoints / ("agent_" + mode_s + "_" + data_s + "_final.ckpt");
    const fs::path ck_best = dirs.checkpoints / ("agent_" + mode_s + "_" + data_s + "_best.ckpt");

    ResumePoint rp;
    std::optional<AgentParams> start, best;
    if (resume_flag) {
        rp = parse_resume_log(log_path);
        start = load_agent_checkpoint(ck_final.string());
        if (start->dims != ds.config.model_dims())
            throw ConfigError("resume: checkpoint dimensions differ from the config");
        if (rp.best_sr >= 0.0) best = load_agent_checkpoint(ck_best.string());
    }

    const TrainOutcome out =
        train_agent(ds, o.seed, mode, kind, speaker ? &*speaker : nullptr, rp,
                    start ? &*start : nullptr, best ? &*best : nullptr);

    std::vector<json> lines;
    lines.reserve(out.run.log.size());
    for (const RoundRecord& r : out.run.log) lines.push_back(round_json(r));
    write_jsonl(log_path, lines, resume_flag);
    save_agent_checkpoint(ck_final.string(), out.run.final_model);
    save_agent_checkpoint(ck_best.string(), out.run.best_model);
    write_text(dirs.reports / (base + "_seen_val.txt"), eval_report_text(out.best_seen_val));
    write_text(dirs.reports / (base + "_unseen_val.txt"), eval_report_text(out.best_unseen_val));

    std::cout << base << " seed " << o.seed << ", best round " << out.run.best_round << '\n'
              << "seen_val:\n"
              << eval_report_text(out.best_seen_val) << "unseen_val:\n"
              << eval_report_text(out.best_unseen_val) << "wrote " << ck_final.string() << ", "
              << ck_best.string() << ", " << log_path.string() << '\n';
}

// ------------------------------------------------------------ train-speaker

double split_bleu(const SpeakerParams& speaker, std::span<const EnvEpisode> views) {
    std::vector<Instruction> cand, ref;
    cand.reserve(views.size());
    ref.reserve(views.size());
    for (const EnvEpisode& v : views) {
        cand.push_back(speaker_generate(speaker, *v.env, v.episode->path));
        ref.push_back(v.episode->instruction);
    }
    return corpus_bleu(cand, ref);
}

void cmd_train_speaker(const CommonOpts& o, const std::string& mode_s) {
    const OutDirs dirs = out_dirs(o.out);
    OutLock lock(dirs.root);
    fs::create_directories(dirs.checkpoints);
    fs::create_directories(dirs.logs);
    fs::create_directories(dirs.reports);

    const Mode mode = mode_from_name(mode_s);
    const Dataset ds = load_run_dataset(dirs, o.config);
    const SpeakerOutcome out = train_speaker(ds, o.seed, mode);

    const std::string base = std::string("train_speaker_") + mode_s;
    const fs::path log_path = dirs.logs / (base + ".jsonl");
    const fs::path ck_final = dirs.checkpoints / ("speaker_" + mode_s + "_final.ckpt");
    const fs::path ck_best = dirs.checkpoints / ("speaker_" + mode_s + "_best.ckpt");

    std::vector<json> lines;
    lines.reserve(out.run.log.size());
    for (const SpeakerRoundRecord& r : out.run.log) lines.push_back(speaker_round_json(r));
    write_jsonl(log_path, lines, false);
    save_speaker_checkpoint(ck_final.string(), out.run.final_model);
    save_speaker_checkpoint(ck_best.string(), out.run.best_model);

    const double bleu_seen = split_bleu(out.run.best_model, dataset_views(ds, ds.seen_val));
    const double bleu_unseen = split_bleu(out.run.best_model, dataset_views(ds, ds.unseen_val));
    std::ostringstream rep;
    rep << "best_round " << out.run.best_round << '\n'
        << "bleu_seen " << fmt6(bleu_seen) << '\n'
        << "bleu_unseen " << fmt6(bleu_unseen) << '\n';
    write_text(dirs.reports / (base + ".txt"), rep.str());

    std::cout << base << " seed " << o.seed << '\n'
              << rep.str() << "wrote " << ck_final.string() << ", " << ck_best.string() << ", "
              << log_path.string() << '\n';
}

// ------------------------------------------------------------------ augment

void cmd_augment(const CommonOpts& o, const std::string& speaker_path) {
    const OutDirs dirs = out_dirs(o.out);
    OutLock lock(dirs.root);
    const Dataset ds = load_run_dataset(dirs, o.config);
    const SpeakerParams speaker = load_speaker_checkpoint(speaker_path);
    const std::vector<Episode> aug = make_augmented(ds, speaker, o.seed);
    const fs::path path = dirs.data / "episodes_augmented.txt";
    write_episode_file(path.string(), aug);
    std::cout << "episodes " << aug.size() << '\n' << "wrote " << path.string() << '\n';
}

// -------------------------------------------------------------- pre-explore

void cmd_pre_explore(const CommonOpts& o, const std::string& strategy_s,
                     const std::string& agent_path, const std::string& speaker_path) {
    const OutDirs dirs = out_dirs(o.out);
    OutLock lock(dirs.root);
    fs::create_directories(dirs.checkpoints);
    fs::create_directories(dirs.logs);
    fs::create_directories(dirs.reports);

    const PreExploreStrategy strategy = strategy_from_name(strategy_s);
    const Dataset ds = load_run_dataset(dirs, o.config);
    const AgentParams agent = load_agent_checkpoint(agent_path);
    if (agent.dims != ds.config.model_dims())
        throw ConfigError("pre-explore: agent checkpoint dimensions differ from the config");
    const SpeakerParams speaker = load_speaker_checkpoint(speaker_path);

    const PreExploreOutcome out = pre_explore(ds, o.seed, strategy, agent, speaker);

    // Parameter fraction the strategy lets leave a client: everything for the
    // pooled and full-model variants, the shared segments for the partial
    // ones, nothing for isolated per-environment training.
    double shared = 0.0;
    switch (strategy) {
    case PreExploreStrategy::Centralized:
    case PreExploreStrategy::FedFull: shared = 1.0; break;
    case PreExploreStrategy::EnvBased: shared = 0.0; break;
    case PreExploreStrategy::FedLan:
    case PreExploreStrategy::FedLanSeen:
        shared = shared_fraction(agent.spec, ds.config.shared_segments);
        break;
    }

    const std::string base = std::string("pre_explore_") + strategy_s;
    const fs::path log_path = dirs.logs / (base + ".jsonl");
    std::vector<json> lines;
    lines.reserve(out.run.log.size());
    for (const RoundRecord& r : out.run.log) lines.push_back(round_json(r));
    write_jsonl(log_path, lines, false);

    std::vector<std::string> saved;
    for (std::size_t i = 0; i < out.run.models.size(); ++i) {
        const std::string name = strategy == PreExploreStrategy::Centralized
                                     ? base + "_model.ckpt"
                                     : base + "_client" + std::to_string(out.model_ids[i]) +
                                           ".ckpt";
        const fs::path path = dirs.checkpoints / name;
        save_agent_checkpoint(path.string(), out.run.models[i]);
        saved.push_back(path.string());
    }
    const std::string report =
        "shared_fraction " + fmt6(shared) + "\n" + eval_report_text(out.final_unseen_val);
    write_text(dirs.reports / (base + ".txt"), report);

    std::cout << base << " seed " << o.seed << '\n' << "unseen_val:\n" << report;
    for (const std::string& p : saved) std::cout << "wrote " << p << '\n';
    std::cout << "wrote " << log_path.string() << '\n';
}

// ----------------------------------------------------------------- evaluate

void cmd_evaluate(const CommonOpts& o, const std::string& ckpt, const std::string& split) {
    const OutDirs dirs = out_dirs(o.out);
    OutLock lock(dirs.root);
    fs::create_directories(dirs.reports);
    const Dataset ds = load_run_dataset(dirs, o.config);
    const std::span<const Episode> episodes = split == "train"      ? std::span(ds.train)
                                              : split == "seen_val" ? std::span(ds.seen_val)
                                                                    : std::span(ds.unseen_val);
    const std::vector<EnvEpisode> views = dataset_views(ds, episodes);

    std::string text;
    if (checkpoint_kind(ckpt) == ModelKind::Agent) {
        const AgentParams agent = load_agent_checkpoint(ckpt);
        text = eval_report_text(evaluate_agent(agent, views, ds.config.eval_options()));
    } else {
        const SpeakerParams speaker = load_speaker_checkpoint(ckpt);
        std::ostringstream s;
        s << "count " << views.size() << '\n'
          << "bleu " << fmt6(split_bleu(speaker, views)) << '\n';
        text = s.str();
    }
    const fs::path rep =
        dirs.reports / ("evaluate_" + fs::path(ckpt).stem().string() + "_" + split + ".txt");
    write_text(rep, text);
    std::cout << split << ":\n" << text << "wrote " << rep.string() << '\n';
}

// ------------------------------------------------------------- sweep-epochs

void cmd_sweep_epochs(const CommonOpts& o, const std::vector<int>& epochs,
                      const std::vector<double>& targets) {
    const OutDirs dirs = out_dirs(o.out);
    OutLock lock(dirs.root);
    fs::create_directories(dirs.logs);
    fs::create_directories(dirs.reports);
    const Dataset ds = load_run_dataset(dirs, o.config);

    const SweepOutcome out = sweep_local_epochs(ds, o.seed, epochs, targets);

    std::ostringstream rep;
    rep << "targets";
    for (double t : out.targets) rep << ' ' << fmt6(t);
    rep << '\n';
    for (const SweepRow& row : out.rows) {
        const fs::path log_path =
            dirs.logs / ("sweep_epochs_E" + std::to_string(row.local_epochs) + ".jsonl");
        std::vector<json> lines;
        lines.reserve(row.log.size());
        for (const RoundRecord& r : row.log) lines.push_back(round_json(r));
        write_jsonl(log_path, lines, false);

        rep << "epochs " << row.local_epochs << " rounds_to_target";
        for (const std::optional<int>& r : row.rounds_to_target)
            rep << ' ' << (r ? std::to_string(*r) : std::string("--"));
        rep << " best_sr_unseen " << fmt6(row.best_sr_unseen) << '\n';
    }
    write_text(dirs.reports / "sweep_epochs.txt", rep.str());
    std::cout << rep.str() << "wrote " << (dirs.reports / "sweep_epochs.txt").string() << '\n';
}

// ------------------------------------------------------------------ compare

std::map<std::string, std::string> parse_report(const fs::path& path) {
    std::ifstream in(path);
    std::map<std::string, std::string> kv;
    std::string key, value;
    while (in >> key >> value) kv[key] = value;
    return kv;
}

void cmd_compare(const CommonOpts& o) {
    const OutDirs dirs = out_dirs(o.out);
    OutLock lock(dirs.root);
    if (!fs::is_directory(dirs.reports))
        throw MissingArtifactError("compare: no reports under " + dirs.reports.string());

    struct Row {
        std::string run, split;
        std::map<std::string, std::string> kv;
    };
    std::vector<Row> rows;
    std::vector<fs::path> extra;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dirs.reports))
        if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());

    for (const fs::path& f : files) {
        const std::string stem = f.stem().string();
        if (stem.rfind("train_speaker_", 0) == 0 || stem == "sweep_epochs") {
            extra.push_back(f);
        } else if (stem.rfind("train_", 0) == 0) {
            const auto cut = stem.rfind("_seen_val") != std::string::npos
                                 ? stem.rfind("_seen_val")
                                 : stem.rfind("_unseen_val");
            if (cut == std::string::npos) continue;
            rows.push_back({stem.substr(0, cut), stem.substr(cut + 1), parse_report(f)});
        } else if (stem.rfind("pre_explore_", 0) == 0) {
            rows.push_back({stem, "unseen_val", parse_report(f)});
        }
    }
    if (rows.empty() && extra.empty())
        throw MissingArtifactError("compare: no reports under " + dirs.reports.string());

    std::ostringstream rep;
    const char* cols[] = {"count", "sr", "osr", "spl", "ne", "ndtw", "cls"};
    rep << std::left << std::setw(36) << "run" << std::setw(12) << "split";
    for (const char* c : cols) rep << std::setw(10) << c;
    rep << '\n';
    for (const Row& r : rows) {
        rep << std::left << std::setw(36) << r.run << std::setw(12) << r.split;
        for (const char* c : cols) {
            const auto it = r.kv.find(c);
            rep << std::setw(10) << (it == r.kv.end() ? "-" : it->second);
        }
        rep << '\n';
    }
    for (const fs::path& f : extra) {
        rep << '\n' << f.stem().string() << ":\n";
        std::ifstream in(f);
        rep << in.rdbuf();
    }
    write_text(dirs.reports / "compare.txt", rep.str());
    std::cout << rep.str() << "wrote " << (dirs.reports / "compare.txt").string() << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated instruction-following experiments on synthetic gridworlds"};
    app.require_subcommand(1);

    CommonOpts gen_o;
    CLI::App* gen = app.add_subcommand("gen-data", "generate a seeded dataset");
    add_common(gen, gen_o);
    gen->callback([&] { cmd_gen_data(gen_o); });

    CommonOpts train_o;
    std::string train_mode = "federated", train_data = "original", train_speaker_path;
    bool train_resume = false;
    CLI::App* train = app.add_subcommand("train", "train the navigation agent on seen data");
    add_common(train, train_o);
    train->add_option("--mode", train_mode, "training mode")
        ->check(CLI::IsMember({"federated", "centralized"}))
        ->capture_default_str();
    train->add_option("--data", train_data, "training data selection")
        ->check(CLI::IsMember({"original", "augmented"}))
        ->capture_default_str();
    train->add_option("--speaker", train_speaker_path,
                      "speaker checkpoint (required with --data augmented)");
    train->add_flag("--resume", train_resume, "continue from this run's saved state");
    train->callback(
        [&] { cmd_train(train_o, train_mode, train_data, train_speaker_path, train_resume); });

    CommonOpts spk_o;
    std::string spk_mode = "federated";
    CLI::App* spk = app.add_subcommand("train-speaker", "train the instruction speaker");
    add_common(spk, spk_o);
    spk->add_option("--mode", spk_mode, "training mode")
        ->check(CLI::IsMember({"federated", "centralized"}))
        ->capture_default_str();
    spk->callback([&] { cmd_train_speaker(spk_o, spk_mode); });

    CommonOpts aug_o;
    std::string aug_speaker;
    CLI::App* aug = app.add_subcommand("augment", "materialize speaker-labeled episodes");
    add_common(aug, aug_o);
    aug->add_option("--speaker", aug_speaker, "speaker checkpoint")->required();
    aug->callback([&] { cmd_augment(aug_o, aug_speaker); });

    CommonOpts pre_o;
    std::string pre_strategy, pre_agent, pre_speaker;
    CLI::App* pre = app.add_subcommand("pre-explore", "adapt to unseen environments");
    add_common(pre, pre_o);
    pre->add_option("--strategy", pre_strategy, "adaptation strategy")
        ->check(CLI::IsMember({"centralized", "env_based", "fed_full", "fed_lan", "fed_lan_seen"}))
        ->required();
    pre->add_option("--agent", pre_agent, "trained agent checkpoint")->required();
    pre->add_option("--speaker", pre_speaker, "speaker checkpoint")->required();
    pre->callback([&] { cmd_pre_explore(pre_o, pre_strategy, pre_agent, pre_speaker); });

    CommonOpts eval_o;
    std::string eval_ckpt, eval_split = "unseen_val";
    CLI::App* ev = app.add_subcommand("evaluate", "score a checkpoint on a dataset split");
    add_common(ev, eval_o);
    ev->add_option("--checkpoint", eval_ckpt, "agent or speaker checkpoint")->required();
    ev->add_option("--split", eval_split, "dataset split")
        ->check(CLI::IsMember({"train", "seen_val", "unseen_val"}))
        ->capture_default_str();
    ev->callback([&] { cmd_evaluate(eval_o, eval_ckpt, eval_split); });

    CommonOpts sweep_o;
    std::vector<int> sweep_epochs = {1, 3, 8};
    std::vector<double> sweep_targets = {0.25, 0.35, 0.45};
    CLI::App* sweep =
        app.add_subcommand("sweep-epochs", "compare local-epoch counts at fixed rounds");
    add_common(sweep, sweep_o);
    sweep->add_option("--epochs", sweep_epochs, "local epoch counts")
        ->delimiter(',')
        ->capture_default_str();
    sweep->add_option("--targets", sweep_targets, "unseen-validation SR targets")
        ->delimiter(',')
        ->capture_default_str();
    sweep->callback([&] { cmd_sweep_epochs(sweep_o, sweep_epochs, sweep_targets); });

    CommonOpts cmp_o;
    CLI::App* cmp = app.add_subcommand("compare", "tabulate the reports of previous commands");
    add_common(cmp, cmp_o);
    cmp->callback([&] { cmd_compare(cmp_o); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const MissingArtifactError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
