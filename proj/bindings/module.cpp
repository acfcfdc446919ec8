// Python bindings for the core operations: seeded rng, parameter-vector
// aggregation, gridworld data, the navigation agent and speaker, metrics,
// configs, datasets, checkpoints, and the experiment drivers.

#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedvln/checkpoint.hpp"
#include "fedvln/config.hpp"
#include "fedvln/dataset_io.hpp"
#include "fedvln/errors.hpp"
#include "fedvln/experiment.hpp"
#include "fedvln/metrics.hpp"

namespace py = pybind11;
using namespace fedvln;

namespace {

std::span<const Episode> split_of(const Dataset& ds, const std::string& name) {
    if (name == "train") return ds.train;
    if (name == "seen_val") return ds.seen_val;
    if (name == "unseen_val") return ds.unseen_val;
    throw ValidationError("unknown split '" + name + "'");
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Federated instruction-following experiments on synthetic gridworlds";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<MissingArtifactError>(m, "MissingArtifactError", PyExc_FileNotFoundError);

    // ---- seeded rng
    m.def("mix64", &mix64, py::arg("x"));
    m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("salt"));
    py::class_<SeededRng>(m, "SeededRng")
        .def(py::init<std::uint64_t>(), py::arg("seed"))
        .def("next_u64", &SeededRng::next_u64)
        .def("next_double", &SeededRng::next_double)
        .def("next_below", &SeededRng::next_below, py::arg("n"));

    // ---- parameter vectors and aggregation
    m.attr("LANG_ENCODER_SEGMENT") = kLangEncoderSegment;
    m.attr("TRAJ_ENCODER_SEGMENT") = kTrajEncoderSegment;
    m.attr("DECISION_HEAD_SEGMENT") = kDecisionHeadSegment;
    py::class_<Segment>(m, "Segment")
        .def(py::init([](std::string name, std::size_t offset, std::size_t length) {
                 return Segment{std::move(name), offset, length};
             }),
             py::arg("name"), py::arg("offset"), py::arg("length"))
        .def_readonly("name", &Segment::name)
        .def_readonly("offset", &Segment::offset)
        .def_readonly("length", &Segment::length)
        .def(py::self == py::self);
    py::class_<PartitionSpec>(m, "PartitionSpec")
        .def(py::init<std::vector<Segment>>(), py::arg("segments"))
        .def_property_readonly("segments", &PartitionSpec::segments)
        .def_property_readonly("total_length", &PartitionSpec::total_length)
        .def("has_segment", &PartitionSpec::has_segment, py::arg("name"))
        .def(py::self == py::self);
    py::class_<WeightedUpdate>(m, "WeightedUpdate")
        .def(py::init([](int client_id, ParamVector delta, std::uint64_t n) {
                 return WeightedUpdate{client_id, std::move(delta), n};
             }),
             py::arg("client_id"), py::arg("delta"), py::arg("sample_count"))
        .def_readwrite("client_id", &WeightedUpdate::client_id)
        .def_readwrite("delta", &WeightedUpdate::delta)
        .def_readwrite("sample_count", &WeightedUpdate::sample_count);
    m.def("aggregate", &aggregate, py::arg("base"), py::arg("updates"), py::arg("eta"));
    m.def("mask_to_segments", &mask_to_segments, py::arg("delta"), py::arg("spec"),
          py::arg("shared"));
    m.def("sample_participants", &sample_participants, py::arg("client_ids"), py::arg("rate"),
          py::arg("rng"));
    m.def("shared_fraction", &shared_fraction, py::arg("spec"), py::arg("shared"));

    // ---- gridworld
    py::class_<Cell>(m, "Cell")
        .def(py::init([](int x, int y) { return Cell{x, y}; }), py::arg("x"), py::arg("y"))
        .def_readwrite("x", &Cell::x)
        .def_readwrite("y", &Cell::y)
        .def(py::self == py::self)
        .def("__repr__",
             [](const Cell& c) {
                 return "Cell(" + std::to_string(c.x) + ", " + std::to_string(c.y) + ")";
             });
    py::enum_<Direction>(m, "Direction")
        .value("NORTH", Direction::North)
        .value("EAST", Direction::East)
        .value("SOUTH", Direction::South)
        .value("WEST", Direction::West);
    py::enum_<Split>(m, "Split").value("SEEN", Split::Seen).value("UNSEEN", Split::Unseen);
    py::class_<Environment>(m, "Environment")
        .def_readonly("id", &Environment::id)
        .def_readonly("width", &Environment::width)
        .def_readonly("height", &Environment::height)
        .def_readonly("obstacles", &Environment::obstacles)
        .def_readonly("split", &Environment::split)
        .def("in_bounds", &Environment::in_bounds, py::arg("cell"))
        .def("blocked", &Environment::blocked, py::arg("cell"))
        .def("free_cell", &Environment::free_cell, py::arg("cell"));
    py::class_<Path>(m, "Path")
        .def(py::init([](std::vector<Cell> cells) { return Path{std::move(cells)}; }),
             py::arg("cells"))
        .def_readonly("cells", &Path::cells)
        .def("moves", &Path::moves);
    py::class_<Episode>(m, "Episode")
        .def_readonly("env_id", &Episode::env_id)
        .def_readonly("start", &Episode::start)
        .def_readonly("goal", &Episode::goal)
        .def_readonly("path", &Episode::path)
        .def_readonly("instruction", &Episode::instruction);
    m.def("generate_environment", &generate_environment, py::arg("seed"), py::arg("width"),
          py::arg("height"), py::arg("density"));
    m.def("shortest_path", &shortest_path, py::arg("env"), py::arg("from_cell"),
          py::arg("to_cell"));
    m.def("geodesic_distance", &geodesic_distance, py::arg("env"), py::arg("from_cell"),
          py::arg("to_cell"));
    m.def("sample_episode", &sample_episode, py::arg("env"), py::arg("rng"),
          py::arg("min_moves"), py::arg("max_moves"));
    m.def("render_instruction", &render_instruction, py::arg("path"));
    m.def("is_well_formed", &is_well_formed, py::arg("instruction"));
    m.def("replay_instruction", &replay_instruction, py::arg("instruction"), py::arg("start"));
    m.def("observe", &observe, py::arg("env"), py::arg("at"));
    m.def("tokens_to_text", &tokens_to_text, py::arg("instruction"));
    m.def("text_to_tokens", &text_to_tokens, py::arg("text"));

    // ---- navigation agent and speaker
    py::class_<ModelDims>(m, "ModelDims")
        .def(py::init([](int vocab, int embed, int hidden) {
                 return ModelDims{vocab, embed, hidden};
             }),
             py::arg("vocab") = vocab::kSize, py::arg("embed") = 8, py::arg("hidden") = 16)
        .def_readwrite("vocab", &ModelDims::vocab)
        .def_readwrite("embed", &ModelDims::embed)
        .def_readwrite("hidden", &ModelDims::hidden)
        .def(py::self == py::self);
    m.def("agent_partition", &agent_partition, py::arg("dims"));
    py::class_<AgentParams>(m, "AgentParams")
        .def_readonly("dims", &AgentParams::dims)
        .def_readonly("spec", &AgentParams::spec)
        .def_readwrite("params", &AgentParams::params);
    m.def("init_agent", &init_agent, py::arg("dims"), py::arg("seed"));
    py::class_<LossGrad>(m, "LossGrad")
        .def_readonly("loss", &LossGrad::loss)
        .def_readonly("grad", &LossGrad::grad);
    m.def("imitation_loss_grad", &imitation_loss_grad, py::arg("agent"), py::arg("env"),
          py::arg("episode"));
    py::class_<Trajectory>(m, "Trajectory")
        .def_readonly("cells", &Trajectory::cells)
        .def_readonly("actions", &Trajectory::actions)
        .def_readonly("terminated", &Trajectory::terminated);
    m.def("rollout", &rollout, py::arg("agent"), py::arg("env"), py::arg("instruction"),
          py::arg("start"), py::arg("max_steps"));
    py::class_<SpeakerDims>(m, "SpeakerDims").def(py::init<>()).def_readwrite("vocab",
                                                                              &SpeakerDims::vocab);
    py::class_<SpeakerParams>(m, "SpeakerParams")
        .def_readonly("dims", &SpeakerParams::dims)
        .def_readwrite("params", &SpeakerParams::params);
    m.def("init_speaker", &init_speaker, py::arg("dims"), py::arg("seed"));
    m.def("speaker_generate", &speaker_generate, py::arg("speaker"), py::arg("env"),
          py::arg("path"));
    m.def("speaker_loss_grad", &speaker_loss_grad, py::arg("speaker"), py::arg("env"),
          py::arg("episode"));

    // ---- metrics
    py::class_<EvalOptions>(m, "EvalOptions")
        .def(py::init<>())
        .def_readwrite("d_success", &EvalOptions::d_success)
        .def_readwrite("d_th", &EvalOptions::d_th)
        .def_readwrite("max_steps", &EvalOptions::max_steps);
    py::class_<EvalReport>(m, "EvalReport")
        .def_readonly("count", &EvalReport::count)
        .def_readonly("sr", &EvalReport::sr)
        .def_readonly("osr", &EvalReport::osr)
        .def_readonly("spl", &EvalReport::spl)
        .def_readonly("ne", &EvalReport::ne)
        .def_readonly("ndtw", &EvalReport::ndtw)
        .def_readonly("cls", &EvalReport::cls);
    m.def(
        "ndtw",
        [](const std::vector<Cell>& reference, const std::vector<Cell>& predicted, double d_th) {
            return ndtw(reference, predicted, d_th);
        },
        py::arg("reference"), py::arg("predicted"), py::arg("d_th"));
    m.def(
        "cls",
        [](const std::vector<Cell>& reference, const std::vector<Cell>& predicted, double d_th) {
            return cls(reference, predicted, d_th);
        },
        py::arg("reference"), py::arg("predicted"), py::arg("d_th"));
    m.def("corpus_bleu", &corpus_bleu, py::arg("candidates"), py::arg("references"));

    // ---- config, dataset, checkpoints
    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_readwrite("eta", &RunConfig::eta)
        .def_readwrite("lambda_", &RunConfig::lambda)
        .def_readwrite("tau", &RunConfig::tau)
        .def_readwrite("r", &RunConfig::r)
        .def_readwrite("rounds", &RunConfig::rounds)
        .def_readwrite("tau1", &RunConfig::tau1)
        .def_readwrite("r1_unseen", &RunConfig::r1_unseen)
        .def_readwrite("r2_seen", &RunConfig::r2_seen)
        .def_readwrite("pre_rounds", &RunConfig::pre_rounds)
        .def_readwrite("shared_segments", &RunConfig::shared_segments)
        .def_readwrite("speaker_rounds", &RunConfig::speaker_rounds)
        .def_readwrite("speaker_tau", &RunConfig::speaker_tau)
        .def_readwrite("speaker_lambda", &RunConfig::speaker_lambda)
        .def_readwrite("seen_envs", &RunConfig::seen_envs)
        .def_readwrite("unseen_envs", &RunConfig::unseen_envs)
        .def_readwrite("episodes_per_env", &RunConfig::episodes_per_env)
        .def_readwrite("val_seen_per_env", &RunConfig::val_seen_per_env)
        .def_readwrite("val_unseen_per_env", &RunConfig::val_unseen_per_env)
        .def_readwrite("env_width", &RunConfig::env_width)
        .def_readwrite("env_height", &RunConfig::env_height)
        .def_readwrite("obstacle_density", &RunConfig::obstacle_density)
        .def_readwrite("min_moves", &RunConfig::min_moves)
        .def_readwrite("max_moves", &RunConfig::max_moves)
        .def_readwrite("augment_count", &RunConfig::augment_count)
        .def_readwrite("embed_dim", &RunConfig::embed_dim)
        .def_readwrite("hidden_dim", &RunConfig::hidden_dim)
        .def_readwrite("minibatch", &RunConfig::minibatch)
        .def_readwrite("d_success", &RunConfig::d_success)
        .def_readwrite("d_th", &RunConfig::d_th)
        .def_readwrite("max_steps_factor", &RunConfig::max_steps_factor)
        .def_static("load", &RunConfig::load, py::arg("path"))
        .def_static("parse", &RunConfig::parse, py::arg("text"), py::arg("origin"))
        .def("validate", &RunConfig::validate)
        .def("serialize", &RunConfig::serialize)
        .def("model_dims", &RunConfig::model_dims);
    py::class_<Dataset>(m, "Dataset")
        .def_readonly("config", &Dataset::config)
        .def_readonly("seed", &Dataset::seed)
        .def_readonly("seen", &Dataset::seen)
        .def_readonly("unseen", &Dataset::unseen)
        .def_readonly("train", &Dataset::train)
        .def_readonly("seen_val", &Dataset::seen_val)
        .def_readonly("unseen_val", &Dataset::unseen_val);
    m.def("generate_dataset", &generate_dataset, py::arg("config"), py::arg("seed"));
    m.def("write_dataset", &write_dataset, py::arg("dataset"), py::arg("dir"));
    m.def("load_dataset", &load_dataset, py::arg("dir"));
    py::enum_<ModelKind>(m, "ModelKind").value("AGENT", ModelKind::Agent).value("SPEAKER",
                                                                                ModelKind::Speaker);
    m.def("save_agent_checkpoint", &save_agent_checkpoint, py::arg("path"), py::arg("agent"));
    m.def("load_agent_checkpoint", &load_agent_checkpoint, py::arg("path"));
    m.def("save_speaker_checkpoint", &save_speaker_checkpoint, py::arg("path"),
          py::arg("speaker"));
    m.def("load_speaker_checkpoint", &load_speaker_checkpoint, py::arg("path"));
    m.def("checkpoint_kind", &checkpoint_kind, py::arg("path"));

    // ---- experiment drivers
    using namespace fedvln::experiment;
    py::enum_<Mode>(m, "Mode")
        .value("FEDERATED", Mode::Federated)
        .value("CENTRALIZED", Mode::Centralized);
    py::enum_<DataKind>(m, "DataKind")
        .value("ORIGINAL", DataKind::Original)
        .value("AUGMENTED", DataKind::Augmented);
    py::enum_<PreExploreStrategy>(m, "PreExploreStrategy")
        .value("CENTRALIZED", PreExploreStrategy::Centralized)
        .value("ENV_BASED", PreExploreStrategy::EnvBased)
        .value("FED_FULL", PreExploreStrategy::FedFull)
        .value("FED_LAN", PreExploreStrategy::FedLan)
        .value("FED_LAN_SEEN", PreExploreStrategy::FedLanSeen);
    py::class_<RoundRecord>(m, "RoundRecord")
        .def_readonly("round", &RoundRecord::round)
        .def_readonly("participants", &RoundRecord::participants)
        .def_readonly("mean_loss", &RoundRecord::mean_loss)
        .def_readonly("cum_steps", &RoundRecord::cum_steps)
        .def_readonly("sr_seen", &RoundRecord::sr_seen)
        .def_readonly("sr_unseen", &RoundRecord::sr_unseen);
    py::class_<FedRunResult>(m, "FedRunResult")
        .def_readonly("final_model", &FedRunResult::final_model)
        .def_readonly("best_model", &FedRunResult::best_model)
        .def_readonly("best_round", &FedRunResult::best_round)
        .def_readonly("log", &FedRunResult::log);
    py::class_<TrainOutcome>(m, "TrainOutcome")
        .def_readonly("run", &TrainOutcome::run)
        .def_readonly("best_seen_val", &TrainOutcome::best_seen_val)
        .def_readonly("best_unseen_val", &TrainOutcome::best_unseen_val);
    py::class_<SpeakerRoundRecord>(m, "SpeakerRoundRecord")
        .def_readonly("round", &SpeakerRoundRecord::round)
        .def_readonly("participants", &SpeakerRoundRecord::participants)
        .def_readonly("mean_loss", &SpeakerRoundRecord::mean_loss)
        .def_readonly("cum_steps", &SpeakerRoundRecord::cum_steps)
        .def_readonly("bleu_seen", &SpeakerRoundRecord::bleu_seen)
        .def_readonly("bleu_unseen", &SpeakerRoundRecord::bleu_unseen);
    py::class_<SpeakerRunResult>(m, "SpeakerRunResult")
        .def_readonly("final_model", &SpeakerRunResult::final_model)
        .def_readonly("best_model", &SpeakerRunResult::best_model)
        .def_readonly("best_round", &SpeakerRunResult::best_round)
        .def_readonly("log", &SpeakerRunResult::log);
    py::class_<SpeakerOutcome>(m, "SpeakerOutcome").def_readonly("run", &SpeakerOutcome::run);
    py::class_<PreExploreResult>(m, "PreExploreResult")
        .def_readonly("models", &PreExploreResult::models)
        .def_readonly("log", &PreExploreResult::log);
    py::class_<PreExploreOutcome>(m, "PreExploreOutcome")
        .def_readonly("run", &PreExploreOutcome::run)
        .def_readonly("model_ids", &PreExploreOutcome::model_ids)
        .def_readonly("final_unseen_val", &PreExploreOutcome::final_unseen_val);
    py::class_<SweepRow>(m, "SweepRow")
        .def_readonly("local_epochs", &SweepRow::local_epochs)
        .def_readonly("rounds_to_target", &SweepRow::rounds_to_target)
        .def_readonly("best_sr_unseen", &SweepRow::best_sr_unseen)
        .def_readonly("log", &SweepRow::log);
    py::class_<SweepOutcome>(m, "SweepOutcome")
        .def_readonly("targets", &SweepOutcome::targets)
        .def_readonly("rows", &SweepOutcome::rows);

    m.def(
        "train_agent",
        [](const Dataset& ds, std::uint64_t seed, Mode mode, DataKind kind,
           const SpeakerParams* speaker) {
            return train_agent(ds, seed, mode, kind, speaker);
        },
        py::arg("dataset"), py::arg("seed"), py::arg("mode"), py::arg("kind"),
        py::arg("speaker") = nullptr);
    m.def("train_speaker", &train_speaker, py::arg("dataset"), py::arg("seed"), py::arg("mode"));
    m.def("make_augmented", &make_augmented, py::arg("dataset"), py::arg("speaker"),
          py::arg("seed"));
    m.def("pre_explore", &pre_explore, py::arg("dataset"), py::arg("seed"), py::arg("strategy"),
          py::arg("start"), py::arg("speaker"));
    m.def("sweep_local_epochs", &sweep_local_epochs, py::arg("dataset"), py::arg("seed"),
          py::arg("epochs"), py::arg("targets"));
    m.def(
        "evaluate_agent",
        [](const AgentParams& agent, const Dataset& ds, const std::string& split) {
            const auto views = dataset_views(ds, split_of(ds, split));
            return evaluate_agent(agent, views, ds.config.eval_options());
        },
        py::arg("agent"), py::arg("dataset"), py::arg("split"));
}
