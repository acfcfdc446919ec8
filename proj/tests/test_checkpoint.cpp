#include <doctest.h>

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fedvln/checkpoint.hpp"
#include "fedvln/errors.hpp"
#include "fedvln/rng.hpp"
#include "fedvln/vln_model.hpp"

using namespace fedvln;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        const auto tick = std::chrono::steady_clock::now().time_since_epoch().count();
        path = fs::temp_directory_path() /
               ("fedvln-ckpt-" +
                std::to_string(SeededRng(static_cast<std::uint64_t>(tick)).next_u64()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::string& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace

TEST_CASE("agent checkpoints round-trip bit for bit") {
    TempDir tmp;
    const AgentParams agent = init_agent(ModelDims{vocab::kSize, 4, 8}, 77);
    const std::string path = tmp.file("agent.ckpt");
    save_agent_checkpoint(path, agent);

    CHECK(checkpoint_kind(path) == ModelKind::Agent);
    const AgentParams back = load_agent_checkpoint(path);
    CHECK(back.dims == agent.dims);
    CHECK(back.spec == agent.spec);
    REQUIRE(back.params.size() == agent.params.size());
    CHECK(std::memcmp(back.params.data(), agent.params.data(),
                      agent.params.size() * sizeof(double)) == 0);

    // Saving identical params twice yields identical bytes.
    const std::string again = tmp.file("agent2.ckpt");
    save_agent_checkpoint(again, agent);
    CHECK(slurp(path) == slurp(again));
}

TEST_CASE("speaker checkpoints round-trip bit for bit") {
    TempDir tmp;
    const SpeakerParams speaker = init_speaker(SpeakerDims{}, 78);
    const std::string path = tmp.file("speaker.ckpt");
    save_speaker_checkpoint(path, speaker);

    CHECK(checkpoint_kind(path) == ModelKind::Speaker);
    const SpeakerParams back = load_speaker_checkpoint(path);
    CHECK(back.dims == speaker.dims);
    REQUIRE(back.params.size() == speaker.params.size());
    CHECK(std::memcmp(back.params.data(), speaker.params.data(),
                      speaker.params.size() * sizeof(double)) == 0);
}

TEST_CASE("loading the wrong kind is a missing artifact") {
    TempDir tmp;
    const std::string agent_path = tmp.file("agent.ckpt");
    const std::string speaker_path = tmp.file("speaker.ckpt");
    save_agent_checkpoint(agent_path, init_agent(ModelDims{}, 1));
    save_speaker_checkpoint(speaker_path, init_speaker(SpeakerDims{}, 1));

    CHECK_THROWS_AS(load_agent_checkpoint(speaker_path), MissingArtifactError);
    CHECK_THROWS_AS(load_speaker_checkpoint(agent_path), MissingArtifactError);
}

TEST_CASE("damaged checkpoints never load") {
    TempDir tmp;
    const std::string path = tmp.file("agent.ckpt");
    save_agent_checkpoint(path, init_agent(ModelDims{}, 5));
    const std::vector<char> good = slurp(path);

    SUBCASE("missing file") {
        CHECK_THROWS_WITH_AS(load_agent_checkpoint(tmp.file("absent.ckpt")),
                             doctest::Contains("cannot read"), MissingArtifactError);
        CHECK_THROWS_AS(checkpoint_kind(tmp.file("absent.ckpt")), MissingArtifactError);
    }

    SUBCASE("flipped payload byte breaks the checksum") {
        std::vector<char> bad = good;
        bad[bad.size() / 2] = static_cast<char>(bad[bad.size() / 2] ^ 0x40);
        dump(path, bad);
        CHECK_THROWS_AS(load_agent_checkpoint(path), MissingArtifactError);
    }

    SUBCASE("flipped checksum byte") {
        std::vector<char> bad = good;
        bad.back() = static_cast<char>(bad.back() ^ 0x01);
        dump(path, bad);
        CHECK_THROWS_AS(load_agent_checkpoint(path), MissingArtifactError);
    }

    SUBCASE("truncated file") {
        std::vector<char> bad = good;
        bad.resize(bad.size() - 7);
        dump(path, bad);
        CHECK_THROWS_AS(load_agent_checkpoint(path), MissingArtifactError);
        bad.resize(4); // shorter than the magic
        dump(path, bad);
        CHECK_THROWS_AS(load_agent_checkpoint(path), MissingArtifactError);
        CHECK_THROWS_AS(checkpoint_kind(path), MissingArtifactError);
    }

    SUBCASE("foreign magic") {
        std::vector<char> bad = good;
        bad[0] = 'X';
        dump(path, bad);
        CHECK_THROWS_AS(load_agent_checkpoint(path), MissingArtifactError);
        CHECK_THROWS_AS(checkpoint_kind(path), MissingArtifactError);
    }

    SUBCASE("empty file") {
        dump(path, {});
        CHECK_THROWS_AS(load_agent_checkpoint(path), MissingArtifactError);
    }
}

TEST_CASE("unwritable destinations raise io errors") {
    CHECK_THROWS_AS(save_agent_checkpoint("/nonexistent/dir/agent.ckpt",
                                          init_agent(ModelDims{}, 1)),
                    IoError);
    CHECK_THROWS_AS(save_speaker_checkpoint("/nonexistent/dir/speaker.ckpt",
                                            init_speaker(SpeakerDims{}, 1)),
                    IoError);
}
