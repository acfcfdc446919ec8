#include "fedvln/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "fedvln/errors.hpp"

namespace fedvln {

namespace {

constexpr std::size_t kMagicLen = 9;

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
public:
    Reader(std::string bytes, std::string path)
        : bytes_(std::move(bytes)), path_(std::move(path)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint32_t u32() {
        const char* p = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        const char* p = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str(std::size_t n) { return std::string(take(n), n); }

    [[noreturn]] void fail(const std::string& why) const {
        throw MissingArtifactError("checkpoint " + path_ + ": " + why);
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    const std::string& bytes() const { return bytes_; }

private:
    const char* take(std::size_t n) {
        if (pos_ + n > bytes_.size()) fail("truncated");
        const char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::string bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

void write_file(const std::string& path, const std::string& body) {
    std::string out = body;
    put_u64(out, fnv1a(body));
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("checkpoint: cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("checkpoint: short write to " + path);
}

Reader open_checked(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingArtifactError("checkpoint " + path + ": cannot read");
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r(std::move(bytes), path);
    if (r.bytes().size() < kMagicLen + 1 + 8) r.fail("too small");
    const std::string body = r.bytes().substr(0, r.bytes().size() - 8);
    if (r.str(kMagicLen) != std::string(kCheckpointMagic, kMagicLen)) r.fail("bad magic");
    Reader tail(r.bytes().substr(r.bytes().size() - 8), path);
    if (tail.u64() != fnv1a(body)) r.fail("checksum mismatch");
    return r; // positioned after the magic
}

void put_params(std::string& out, const ParamVector& params) {
    put_u64(out, params.size());
    for (double v : params) put_f64(out, v);
}

ParamVector read_params(Reader& r) {
    const std::uint64_t n = r.u64();
    if (r.remaining() != n * 8 + 8) r.fail("payload size mismatch");
    ParamVector params(n);
    for (auto& v : params) v = r.f64();
    return params;
}

} // namespace

void save_agent_checkpoint(const std::string& path, const AgentParams& agent) {
    std::string out(kCheckpointMagic, kMagicLen);
    put_u8(out, static_cast<std::uint8_t>(ModelKind::Agent));
    put_u32(out, static_cast<std::uint32_t>(agent.dims.vocab));
    put_u32(out, static_cast<std::uint32_t>(agent.dims.embed));
    put_u32(out, static_cast<std::uint32_t>(agent.dims.hidden));
    put_u32(out, static_cast<std::uint32_t>(agent.spec.segments().size()));
    for (const Segment& s : agent.spec.segments()) {
        put_u32(out, static_cast<std::uint32_t>(s.name.size()));
        out += s.name;
        put_u64(out, s.offset);
        put_u64(out, s.length);
    }
    put_params(out, agent.params);
    write_file(path, out);
}

void save_speaker_checkpoint(const std::string& path, const SpeakerParams& speaker) {
    std::string out(kCheckpointMagic, kMagicLen);
    put_u8(out, static_cast<std::uint8_t>(ModelKind::Speaker));
    put_u32(out, static_cast<std::uint32_t>(speaker.dims.vocab));
    put_u32(out, 0); // no partition table
    put_params(out, speaker.params);
    write_file(path, out);
}

ModelKind checkpoint_kind(const std::string& path) {
    Reader r = open_checked(path);
    const std::uint8_t kind = r.u8();
    if (kind > static_cast<std::uint8_t>(ModelKind::Speaker)) r.fail("unknown model kind");
    return static_cast<ModelKind>(kind);
}

AgentParams load_agent_checkpoint(const std::string& path) {
    Reader r = open_checked(path);
    if (r.u8() != static_cast<std::uint8_t>(ModelKind::Agent))
        r.fail("not a navigation agent checkpoint");
    ModelDims dims;
    dims.vocab = static_cast<int>(r.u32());
    dims.embed = static_cast<int>(r.u32());
    dims.hidden = static_cast<int>(r.u32());
    const std::uint32_t nsegs = r.u32();
    std::vector<Segment> segments;
    segments.reserve(nsegs);
    for (std::uint32_t i = 0; i < nsegs; ++i) {
        Segment s;
        s.name = r.str(r.u32());
        s.offset = r.u64();
        s.length = r.u64();
        segments.push_back(std::move(s));
    }
    AgentParams agent;
    agent.dims = dims;
    try {
        agent.spec = PartitionSpec(segments);
    } catch (const Error&) {
        r.fail("inconsistent partition table");
    }
    agent.params = read_params(r);
    if (agent.params.size() != agent.spec.total_length()) r.fail("partition/payload mismatch");
    if (agent.spec != agent_partition(dims)) r.fail("partition does not match dims");
    return agent;
}

SpeakerParams load_speaker_checkpoint(const std::string& path) {
    Reader r = open_checked(path);
    if (r.u8() != static_cast<std::uint8_t>(ModelKind::Speaker))
        r.fail("not a speaker checkpoint");
    SpeakerDims dims;
    dims.vocab = static_cast<int>(r.u32());
    if (r.u32() != 0) r.fail("unexpected partition table");
    SpeakerParams speaker{dims, read_params(r)};
    if (speaker.params.size() !=
        static_cast<std::size_t>(dims.vocab) * kSpeakerFeatures + static_cast<std::size_t>(dims.vocab))
        r.fail("payload does not match dims");
    return speaker;
}

} // namespace fedvln
