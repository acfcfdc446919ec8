#pragma once

#include <cstdint>
#include <string>

#include "fedvln/vln_model.hpp"

namespace fedvln {

// Binary model snapshot, little-endian throughout:
//   magic "FVLNCKPT1" | kind u8 | dims u32[] | partition table | payload | fnv64
// Agent dims are vocab, embed, hidden; speaker dims are vocab alone. The
// partition table stores (name, offset, length) per segment; speakers have
// none. The payload is a u64 count followed by raw f64 values, and the
// trailing checksum is FNV-1a over every preceding byte.
inline constexpr char kCheckpointMagic[] = "FVLNCKPT1"; // 9 bytes on disk

enum class ModelKind : std::uint8_t { Agent = 0, Speaker = 1 };

void save_agent_checkpoint(const std::string& path, const AgentParams& agent);
void save_speaker_checkpoint(const std::string& path, const SpeakerParams& speaker);

// Kind probe; throws MissingArtifactError on unreadable or corrupt files.
ModelKind checkpoint_kind(const std::string& path);

// Full verification (magic, checksum, dims, partition consistency); a kind
// mismatch is also a MissingArtifactError since the caller named the wrong
// artifact.
AgentParams load_agent_checkpoint(const std::string& path);
SpeakerParams load_speaker_checkpoint(const std::string& path);

} // namespace fedvln
