#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jgs/harness.hpp"
#include "jgs/optim.hpp"
#include "jgs/scene_model.hpp"

namespace jgs {

// Binary container: magic "JGS1", format version, little-endian sections each
// framed as [4-char tag][u64 payload length][u32 CRC32][payload]. CRCs are
// verified on load and failures name the offending section. save/load round
// trips are bit-exact.
inline constexpr uint32_t kCheckpointVersion = 1;

uint32_t crc32(const void* data, std::size_t len);

struct Checkpoint {
    RunConfig config;
    SceneModel model;
    std::vector<std::vector<AdamState>> adam;  // [group][lane]; may be empty
    int64_t iteration = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

void save_bundle(const SceneBundle& bundle, const std::string& path);
SceneBundle load_bundle(const std::string& path);

// In-memory forms (used for byte-identity checks).
std::string checkpoint_bytes(const Checkpoint& ckpt);
std::string bundle_bytes(const SceneBundle& bundle);

}  // namespace jgs
