#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "smoothcert/toy_model.hpp"

namespace smoothcert {

// Container layout shared by weights and policy checkpoints:
//   4-byte magic | u32 little-endian version | payload | u32 LE CRC32
// where the CRC covers everything before it. Loading verifies the magic,
// rejects versions newer than `max_version`, and fails on checksum
// mismatch, so truncation and bit rot surface as PersistenceError instead
// of a silent misparse.
void write_container(const std::filesystem::path& path,
                     const std::string& magic, std::uint32_t version,
                     const std::string& payload);

std::string read_container(const std::filesystem::path& path,
                           const std::string& magic,
                           std::uint32_t max_version,
                           std::uint32_t* version_out = nullptr);

inline constexpr std::uint32_t kWeightsVersion = 1;

// Toy-model weights ("SCW1"). Doubles are serialized with shortest
// round-trip formatting, so load(save(w)) == w bit-exactly.
void save_weights(const ToyModelWeights& weights,
                  const std::filesystem::path& path);
ToyModelWeights load_weights(const std::filesystem::path& path);

}  // namespace smoothcert
