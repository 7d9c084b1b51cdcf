#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "coach/store/codec.hpp"

namespace coach::store {

class CorruptionError : public StoreError {
 public:
  using StoreError::StoreError;
};

class VersionError : public StoreError {
 public:
  VersionError(std::uint32_t found, std::uint32_t supported);
  std::uint32_t found() const { return found_; }
  std::uint32_t supported() const { return supported_; }

 private:
  std::uint32_t found_, supported_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint32_t { Policy = 1, Classifier = 2 };

/// 64-bit FNV-1a.
std::uint64_t checksum(std::string_view bytes);

// Container layout (little endian):
//   magic "QTCOACH\0" | version u32 | kind u32 | payload length u64 | checksum u64 | payload
// payload = metadata length u64 | metadata JSON | parameter count u64 | float64 parameters
std::string encode_checkpoint(const policy::PolicyCheckpoint& ck);
policy::PolicyCheckpoint decode_checkpoint(std::string_view bytes);
std::string encode_classifier(const rupture::Classifier& c, rupture::ModelKind kind);
rupture::Classifier decode_classifier(std::string_view bytes, rupture::ModelKind* kind = nullptr);

/// Writes through a temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const policy::PolicyCheckpoint& ck);
policy::PolicyCheckpoint load_checkpoint(const std::filesystem::path& path);
void save_classifier(const std::filesystem::path& path, const rupture::Classifier& c, rupture::ModelKind kind);
rupture::Classifier load_classifier(const std::filesystem::path& path, rupture::ModelKind* kind = nullptr);

std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace coach::store
