#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "coach/rupture/stream.hpp"

namespace coach::rupture {

/// Generator for corpora with planted class-conditional shifts: during IR
/// episodes every feature mean moves by +/- shift (sign alternates by feature).
struct SyntheticConfig {
  int subjects = 20;
  double min_duration_s = 80.0;
  double max_duration_s = 140.0;
  double ir_free_fraction = 0.2;  // subjects with no IR episode
  int episodes_per_subject = 2;
  double min_episode_s = 12.0;
  double max_episode_s = 25.0;
  double facial_hz = 5.0;
  double audio_hz = 4.0;
  double facial_shift = 0.35;
  double audio_shift = 1.5;
  double subject_offset_std = 0.3;
  double min_ir_overlap_s = 5.0;  // a window is IR when it overlaps an episode this long
  std::uint64_t seed = 0;
};

struct SyntheticCorpus {
  std::vector<FeatureStream> facial;
  std::vector<FeatureStream> audio;
  LabelTable labels;
  std::vector<std::vector<std::pair<double, double>>> episodes;  // per subject
};

SyntheticCorpus generate_synthetic(const SyntheticConfig& config);

}  // namespace coach::rupture
