#pragma once

#include <vector>

#include "coach/sim/coachee.hpp"

namespace coach::sim {

struct CalibrationStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  double median = 0.0;
  std::size_t count = 0;

  bool operator==(const CalibrationStats&) const = default;
};

CalibrationStats calibration_stats(std::span<const double> rewards);

struct CorpusConfig {
  std::size_t sessions_per_profile = 19;
  int turn_limit = 8;
  RewardConfig reward;
  std::uint64_t seed = 0;
};

struct Corpus {
  std::vector<Transition> transitions;
  std::vector<RewardComponents> components;  // parallel to transitions
  StateNormalizer normalizer;                // fitted to the corpus answers
  CalibrationStats calibration;
};

/// Sessions under a uniform-random action policy. Durations are normalised
/// with statistics of the corpus itself, which become the reference stats.
Corpus generate_corpus(std::span<const CoacheeProfile> profiles, const CorpusConfig& config);

/// 5 profiles x 19 sessions x 8 turns.
Corpus default_corpus(std::uint64_t seed = 0);

}  // namespace coach::sim
