#pragma once

#include <span>

#include "coach/core/types.hpp"

namespace coach {

class RewardError : public Error {
 public:
  using Error::Error;
};

struct BaselineValence {
  double value = 0.0;
  int sample_count = 0;

  bool operator==(const BaselineValence&) const = default;
};

/// Turn reward split into its facial-valence and speech-duration parts.
/// `total` is always exactly `fv + sd`.
struct RewardComponents {
  double fv = 0.0;
  double sd = 0.0;
  double total = 0.0;

  bool operator==(const RewardComponents&) const = default;
};

struct RewardConfig {
  double scale_fv = 10.0;
  double scale_sd = 5.0;
  double clip = 15.0;
  DurationSource stats_source = DurationSource::ReferenceCorpus;

  bool operator==(const RewardConfig&) const = default;
};

/// Mean of the valence samples observed during the scripted introduction.
BaselineValence calibrate_baseline(std::span<const double> valence_samples);

/// FV_t = scale_fv * (mean(turn_samples) - baseline).
double valence_deviation(std::span<const double> turn_samples, const BaselineValence& baseline,
                         double scale_fv);

/// SD_t = clamp(scale_sd * z(duration), -clip, clip).
double normalized_speech_duration(double duration_s, const DurationStats& stats, double scale_sd,
                                  double clip);

RewardComponents compute_reward(double fv, double sd);

// Convenience: all three steps for one coachee answer.
RewardComponents turn_reward(std::span<const double> turn_samples, const BaselineValence& baseline,
                             double speech_duration_s, const DurationStats& stats,
                             const RewardConfig& config);

void validate(const RewardConfig& config);

}  // namespace coach
