#include "coach/reward/reward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace coach {

namespace {

double finite_mean(std::span<const double> xs, const char* what) {
  if (xs.empty()) throw RewardError(std::string("empty ") + what);
  double sum = 0.0;
  for (double x : xs) {
    if (!std::isfinite(x)) throw RewardError(std::string("non-finite value in ") + what);
    sum += x;
  }
  return sum / static_cast<double>(xs.size());
}

}  // namespace

BaselineValence calibrate_baseline(std::span<const double> valence_samples) {
  for (double v : valence_samples) {
    if (std::isfinite(v) && std::abs(v) > 1.0) {
      throw RewardError("baseline valence sample outside [-1, 1]: " + std::to_string(v));
    }
  }
  const double mean = finite_mean(valence_samples, "baseline valence samples");
  return {mean, static_cast<int>(valence_samples.size())};
}

double valence_deviation(std::span<const double> turn_samples, const BaselineValence& baseline,
                         double scale_fv) {
  if (!(scale_fv > 0.0)) throw RewardError("scale_fv must be positive");
  return scale_fv * (finite_mean(turn_samples, "turn valence samples") - baseline.value);
}

double normalized_speech_duration(double duration_s, const DurationStats& stats, double scale_sd,
                                  double clip) {
  if (!std::isfinite(duration_s) || duration_s < 0.0) {
    throw RewardError("speech duration must be finite and non-negative, got " +
                      std::to_string(duration_s));
  }
  if (!(stats.std_s > 0.0)) throw RewardError("duration stats std must be positive");
  if (!(clip > 0.0)) throw RewardError("clip must be positive");
  return std::clamp(scale_sd * (duration_s - stats.mean_s) / stats.std_s, -clip, clip);
}

RewardComponents compute_reward(double fv, double sd) {
  if (!std::isfinite(fv) || !std::isfinite(sd)) throw RewardError("non-finite reward component");
  return {fv, sd, fv + sd};
}

RewardComponents turn_reward(std::span<const double> turn_samples, const BaselineValence& baseline,
                             double speech_duration_s, const DurationStats& stats,
                             const RewardConfig& config) {
  return compute_reward(valence_deviation(turn_samples, baseline, config.scale_fv),
                        normalized_speech_duration(speech_duration_s, stats, config.scale_sd,
                                                   config.clip));
}

void validate(const RewardConfig& config) {
  if (!(config.scale_fv > 0.0) || !(config.scale_sd > 0.0) || !(config.clip > 0.0)) {
    throw RewardError("reward scales and clip must be positive");
  }
}

}  // namespace coach
