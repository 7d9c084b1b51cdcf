#include "coach/rupture/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace coach::rupture {

namespace {

bool in_episode(double t, const std::vector<std::pair<double, double>>& eps) {
  return std::any_of(eps.begin(), eps.end(), [t](const auto& e) { return t >= e.first && t < e.second; });
}

FeatureStream make_stream(Modality m, const std::string& id, double duration, double hz, double shift,
                          const std::vector<double>& offset,
                          const std::vector<std::pair<double, double>>& eps, std::mt19937_64& rng) {
  FeatureStream s{m, id, {}, {}};
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(0.8, 1.2);
  std::vector<double> frame(s.width());
  for (double t = 0.0; t <= duration; t += jitter(rng) / hz) {
    const bool ir = in_episode(t, eps);
    for (std::size_t f = 0; f < frame.size(); ++f) {
      const double sign = f % 2 == 0 ? 1.0 : -1.0;
      frame[f] = offset[f] + noise(rng) + (ir ? sign * shift : 0.0);
    }
    s.append(t, frame);
  }
  return s;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticConfig& c) {
  if (c.subjects < 1 || c.min_duration_s < kWindowSeconds || c.max_duration_s < c.min_duration_s ||
      c.facial_hz <= 0.0 || c.audio_hz <= 0.0 || c.max_episode_s < c.min_episode_s) {
    throw RuptureError("invalid synthetic corpus configuration");
  }
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> duration(c.min_duration_s, c.max_duration_s);
  std::uniform_real_distribution<double> ep_len(c.min_episode_s, c.max_episode_s);
  std::normal_distribution<double> offset(0.0, c.subject_offset_std);
  const int ir_free = static_cast<int>(std::lround(c.ir_free_fraction * c.subjects));

  SyntheticCorpus out;
  for (int i = 0; i < c.subjects; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "S%03d", i + 1);
    const double dur = duration(rng);
    std::vector<std::pair<double, double>> eps;
    if (i >= ir_free) {
      // episodes spread over equal slices of the session
      const double slice = dur / std::max(1, c.episodes_per_subject);
      for (int e = 0; e < c.episodes_per_subject; ++e) {
        const double len = std::min(ep_len(rng), slice * 0.8);
        std::uniform_real_distribution<double> start(e * slice, (e + 1) * slice - len);
        const double s = start(rng);
        eps.emplace_back(s, s + len);
      }
    }
    std::vector<double> fo(kFacialWidth), ao(kAudioWidth);
    for (double& v : fo) v = offset(rng);
    for (double& v : ao) v = offset(rng);
    out.facial.push_back(make_stream(Modality::Facial, id, dur, c.facial_hz, c.facial_shift, fo, eps, rng));
    out.audio.push_back(make_stream(Modality::Audio, id, dur, c.audio_hz, c.audio_shift, ao, eps, rng));

    const int stride = kWindowSeconds - kOverlapSeconds;
    for (int start = 0; start + kWindowSeconds <= static_cast<int>(dur) + 1; start += stride) {
      double overlap = 0.0;
      for (const auto& [a, b] : eps) {
        overlap += std::max(0.0, std::min<double>(b, start + kWindowSeconds) - std::max<double>(a, start));
      }
      out.labels[{id, start}] = overlap >= c.min_ir_overlap_s ? Label::Rupture : Label::NoRupture;
    }
    out.episodes.push_back(std::move(eps));
  }
  return out;
}

}  // namespace coach::rupture
