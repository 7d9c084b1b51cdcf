#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "coach/core/error.hpp"
#include "coach/nn/tensor.hpp"

namespace coach::rupture {

class RuptureError : public Error {
 public:
  using Error::Error;
};

enum class Modality { Facial, Audio };

inline constexpr std::size_t kFacialWidth = 35;
inline constexpr std::size_t kAudioWidth = 25;
inline constexpr int kWindowSeconds = 10;
inline constexpr int kOverlapSeconds = 3;

constexpr std::size_t width_of(Modality m) { return m == Modality::Facial ? kFacialWidth : kAudioWidth; }
std::string_view to_string(Modality m);

enum class Label : int { NoRupture = 0, Rupture = 1 };

/// Time-stamped feature vectors of one subject and one modality.
struct FeatureStream {
  Modality modality = Modality::Facial;
  std::string subject_id;
  std::vector<double> timestamps;  // seconds, strictly increasing
  std::vector<double> values;      // timestamps.size() x width, row-major

  std::size_t width() const { return width_of(modality); }
  std::size_t size() const { return timestamps.size(); }
  std::span<const double> frame(std::size_t i) const {
    return std::span<const double>(values).subspan(i * width(), width());
  }

  void append(double t, std::span<const double> frame);
  void validate() const;
};

/// One vector per whole second between the first and last sample, taken from
/// the latest sample at or before that second.
FeatureStream resample_1hz(const FeatureStream& stream);

struct FeatureWindow {
  nn::Sequence matrix;  // kWindowSeconds x width
  Label label = Label::NoRupture;
  std::string subject_id;
  int start_s = 0;
};

/// Windows of `window_s` steps with stride window_s - overlap_s over a 1 Hz
/// stream. Streams shorter than one window give no windows (and a warning).
std::vector<FeatureWindow> make_windows(const FeatureStream& at_1hz, int window_s = kWindowSeconds,
                                        int overlap_s = kOverlapSeconds);

/// floor((L - window) / stride) + 1 for L >= window, else 0.
std::size_t window_count(std::size_t length, int window_s = kWindowSeconds,
                         int overlap_s = kOverlapSeconds);

/// Per-timestep concatenation, facial block first (10 x 60).
FeatureWindow early_fusion_windows(const FeatureWindow& facial, const FeatureWindow& audio);

// Label table keyed by (subject_id, t_start).
using LabelTable = std::map<std::pair<std::string, int>, Label>;

// --- CSV ------------------------------------------------------------------
// Streams: subject_id,t_seconds,f_0..f_{w-1}   Labels: subject_id,t_start,label

std::vector<FeatureStream> read_streams_csv(const std::filesystem::path& path, Modality modality);
void write_streams_csv(const std::filesystem::path& path, const std::vector<FeatureStream>& streams);
LabelTable read_labels_csv(const std::filesystem::path& path);
void write_labels_csv(const std::filesystem::path& path, const LabelTable& labels);

}  // namespace coach::rupture
