#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "coach/rupture/stream.hpp"

namespace coach::rupture {

/// Index-aligned facial and audio windows with labels.
struct RuptureDataset {
  nn::Tensor3 facial;  // n x 10 x 35
  nn::Tensor3 audio;   // n x 10 x 25
  std::vector<Label> labels;
  std::vector<std::string> subjects;
  std::vector<int> starts;

  std::size_t size() const { return labels.size(); }
  std::array<std::size_t, 2> class_counts() const;  // {NoIR, IR}
  RuptureDataset subset(std::span<const std::size_t> indices) const;
  void validate() const;
};

/// Resamples, windows and aligns both modalities per subject. Windows present
/// in only one modality are dropped; every kept window must have a label.
RuptureDataset build_dataset(const std::vector<FeatureStream>& facial,
                             const std::vector<FeatureStream>& audio, const LabelTable& labels);

/// Per-feature statistics pooled over batch and time.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;  // 0 marks a constant feature, which maps to 0

  bool operator==(const NormStats&) const = default;
};

NormStats fit_norm(const nn::Tensor3& x, std::span<const std::size_t> indices);
NormStats fit_norm(const nn::Tensor3& x);
void apply_norm(nn::Tensor3& x, const NormStats& stats);

struct Normalized {
  nn::Tensor3 train;
  nn::Tensor3 test;
  NormStats stats;
};

/// Standardizes both sets with the training-set statistics.
Normalized znormalize(const nn::Tensor3& train, const nn::Tensor3& test);

/// NearMiss-1 score of each majority sample: mean Euclidean distance to its k
/// nearest minority samples. Rows are flattened windows.
std::vector<double> nearmiss_scores(const nn::Tensor2& rows, std::span<const std::size_t> majority,
                                    std::span<const std::size_t> minority, std::size_t k);
std::vector<double> nearmiss_scores_serial(const nn::Tensor2& rows,
                                           std::span<const std::size_t> majority,
                                           std::span<const std::size_t> minority, std::size_t k);

/// Indices (ascending) of the balanced subset: every minority sample plus the
/// |minority| majority samples with the lowest NearMiss-1 scores.
std::vector<std::size_t> nearmiss_undersample(const nn::Tensor2& rows, std::span<const Label> labels,
                                              std::size_t k = 3);

/// Balances the dataset with NearMiss-1 over flattened, jointly z-scored
/// facial+audio windows.
RuptureDataset undersample(const RuptureDataset& data, std::size_t k = 3);

/// Flattens each window of both modalities into one row (facial first).
nn::Tensor2 flatten_windows(const RuptureDataset& data);

struct Fold {
  int repeat = 0;
  int fold = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
};

/// Repeated subject-independent k-fold split. Subjects with at least one IR
/// window are dealt round-robin separately from IR-free ones, so each fold
/// keeps the share of IR-positive subjects.
std::vector<Fold> subject_folds(std::span<const std::string> subjects, std::span<const Label> labels,
                                int folds, int repeats, std::uint64_t seed);

}  // namespace coach::rupture
