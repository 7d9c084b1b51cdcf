#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coach/nn/network.hpp"
#include "coach/nn/optimizer.hpp"
#include "coach/rupture/dataset.hpp"

namespace coach::rupture {

enum class ModelKind { Lstm, Gru, BiLstm };
enum class Fusion { Facial, Audio, Early, Late };

std::string_view to_string(ModelKind m);
std::string_view to_string(Fusion f);
ModelKind parse_model(std::string_view name);
Fusion parse_fusion(std::string_view name);

struct ClassifierConfig {
  std::size_t hidden = 16;
  nn::TrainConfig train;

  ClassifierConfig();
  bool operator==(const ClassifierConfig&) const = default;
};

/// recurrent(in -> hidden) -> last step -> dense(2), softmax cross-entropy.
nn::NetworkSpec classifier_spec(ModelKind kind, std::size_t in_width, std::size_t hidden,
                                std::uint64_t seed);

/// A trained uni-modal (or early-fused) window classifier with the
/// normalization it was trained under.
struct Classifier {
  nn::NetworkSpec spec;
  std::vector<double> params;
  NormStats norm;
};

struct Prediction {
  Label label = Label::NoRupture;
  double confidence = 0.0;  // probability of `label`
  double p_rupture = 0.0;
};

Classifier fit_classifier(ModelKind kind, const nn::Tensor3& windows, std::span<const Label> labels,
                          const ClassifierConfig& config, std::uint64_t seed);

/// Predictions for raw (unnormalized) windows.
std::vector<Prediction> predict(const Classifier& c, const nn::Tensor3& windows);
Prediction predict(const Classifier& c, const nn::SequenceView& window);

enum class TieBreak { Audio, Facial };

/// Picks the modality whose predicted-class probability is higher.
Prediction late_fusion(const Prediction& facial, const Prediction& audio,
                       TieBreak tie = TieBreak::Audio);
Prediction late_fusion_predict(const Classifier& facial_model, const Classifier& audio_model,
                               const FeatureWindow& facial_window, const FeatureWindow& audio_window,
                               TieBreak tie = TieBreak::Audio);

/// Concatenates every aligned window pair (facial first).
nn::Tensor3 early_fusion(const nn::Tensor3& facial, const nn::Tensor3& audio);

struct FoldMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;
  bool recall_defined = true;
};

/// IR is the positive class. Undefined ratios are reported as 0 and flagged.
FoldMetrics compute_metrics(std::span<const Label> predictions, std::span<const Label> labels);

struct CvConfig {
  int folds = 5;
  int repeats = 10;
  std::uint64_t seed = 0;
  ClassifierConfig classifier;
  TieBreak tie = TieBreak::Audio;
};

struct FoldRecord {
  int repeat = 0;
  int fold = 0;
  FoldMetrics metrics;
  std::vector<std::string> test_subjects;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // population std over folds
};

struct CvResult {
  ModelKind model = ModelKind::BiLstm;
  Fusion fusion = Fusion::Late;
  std::string label;  // free-form tag, defaults to "<model>+<fusion>"
  std::vector<FoldRecord> folds;
  MetricSummary accuracy, precision, recall, f1;
};

/// Subject-independent repeated stratified CV; folds run in parallel, each
/// with its own seed derived from (config.seed, fold number).
CvResult run_cv(const RuptureDataset& data, ModelKind model, Fusion fusion, const CvConfig& config);

/// Indices of `results` by descending mean precision (stable).
std::vector<std::size_t> rank_by_precision(const std::vector<CvResult>& results);

std::string cv_table(const std::vector<CvResult>& results);
std::string cv_json(const std::vector<CvResult>& results);
std::string fold_csv(const CvResult& result);

}  // namespace coach::rupture
