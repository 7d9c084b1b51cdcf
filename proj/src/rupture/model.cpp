#include "coach/rupture/model.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "coach/nn/kernels.hpp"
#include "coach/nn/train.hpp"

namespace coach::rupture {

std::string_view to_string(ModelKind m) {
  switch (m) {
    case ModelKind::Lstm: return "lstm";
    case ModelKind::Gru: return "gru";
    case ModelKind::BiLstm: return "bilstm";
  }
  return "?";
}

std::string_view to_string(Fusion f) {
  switch (f) {
    case Fusion::Facial: return "facial";
    case Fusion::Audio: return "audio";
    case Fusion::Early: return "early";
    case Fusion::Late: return "late";
  }
  return "?";
}

ModelKind parse_model(std::string_view name) {
  for (auto m : {ModelKind::Lstm, ModelKind::Gru, ModelKind::BiLstm}) {
    if (to_string(m) == name) return m;
  }
  throw RuptureError("unknown model '" + std::string(name) + "' (expected lstm, gru or bilstm)");
}

Fusion parse_fusion(std::string_view name) {
  for (auto f : {Fusion::Facial, Fusion::Audio, Fusion::Early, Fusion::Late}) {
    if (to_string(f) == name) return f;
  }
  throw RuptureError("unknown fusion '" + std::string(name) +
                     "' (expected facial, audio, early or late)");
}

ClassifierConfig::ClassifierConfig() {
  train.learning_rate = 5e-3;
  train.batch_size = 32;
  train.epochs = 15;
}

nn::NetworkSpec classifier_spec(ModelKind kind, std::size_t in_width, std::size_t hidden,
                                std::uint64_t seed) {
  nn::NetworkSpec spec;
  spec.loss = nn::LossKind::SoftmaxCrossEntropy;
  spec.seed = seed;
  switch (kind) {
    case ModelKind::Lstm: spec.layers.push_back(nn::LayerSpec::lstm(in_width, hidden)); break;
    case ModelKind::Gru: spec.layers.push_back(nn::LayerSpec::gru(in_width, hidden)); break;
    case ModelKind::BiLstm: spec.layers.push_back(nn::LayerSpec::bilstm(in_width, hidden)); break;
  }
  spec.layers.push_back(nn::LayerSpec::last_step());
  const std::size_t width = kind == ModelKind::BiLstm ? 2 * hidden : hidden;
  spec.layers.push_back(nn::LayerSpec::dense(width, 2));
  return spec;
}

Classifier fit_classifier(ModelKind kind, const nn::Tensor3& windows, std::span<const Label> labels,
                          const ClassifierConfig& config, std::uint64_t seed) {
  if (windows.batch != labels.size()) throw RuptureError("windows and labels differ in length");
  if (windows.batch == 0) throw RuptureError("cannot fit a classifier on no windows");
  Classifier c;
  c.spec = classifier_spec(kind, windows.features, config.hidden, seed);
  c.norm = fit_norm(windows);
  nn::Dataset data{windows, {}};
  apply_norm(data.inputs, c.norm);
  for (Label l : labels) data.targets.push_back({static_cast<std::size_t>(l), 0.0});
  nn::TrainConfig tc = config.train;
  tc.shuffle_seed = seed;
  const nn::Network net(c.spec);
  c.params = nn::train(net, data, tc).params;
  return c;
}

namespace {

Prediction from_proba(std::span<const double> p) {
  Prediction out;
  out.p_rupture = p[1];
  out.label = p[1] > p[0] ? Label::Rupture : Label::NoRupture;
  out.confidence = std::max(p[0], p[1]);
  return out;
}

}  // namespace

std::vector<Prediction> predict(const Classifier& c, const nn::Tensor3& windows) {
  nn::Tensor3 x = windows;
  apply_norm(x, c.norm);
  const nn::Network net(c.spec);
  const nn::Tensor2 logits = nn::predict_batch(net, c.params, x);
  std::vector<Prediction> out;
  out.reserve(x.batch);
  for (std::size_t i = 0; i < x.batch; ++i) out.push_back(from_proba(nn::softmax(logits.row(i))));
  return out;
}

Prediction predict(const Classifier& c, const nn::SequenceView& window) {
  nn::Tensor3 x(1, window.time, window.features);
  std::copy(window.data.begin(), window.data.end(), x.data.begin());
  return predict(c, x).front();
}

Prediction late_fusion(const Prediction& facial, const Prediction& audio, TieBreak tie) {
  if (facial.confidence > audio.confidence) return facial;
  if (audio.confidence > facial.confidence) return audio;
  return tie == TieBreak::Audio ? audio : facial;
}

Prediction late_fusion_predict(const Classifier& facial_model, const Classifier& audio_model,
                               const FeatureWindow& facial_window, const FeatureWindow& audio_window,
                               TieBreak tie) {
  if (facial_window.subject_id != audio_window.subject_id ||
      facial_window.start_s != audio_window.start_s ||
      facial_window.matrix.time != audio_window.matrix.time) {
    throw RuptureError("late fusion needs aligned windows (same subject, start and length)");
  }
  return late_fusion(predict(facial_model, facial_window.matrix.view()),
                     predict(audio_model, audio_window.matrix.view()), tie);
}

nn::Tensor3 early_fusion(const nn::Tensor3& facial, const nn::Tensor3& audio) {
  if (facial.batch != audio.batch || facial.time != audio.time) {
    throw RuptureError("early fusion needs aligned window sets");
  }
  nn::Tensor3 out(facial.batch, facial.time, facial.features + audio.features);
  for (std::size_t b = 0; b < facial.batch; ++b) {
    for (std::size_t t = 0; t < facial.time; ++t) {
      for (std::size_t f = 0; f < facial.features; ++f) out.at(b, t, f) = facial.at(b, t, f);
      for (std::size_t f = 0; f < audio.features; ++f) {
        out.at(b, t, facial.features + f) = audio.at(b, t, f);
      }
    }
  }
  return out;
}

FoldMetrics compute_metrics(std::span<const Label> predictions, std::span<const Label> labels) {
  if (predictions.size() != labels.size()) {
    throw RuptureError("predictions and labels differ in length (" +
                       std::to_string(predictions.size()) + " vs " + std::to_string(labels.size()) + ")");
  }
  if (labels.empty()) throw RuptureError("cannot score an empty fold");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] == Label::Rupture, y = labels[i] == Label::Rupture;
    tp += p && y;
    fp += p && !y;
    fn += !p && y;
    tn += !p && !y;
  }
  FoldMetrics m;
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(labels.size());
  m.precision_defined = tp + fp > 0;
  m.recall_defined = tp + fn > 0;
  m.precision = m.precision_defined ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = m.recall_defined ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Label> labels_of(const std::vector<Prediction>& p) {
  std::vector<Label> out;
  out.reserve(p.size());
  for (const auto& x : p) out.push_back(x.label);
  return out;
}

FoldMetrics evaluate_fold(const RuptureDataset& train, const RuptureDataset& test, ModelKind model,
                          Fusion fusion, const CvConfig& config, std::uint64_t seed) {
  const auto& cc = config.classifier;
  std::vector<Label> pred;
  switch (fusion) {
    case Fusion::Facial:
      pred = labels_of(predict(fit_classifier(model, train.facial, train.labels, cc, seed), test.facial));
      break;
    case Fusion::Audio:
      pred = labels_of(predict(fit_classifier(model, train.audio, train.labels, cc, seed), test.audio));
      break;
    case Fusion::Early: {
      const auto c = fit_classifier(model, early_fusion(train.facial, train.audio), train.labels, cc, seed);
      pred = labels_of(predict(c, early_fusion(test.facial, test.audio)));
      break;
    }
    case Fusion::Late: {
      const auto pf = predict(fit_classifier(model, train.facial, train.labels, cc, seed), test.facial);
      const auto pa = predict(fit_classifier(model, train.audio, train.labels, cc, seed + 1), test.audio);
      for (std::size_t i = 0; i < pf.size(); ++i) pred.push_back(late_fusion(pf[i], pa[i], config.tie).label);
      break;
    }
  }
  return compute_metrics(pred, test.labels);
}

MetricSummary summarize(const std::vector<FoldRecord>& folds, double FoldMetrics::*field) {
  MetricSummary s;
  if (folds.empty()) return s;
  for (const auto& f : folds) s.mean += f.metrics.*field;
  s.mean /= static_cast<double>(folds.size());
  for (const auto& f : folds) s.std += (f.metrics.*field - s.mean) * (f.metrics.*field - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(folds.size()));
  return s;
}

}  // namespace

CvResult run_cv(const RuptureDataset& data, ModelKind model, Fusion fusion, const CvConfig& config) {
  data.validate();
  nn::validate(config.classifier.train);
  const auto splits = subject_folds(data.subjects, data.labels, config.folds, config.repeats, config.seed);

  CvResult result;
  result.model = model;
  result.fusion = fusion;
  result.label = std::string(to_string(model)) + "+" + std::string(to_string(fusion));
  result.folds.resize(splits.size());

  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(splits.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto& split = splits[static_cast<std::size_t>(i)];
      const auto seed = config.seed * 1000003ULL + static_cast<std::uint64_t>(i) * 7919ULL + 1;
      auto& rec = result.folds[static_cast<std::size_t>(i)];
      rec.repeat = split.repeat;
      rec.fold = split.fold;
      rec.test_subjects = split.test_subjects;
      rec.metrics = evaluate_fold(data.subset(split.train), data.subset(split.test), model, fusion,
                                  config, seed);
    } catch (...) {
#pragma omp critical(coach_cv_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  result.accuracy = summarize(result.folds, &FoldMetrics::accuracy);
  result.precision = summarize(result.folds, &FoldMetrics::precision);
  result.recall = summarize(result.folds, &FoldMetrics::recall);
  result.f1 = summarize(result.folds, &FoldMetrics::f1);
  return result;
}

std::vector<std::size_t> rank_by_precision(const std::vector<CvResult>& results) {
  std::vector<std::size_t> order(results.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return results[a].precision.mean > results[b].precision.mean;
  });
  return order;
}

// ---------------------------------------------------------------------------

namespace {

std::string pm(const MetricSummary& s) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(2) << s.mean << " ± " << s.std;
  return o.str();
}

}  // namespace

std::string cv_table(const std::vector<CvResult>& results) {
  std::ostringstream o;
  o << std::left << std::setw(10) << "Model" << std::setw(10) << "Fusion" << std::setw(16) << "Accuracy"
    << std::setw(16) << "Precision" << std::setw(16) << "Recall" << "F1\n";
  for (std::size_t i : rank_by_precision(results)) {
    const auto& r = results[i];
    // "±" is two bytes; pad by hand so columns line up in a terminal.
    auto cell = [](const std::string& s) { return s + std::string(s.size() < 17 ? 17 - s.size() : 1, ' '); };
    o << std::setw(10) << to_string(r.model) << std::setw(10) << to_string(r.fusion) << cell(pm(r.accuracy))
      << cell(pm(r.precision)) << cell(pm(r.recall)) << pm(r.f1) << '\n';
  }
  return o.str();
}

std::string cv_json(const std::vector<CvResult>& results) {
  using nlohmann::json;
  auto summary = [](const MetricSummary& s) { return json{{"mean", s.mean}, {"std", s.std}}; };
  json out = json::array();
  const auto order = rank_by_precision(results);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const auto& r = results[order[rank]];
    json folds = json::array();
    for (const auto& f : r.folds) {
      folds.push_back({{"repeat", f.repeat},
                       {"fold", f.fold},
                       {"accuracy", f.metrics.accuracy},
                       {"precision", f.metrics.precision},
                       {"recall", f.metrics.recall},
                       {"f1", f.metrics.f1},
                       {"precision_defined", f.metrics.precision_defined},
                       {"recall_defined", f.metrics.recall_defined},
                       {"test_subjects", f.test_subjects}});
    }
    out.push_back({{"rank", rank + 1},
                   {"label", r.label},
                   {"model", to_string(r.model)},
                   {"fusion", to_string(r.fusion)},
                   {"accuracy", summary(r.accuracy)},
                   {"precision", summary(r.precision)},
                   {"recall", summary(r.recall)},
                   {"f1", summary(r.f1)},
                   {"folds", folds}});
  }
  return out.dump(2);
}

std::string fold_csv(const CvResult& r) {
  std::ostringstream o;
  o << "repeat,fold,accuracy,precision,recall,f1,precision_defined,recall_defined\n"
    << std::setprecision(6);
  for (const auto& f : r.folds) {
    o << f.repeat << ',' << f.fold << ',' << f.metrics.accuracy << ',' << f.metrics.precision << ','
      << f.metrics.recall << ',' << f.metrics.f1 << ',' << f.metrics.precision_defined << ','
      << f.metrics.recall_defined << '\n';
  }
  return o.str();
}

}  // namespace coach::rupture
