#include "coach/rupture/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "coach/core/log.hpp"

namespace coach::rupture {

std::array<std::size_t, 2> RuptureDataset::class_counts() const {
  std::array<std::size_t, 2> counts{};
  for (Label l : labels) ++counts[static_cast<int>(l)];
  return counts;
}

void RuptureDataset::validate() const {
  const std::size_t n = labels.size();
  if (facial.batch != n || audio.batch != n || subjects.size() != n || starts.size() != n) {
    throw RuptureError("dataset modalities are not index-aligned");
  }
  if (n > 0 && (facial.features != kFacialWidth || audio.features != kAudioWidth ||
                facial.time != audio.time)) {
    throw RuptureError("dataset window shapes are inconsistent");
  }
}

namespace {

void copy_sample(const nn::Tensor3& src, std::size_t i, nn::Tensor3& dst, std::size_t j) {
  auto s = src.sample(i).data;
  std::copy(s.begin(), s.end(), dst.sample_data(j).begin());
}

}  // namespace

RuptureDataset RuptureDataset::subset(std::span<const std::size_t> indices) const {
  RuptureDataset out;
  out.facial = nn::Tensor3(indices.size(), facial.time, facial.features);
  out.audio = nn::Tensor3(indices.size(), audio.time, audio.features);
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const std::size_t i = indices[j];
    if (i >= size()) throw RuptureError("subset index out of range");
    copy_sample(facial, i, out.facial, j);
    copy_sample(audio, i, out.audio, j);
    out.labels.push_back(labels[i]);
    out.subjects.push_back(subjects[i]);
    out.starts.push_back(starts[i]);
  }
  return out;
}

RuptureDataset build_dataset(const std::vector<FeatureStream>& facial,
                             const std::vector<FeatureStream>& audio, const LabelTable& labels) {
  std::map<std::string, const FeatureStream*> audio_by_subject;
  for (const auto& s : audio) {
    if (s.modality != Modality::Audio) throw RuptureError("audio stream list holds a facial stream");
    audio_by_subject[s.subject_id] = &s;
  }
  std::vector<FeatureWindow> fw, aw;
  for (const auto& f : facial) {
    if (f.modality != Modality::Facial) throw RuptureError("facial stream list holds an audio stream");
    auto it = audio_by_subject.find(f.subject_id);
    if (it == audio_by_subject.end()) {
      log_warning("subject '" + f.subject_id + "' has no audio stream; skipped");
      continue;
    }
    auto fwin = make_windows(resample_1hz(f));
    auto awin = make_windows(resample_1hz(*it->second));
    std::map<int, std::size_t> audio_at;
    for (std::size_t i = 0; i < awin.size(); ++i) audio_at[awin[i].start_s] = i;
    for (auto& w : fwin) {
      auto a = audio_at.find(w.start_s);
      if (a == audio_at.end()) continue;
      auto l = labels.find({w.subject_id, w.start_s});
      if (l == labels.end()) {
        throw RuptureError("no label for subject '" + w.subject_id + "' window at " +
                           std::to_string(w.start_s) + " s");
      }
      w.label = l->second;
      awin[a->second].label = l->second;
      fw.push_back(std::move(w));
      aw.push_back(std::move(awin[a->second]));
    }
  }
  RuptureDataset d;
  const auto n = fw.size();
  d.facial = nn::Tensor3(n, kWindowSeconds, kFacialWidth);
  d.audio = nn::Tensor3(n, kWindowSeconds, kAudioWidth);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(fw[i].matrix.data.begin(), fw[i].matrix.data.end(), d.facial.sample_data(i).begin());
    std::copy(aw[i].matrix.data.begin(), aw[i].matrix.data.end(), d.audio.sample_data(i).begin());
    d.labels.push_back(fw[i].label);
    d.subjects.push_back(fw[i].subject_id);
    d.starts.push_back(fw[i].start_s);
  }
  return d;
}

// ---------------------------------------------------------------------------

NormStats fit_norm(const nn::Tensor3& x, std::span<const std::size_t> indices) {
  if (indices.empty()) throw RuptureError("cannot fit normalization on an empty training set");
  const std::size_t f = x.features;
  NormStats s{std::vector<double>(f, 0.0), std::vector<double>(f, 0.0)};
  const double count = static_cast<double>(indices.size() * x.time);
  for (std::size_t i : indices) {
    for (std::size_t t = 0; t < x.time; ++t) {
      for (std::size_t j = 0; j < f; ++j) s.mean[j] += x.at(i, t, j);
    }
  }
  for (double& m : s.mean) m /= count;
  for (std::size_t i : indices) {
    for (std::size_t t = 0; t < x.time; ++t) {
      for (std::size_t j = 0; j < f; ++j) {
        const double d = x.at(i, t, j) - s.mean[j];
        s.std[j] += d * d;
      }
    }
  }
  std::vector<std::size_t> constant;
  for (std::size_t j = 0; j < f; ++j) {
    s.std[j] = std::sqrt(s.std[j] / count);
    if (!(s.std[j] > 1e-12 * std::max(1.0, std::abs(s.mean[j])))) {
      s.std[j] = 0.0;
      constant.push_back(j);
    }
  }
  if (!constant.empty()) {
    std::string list;
    for (std::size_t j : constant) list += (list.empty() ? "" : ",") + std::to_string(j);
    log_warning("constant feature(s) " + list + " in training set; normalized to 0");
  }
  return s;
}

NormStats fit_norm(const nn::Tensor3& x) {
  std::vector<std::size_t> all(x.batch);
  std::iota(all.begin(), all.end(), 0);
  return fit_norm(x, all);
}

void apply_norm(nn::Tensor3& x, const NormStats& stats) {
  if (stats.mean.size() != x.features) throw RuptureError("normalization width mismatch");
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const std::size_t j = i % x.features;
    x.data[i] = stats.std[j] == 0.0 ? 0.0 : (x.data[i] - stats.mean[j]) / stats.std[j];
  }
}

Normalized znormalize(const nn::Tensor3& train, const nn::Tensor3& test) {
  Normalized out{train, test, fit_norm(train)};
  apply_norm(out.train, out.stats);
  apply_norm(out.test, out.stats);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double score_one(const nn::Tensor2& rows, std::size_t i, std::span<const std::size_t> minority,
                 std::size_t k, std::vector<double>& dist) {
  auto a = rows.row(i);
  for (std::size_t m = 0; m < minority.size(); ++m) {
    auto b = rows.row(minority[m]);
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
      const double d = a[c] - b[c];
      s += d * d;
    }
    dist[m] = std::sqrt(s);
  }
  const std::size_t kk = std::min(k, minority.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
  double total = 0.0;
  for (std::size_t m = 0; m < kk; ++m) total += dist[m];
  return total / static_cast<double>(kk);
}

void check_nearmiss_args(std::span<const std::size_t> minority, std::size_t k) {
  if (minority.empty()) throw RuptureError("NearMiss needs at least one minority sample");
  if (k == 0) throw RuptureError("NearMiss k must be positive");
}

}  // namespace

std::vector<double> nearmiss_scores(const nn::Tensor2& rows, std::span<const std::size_t> majority,
                                    std::span<const std::size_t> minority, std::size_t k) {
  check_nearmiss_args(minority, k);
  std::vector<double> scores(majority.size());
  const auto n = static_cast<std::ptrdiff_t>(majority.size());
#pragma omp parallel
  {
    std::vector<double> dist(minority.size());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      scores[static_cast<std::size_t>(i)] = score_one(rows, majority[static_cast<std::size_t>(i)], minority, k, dist);
    }
  }
  return scores;
}

std::vector<double> nearmiss_scores_serial(const nn::Tensor2& rows,
                                           std::span<const std::size_t> majority,
                                           std::span<const std::size_t> minority, std::size_t k) {
  check_nearmiss_args(minority, k);
  std::vector<double> scores(majority.size());
  std::vector<double> dist(minority.size());
  for (std::size_t i = 0; i < majority.size(); ++i) {
    scores[i] = score_one(rows, majority[i], minority, k, dist);
  }
  return scores;
}

std::vector<std::size_t> nearmiss_undersample(const nn::Tensor2& rows, std::span<const Label> labels,
                                              std::size_t k) {
  if (rows.rows != labels.size()) throw RuptureError("NearMiss rows and labels differ in length");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] == Label::Rupture ? pos : neg).push_back(i);
  }
  if (pos.empty() || neg.empty()) throw RuptureError("NearMiss needs both classes present");
  const bool pos_minor = pos.size() <= neg.size();
  const auto& minority = pos_minor ? pos : neg;
  const auto& majority = pos_minor ? neg : pos;

  std::vector<std::size_t> kept(minority);
  if (majority.size() == minority.size()) {
    kept.insert(kept.end(), majority.begin(), majority.end());
  } else {
    const auto scores = nearmiss_scores(rows, majority, minority, k);
    std::vector<std::size_t> order(majority.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    for (std::size_t r = 0; r < minority.size(); ++r) kept.push_back(majority[order[r]]);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

nn::Tensor2 flatten_windows(const RuptureDataset& data) {
  const std::size_t wf = data.facial.time * data.facial.features;
  const std::size_t wa = data.audio.time * data.audio.features;
  nn::Tensor2 rows(data.size(), wf + wa);
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto dst = rows.row(i);
    auto f = data.facial.sample(i).data;
    auto a = data.audio.sample(i).data;
    std::copy(f.begin(), f.end(), dst.begin());
    std::copy(a.begin(), a.end(), dst.begin() + static_cast<std::ptrdiff_t>(wf));
  }
  return rows;
}

RuptureDataset undersample(const RuptureDataset& data, std::size_t k) {
  data.validate();
  RuptureDataset scaled = data;
  apply_norm(scaled.facial, fit_norm(scaled.facial));
  apply_norm(scaled.audio, fit_norm(scaled.audio));
  const auto kept = nearmiss_undersample(flatten_windows(scaled), data.labels, k);
  return data.subset(kept);
}

// ---------------------------------------------------------------------------

std::vector<Fold> subject_folds(std::span<const std::string> subjects, std::span<const Label> labels,
                                int folds, int repeats, std::uint64_t seed) {
  if (subjects.size() != labels.size()) throw RuptureError("subjects and labels differ in length");
  if (folds < 2 || repeats < 1) throw RuptureError("need folds >= 2 and repeats >= 1");
  std::map<std::string, bool> positive;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    positive[subjects[i]] = positive[subjects[i]] || labels[i] == Label::Rupture;
  }
  if (positive.size() < static_cast<std::size_t>(folds)) {
    throw RuptureError("subject-independent " + std::to_string(folds) + "-fold CV needs at least " +
                       std::to_string(folds) + " subjects, found " + std::to_string(positive.size()));
  }
  std::vector<std::string> pos, neg;
  for (const auto& [s, p] : positive) (p ? pos : neg).push_back(s);

  std::vector<Fold> out;
  std::mt19937_64 rng(seed);
  for (int r = 0; r < repeats; ++r) {
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
    std::map<std::string, int> fold_of;
    std::size_t next = 0;
    for (const auto* group : {&pos, &neg}) {
      for (const auto& s : *group) fold_of[s] = static_cast<int>(next++ % static_cast<std::size_t>(folds));
    }
    for (int f = 0; f < folds; ++f) {
      Fold fold;
      fold.repeat = r;
      fold.fold = f;
      for (std::size_t i = 0; i < subjects.size(); ++i) {
        (fold_of[subjects[i]] == f ? fold.test : fold.train).push_back(i);
      }
      for (const auto& [s, fs] : fold_of) (fs == f ? fold.test_subjects : fold.train_subjects).push_back(s);
      out.push_back(std::move(fold));
    }
  }
  return out;
}

}  // namespace coach::rupture
