#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "coach/core/log.hpp"
#include "coach/rupture/dataset.hpp"
#include "coach/rupture/model.hpp"
#include "coach/rupture/synthetic.hpp"

using namespace coach;
using namespace coach::rupture;

namespace {

FeatureStream ramp(Modality m, const std::string& id, std::vector<double> times) {
  FeatureStream s{m, id, {}, {}};
  std::vector<double> frame(s.width());
  for (double t : times) {
    std::fill(frame.begin(), frame.end(), t);
    s.append(t, frame);
  }
  return s;
}

FeatureStream seconds(Modality m, int length) {
  std::vector<double> t;
  for (int i = 0; i < length; ++i) t.push_back(i);
  return ramp(m, "s", t);
}

struct SilenceLog {
  LogSink previous;
  int warnings = 0;
  SilenceLog() {
    previous = set_log_sink([this](LogLevel l, std::string_view) { warnings += l == LogLevel::Warning; });
  }
  ~SilenceLog() { set_log_sink(previous); }
};

}  // namespace

TEST_CASE("resample_1hz") {
  const auto out = resample_1hz(ramp(Modality::Facial, "a", {0.0, 0.5, 1.0}));
  CHECK(out.timestamps == std::vector<double>{0.0, 1.0});
  CHECK(out.frame(0)[0] == 0.0);
  CHECK(out.frame(1)[0] == 1.0);

  const auto fixed = seconds(Modality::Audio, 12);
  CHECK(resample_1hz(fixed).values == fixed.values);
  CHECK(resample_1hz(fixed).timestamps == fixed.timestamps);

  std::vector<double> t;
  for (double x = 0.0; x <= 24.0; x += 0.25) t.push_back(x);
  CHECK(resample_1hz(ramp(Modality::Facial, "b", t)).size() == 25);

  // the sample at or before each whole second is taken
  const auto held = resample_1hz(ramp(Modality::Facial, "c", {0.2, 0.9, 2.4}));
  CHECK(held.timestamps == std::vector<double>{1.0, 2.0});
  CHECK(held.frame(0)[0] == 0.9);
  CHECK(held.frame(1)[0] == 0.9);

  CHECK_THROWS_AS(resample_1hz(FeatureStream{}), RuptureError);
}

TEST_CASE("stream invariants") {
  FeatureStream s{Modality::Audio, "x", {}, {}};
  CHECK_THROWS_AS(s.append(0.0, std::vector<double>(35, 0.0)), RuptureError);
  s.append(1.0, std::vector<double>(25, 0.0));
  CHECK_THROWS_AS(s.append(1.0, std::vector<double>(25, 0.0)), RuptureError);
}

TEST_CASE("make_windows examples") {
  SilenceLog quiet;
  CHECK(make_windows(seconds(Modality::Facial, 10)).size() == 1);
  const auto w24 = make_windows(seconds(Modality::Facial, 24));
  REQUIRE(w24.size() == 3);
  CHECK(w24[0].start_s == 0);
  CHECK(w24[1].start_s == 7);
  CHECK(w24[2].start_s == 14);
  CHECK(w24[2].matrix.time == 10);
  CHECK(w24[2].matrix.features == 35);
  CHECK(w24[2].matrix.at(0, 0) == 14.0);
  CHECK(w24[2].matrix.at(9, 0) == 23.0);
  CHECK(make_windows(seconds(Modality::Facial, 9)).empty());
  CHECK(quiet.warnings == 1);
}

TEST_CASE("window counts match start-index enumeration") {
  SilenceLog quiet;
  for (int L = 9; L <= 60; ++L) {
    int enumerated = 0;
    for (int start = 0; start + 10 <= L; start += 7) ++enumerated;
    INFO("L = " << L);
    CHECK(window_count(static_cast<std::size_t>(L)) == static_cast<std::size_t>(enumerated));
    CHECK(make_windows(seconds(Modality::Audio, L)).size() == static_cast<std::size_t>(enumerated));
  }
}

TEST_CASE("early fusion") {
  auto f = make_windows(seconds(Modality::Facial, 10)).front();
  auto a = make_windows(seconds(Modality::Audio, 10)).front();
  std::fill(a.matrix.data.begin(), a.matrix.data.end(), 0.0);
  const auto fused = early_fusion_windows(f, a);
  CHECK(fused.matrix.features == 60);
  for (std::size_t t = 0; t < 10; ++t) {
    for (std::size_t c = 0; c < 35; ++c) CHECK(fused.matrix.at(t, c) == f.matrix.at(t, c));
    for (std::size_t c = 35; c < 60; ++c) CHECK(fused.matrix.at(t, c) == 0.0);
  }
  a.start_s = 7;
  CHECK_THROWS_AS(early_fusion_windows(f, a), RuptureError);

  nn::Tensor3 tf(2, 10, 35), ta(2, 10, 25);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (double& v : tf.data) v = n(rng);
  for (double& v : ta.data) v = n(rng);
  const auto both = early_fusion(tf, ta);
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t t = 0; t < 10; ++t) {
      for (std::size_t c = 0; c < 35; ++c) CHECK(both.at(b, t, c) == tf.at(b, t, c));
      for (std::size_t c = 0; c < 25; ++c) CHECK(both.at(b, t, 35 + c) == ta.at(b, t, c));
    }
  }
}

TEST_CASE("znormalize") {
  SilenceLog quiet;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(4.0, 2.5);
  nn::Tensor3 train(20, 10, 25);
  for (double& v : train.data) v = n(rng);
  for (std::size_t b = 0; b < 20; ++b)
    for (std::size_t t = 0; t < 10; ++t) train.at(b, t, 3) = 7.0;  // constant feature

  const auto self = znormalize(train, train);
  for (std::size_t f = 0; f < 25; ++f) {
    double mean = 0, sq = 0;
    for (std::size_t i = f; i < self.train.data.size(); i += 25) mean += self.train.data[i];
    mean /= 200.0;
    for (std::size_t i = f; i < self.train.data.size(); i += 25) sq += std::pow(self.train.data[i] - mean, 2);
    CHECK(std::abs(mean) < 1e-9);
    if (f == 3) {
      CHECK(sq == 0.0);
    } else {
      CHECK(std::abs(std::sqrt(sq / 200.0) - 1.0) < 1e-9);
    }
  }
  CHECK(self.stats.std[3] == 0.0);
  CHECK(quiet.warnings >= 1);

  nn::Tensor3 test(5, 10, 25);
  for (double& v : test.data) v = n(rng);
  auto shifted_train = train, shifted_test = test;
  for (double& v : shifted_train.data) v += 13.0;
  for (double& v : shifted_test.data) v += 13.0;
  const auto a = znormalize(train, test), b = znormalize(shifted_train, shifted_test);
  for (std::size_t i = 0; i < a.test.data.size(); ++i) CHECK(a.test.data[i] == doctest::Approx(b.test.data[i]).epsilon(1e-9));
}

TEST_CASE("NearMiss-1") {
  SUBCASE("balanced input is a no-op") {
    nn::Tensor2 rows(4, 2);
    for (std::size_t i = 0; i < 8; ++i) rows.data[i] = static_cast<double>(i);
    const std::vector<Label> l{Label::Rupture, Label::NoRupture, Label::NoRupture, Label::Rupture};
    CHECK(nearmiss_undersample(rows, l) == std::vector<std::size_t>{0, 1, 2, 3});
  }
  SUBCASE("planted majority points next to the minority are kept") {
    // minority at (0,0) and (10,0); majority 2 and 4 sit atop them, 3 and 5 far away
    nn::Tensor2 rows(6, 2);
    const double pts[6][2] = {{0, 0}, {10, 0}, {0.1, 0}, {50, 50}, {10, 0.1}, {-40, 30}};
    for (std::size_t i = 0; i < 6; ++i) {
      rows.at(i, 0) = pts[i][0];
      rows.at(i, 1) = pts[i][1];
    }
    const std::vector<Label> l{Label::Rupture, Label::Rupture, Label::NoRupture,
                               Label::NoRupture, Label::NoRupture, Label::NoRupture};
    // brute-force oracle: mean distance to the k=3 (here: both) minority points
    std::vector<std::pair<double, std::size_t>> oracle;
    for (std::size_t i = 2; i < 6; ++i) {
      double d = 0;
      for (std::size_t m = 0; m < 2; ++m) d += std::hypot(pts[i][0] - pts[m][0], pts[i][1] - pts[m][1]);
      oracle.push_back({d / 2, i});
    }
    std::sort(oracle.begin(), oracle.end());
    std::vector<std::size_t> expected{0, 1, oracle[0].second, oracle[1].second};
    std::sort(expected.begin(), expected.end());
    CHECK(expected == std::vector<std::size_t>{0, 1, 2, 4});
    CHECK(nearmiss_undersample(rows, l, 3) == expected);
  }
  SUBCASE("single class is rejected") {
    nn::Tensor2 rows(3, 1);
    const std::vector<Label> l(3, Label::NoRupture);
    CHECK_THROWS_AS(nearmiss_undersample(rows, l), RuptureError);
  }
  SUBCASE("parallel and serial scores agree bitwise; output balanced") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n;
    nn::Tensor2 rows(60, 30);
    for (double& v : rows.data) v = n(rng);
    std::vector<Label> l(60, Label::NoRupture);
    std::vector<std::size_t> maj, mino;
    for (std::size_t i = 0; i < 60; ++i) {
      if (i % 5 == 0) l[i] = Label::Rupture;
      (l[i] == Label::Rupture ? mino : maj).push_back(i);
    }
    CHECK(nearmiss_scores(rows, maj, mino, 3) == nearmiss_scores_serial(rows, maj, mino, 3));
    const auto kept = nearmiss_undersample(rows, l);
    const auto pos = std::count_if(kept.begin(), kept.end(), [&](std::size_t i) { return l[i] == Label::Rupture; });
    CHECK(pos == 12);
    CHECK(kept.size() == 24);
  }
}

TEST_CASE("compute_metrics") {
  using L = Label;
  const std::vector<L> y{L::Rupture, L::NoRupture, L::Rupture, L::NoRupture};
  const auto perfect = compute_metrics(y, y);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  const std::vector<L> p{L::Rupture, L::Rupture, L::NoRupture, L::NoRupture};
  const auto half = compute_metrics(p, y);
  CHECK(half.accuracy == 0.5);
  CHECK(half.precision == 0.5);
  CHECK(half.recall == 0.5);
  CHECK(half.f1 == 0.5);

  const std::vector<L> none(4, L::NoRupture);
  const auto neg = compute_metrics(none, y);
  CHECK(neg.precision == 0.0);
  CHECK_FALSE(neg.precision_defined);
  CHECK(neg.recall == 0.0);
  CHECK(neg.recall_defined);

  CHECK_THROWS_AS(compute_metrics(p, std::vector<L>(3)), RuptureError);
}

TEST_CASE("late fusion rule table") {
  const Prediction f_ir{Label::Rupture, 0.9, 0.9}, a_no{Label::NoRupture, 0.6, 0.4};
  const auto r = late_fusion(f_ir, a_no);
  CHECK(r.label == Label::Rupture);
  CHECK(r.confidence == 0.9);

  const Prediction f_tie{Label::Rupture, 0.7, 0.7}, a_tie{Label::NoRupture, 0.7, 0.3};
  CHECK(late_fusion(f_tie, a_tie).label == Label::NoRupture);
  CHECK(late_fusion(f_tie, a_tie, TieBreak::Facial).label == Label::Rupture);

  const Prediction f_ag{Label::Rupture, 0.8, 0.8}, a_ag{Label::Rupture, 0.95, 0.95};
  CHECK(late_fusion(f_ag, a_ag).label == Label::Rupture);
  CHECK(late_fusion(f_ag, a_ag).confidence == 0.95);
}

TEST_CASE("subject folds: 50 folds, no leakage, stratified") {
  std::vector<std::string> subjects;
  std::vector<Label> labels;
  for (int s = 0; s < 12; ++s) {
    for (int w = 0; w < 6; ++w) {
      subjects.push_back("p" + std::to_string(s));
      labels.push_back(s < 8 && w == 2 ? Label::Rupture : Label::NoRupture);
    }
  }
  const auto folds = subject_folds(subjects, labels, 5, 10, 42);
  CHECK(folds.size() == 50);
  for (const auto& f : folds) {
    std::set<std::string> tr, te;
    for (auto i : f.train) tr.insert(subjects[i]);
    for (auto i : f.test) te.insert(subjects[i]);
    std::vector<std::string> both;
    std::set_intersection(tr.begin(), tr.end(), te.begin(), te.end(), std::back_inserter(both));
    CHECK(both.empty());
    CHECK(f.train.size() + f.test.size() == subjects.size());
    // 8 IR-positive subjects over 5 folds: 1 or 2 per fold
    int pos = 0;
    for (const auto& s : te) pos += std::stoi(s.substr(1)) < 8;
    CHECK(pos >= 1);
    CHECK(pos <= 2);
  }
  CHECK_THROWS_AS(subject_folds(std::vector<std::string>(4, "a"), std::vector<Label>(4), 5, 10, 1),
                  RuptureError);
}

TEST_CASE("CSV round trip and build_dataset") {
  SyntheticConfig sc;
  sc.subjects = 3;
  sc.seed = 5;
  const auto corpus = generate_synthetic(sc);
  const auto dir = std::filesystem::temp_directory_path() / "coach_rupture_csv";
  std::filesystem::create_directories(dir);
  write_streams_csv(dir / "facial.csv", corpus.facial);
  write_streams_csv(dir / "audio.csv", corpus.audio);
  write_labels_csv(dir / "labels.csv", corpus.labels);
  const auto facial = read_streams_csv(dir / "facial.csv", Modality::Facial);
  const auto audio = read_streams_csv(dir / "audio.csv", Modality::Audio);
  const auto labels = read_labels_csv(dir / "labels.csv");
  CHECK(facial.size() == 3);
  CHECK(facial[1].values == corpus.facial[1].values);
  CHECK(audio[2].timestamps == corpus.audio[2].timestamps);
  CHECK(labels == corpus.labels);
  CHECK_THROWS_AS(read_streams_csv(dir / "facial.csv", Modality::Audio), RuptureError);

  const auto d = build_dataset(facial, audio, labels);
  d.validate();
  CHECK(d.facial.time == 10);
  CHECK(d.facial.features == 35);
  CHECK(d.audio.features == 25);
  CHECK(d.size() > 20);
  const auto counts = d.class_counts();
  CHECK(counts[0] + counts[1] == d.size());

  const auto balanced = undersample(d);
  CHECK(balanced.class_counts()[0] == balanced.class_counts()[1]);
  std::filesystem::remove_all(dir);
}

TEST_CASE("run_cv structure and separability on a small corpus") {
  SyntheticConfig sc;
  sc.subjects = 10;
  sc.seed = 9;
  const auto corpus = generate_synthetic(sc);
  const auto data = undersample(build_dataset(corpus.facial, corpus.audio, corpus.labels));
  CvConfig cfg;
  cfg.repeats = 2;
  cfg.classifier.hidden = 8;
  cfg.classifier.train.epochs = 10;
  cfg.seed = 1;
  const auto audio = run_cv(data, ModelKind::Gru, Fusion::Audio, cfg);
  CHECK(audio.folds.size() == 10);
  CHECK(audio.precision.mean > 0.8);
  const std::string table = cv_table({audio});
  CHECK(table.find("Precision") != std::string::npos);
  CHECK(fold_csv(audio).find("repeat,fold") == 0);
}

TEST_CASE("rank_by_precision orders by mean precision") {
  std::vector<CvResult> r(3);
  r[0].precision.mean = 0.4;
  r[1].precision.mean = 0.9;
  r[2].precision.mean = 0.6;
  CHECK(rank_by_precision(r) == std::vector<std::size_t>{1, 2, 0});
}
