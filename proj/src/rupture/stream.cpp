#include "coach/rupture/stream.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "coach/core/log.hpp"

namespace coach::rupture {

std::string_view to_string(Modality m) { return m == Modality::Facial ? "facial" : "audio"; }

void FeatureStream::append(double t, std::span<const double> frame) {
  if (frame.size() != width()) {
    throw RuptureError("frame width " + std::to_string(frame.size()) + " does not match " +
                       std::string(to_string(modality)) + " width " + std::to_string(width()));
  }
  if (!timestamps.empty() && !(t > timestamps.back())) {
    throw RuptureError("timestamps must be strictly increasing (subject " + subject_id + ")");
  }
  timestamps.push_back(t);
  values.insert(values.end(), frame.begin(), frame.end());
}

void FeatureStream::validate() const {
  if (values.size() != timestamps.size() * width()) {
    throw RuptureError("stream values do not match timestamps x width");
  }
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (!(timestamps[i] > timestamps[i - 1])) {
      throw RuptureError("timestamps must be strictly increasing (subject " + subject_id + ")");
    }
  }
}

FeatureStream resample_1hz(const FeatureStream& stream) {
  stream.validate();
  if (stream.size() == 0) throw RuptureError("cannot resample an empty stream");
  FeatureStream out{stream.modality, stream.subject_id, {}, {}};
  const auto first = static_cast<long>(std::ceil(stream.timestamps.front()));
  const auto last = static_cast<long>(std::floor(stream.timestamps.back()));
  std::size_t cursor = 0;
  for (long sec = first; sec <= last; ++sec) {
    const double t = static_cast<double>(sec);
    while (cursor + 1 < stream.size() && stream.timestamps[cursor + 1] <= t) ++cursor;
    out.append(t, stream.frame(cursor));
  }
  return out;
}

std::size_t window_count(std::size_t length, int window_s, int overlap_s) {
  const auto w = static_cast<std::size_t>(window_s);
  const auto stride = static_cast<std::size_t>(window_s - overlap_s);
  if (length < w) return 0;
  return (length - w) / stride + 1;
}

std::vector<FeatureWindow> make_windows(const FeatureStream& s, int window_s, int overlap_s) {
  if (window_s <= 0 || overlap_s < 0 || overlap_s >= window_s) {
    throw RuptureError("invalid window geometry");
  }
  const std::size_t n = window_count(s.size(), window_s, overlap_s);
  if (n == 0) {
    log_warning("stream for subject '" + s.subject_id + "' has " + std::to_string(s.size()) +
                " steps, shorter than one " + std::to_string(window_s) + " s window");
    return {};
  }
  const std::size_t stride = static_cast<std::size_t>(window_s - overlap_s);
  const std::size_t w = s.width();
  std::vector<FeatureWindow> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t start = k * stride;
    FeatureWindow win;
    win.subject_id = s.subject_id;
    win.start_s = static_cast<int>(std::lround(s.timestamps[start]));
    win.matrix = nn::Sequence(static_cast<std::size_t>(window_s), w,
                              std::vector<double>(s.values.begin() + start * w,
                                                  s.values.begin() + (start + window_s) * w));
    out.push_back(std::move(win));
  }
  return out;
}

FeatureWindow early_fusion_windows(const FeatureWindow& facial, const FeatureWindow& audio) {
  if (facial.subject_id != audio.subject_id || facial.start_s != audio.start_s ||
      facial.matrix.time != audio.matrix.time) {
    throw RuptureError("early fusion needs aligned windows (same subject, start and length)");
  }
  const std::size_t wf = facial.matrix.features, wa = audio.matrix.features;
  FeatureWindow fused;
  fused.subject_id = facial.subject_id;
  fused.start_s = facial.start_s;
  fused.label = facial.label;
  fused.matrix = nn::Sequence(facial.matrix.time, wf + wa);
  for (std::size_t t = 0; t < facial.matrix.time; ++t) {
    auto dst = fused.matrix.row(t);
    auto f = facial.matrix.row(t);
    auto a = audio.matrix.row(t);
    std::copy(f.begin(), f.end(), dst.begin());
    std::copy(a.begin(), a.end(), dst.begin() + wf);
  }
  return fused;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw RuptureError(path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

}  // namespace

std::vector<FeatureStream> read_streams_csv(const std::filesystem::path& path, Modality modality) {
  std::ifstream in(path);
  if (!in) throw RuptureError("cannot open " + path.string());
  const std::size_t w = width_of(modality);
  std::vector<FeatureStream> streams;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> frame(w);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (line_no == 1 && cells.size() > 0 && cells[0] == "subject_id") continue;
    if (cells.size() != w + 2) {
      throw RuptureError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(w + 2) + " columns, found " + std::to_string(cells.size()));
    }
    auto [it, inserted] = index.try_emplace(cells[0], streams.size());
    if (inserted) streams.push_back(FeatureStream{modality, cells[0], {}, {}});
    for (std::size_t f = 0; f < w; ++f) frame[f] = parse_double(cells[f + 2], path, line_no);
    streams[it->second].append(parse_double(cells[1], path, line_no), frame);
  }
  return streams;
}

void write_streams_csv(const std::filesystem::path& path, const std::vector<FeatureStream>& streams) {
  std::ofstream out(path);
  if (!out) throw RuptureError("cannot write " + path.string());
  if (streams.empty()) return;
  const std::size_t w = streams.front().width();
  out << "subject_id,t_seconds";
  for (std::size_t f = 0; f < w; ++f) out << ",f_" << f;
  out << '\n' << std::setprecision(17);
  for (const auto& s : streams) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      out << s.subject_id << ',' << s.timestamps[i];
      for (double v : s.frame(i)) out << ',' << v;
      out << '\n';
    }
  }
}

LabelTable read_labels_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RuptureError("cannot open " + path.string());
  LabelTable labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (line_no == 1 && !cells.empty() && cells[0] == "subject_id") continue;
    if (cells.size() != 3) {
      throw RuptureError(path.string() + ":" + std::to_string(line_no) + ": expected 3 columns");
    }
    const double label = parse_double(cells[2], path, line_no);
    if (label != 0.0 && label != 1.0) {
      throw RuptureError(path.string() + ":" + std::to_string(line_no) + ": label must be 0 or 1");
    }
    labels[{cells[0], static_cast<int>(std::lround(parse_double(cells[1], path, line_no)))}] =
        label == 1.0 ? Label::Rupture : Label::NoRupture;
  }
  return labels;
}

void write_labels_csv(const std::filesystem::path& path, const LabelTable& labels) {
  std::ofstream out(path);
  if (!out) throw RuptureError("cannot write " + path.string());
  out << "subject_id,t_start,label\n";
  for (const auto& [key, label] : labels) {
    out << key.first << ',' << key.second << ',' << static_cast<int>(label) << '\n';
  }
}

}  // namespace coach::rupture
