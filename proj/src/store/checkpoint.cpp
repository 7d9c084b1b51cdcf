#include "coach/store/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

using nlohmann::json;

namespace coach::store {

static_assert(std::endian::native == std::endian::little, "checkpoint container assumes little endian");

namespace {

constexpr char kMagic[8] = {'Q', 'T', 'C', 'O', 'A', 'C', 'H', '\0'};
constexpr std::size_t kHeaderSize = 8 + 4 + 4 + 8 + 8;

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view b) : bytes_(b) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CorruptionError("checkpoint truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string container(CheckpointKind kind, const json& meta, std::span<const double> params) {
  std::string payload;
  const std::string m = meta.dump();
  put<std::uint64_t>(payload, m.size());
  payload += m;
  put<std::uint64_t>(payload, params.size());
  payload.append(reinterpret_cast<const char*>(params.data()), params.size() * sizeof(double));

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(kind));
  put<std::uint64_t>(out, payload.size());
  put<std::uint64_t>(out, checksum(payload));
  return out + payload;
}

struct Opened {
  json meta;
  std::vector<double> params;
};

Opened open(std::string_view bytes, CheckpointKind expected) {
  if (bytes.size() < kHeaderSize) throw CorruptionError("checkpoint truncated: header incomplete");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw CorruptionError("not a checkpoint file");
  Reader r(bytes.substr(sizeof(kMagic)));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw VersionError(version, kCheckpointVersion);
  const auto kind = r.get<std::uint32_t>();
  const auto length = r.get<std::uint64_t>();
  const auto hash = r.get<std::uint64_t>();
  if (r.remaining() != length) {
    throw CorruptionError("checkpoint payload is " + std::to_string(r.remaining()) + " bytes, header says " +
                          std::to_string(length));
  }
  const auto payload = r.take(length);
  if (checksum(payload) != hash) throw CorruptionError("checkpoint checksum mismatch");
  if (kind != static_cast<std::uint32_t>(expected)) {
    throw StoreError("checkpoint holds kind " + std::to_string(kind) + ", expected " +
                     std::to_string(static_cast<std::uint32_t>(expected)));
  }

  Reader p(payload);
  Opened o;
  const auto mlen = p.get<std::uint64_t>();
  try {
    o.meta = json::parse(p.take(mlen));
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("checkpoint metadata unreadable: ") + e.what());
  }
  const auto n = p.get<std::uint64_t>();
  if (p.remaining() != n * sizeof(double)) throw CorruptionError("checkpoint parameter block has the wrong size");
  o.params.resize(n);
  if (n > 0) std::memcpy(o.params.data(), p.take(n * sizeof(double)).data(), n * sizeof(double));
  return o;
}

template <class F>
auto meta_guard(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("checkpoint metadata invalid: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw CorruptionError(std::string("checkpoint metadata invalid: ") + e.what());
  }
}

}  // namespace

VersionError::VersionError(std::uint32_t found, std::uint32_t supported)
    : StoreError("checkpoint format version " + std::to_string(found) + " is not supported (this build reads version " +
                 std::to_string(supported) + ")"),
      found_(found),
      supported_(supported) {}

std::uint64_t checksum(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string encode_checkpoint(const policy::PolicyCheckpoint& ck) {
  json meta = {{"algorithm", policy::to_string(ck.algorithm)},
               {"spec", ck.spec},
               {"normalizer", ck.normalizer},
               {"reward", ck.reward},
               {"gamma", ck.gamma},
               {"metadata", ck.metadata},
               {"coachee_id", ck.coachee_id ? json(*ck.coachee_id) : json(nullptr)}};
  return container(CheckpointKind::Policy, meta, ck.params);
}

policy::PolicyCheckpoint decode_checkpoint(std::string_view bytes) {
  auto o = open(bytes, CheckpointKind::Policy);
  return meta_guard([&] {
    policy::PolicyCheckpoint ck;
    const auto& m = o.meta;
    ck.algorithm = policy::parse_algorithm(m.at("algorithm").get<std::string>());
    ck.spec = m.at("spec").get<nn::NetworkSpec>();
    ck.normalizer = m.at("normalizer").get<StateNormalizer>();
    ck.reward = m.at("reward").get<RewardConfig>();
    ck.gamma = m.at("gamma").get<double>();
    ck.metadata = m.at("metadata").get<policy::TrainingMetadata>();
    if (!m.at("coachee_id").is_null()) ck.coachee_id = m.at("coachee_id").get<std::string>();
    ck.params = std::move(o.params);
    if (nn::Network(ck.spec).param_count() != ck.params.size()) {
      throw CorruptionError("checkpoint parameter count does not match its network spec");
    }
    return ck;
  });
}

std::string encode_classifier(const rupture::Classifier& c, rupture::ModelKind kind) {
  json meta = {{"model", rupture::to_string(kind)}, {"spec", c.spec}, {"norm", c.norm}};
  return container(CheckpointKind::Classifier, meta, c.params);
}

rupture::Classifier decode_classifier(std::string_view bytes, rupture::ModelKind* kind) {
  auto o = open(bytes, CheckpointKind::Classifier);
  return meta_guard([&] {
    rupture::Classifier c;
    if (kind) *kind = rupture::parse_model(o.meta.at("model").get<std::string>());
    c.spec = o.meta.at("spec").get<nn::NetworkSpec>();
    c.norm = o.meta.at("norm").get<rupture::NormStats>();
    c.params = std::move(o.params);
    if (nn::Network(c.spec).param_count() != c.params.size()) {
      throw CorruptionError("classifier parameter count does not match its network spec");
    }
    return c;
  });
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw StoreError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const std::filesystem::path& path, const policy::PolicyCheckpoint& ck) {
  write_file_atomic(path, encode_checkpoint(ck));
}

policy::PolicyCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const VersionError&) {
    throw;
  } catch (const CorruptionError& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
}

void save_classifier(const std::filesystem::path& path, const rupture::Classifier& c, rupture::ModelKind kind) {
  write_file_atomic(path, encode_classifier(c, kind));
}

rupture::Classifier load_classifier(const std::filesystem::path& path, rupture::ModelKind* kind) {
  return decode_classifier(read_file(path), kind);
}

}  // namespace coach::store
