#pragma once

// Configuration file shared by the CLI subcommands, the simulator and the
// server. JSON; every key is optional and missing keys keep their defaults.

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "coach/policy/policy.hpp"
#include "coach/rupture/model.hpp"
#include "coach/rupture/synthetic.hpp"
#include "coach/server/server.hpp"

namespace coach::cli {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct CorpusSection {
  std::size_t profiles = 5;
  std::size_t sessions_per_profile = 19;
  int turn_limit = 8;
};

struct BatchSection {
  policy::Algorithm algorithm = policy::Algorithm::Dqn;
  policy::BatchConfig config;
  double gamma = 0.9;
};

struct StudySection {
  std::size_t coachees = 17;
  int sessions = 4;
  int turn_limit = 8;
  std::size_t replications = 20;
  int late_session = 4;
  int early_session = 2;
};

struct RuptureSection {
  rupture::SyntheticConfig synthetic;
  rupture::CvConfig cv;
  bool undersample = true;
  std::size_t nearmiss_k = 3;
};

struct AppConfig {
  std::uint64_t seed = 0;
  int jobs = 0;  // 0: OpenMP default
  CorpusSection corpus;
  BatchSection batch;
  StudySection study;
  RuptureSection rupture;
  policy::OnlineConfig online;
  server::ServerConfig server;
};

nlohmann::json to_json(const AppConfig& c);
/// Overlays `j` on `base`. Unknown keys are rejected so typos do not pass
/// silently.
AppConfig merge(AppConfig base, const nlohmann::json& j);
AppConfig load_config(const std::filesystem::path& path, AppConfig base = {});

}  // namespace coach::cli
