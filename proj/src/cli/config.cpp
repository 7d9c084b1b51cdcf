#include "coach/cli/config.hpp"

#include <fstream>

#include "coach/store/codec.hpp"

using nlohmann::json;

namespace coach::cli {

namespace {

json train_json(const nn::TrainConfig& t) {
  return {{"learning_rate", t.learning_rate},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"optimizer", nn::to_string(t.optimizer)},
          {"adam", {{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"epsilon", t.adam.epsilon}}},
          {"clip_norm", t.clip_norm},
          {"shuffle_seed", t.shuffle_seed}};
}

nn::TrainConfig train_from(const json& j) {
  nn::TrainConfig t;
  t.learning_rate = j.at("learning_rate");
  t.batch_size = j.at("batch_size");
  t.epochs = j.at("epochs");
  t.optimizer = nn::parse_optimizer(j.at("optimizer").get<std::string>());
  t.adam.beta1 = j.at("adam").at("beta1");
  t.adam.beta2 = j.at("adam").at("beta2");
  t.adam.epsilon = j.at("adam").at("epsilon");
  t.clip_norm = j.at("clip_norm");
  t.shuffle_seed = j.at("shuffle_seed");
  return t;
}

json online_json(const policy::OnlineConfig& o) {
  return {{"steps_per_turn", o.steps_per_turn},
          {"batch_size", o.batch_size},
          {"learning_rate", o.learning_rate},
          {"clip_norm", o.clip_norm},
          {"target_sync_steps", o.target_sync_steps},
          {"buffer_capacity", o.buffer_capacity},
          {"epsilon_initial", o.epsilon_initial},
          {"epsilon_decay", o.epsilon_decay},
          {"generic_mix_initial", o.generic_mix_initial},
          {"generic_mix_final", o.generic_mix_final},
          {"generic_mix_step", o.generic_mix_step}};
}

policy::OnlineConfig online_from(const json& j) {
  policy::OnlineConfig o;
  o.steps_per_turn = j.at("steps_per_turn");
  o.batch_size = j.at("batch_size");
  o.learning_rate = j.at("learning_rate");
  o.clip_norm = j.at("clip_norm");
  o.target_sync_steps = j.at("target_sync_steps");
  o.buffer_capacity = j.at("buffer_capacity");
  o.epsilon_initial = j.at("epsilon_initial");
  o.epsilon_decay = j.at("epsilon_decay");
  o.generic_mix_initial = j.at("generic_mix_initial");
  o.generic_mix_final = j.at("generic_mix_final");
  o.generic_mix_step = j.at("generic_mix_step");
  return o;
}

json synthetic_json(const rupture::SyntheticConfig& s) {
  return {{"subjects", s.subjects},
          {"min_duration_s", s.min_duration_s},
          {"max_duration_s", s.max_duration_s},
          {"ir_free_fraction", s.ir_free_fraction},
          {"episodes_per_subject", s.episodes_per_subject},
          {"min_episode_s", s.min_episode_s},
          {"max_episode_s", s.max_episode_s},
          {"facial_hz", s.facial_hz},
          {"audio_hz", s.audio_hz},
          {"facial_shift", s.facial_shift},
          {"audio_shift", s.audio_shift},
          {"subject_offset_std", s.subject_offset_std},
          {"min_ir_overlap_s", s.min_ir_overlap_s}};
}

rupture::SyntheticConfig synthetic_from(const json& j) {
  rupture::SyntheticConfig s;
  s.subjects = j.at("subjects");
  s.min_duration_s = j.at("min_duration_s");
  s.max_duration_s = j.at("max_duration_s");
  s.ir_free_fraction = j.at("ir_free_fraction");
  s.episodes_per_subject = j.at("episodes_per_subject");
  s.min_episode_s = j.at("min_episode_s");
  s.max_episode_s = j.at("max_episode_s");
  s.facial_hz = j.at("facial_hz");
  s.audio_hz = j.at("audio_hz");
  s.facial_shift = j.at("facial_shift");
  s.audio_shift = j.at("audio_shift");
  s.subject_offset_std = j.at("subject_offset_std");
  s.min_ir_overlap_s = j.at("min_ir_overlap_s");
  return s;
}

json server_json(const server::ServerConfig& s) {
  json session;
  dialogue::to_json(session, s.session);
  session.erase("session_id");
  session.erase("coachee_id");
  return {{"bind_address", s.bind_address},
          {"port", s.port},
          {"checkpoint_dir", s.checkpoint_dir.string()},
          {"log_path", s.log_path.string()},
          {"replay_corpus", s.replay_corpus.string()},
          {"script_path", s.script_path.string()},
          {"backend", s.backend},
          {"auth_token_env", s.auth_token_env},
          {"allow_origin", s.allow_origin},
          {"io_threads", s.io_threads},
          {"session", session},
          {"text_only",
           {{"words_per_second", s.text_only.words_per_second},
            {"neutral_valence", s.text_only.neutral_valence},
            {"valence_samples", s.text_only.valence_samples}}},
          {"remote",
           {{"base_url", s.remote.base_url},
            {"model", s.remote.model},
            {"moderation_model", s.remote.moderation_model},
            {"api_key_env", s.remote.api_key_env},
            {"timeout_s", s.remote.timeout_s}}}};
}

server::ServerConfig server_from(const json& j) {
  server::ServerConfig s;
  s.bind_address = j.at("bind_address");
  s.port = j.at("port");
  s.checkpoint_dir = j.at("checkpoint_dir").get<std::string>();
  s.log_path = j.at("log_path").get<std::string>();
  s.replay_corpus = j.at("replay_corpus").get<std::string>();
  s.script_path = j.at("script_path").get<std::string>();
  s.backend = j.at("backend");
  s.auth_token_env = j.at("auth_token_env");
  s.allow_origin = j.at("allow_origin");
  s.io_threads = j.at("io_threads");
  dialogue::from_json(j.at("session"), s.session);
  const auto& t = j.at("text_only");
  s.text_only.words_per_second = t.at("words_per_second");
  s.text_only.neutral_valence = t.at("neutral_valence");
  s.text_only.valence_samples = t.at("valence_samples");
  const auto& r = j.at("remote");
  s.remote.base_url = r.at("base_url");
  s.remote.model = r.at("model");
  s.remote.moderation_model = r.at("moderation_model");
  s.remote.api_key_env = r.at("api_key_env");
  s.remote.timeout_s = r.at("timeout_s");
  return s;
}

void reject_unknown(const json& patch, const json& known, const std::string& where) {
  if (!patch.is_object()) throw ConfigError("config " + (where.empty() ? "root" : where) + " must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!known.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    if (known.at(key).is_object()) reject_unknown(value, known.at(key), path);
  }
}

}  // namespace

json to_json(const AppConfig& c) {
  return {{"seed", c.seed},
          {"jobs", c.jobs},
          {"corpus",
           {{"profiles", c.corpus.profiles},
            {"sessions_per_profile", c.corpus.sessions_per_profile},
            {"turn_limit", c.corpus.turn_limit}}},
          {"batch",
           {{"algorithm", policy::to_string(c.batch.algorithm)},
            {"gamma", c.batch.gamma},
            {"hidden", c.batch.config.hidden},
            {"target_sync_steps", c.batch.config.target_sync_steps},
            {"nfq_iterations", c.batch.config.nfq_iterations},
            {"nfq_fit_epochs", c.batch.config.nfq_fit_epochs},
            {"train", train_json(c.batch.config.train)}}},
          {"study",
           {{"coachees", c.study.coachees},
            {"sessions", c.study.sessions},
            {"turn_limit", c.study.turn_limit},
            {"replications", c.study.replications},
            {"late_session", c.study.late_session},
            {"early_session", c.study.early_session}}},
          {"rupture",
           {{"synthetic", synthetic_json(c.rupture.synthetic)},
            {"folds", c.rupture.cv.folds},
            {"repeats", c.rupture.cv.repeats},
            {"hidden", c.rupture.cv.classifier.hidden},
            {"tie_break", c.rupture.cv.tie == rupture::TieBreak::Audio ? "audio" : "facial"},
            {"train", train_json(c.rupture.cv.classifier.train)},
            {"undersample", c.rupture.undersample},
            {"nearmiss_k", c.rupture.nearmiss_k}}},
          {"online", online_json(c.online)},
          {"server", server_json(c.server)}};
}

AppConfig merge(AppConfig base, const json& patch) {
  json full = to_json(base);
  reject_unknown(patch, full, "");
  full.merge_patch(patch);
  AppConfig c;
  try {
    c.seed = full.at("seed");
    c.jobs = full.at("jobs");
    const auto& co = full.at("corpus");
    c.corpus.profiles = co.at("profiles");
    c.corpus.sessions_per_profile = co.at("sessions_per_profile");
    c.corpus.turn_limit = co.at("turn_limit");
    const auto& b = full.at("batch");
    c.batch.algorithm = policy::parse_algorithm(b.at("algorithm").get<std::string>());
    c.batch.gamma = b.at("gamma");
    c.batch.config.hidden = b.at("hidden");
    c.batch.config.target_sync_steps = b.at("target_sync_steps");
    c.batch.config.nfq_iterations = b.at("nfq_iterations");
    c.batch.config.nfq_fit_epochs = b.at("nfq_fit_epochs");
    c.batch.config.train = train_from(b.at("train"));
    const auto& s = full.at("study");
    c.study.coachees = s.at("coachees");
    c.study.sessions = s.at("sessions");
    c.study.turn_limit = s.at("turn_limit");
    c.study.replications = s.at("replications");
    c.study.late_session = s.at("late_session");
    c.study.early_session = s.at("early_session");
    const auto& r = full.at("rupture");
    c.rupture.synthetic = synthetic_from(r.at("synthetic"));
    c.rupture.cv.folds = r.at("folds");
    c.rupture.cv.repeats = r.at("repeats");
    c.rupture.cv.classifier.hidden = r.at("hidden");
    const auto tie = r.at("tie_break").get<std::string>();
    if (tie != "audio" && tie != "facial") throw ConfigError("rupture.tie_break must be audio or facial");
    c.rupture.cv.tie = tie == "audio" ? rupture::TieBreak::Audio : rupture::TieBreak::Facial;
    c.rupture.cv.classifier.train = train_from(r.at("train"));
    c.rupture.undersample = r.at("undersample");
    c.rupture.nearmiss_k = r.at("nearmiss_k");
    c.online = online_from(full.at("online"));
    c.server = server_from(full.at("server"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  if (c.jobs < 0) throw ConfigError("jobs must be >= 0");
  return c;
}

AppConfig load_config(const std::filesystem::path& path, AppConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return merge(std::move(base), j);
}

}  // namespace coach::cli
