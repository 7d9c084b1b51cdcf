#include "coach/cli/cli.hpp"

#include <csignal>
#include <functional>
#include <map>
#include <sstream>

#include <omp.h>
#include <pthread.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "coach/cli/config.hpp"
#include "coach/core/log.hpp"
#include "coach/rupture/synthetic.hpp"
#include "coach/sim/corpus.hpp"
#include "coach/sim/report.hpp"
#include "coach/store/checkpoint.hpp"
#include "coach/store/codec.hpp"
#include "coach/store/records.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace coach::cli {

namespace {

class CommandError : public Error {
 public:
  using Error::Error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  store::write_file_atomic(path, text);
}

std::string csv_number(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

// Flags shared by every subcommand plus the ones each adds; values stay
// unset unless given so the config file keeps authority over defaults.
struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<int> jobs;

  // gen-corpus
  std::string kind = "dialogue";
  std::optional<std::size_t> profiles, sessions_per_profile;
  std::optional<int> turns;
  std::optional<int> subjects;

  // train-batch
  std::optional<std::string> algo;
  std::string corpus_path;
  std::string normalizer_path;
  std::optional<std::size_t> epochs, hidden;
  std::optional<double> gamma;
  std::string name = "generic";

  // eval-rupture
  std::string models = "bilstm";
  std::string fusions = "late";
  std::string data_dir;
  std::optional<int> folds, repeats;
  bool no_undersample = false;

  // simulate-study
  std::string arms = "adaptive,generic";
  std::optional<std::size_t> seeds, coachees;
  std::optional<int> study_sessions;
  std::string generic_path;

  // serve
  std::optional<std::string> bind, checkpoint_dir, log_path, backend, replay;
  std::optional<std::uint16_t> port;

  // session-replay / export-report
  std::vector<std::string> logs;
  std::string session_id;
  std::string checkpoint_path;
  std::string exercise = "gratitude";
  int session_index = 1;
  std::string mode = "generic";
};

class Runner {
 public:
  explicit Runner(std::ostream& out) : out_(out) {}

  AppConfig resolve(const std::string& command, const Options& o) {
    AppConfig c;
    if (!o.config_path.empty()) c = load_config(o.config_path, c);
    if (o.seed) c.seed = *o.seed;
    if (o.jobs) c.jobs = *o.jobs;
    if (c.jobs < 0) throw ConfigError("--jobs must be >= 0");
    if (o.profiles) c.corpus.profiles = *o.profiles;
    if (o.sessions_per_profile) c.corpus.sessions_per_profile = *o.sessions_per_profile;
    if (o.turns) c.corpus.turn_limit = *o.turns;
    if (o.subjects) c.rupture.synthetic.subjects = *o.subjects;
    if (o.algo) c.batch.algorithm = policy::parse_algorithm(*o.algo);
    if (o.epochs && command == "train-batch") c.batch.config.train.epochs = *o.epochs;
    if (o.epochs && command == "eval-rupture") c.rupture.cv.classifier.train.epochs = *o.epochs;
    if (o.hidden && command == "train-batch") c.batch.config.hidden = *o.hidden;
    if (o.hidden && command == "eval-rupture") c.rupture.cv.classifier.hidden = *o.hidden;
    if (o.gamma) c.batch.gamma = *o.gamma;
    if (o.folds) c.rupture.cv.folds = *o.folds;
    if (o.repeats) c.rupture.cv.repeats = *o.repeats;
    if (o.no_undersample) c.rupture.undersample = false;
    if (o.seeds) c.study.replications = *o.seeds;
    if (o.coachees) c.study.coachees = *o.coachees;
    if (o.study_sessions) c.study.sessions = *o.study_sessions;
    if (o.bind) c.server.bind_address = *o.bind;
    if (o.port) c.server.port = *o.port;
    if (o.checkpoint_dir) c.server.checkpoint_dir = *o.checkpoint_dir;
    if (o.log_path) c.server.log_path = *o.log_path;
    if (o.backend) c.server.backend = *o.backend;
    if (o.replay) c.server.replay_corpus = *o.replay;
    c.rupture.cv.seed = c.seed;
    c.batch.config.seed = c.seed;
    if (c.jobs > 0) omp_set_num_threads(c.jobs);

    const json resolved = {{"command", command}, {"out", o.out}, {"config", to_json(c)}};
    out_ << resolved.dump() << std::endl;
    if (command != "serve") write_text(fs::path(o.out) / "resolved_config.json", to_json(c).dump(2) + "\n");
    return c;
  }

  void result(const json& j) { out_ << j.dump() << std::endl; }

  void gen_corpus(const Options& o) {
    const auto c = resolve("gen-corpus", o);
    const fs::path dir = o.out;
    if (o.kind == "dialogue") {
      sim::PopulationConfig pop;
      pop.size = c.corpus.profiles;
      pop.seed = c.seed;
      sim::CorpusConfig cc;
      cc.sessions_per_profile = c.corpus.sessions_per_profile;
      cc.turn_limit = c.corpus.turn_limit;
      cc.seed = c.seed;
      const auto corpus = sim::generate_corpus(sim::make_population(pop), cc);
      store::write_transitions(dir / "corpus.jsonl", corpus.transitions);
      json norm;
      to_json(norm, corpus.normalizer);
      write_text(dir / "normalizer.json",
                 json{{"normalizer", norm}, {"calibration", sim::to_json(corpus.calibration)}}.dump(2) + "\n");
      result({{"corpus", (dir / "corpus.jsonl").string()},
              {"transitions", corpus.transitions.size()},
              {"calibration", sim::to_json(corpus.calibration)}});
    } else if (o.kind == "rupture") {
      auto sc = c.rupture.synthetic;
      sc.seed = c.seed;
      const auto corpus = rupture::generate_synthetic(sc);
      fs::create_directories(dir);
      rupture::write_streams_csv(dir / "facial.csv", corpus.facial);
      rupture::write_streams_csv(dir / "audio.csv", corpus.audio);
      rupture::write_labels_csv(dir / "labels.csv", corpus.labels);
      result({{"data", dir.string()}, {"subjects", corpus.facial.size()}, {"windows", corpus.labels.size()}});
    } else {
      throw CommandError("unknown corpus kind '" + o.kind + "' (expected dialogue or rupture)");
    }
  }

  void train_batch(const Options& o) {
    const auto c = resolve("train-batch", o);
    const fs::path corpus_path = o.corpus_path;
    const auto transitions = store::read_transitions(corpus_path);
    const fs::path norm_path =
        o.normalizer_path.empty() ? corpus_path.parent_path() / "normalizer.json" : fs::path(o.normalizer_path);
    StateNormalizer normalizer;
    if (fs::exists(norm_path)) {
      const auto j = json::parse(store::read_file(norm_path));
      from_json(j.contains("normalizer") ? j.at("normalizer") : j, normalizer);
    } else if (!o.normalizer_path.empty()) {
      throw CommandError("normalizer file not found: " + norm_path.string());
    } else {
      log_warning("no normalizer.json next to the corpus; using default duration statistics");
    }
    const auto ck = policy::train_batch(transitions, c.batch.algorithm, c.batch.config, c.batch.gamma, normalizer, {},
                                        corpus_path.filename().string());
    const fs::path dir = o.out;
    fs::create_directories(dir);
    store::save_checkpoint(dir / (o.name + ".ckpt"), ck);
    std::string csv = "epoch,loss\n";
    for (std::size_t i = 0; i < ck.metadata.loss_curve.size(); ++i) {
      csv += std::to_string(i + 1) + "," + csv_number(ck.metadata.loss_curve[i]) + "\n";
    }
    write_text(dir / "loss_curve.csv", csv);
    result({{"checkpoint", (dir / (o.name + ".ckpt")).string()},
            {"algorithm", policy::to_string(ck.algorithm)},
            {"epochs", ck.metadata.epochs},
            {"gradient_steps", ck.metadata.gradient_steps},
            {"final_loss", ck.metadata.loss_curve.empty() ? 0.0 : ck.metadata.loss_curve.back()}});
  }

  void eval_rupture(const Options& o) {
    const auto c = resolve("eval-rupture", o);
    std::vector<rupture::ModelKind> models;
    for (const auto& m : split_list(o.models == "all" ? "lstm,gru,bilstm" : o.models)) models.push_back(rupture::parse_model(m));
    std::vector<rupture::Fusion> fusions;
    for (const auto& f : split_list(o.fusions == "all" ? "facial,audio,early,late" : o.fusions)) {
      fusions.push_back(rupture::parse_fusion(f));
    }
    if (models.empty() || fusions.empty()) throw CommandError("need at least one model and one fusion");

    std::vector<rupture::FeatureStream> facial, audio;
    rupture::LabelTable labels;
    if (o.data_dir.empty()) {
      auto sc = c.rupture.synthetic;
      sc.seed = c.seed;
      auto corpus = rupture::generate_synthetic(sc);
      facial = std::move(corpus.facial);
      audio = std::move(corpus.audio);
      labels = std::move(corpus.labels);
    } else {
      const fs::path d = o.data_dir;
      facial = rupture::read_streams_csv(d / "facial.csv", rupture::Modality::Facial);
      audio = rupture::read_streams_csv(d / "audio.csv", rupture::Modality::Audio);
      labels = rupture::read_labels_csv(d / "labels.csv");
    }
    auto data = rupture::build_dataset(facial, audio, labels);
    const auto raw_counts = data.class_counts();
    if (c.rupture.undersample) data = rupture::undersample(data, c.rupture.nearmiss_k);

    std::vector<rupture::CvResult> results;
    const fs::path dir = o.out;
    for (auto m : models) {
      for (auto f : fusions) {
        results.push_back(rupture::run_cv(data, m, f, c.rupture.cv));
        write_text(dir / ("folds_" + std::string(to_string(m)) + "_" + std::string(to_string(f)) + ".csv"),
                   rupture::fold_csv(results.back()));
      }
    }
    const auto order = rupture::rank_by_precision(results);
    const auto& best = results[order.front()];
    std::string summary = rupture::cv_table(results);
    summary += "\nselected (highest mean precision): " + best.label + "\n";
    write_text(dir / "summary.txt", summary);
    write_text(dir / "cv.json", rupture::cv_json(results));
    out_ << summary;
    result({{"windows", data.size()},
            {"windows_before_undersampling", raw_counts[0] + raw_counts[1]},
            {"folds", best.folds.size()},
            {"selected", best.label},
            {"precision", best.precision.mean}});
  }

  std::pair<policy::PolicyCheckpoint, std::shared_ptr<const std::vector<Transition>>> generic_policy(
      const AppConfig& c, const Options& o, std::optional<sim::CalibrationStats>* calibration) {
    std::vector<Transition> replay;
    StateNormalizer normalizer;
    if (!o.corpus_path.empty()) {
      replay = store::read_transitions(o.corpus_path);
    } else {
      sim::PopulationConfig pop;
      pop.size = c.corpus.profiles;
      pop.seed = c.seed;
      sim::CorpusConfig cc;
      cc.sessions_per_profile = c.corpus.sessions_per_profile;
      cc.turn_limit = c.corpus.turn_limit;
      cc.seed = c.seed;
      auto corpus = sim::generate_corpus(sim::make_population(pop), cc);
      if (calibration) *calibration = corpus.calibration;
      normalizer = corpus.normalizer;
      replay = std::move(corpus.transitions);
    }
    auto shared = std::make_shared<const std::vector<Transition>>(std::move(replay));
    if (!o.generic_path.empty()) return {store::load_checkpoint(o.generic_path), shared};
    if (!o.corpus_path.empty()) {
      throw CommandError("--corpus without --generic: train the generic policy with train-batch first");
    }
    return {policy::train_batch(*shared, c.batch.algorithm, c.batch.config, c.batch.gamma, normalizer), shared};
  }

  void simulate_study(const Options& o) {
    const auto c = resolve("simulate-study", o);
    std::optional<sim::CalibrationStats> calibration;
    const auto [generic, replay] = generic_policy(c, o, &calibration);

    sim::StudyConfig sc = sim::default_study(c.seed);
    sim::PopulationConfig pop;
    pop.size = c.study.coachees;
    pop.id_prefix = "C";
    pop.seed = sim::derive_seed(c.seed, 0x57D);
    sc.population = sim::make_population(pop);
    sc.sessions = c.study.sessions;
    sc.turn_limit = c.study.turn_limit;
    sc.online = c.online;
    sc.arms.clear();
    for (const auto& a : split_list(o.arms)) sc.arms.push_back(sim::parse_arm(a));
    if (sc.arms.empty()) throw CommandError("--arms names no arm");

    const fs::path dir = o.out;
    if (c.study.replications <= 1) {
      auto report = sim::run_study(sc, generic, replay);
      report.calibration = calibration;
      sim::write_study_report(dir, report);
      result({{"study", (dir / "study.json").string()}, {"flagged", report.flagged}});
      return;
    }
    if (std::find(sc.arms.begin(), sc.arms.end(), sim::Arm::Adaptive) == sc.arms.end()) {
      throw CommandError("replicated studies compare the adaptive arm; include it in --arms");
    }
    const auto summary = sim::run_replications(sc, c.study.replications, generic, replay, c.study.late_session,
                                               c.study.early_session);
    auto agg = sim::aggregate(summary);
    agg.calibration = calibration;
    json j = {{"replication_summary", sim::to_json(summary)}, {"aggregate", sim::to_json(agg)}};
    fs::create_directories(dir);
    write_text(dir / "study.json", j.dump(2) + "\n");
    write_text(dir / "sessions.csv", sim::session_csv(agg));
    write_text(dir / "coachee_sessions.csv", sim::replication_csv(summary));
    write_text(dir / "reward.svg", sim::reward_svg(agg));
    result({{"study", (dir / "study.json").string()},
            {"replications", summary.reports.size()},
            {"trend_wins", summary.trend_wins},
            {"arm_wins", summary.arm_wins},
            {"trend_sign_test_p", summary.trend_sign_test_p},
            {"flagged", agg.flagged}});
  }

  void serve(const Options& o) {
    const auto c = resolve("serve", o);
    // Block termination signals before any server thread starts so only
    // sigwait below sees them.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    server::Server srv(c.server);
    srv.start();
    result({{"listening", c.server.bind_address + ":" + std::to_string(srv.port())}});
    int sig = 0;
    sigwait(&set, &sig);
    log_info("signal " + std::to_string(sig) + ", shutting down");
    srv.stop();
  }

  void session_replay(const Options& o) {
    const auto c = resolve("session-replay", o);
    std::vector<dialogue::SessionLog> logs;
    const fs::path dir = o.out;
    if (!o.logs.empty()) {
      for (const auto& p : o.logs) {
        auto more = store::read_session_logs(p);
        logs.insert(logs.end(), more.begin(), more.end());
      }
    } else if (!o.checkpoint_path.empty()) {
      // Simulated coachee against a stored policy, logged like a live session.
      sim::PopulationConfig pop;
      pop.size = 1;
      pop.id_prefix = "R";
      pop.seed = c.seed;
      const auto profile = sim::make_population(pop).front();
      dialogue::SessionConfig sc = c.server.session;
      sc.session_id = "replay-" + std::to_string(c.seed);
      sc.coachee_id = profile.id;
      sc.exercise = parse_exercise(o.exercise);
      sc.session_index = o.session_index;
      sc.seed = c.seed;
      sc.async_llm = false;
      const auto ck = store::load_checkpoint(o.checkpoint_path);
      sim::SimulatedChannel channel(profile, sc.exercise, sc.session_index, sim::derive_seed(c.seed, 1));
      llm::StubBackend llm{llm::StubConfig(sim::derive_seed(c.seed, 2))};
      dialogue::VirtualClock clock;
      const auto script = c.server.script_path.empty() ? dialogue::default_script()
                                                         : dialogue::load_script(c.server.script_path);
      if (o.mode == "adaptive") {
        policy::OnlineLearner learner(policy::fork_for_coachee(ck, profile.id), nullptr, c.online, c.seed);
        dialogue::AdaptivePolicy pol(learner, sc.session_index);
        logs.push_back(dialogue::run_session(sc, script, channel, pol, llm, clock));
      } else if (o.mode == "generic") {
        dialogue::FrozenPolicy pol(ck, c.online.epsilon_for(sc.session_index));
        logs.push_back(dialogue::run_session(sc, script, channel, pol, llm, clock));
      } else {
        throw CommandError("unknown mode '" + o.mode + "' (expected adaptive or generic)");
      }
      fs::create_directories(dir);
      fs::remove(dir / "sessions.jsonl");
      store::append_session_log(dir / "sessions.jsonl", logs.back());
    } else {
      throw CommandError("session-replay needs --log or --checkpoint");
    }

    json sessions = json::array();
    std::size_t mismatched = 0, found = 0;
    for (const auto& log : logs) {
      if (!o.session_id.empty() && log.session_id != o.session_id) continue;
      ++found;
      const auto replayed = dialogue::replay_actions(log);
      std::size_t agree = 0;
      for (std::size_t i = 0; i < log.turns.size() && i < replayed.size(); ++i) agree += replayed[i] == log.turns[i].action;
      const bool ok = agree == log.turns.size() && replayed.size() == log.turns.size();
      mismatched += !ok;
      json transcript = json::array();
      for (const auto& e : log.transcript) {
        transcript.push_back({{"speaker", e.speaker == dialogue::TranscriptEntry::Speaker::Coach ? "coach" : "coachee"},
                              {"text", e.text}});
      }
      sessions.push_back({{"session_id", log.session_id},
                          {"termination", dialogue::to_string(log.termination)},
                          {"turns", log.turns.size()},
                          {"actions_reproduced", agree},
                          {"replayable", ok},
                          {"mean_reward", log.mean_reward()},
                          {"transcript", transcript}});
    }
    if (!o.session_id.empty() && found == 0) throw CommandError("no session '" + o.session_id + "' in the log");
    write_text(dir / "replay.json", sessions.dump(2) + "\n");
    result({{"sessions", found}, {"replayable", found - mismatched}});
    if (mismatched) throw CommandError(std::to_string(mismatched) + " session(s) not reproducible from their logged q-values");
  }

  void export_report(const Options& o) {
    resolve("export-report", o);
    std::vector<dialogue::SessionLog> logs;
    for (const auto& p : o.logs) {
      auto more = store::read_session_logs(p);
      logs.insert(logs.end(), more.begin(), more.end());
    }
    if (logs.empty()) throw CommandError("no sessions in the given logs");
    const auto report = sim::report_from_logs(logs);
    sim::write_study_report(o.out, report);
    std::string turns = "session_id,coachee_id,session_index,mode,turn_index,action,fv,sd,reward,answered\n";
    for (const auto& log : logs) {
      for (const auto& t : log.turns) {
        turns += log.session_id + "," + log.coachee_id + "," + std::to_string(log.session_index) + "," + log.mode + "," +
                 std::to_string(t.turn_index) + "," + std::string(to_string(t.action)) + "," + csv_number(t.reward.fv) +
                 "," + csv_number(t.reward.sd) + "," + csv_number(t.reward.total) + "," + (t.answered ? "1" : "0") + "\n";
      }
    }
    write_text(fs::path(o.out) / "turns.csv", turns);
    result({{"sessions", logs.size()}, {"report", (fs::path(o.out) / "study.json").string()}});
  }

 private:
  std::ostream& out_;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "Master seed");
  sub->add_option("--out", o.out, "Output directory");
  sub->add_option("--jobs", o.jobs, "Worker threads (0: all cores)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive well-being coach: corpus generation, training, evaluation, studies and serving", "coach"};
  app.require_subcommand(1);
  Options o;
  Runner runner(out);
  std::function<void()> action;

  auto* gen = app.add_subcommand("gen-corpus", "Synthetic dialogue corpus or rupture feature streams");
  add_common(gen, o);
  gen->add_option("--kind", o.kind, "dialogue or rupture")->check(CLI::IsMember({"dialogue", "rupture"}));
  gen->add_option("--profiles", o.profiles, "Simulated coachee profiles");
  gen->add_option("--sessions", o.sessions_per_profile, "Sessions per profile");
  gen->add_option("--turns", o.turns, "Decision turns per session");
  gen->add_option("--subjects", o.subjects, "Subjects (rupture)");
  gen->callback([&] { action = [&] { runner.gen_corpus(o); }; });

  auto* train = app.add_subcommand("train-batch", "Offline Q-learning over a transition corpus");
  add_common(train, o);
  train->add_option("--algo", o.algo, "dqn, double-dqn or nfq");
  train->add_option("--corpus", o.corpus_path, "Transition corpus (JSONL)")->required()->check(CLI::ExistingFile);
  train->add_option("--normalizer", o.normalizer_path, "Normalizer JSON (default: next to the corpus)");
  train->add_option("--epochs", o.epochs, "Training epochs");
  train->add_option("--hidden", o.hidden, "Hidden units");
  train->add_option("--gamma", o.gamma, "Discount factor");
  train->add_option("--name", o.name, "Checkpoint file stem");
  train->callback([&] { action = [&] { runner.train_batch(o); }; });

  auto* eval = app.add_subcommand("eval-rupture", "Repeated subject-independent CV of rupture classifiers");
  add_common(eval, o);
  eval->add_option("--model", o.models, "lstm, gru, bilstm, a comma list or all");
  eval->add_option("--fusion", o.fusions, "facial, audio, early, late, a comma list or all");
  eval->add_option("--data", o.data_dir, "Directory with facial.csv, audio.csv, labels.csv (default: synthetic)");
  eval->add_option("--folds", o.folds, "Folds per repeat");
  eval->add_option("--repeats", o.repeats, "Repeats");
  eval->add_option("--epochs", o.epochs, "Training epochs");
  eval->add_option("--hidden", o.hidden, "Recurrent units");
  eval->add_flag("--no-undersample", o.no_undersample, "Skip NearMiss balancing");
  eval->callback([&] { action = [&] { runner.eval_rupture(o); }; });

  auto* study = app.add_subcommand("simulate-study", "Simulated multi-session study");
  add_common(study, o);
  study->add_option("--arms", o.arms, "Comma list of adaptive, generic");
  study->add_option("--seeds", o.seeds, "Seeded replications");
  study->add_option("--coachees", o.coachees, "Simulated coachees");
  study->add_option("--sessions", o.study_sessions, "Sessions per coachee");
  study->add_option("--generic", o.generic_path, "Generic checkpoint (default: train one)")->check(CLI::ExistingFile);
  study->add_option("--corpus", o.corpus_path, "Replay corpus for adaptive updates")->check(CLI::ExistingFile);
  study->callback([&] { action = [&] { runner.simulate_study(o); }; });

  auto* serve = app.add_subcommand("serve", "HTTP + WebSocket session server");
  add_common(serve, o);
  serve->add_option("--bind", o.bind, "Bind address");
  serve->add_option("--port", o.port, "Port (0: any free)");
  serve->add_option("--checkpoint-dir", o.checkpoint_dir, "Directory holding <name>.ckpt");
  serve->add_option("--log", o.log_path, "Session log (JSONL, appended)");
  serve->add_option("--backend", o.backend, "stub or remote")->check(CLI::IsMember({"stub", "remote"}));
  serve->add_option("--replay", o.replay, "Generic replay corpus for adaptive sessions");
  serve->callback([&] { action = [&] { runner.serve(o); }; });

  auto* replay = app.add_subcommand("session-replay", "Re-derive logged actions, or log a simulated session");
  add_common(replay, o);
  replay->add_option("--log", o.logs, "Session log(s) to verify")->check(CLI::ExistingFile);
  replay->add_option("--session", o.session_id, "Only this session");
  replay->add_option("--checkpoint", o.checkpoint_path, "Run one simulated session with this policy")
      ->check(CLI::ExistingFile);
  replay->add_option("--exercise", o.exercise, "Exercise for the simulated session");
  replay->add_option("--session-index", o.session_index, "Session index for the simulated session");
  replay->add_option("--mode", o.mode, "adaptive or generic");
  replay->callback([&] { action = [&] { runner.session_replay(o); }; });

  auto* report = app.add_subcommand("export-report", "CSV tables and reward plot from session logs");
  add_common(report, o);
  report->add_option("--logs", o.logs, "Session log(s)")->required()->check(CLI::ExistingFile);
  report->callback([&] { action = [&] { runner.export_report(o); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", "usage"}, {"message", e.what()}}.dump() << std::endl;
    return 2;
  }
  try {
    action();
    return 0;
  } catch (const ConfigError& e) {
    err << json{{"error", "config"}, {"message", e.what()}}.dump() << std::endl;
  } catch (const std::exception& e) {
    err << json{{"error", "failed"}, {"message", e.what()}}.dump() << std::endl;
  }
  return 1;
}

}  // namespace coach::cli
