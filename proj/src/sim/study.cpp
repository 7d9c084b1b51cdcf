#include "coach/sim/study.hpp"

#include <cmath>
#include <numeric>

#include "coach/core/log.hpp"

namespace coach::sim {

std::string_view to_string(Arm a) { return a == Arm::Adaptive ? "adaptive" : "generic-frozen"; }

Arm parse_arm(std::string_view name) {
  if (name == "adaptive") return Arm::Adaptive;
  if (name == "generic-frozen" || name == "generic") return Arm::GenericFrozen;
  throw SimError("unknown study arm '" + std::string(name) + "'");
}

void StudyConfig::validate() const {
  if (sessions < 1) throw SimError("a study needs at least one session");
  if (arms.empty()) throw SimError("a study needs at least one arm");
  if (population.empty()) throw SimError("a study needs at least one coachee");
  if (exercise_order.empty()) throw SimError("exercise order must not be empty");
  if (turn_limit < 1) throw SimError("turn_limit must be at least 1");
  for (const auto& p : population) p.validate();
}

StudyConfig default_study(std::uint64_t seed) {
  StudyConfig c;
  PopulationConfig pop;
  pop.size = 17;
  pop.id_prefix = "C";
  pop.seed = derive_seed(seed, 0x57D);
  c.population = make_population(pop);
  c.seed = seed;
  return c;
}

const SessionStat& ArmReport::session(int index) const {
  for (const auto& s : sessions)
    if (s.session_index == index) return s;
  throw SimError("arm has no session " + std::to_string(index));
}

const ArmReport& StudyReport::arm(Arm a) const {
  for (const auto& r : arms)
    if (r.arm == a) return r;
  throw SimError("study has no arm " + std::string(to_string(a)));
}

double trend_slope(std::span<const double> y) {
  const double n = static_cast<double>(y.size());
  if (y.size() < 2) return 0.0;
  const double xbar = (n + 1.0) / 2.0;
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double dx = static_cast<double>(i + 1) - xbar;
    sxy += dx * (y[i] - ybar);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

double sign_test_p(std::size_t successes, std::size_t n) {
  if (successes > n) throw SimError("sign test: more successes than trials");
  double p = 0.0;
  for (std::size_t k = successes; k <= n; ++k) {
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
  }
  return std::min(1.0, p);
}

namespace {

struct CoacheeOutcome {
  std::vector<CoacheeSessionRow> rows;
  std::vector<std::vector<double>> rewards;  // per session
  std::vector<std::string> errors;
};

CoacheeOutcome run_coachee(const StudyConfig& config, const CoacheeProfile& profile, Arm arm,
                           const policy::PolicyCheckpoint& generic,
                           const std::shared_ptr<const std::vector<Transition>>& replay) {
  CoacheeOutcome out;
  std::unique_ptr<policy::OnlineLearner> learner;
  if (arm == Arm::Adaptive) {
    learner = std::make_unique<policy::OnlineLearner>(policy::fork_for_coachee(generic, profile.id), replay,
                                                      config.online, derive_seed(config.seed, profile.seed, 0x1EA2));
  }
  std::unique_ptr<dialogue::FrozenPolicy> frozen;
  const auto script = dialogue::default_script();
  const auto fav = favourite_action(profile);
  for (int s = 1; s <= config.sessions; ++s) {
    const ExerciseKind exercise = config.exercise_order[static_cast<std::size_t>(s - 1) % config.exercise_order.size()];
    // both arms see the same coachee stream and action-selection draws
    SimulatedChannel channel(profile, exercise, s, derive_seed(config.seed, profile.seed, s));
    llm::StubBackend llm{llm::StubConfig(derive_seed(config.seed, profile.seed, s, 0x11))};
    dialogue::VirtualClock clock;
    dialogue::SessionConfig sc;
    sc.coachee_id = profile.id;
    sc.exercise = exercise;
    sc.session_index = s;
    sc.turn_limit = config.turn_limit;
    sc.async_llm = false;
    sc.seed = derive_seed(config.seed, profile.seed, s, 0x5E);

    CoacheeSessionRow row;
    row.coachee_id = profile.id;
    row.session_index = s;
    row.exercise = exercise;
    std::vector<double> rewards;
    try {
      dialogue::SessionLog log;
      if (arm == Arm::Adaptive) {
        dialogue::AdaptivePolicy pol(*learner, s);
        log = dialogue::run_session(sc, script, channel, pol, llm, clock);
      } else {
        dialogue::FrozenPolicy pol(generic, config.online.epsilon_for(s));
        log = dialogue::run_session(sc, script, channel, pol, llm, clock);
      }
      row.termination = log.termination;
      for (const auto& t : log.turns) {
        rewards.push_back(t.reward.total);
        ++row.actions[static_cast<std::size_t>(action_code(t.action))];
        row.favourite_choices += t.action == fav;
      }
      if (log.termination != dialogue::Termination::Completed) {
        out.errors.push_back(profile.id + " session " + std::to_string(s) + ": " +
                             std::string(dialogue::to_string(log.termination)) +
                             (log.error.empty() ? "" : " (" + log.error + ")"));
      }
    } catch (const std::exception& e) {
      row.termination = dialogue::Termination::Error;
      out.errors.push_back(profile.id + " session " + std::to_string(s) + ": " + e.what());
    }
    row.turns = rewards.size();
    row.mean_reward = rewards.empty() ? 0.0 : std::accumulate(rewards.begin(), rewards.end(), 0.0) / rewards.size();
    out.rows.push_back(row);
    out.rewards.push_back(std::move(rewards));
  }
  return out;
}

}  // namespace

StudyReport run_study(const StudyConfig& config, const policy::PolicyCheckpoint& generic,
                      std::shared_ptr<const std::vector<Transition>> replay) {
  config.validate();
  StudyReport report;
  report.seed = config.seed;
  for (Arm arm : config.arms) {
    const auto n = static_cast<std::ptrdiff_t>(config.population.size());
    std::vector<CoacheeOutcome> outcomes(config.population.size());
    std::vector<std::string> failures(config.population.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        outcomes[i] = run_coachee(config, config.population[i], arm, generic, replay);
      } catch (const std::exception& e) {
        failures[i] = config.population[i].id + ": " + e.what();
      }
    }

    ArmReport ar;
    ar.arm = arm;
    std::vector<std::vector<double>> pooled(static_cast<std::size_t>(config.sessions));
    std::vector<std::array<std::size_t, kNumActions>> actions(static_cast<std::size_t>(config.sessions));
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (!failures[i].empty()) ar.errors.push_back(failures[i]);
      const auto& o = outcomes[i];
      for (std::size_t s = 0; s < o.rows.size(); ++s) {
        ar.rows.push_back(o.rows[s]);
        pooled[s].insert(pooled[s].end(), o.rewards[s].begin(), o.rewards[s].end());
        for (std::size_t a = 0; a < kNumActions; ++a) actions[s][a] += o.rows[s].actions[a];
      }
      ar.errors.insert(ar.errors.end(), o.errors.begin(), o.errors.end());
    }
    std::vector<double> means;
    for (int s = 1; s <= config.sessions; ++s) {
      const auto& r = pooled[static_cast<std::size_t>(s - 1)];
      const auto c = calibration_stats(r);
      ar.sessions.push_back({s, c.mean, c.std, c.count, actions[static_cast<std::size_t>(s - 1)]});
      means.push_back(c.mean);
    }
    ar.slope = trend_slope(means);
    for (const auto& e : ar.errors) log_warning("study " + std::string(to_string(arm)) + ": " + e);
    report.flagged = report.flagged || !ar.errors.empty();
    report.arms.push_back(std::move(ar));
  }
  return report;
}

ReplicationSummary run_replications(const StudyConfig& config, std::size_t replications,
                                    const policy::PolicyCheckpoint& generic,
                                    std::shared_ptr<const std::vector<Transition>> replay, int late_session,
                                    int early_session) {
  if (replications == 0) throw SimError("need at least one replication");
  if (late_session > config.sessions || early_session < 1) throw SimError("compared sessions outside the study");
  ReplicationSummary out;
  const bool both = std::find(config.arms.begin(), config.arms.end(), Arm::GenericFrozen) != config.arms.end() &&
                    std::find(config.arms.begin(), config.arms.end(), Arm::Adaptive) != config.arms.end();
  for (std::size_t r = 0; r < replications; ++r) {
    StudyConfig c = config;
    c.seed = derive_seed(config.seed, 0xEE, r);
    auto rep = run_study(c, generic, replay);
    const auto& ad = rep.arm(Arm::Adaptive);
    out.trend_wins += ad.session(late_session).mean > ad.session(early_session).mean;
    if (both) out.arm_wins += ad.session(late_session).mean > rep.arm(Arm::GenericFrozen).session(late_session).mean;
    out.reports.push_back(std::move(rep));
  }
  out.trend_sign_test_p = sign_test_p(out.trend_wins, replications);
  return out;
}

}  // namespace coach::sim
