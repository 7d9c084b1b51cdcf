#include "coach/sim/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "coach/store/checkpoint.hpp"

using nlohmann::json;

namespace coach::sim {

namespace {

json actions_json(const std::array<std::size_t, kNumActions>& a) {
  json j = json::object();
  for (std::size_t i = 0; i < kNumActions; ++i) j[std::string(to_string(decode_action(static_cast<int>(i))))] = a[i];
  return j;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

json to_json(const CalibrationStats& c) {
  return {{"mean", c.mean}, {"std", c.std}, {"median", c.median}, {"count", c.count}};
}

json to_json(const StudyReport& r) {
  json arms = json::array();
  for (const auto& a : r.arms) {
    json rows = json::array();
    for (const auto& row : a.rows) {
      rows.push_back({{"coachee_id", row.coachee_id},
                      {"session_index", row.session_index},
                      {"exercise", to_string(row.exercise)},
                      {"mean_reward", row.mean_reward},
                      {"turns", row.turns},
                      {"actions", actions_json(row.actions)},
                      {"favourite_choices", row.favourite_choices},
                      {"termination", dialogue::to_string(row.termination)}});
    }
    json sessions = json::array();
    for (const auto& s : a.sessions) {
      sessions.push_back({{"session_index", s.session_index},
                          {"mean", s.mean},
                          {"std", s.std},
                          {"turns", s.turns},
                          {"actions", actions_json(s.actions)}});
    }
    arms.push_back({{"arm", to_string(a.arm)},
                    {"sessions", sessions},
                    {"slope", a.slope},
                    {"coachee_sessions", rows},
                    {"errors", a.errors}});
  }
  json j = {{"seed", r.seed}, {"flagged", r.flagged}, {"arms", arms}};
  if (r.arms.size() == 2) {
    json deltas = json::array();
    const auto& a = r.arms[0];
    const auto& b = r.arms[1];
    for (std::size_t i = 0; i < std::min(a.sessions.size(), b.sessions.size()); ++i) {
      deltas.push_back({{"session_index", a.sessions[i].session_index},
                        {"delta", a.sessions[i].mean - b.sessions[i].mean}});
    }
    j["arm_delta"] = {{"minuend", to_string(a.arm)}, {"subtrahend", to_string(b.arm)}, {"sessions", deltas}};
  }
  if (r.calibration) j["calibration"] = to_json(*r.calibration);
  return j;
}

json to_json(const ReplicationSummary& s) {
  json reps = json::array();
  for (const auto& r : s.reports) {
    json arms = json::object();
    for (const auto& a : r.arms) {
      json means = json::array();
      for (const auto& ss : a.sessions) means.push_back(ss.mean);
      arms[std::string(to_string(a.arm))] = means;
    }
    reps.push_back({{"seed", r.seed}, {"session_means", arms}, {"flagged", r.flagged}});
  }
  return {{"replications", s.reports.size()},
          {"trend_wins", s.trend_wins},
          {"arm_wins", s.arm_wins},
          {"trend_sign_test_p", s.trend_sign_test_p},
          {"runs", reps}};
}

std::string study_csv(const StudyReport& r) {
  std::ostringstream out;
  out << "arm,coachee_id,session_index,exercise,mean_reward,turns,summarise,follow_up_question,new_episode,"
         "favourite_choices,termination\n";
  for (const auto& a : r.arms) {
    for (const auto& row : a.rows) {
      out << to_string(a.arm) << ',' << row.coachee_id << ',' << row.session_index << ',' << to_string(row.exercise)
          << ',' << fmt(row.mean_reward) << ',' << row.turns << ',' << row.actions[0] << ',' << row.actions[1] << ','
          << row.actions[2] << ',' << row.favourite_choices << ',' << dialogue::to_string(row.termination) << '\n';
    }
  }
  return out.str();
}

std::string session_csv(const StudyReport& r) {
  std::ostringstream out;
  out << "arm,session_index,mean_reward,std_reward,turns,summarise,follow_up_question,new_episode\n";
  for (const auto& a : r.arms) {
    for (const auto& s : a.sessions) {
      out << to_string(a.arm) << ',' << s.session_index << ',' << fmt(s.mean) << ',' << fmt(s.std) << ',' << s.turns
          << ',' << s.actions[0] << ',' << s.actions[1] << ',' << s.actions[2] << '\n';
    }
  }
  return out.str();
}

std::string reward_svg(const StudyReport& r) {
  const double W = 640, H = 400, L = 60, R = 150, T = 30, B = 50;
  int sessions = 1;
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& a : r.arms) {
    for (const auto& s : a.sessions) {
      sessions = std::max(sessions, s.session_index);
      const double se = s.turns > 0 ? s.std / std::sqrt(static_cast<double>(s.turns)) : 0.0;
      lo = first ? s.mean - se : std::min(lo, s.mean - se);
      hi = first ? s.mean + se : std::max(hi, s.mean + se);
      first = false;
    }
  }
  if (hi - lo < 1e-9) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.1 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto x = [&](int s) { return L + (sessions == 1 ? 0.5 : (s - 1.0) / (sessions - 1.0)) * (W - L - R); };
  auto y = [&](double v) { return T + (hi - v) / (hi - lo) * (H - T - B); };

  static const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int s = 1; s <= sessions; ++s) {
    out << "<text x=\"" << x(s) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">S" << s << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    out << "<text x=\"" << L - 6 << "\" y=\"" << y(v) + 4 << "\" text-anchor=\"end\">" << fmt(v, 1) << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">session</text>\n";
  out << "<text x=\"15\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 15 " << (T + H - B) / 2
      << ")\" text-anchor=\"middle\">mean reward</text>\n";
  for (std::size_t i = 0; i < r.arms.size(); ++i) {
    const auto& a = r.arms[i];
    const char* c = kColours[i % 4];
    out << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
    for (const auto& s : a.sessions) out << x(s.session_index) << ',' << y(s.mean) << ' ';
    out << "\"/>\n";
    for (const auto& s : a.sessions) {
      const double se = s.turns > 0 ? s.std / std::sqrt(static_cast<double>(s.turns)) : 0.0;
      out << "<line x1=\"" << x(s.session_index) << "\" y1=\"" << y(s.mean - se) << "\" x2=\"" << x(s.session_index)
          << "\" y2=\"" << y(s.mean + se) << "\" stroke=\"" << c << "\"/>\n";
      out << "<circle cx=\"" << x(s.session_index) << "\" cy=\"" << y(s.mean) << "\" r=\"3\" fill=\"" << c << "\"/>\n";
    }
    out << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 20 * (i + 1) << "\" fill=\"" << c << "\">" << to_string(a.arm)
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

StudyReport aggregate(const ReplicationSummary& s) {
  if (s.reports.empty()) throw SimError("nothing to aggregate");
  StudyReport out;
  out.seed = s.reports.front().seed;
  out.calibration = s.reports.front().calibration;
  for (const auto& first : s.reports.front().arms) {
    ArmReport ar;
    ar.arm = first.arm;
    std::vector<double> means;
    for (const auto& ss : first.sessions) {
      std::vector<double> per_rep;
      SessionStat agg;
      agg.session_index = ss.session_index;
      for (const auto& rep : s.reports) {
        const auto& rs = rep.arm(first.arm).session(ss.session_index);
        per_rep.push_back(rs.mean);
        for (std::size_t a = 0; a < kNumActions; ++a) agg.actions[a] += rs.actions[a];
      }
      const auto c = calibration_stats(per_rep);
      agg.mean = c.mean;
      agg.std = c.std;
      agg.turns = c.count;
      ar.sessions.push_back(agg);
      means.push_back(agg.mean);
    }
    for (const auto& rep : s.reports) {
      const auto& ra = rep.arm(first.arm);
      ar.errors.insert(ar.errors.end(), ra.errors.begin(), ra.errors.end());
    }
    ar.slope = trend_slope(means);
    out.flagged = out.flagged || !ar.errors.empty();
    out.arms.push_back(std::move(ar));
  }
  return out;
}

std::string replication_csv(const ReplicationSummary& s) {
  std::string out;
  for (std::size_t r = 0; r < s.reports.size(); ++r) {
    const auto csv = study_csv(s.reports[r]);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    if (r == 0) out += "replication," + line + "\n";
    while (std::getline(in, line)) out += std::to_string(r) + "," + line + "\n";
  }
  return out;
}

StudyReport report_from_logs(std::span<const dialogue::SessionLog> logs) {
  StudyReport out;
  for (Arm arm : {Arm::Adaptive, Arm::GenericFrozen}) {
    ArmReport ar;
    ar.arm = arm;
    std::map<int, std::vector<double>> pooled;
    std::map<int, std::array<std::size_t, kNumActions>> actions;
    for (const auto& log : logs) {
      if ((log.mode == "adaptive") != (arm == Arm::Adaptive)) continue;
      CoacheeSessionRow row;
      row.coachee_id = log.coachee_id;
      row.session_index = log.session_index;
      row.exercise = log.exercise;
      row.termination = log.termination;
      row.turns = log.turns.size();
      row.mean_reward = log.mean_reward();
      auto& pool = pooled[log.session_index];
      auto& acts = actions[log.session_index];
      for (const auto& t : log.turns) {
        pool.push_back(t.reward.total);
        ++row.actions[static_cast<std::size_t>(action_code(t.action))];
        ++acts[static_cast<std::size_t>(action_code(t.action))];
      }
      if (log.termination == dialogue::Termination::Error) ar.errors.push_back(log.session_id + ": " + log.error);
      ar.rows.push_back(row);
    }
    if (ar.rows.empty()) continue;
    std::vector<double> means;
    for (const auto& [index, rewards] : pooled) {
      const auto c = calibration_stats(rewards);
      ar.sessions.push_back({index, c.mean, c.std, c.count, actions[index]});
      means.push_back(c.mean);
    }
    ar.slope = trend_slope(means);
    out.flagged = out.flagged || !ar.errors.empty();
    out.arms.push_back(std::move(ar));
  }
  return out;
}

void write_study_report(const std::filesystem::path& dir, const StudyReport& r) {
  std::filesystem::create_directories(dir);
  store::write_file_atomic(dir / "study.json", to_json(r).dump(2) + "\n");
  store::write_file_atomic(dir / "coachee_sessions.csv", study_csv(r));
  store::write_file_atomic(dir / "sessions.csv", session_csv(r));
  store::write_file_atomic(dir / "reward.svg", reward_svg(r));
}

}  // namespace coach::sim
