#pragma once

// Scripted coachee channel and a small policy used by the dialogue, store and
// server tests.

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "coach/dialogue/session.hpp"
#include "coach/nn/network.hpp"

namespace coach::testing {

inline policy::PolicyCheckpoint small_checkpoint(std::uint64_t seed = 1) {
  policy::PolicyCheckpoint ck;
  ck.spec = policy::q_network_spec(16, seed);
  ck.params = nn::Network(ck.spec).init_params();
  return ck;
}

inline dialogue::CoacheeTurnInput answer(std::string text, double speech = 12.0, double valence = 0.1) {
  dialogue::CoacheeTurnInput in;
  in.transcript = std::move(text);
  in.speech_duration_s = speech;
  in.silence_duration_s = 1.5;
  in.valence = {valence, valence + 0.05, valence - 0.05};
  return in;
}

/// Answers every awaiting_input with the next queued answer. An empty
/// optional in the queue means "stay silent for that prompt".
class ScriptedChannel : public dialogue::CoacheeChannel {
 public:
  std::vector<dialogue::SessionEvent> events;
  std::deque<std::optional<dialogue::CoacheeTurnInput>> answers;
  std::function<dialogue::CoacheeTurnInput(int)> default_answer = [](int i) {
    return answer("I had a very nice yoga class and it was great, number " + std::to_string(i));
  };
  bool is_connected = true;
  int disconnect_after_awaits = -1;

  void send(const dialogue::SessionEvent& e) override {
    events.push_back(e);
    if (e.kind != dialogue::SessionEvent::Kind::AwaitingInput) return;
    ++awaits_;
    if (disconnect_after_awaits >= 0 && awaits_ > disconnect_after_awaits) {
      is_connected = false;
      return;
    }
    if (!answers.empty()) {
      auto next = answers.front();
      answers.pop_front();
      ready_ = std::move(next);
    } else {
      ready_ = default_answer(awaits_);
    }
  }

  std::optional<dialogue::CoacheeTurnInput> poll() override {
    auto out = std::move(ready_);
    ready_.reset();
    return out;
  }

  bool connected() const override { return is_connected; }

  std::size_t count(dialogue::SessionEvent::Kind k) const {
    std::size_t n = 0;
    for (const auto& e : events) n += e.kind == k;
    return n;
  }

 private:
  std::optional<dialogue::CoacheeTurnInput> ready_;
  int awaits_ = 0;
};

}  // namespace coach::testing
