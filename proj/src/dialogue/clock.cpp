#include "coach/dialogue/clock.hpp"

#include <algorithm>
#include <thread>

namespace coach::dialogue {

SteadyClock::SteadyClock() : origin_(std::chrono::steady_clock::now()) {}

double SteadyClock::now() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin_).count();
}

void SteadyClock::sleep_until(double t) {
  const auto target = origin_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                    std::chrono::duration<double>(t));
  std::this_thread::sleep_until(target);
}

double VirtualClock::now() const {
  std::lock_guard lock(mu_);
  return now_;
}

void VirtualClock::sleep_until(double t) {
  std::lock_guard lock(mu_);
  now_ = std::max(now_, t);
}

void VirtualClock::advance(double seconds) {
  std::lock_guard lock(mu_);
  now_ += seconds;
}

}  // namespace coach::dialogue
