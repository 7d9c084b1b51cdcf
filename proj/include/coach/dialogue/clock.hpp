#pragma once

#include <chrono>
#include <mutex>

namespace coach::dialogue {

/// Seconds since an arbitrary origin.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() const = 0;
  virtual void sleep_until(double t) = 0;
  void sleep_for(double seconds) { sleep_until(now() + seconds); }
};

class SteadyClock : public Clock {
 public:
  SteadyClock();
  double now() const override;
  void sleep_until(double t) override;

 private:
  std::chrono::steady_clock::time_point origin_;
};

/// Time advances only when someone sleeps; used by the simulator and tests.
class VirtualClock : public Clock {
 public:
  double now() const override;
  void sleep_until(double t) override;
  void advance(double seconds);

 private:
  mutable std::mutex mu_;
  double now_ = 0.0;
};

}  // namespace coach::dialogue
