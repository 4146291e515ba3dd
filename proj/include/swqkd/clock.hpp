#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "swqkd/errors.hpp"

namespace swqkd {

// Deterministic discrete-event clock. Events fire in (time, priority,
// sequence) order. The priority class pins the relative order of unrelated
// event chains that land on the same instant; the sequence number (assigned
// at scheduling) breaks the remaining ties in insertion order, so a run is a
// pure function of (initial schedule, rng).
class VirtualClock {
 public:
  using Handler = std::function<void()>;

  double now() const { return now_; }
  bool empty() const { return queue_.empty(); }
  double peek_time() const {
    if (queue_.empty()) throw StateError("peek_time: no scheduled events");
    return queue_.top().time;
  }

  void schedule(double time, Handler fn) { schedule(time, 0, std::move(fn)); }

  void schedule(double time, int priority, Handler fn) {
    if (time < now_) throw ParamError("schedule: time precedes current clock");
    queue_.push(Event{time, priority, next_seq_++, std::move(fn)});
  }

  // Fires the earliest event; advances now() to its time.
  bool run_next() {
    if (queue_.empty()) return false;
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    ev.fn();
    return true;
  }

  // Fires every event with time <= t_end, then parks the clock at t_end.
  void run_until(double t_end) {
    while (!queue_.empty() && queue_.top().time <= t_end) run_next();
    if (t_end > now_) now_ = t_end;
  }

 private:
  struct Event {
    double time;
    int priority;
    std::uint64_t seq;
    Handler fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      if (a.priority != b.priority) return a.priority > b.priority;
      return a.seq > b.seq;
    }
  };

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  double now_ = 0.0;
  std::uint64_t next_seq_ = 0;
};

}  // namespace swqkd
