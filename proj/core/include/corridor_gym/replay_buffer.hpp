#pragma once

#include <cstddef>
#include <mutex>
#include <vector>

#include "corridor_gym/random.hpp"

namespace cgym {

// One per-aircraft transition. Observations are stored in their scaled
// (network input) form as float to halve memory.
struct Transition {
  std::vector<float> obs;
  int action = 0;
  double reward = 0.0;
  std::vector<float> next_obs;
  bool done = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

// Fixed-capacity ring buffer. Storage grows on demand up to capacity, so a
// large nominal capacity costs nothing until it fills. Appends and sampling
// are mutually serialized.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  void push_all(std::vector<Transition> batch);

  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }

  // n distinct transitions chosen uniformly (Floyd's algorithm). Requires
  // n <= size().
  std::vector<Transition> sample(std::size_t n, Rng& rng) const;

  // Contents from oldest to newest.
  std::vector<Transition> snapshot() const;

 private:
  void push_locked(Transition t);

  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::vector<Transition> items_;
  mutable std::mutex mu_;
};

}  // namespace cgym
