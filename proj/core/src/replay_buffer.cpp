#include "corridor_gym/replay_buffer.hpp"

#include <algorithm>
#include <unordered_set>

#include "corridor_gym/errors.hpp"

namespace cgym {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push_locked(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

void ReplayBuffer::push(Transition t) {
  std::lock_guard lock(mu_);
  push_locked(std::move(t));
}

void ReplayBuffer::push_all(std::vector<Transition> batch) {
  std::lock_guard lock(mu_);
  for (auto& t : batch) push_locked(std::move(t));
}

std::size_t ReplayBuffer::size() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  std::lock_guard lock(mu_);
  const std::size_t total = items_.size();
  if (n > total) throw ContractViolation("cannot sample more transitions than stored");
  std::unordered_set<std::size_t> chosen;
  std::vector<std::size_t> order;
  chosen.reserve(n);
  order.reserve(n);
  for (std::size_t j = total - n; j < total; ++j) {
    const std::size_t t = rng.index(j + 1);
    const std::size_t pick = chosen.count(t) ? j : t;
    chosen.insert(pick);
    order.push_back(pick);
  }
  std::vector<Transition> out;
  out.reserve(n);
  for (std::size_t i : order) out.push_back(items_[i]);
  return out;
}

std::vector<Transition> ReplayBuffer::snapshot() const {
  std::lock_guard lock(mu_);
  std::vector<Transition> out;
  out.reserve(items_.size());
  for (std::size_t k = 0; k < items_.size(); ++k) out.push_back(items_[(head_ + k) % items_.size()]);
  return out;
}

}  // namespace cgym
