#pragma once

// Uniform-replay ring buffer. Storage grows lazily up to the configured
// capacity, then the write cursor wraps and overwrites the oldest record.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "exotwin/environment.hpp"
#include "exotwin/rng.hpp"

namespace exotwin {

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0)
      throw std::invalid_argument("replay buffer: capacity must be > 0");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return storage_.size(); }

  void push(const Transition& t) {
    if (storage_.size() < capacity_) {
      storage_.push_back(t);
    } else {
      storage_[cursor_] = t;
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  /// Slot access in storage order (not age order).
  const Transition& operator[](std::size_t slot) const {
    return storage_.at(slot);
  }

  /// n independent uniform draws over the occupied slots.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
    if (storage_.empty())
      throw std::logic_error("replay buffer: sampling from an empty buffer");
    std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
    std::vector<std::size_t> idx(n);
    for (std::size_t& i : idx) i = pick(rng);
    return idx;
  }

  std::vector<Transition> sample(std::size_t n, Rng& rng) const {
    std::vector<Transition> batch;
    batch.reserve(n);
    for (std::size_t i : sample_indices(n, rng)) batch.push_back(storage_[i]);
    return batch;
  }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> storage_;
};

}  // namespace exotwin
