#pragma once

// FIFO replay of whole sequences with uniform sampling with replacement.

#include <optional>
#include <vector>

#include "dreamlab/env_core.hpp"

namespace dreamlab::nn {

template <class T>
class SequenceReplay {
 public:
  SequenceReplay(std::size_t capacity, std::size_t max_length)
      : capacity_(capacity), max_length_(max_length) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
    if (max_length == 0) throw ConfigError("replay sequence length must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 1024));
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t max_length() const { return max_length_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  // `length` is the item's step count; longer items are rejected.
  void push(T item, std::size_t length) {
    if (length > max_length_) {
      throw ValidationError("replay: sequence of " + std::to_string(length) +
                            " steps exceeds the configured length " + std::to_string(max_length_));
    }
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[oldest_] = std::move(item);
      oldest_ = (oldest_ + 1) % capacity_;
    }
  }

  // i = 0 is the oldest stored item.
  const T& at(std::size_t i) const { return items_.at((oldest_ + i) % items_.size()); }

  // Uniform with replacement; nullopt when the buffer is empty so the caller
  // can skip the update.
  std::optional<std::vector<const T*>> sample(std::size_t batch, Rng& rng) const {
    if (items_.empty()) return std::nullopt;
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<const T*> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(&items_[pick(rng)]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t max_length_;
  std::vector<T> items_;
  std::size_t oldest_ = 0;
};

}  // namespace dreamlab::nn
