#pragma once

// In-order three-stage pipeline (acquire -> transform -> emit) over a bounded FIFO, so that
// staging of item k+1 and write-back of item k-1 overlap the transform of item k.

#include <condition_variable>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "voxelforge/augment.hpp"

namespace vf {

/// Failure of one batch item, tagged with its position in the batch.
class PipelineError : public Error {
 public:
  PipelineError(std::size_t index, const std::string& what)
      : Error("item " + std::to_string(index) + ": " + what), index_(index), detail_(what) {}
  std::size_t index() const { return index_; }
  /// The underlying failure message without the item prefix.
  const std::string& detail() const { return detail_; }

 private:
  std::size_t index_;
  std::string detail_;
};

/// Blocking FIFO with fixed capacity. close() wakes all waiters; pop() then drains and
/// returns nullopt once empty.
template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(std::max<std::size_t>(1, capacity)) {}

  bool push(T value) {
    std::unique_lock lock(m_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(value));
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(m_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return v;
  }

  void close() {
    std::lock_guard lock(m_);
    closed_ = true;
    not_full_.notify_all();
    not_empty_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
  bool closed_ = false;
  std::mutex m_;
  std::condition_variable not_full_, not_empty_;
};

/// Runs acquire(i) -> transform(staged) -> emit(i, result) for i in [0, n), in order.
/// depth 1 runs every stage of an item before starting the next (no overlap). depth >= 2
/// runs the three stages on separate threads joined by FIFOs of capacity depth - 1.
/// The first failure stops the pipeline and is rethrown as PipelineError.
template <class Acquire, class Transform, class Emit>
void run_fifo_pipeline(std::size_t n, std::size_t depth, Acquire&& acquire, Transform&& transform, Emit&& emit) {
  using Staged = std::decay_t<decltype(acquire(std::size_t{}))>;
  using Result = std::decay_t<decltype(transform(std::declval<Staged&&>()))>;

  auto guarded = [](std::size_t i, auto&& fn) -> decltype(auto) {
    try {
      return fn();
    } catch (const PipelineError&) {
      throw;
    } catch (const std::exception& e) {
      throw PipelineError(i, e.what());
    }
  };

  if (depth <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      auto staged = guarded(i, [&] { return acquire(i); });
      auto result = guarded(i, [&] { return transform(std::move(staged)); });
      guarded(i, [&] { emit(i, std::move(result)); });
    }
    return;
  }

  const std::size_t cap = depth - 1;
  BoundedQueue<std::pair<std::size_t, Staged>> staged_q(cap);
  BoundedQueue<std::pair<std::size_t, Result>> result_q(cap);
  std::mutex err_m;
  std::exception_ptr first_error;
  auto fail = [&](std::exception_ptr e) {
    {
      std::lock_guard lock(err_m);
      if (!first_error) first_error = e;
    }
    staged_q.close();
    result_q.close();
  };

  std::thread loader([&] {
    try {
      for (std::size_t i = 0; i < n; ++i)
        if (!staged_q.push({i, guarded(i, [&] { return acquire(i); })})) return;
      staged_q.close();
    } catch (...) {
      fail(std::current_exception());
    }
  });
  std::thread worker([&] {
    try {
      while (auto item = staged_q.pop()) {
        const std::size_t i = item->first;
        if (!result_q.push({i, guarded(i, [&] { return transform(std::move(item->second)); })})) return;
      }
      result_q.close();
    } catch (...) {
      fail(std::current_exception());
    }
  });
  try {
    while (auto item = result_q.pop()) {
      const std::size_t i = item->first;
      guarded(i, [&] { emit(i, std::move(item->second)); });
    }
  } catch (...) {
    fail(std::current_exception());
  }
  loader.join();
  worker.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct BatchItem {
  Volume image;
  LabelMap labels;
};

struct PipelineOptions {
  std::size_t depth = 4;  ///< FIFO depth; 1 disables stage overlap
  bool keep_results = true;  ///< false: items go to the sink only and the result is empty
  ApplyOptions apply{};
};

/// Per-item seed derived from the master seed and the item's batch position only.
inline std::uint64_t item_seed(std::uint64_t master, std::size_t index) { return combine_seed(master, index); }

/// Augments a batch in submission order. Each item's parameters depend only on
/// (spec.seed, index), never on depth or timing. `sink`, when set, receives each finished
/// item in order on the emitting thread, before it is stored in the result.
inline std::vector<AugmentedPair> pipeline_run(std::span<const BatchItem> batch, const AugmentSpec& spec,
                                               const PipelineOptions& opt = {},
                                               const std::function<void(std::size_t, const AugmentedPair&)>& sink = {}) {
  if (batch.empty()) throw InvalidArgument("pipeline_run: empty batch");
  spec.validate();
  std::vector<AugmentedPair> out(opt.keep_results ? batch.size() : 0);
  struct Staged {
    BatchItem item;
    TransformParams params;
  };
  run_fifo_pipeline(
      batch.size(), opt.depth,
      [&](std::size_t i) {
        // Staging copy, standing in for the host-to-device transfer.
        return Staged{batch[i], sample_params(spec, batch[i].image.dims(), item_seed(spec.seed, i))};
      },
      [&](Staged&& s) { return apply(s.item.image, s.item.labels, s.params, opt.apply); },
      [&](std::size_t i, AugmentedPair&& r) {
        if (sink) sink(i, r);
        if (opt.keep_results) out[i] = std::move(r);
      });
  return out;
}

}  // namespace vf
