#pragma once

// Scratch-memory and data-movement instrumentation.
//
// Every temporary buffer a backend allocates goes through ScratchBuffer, and
// every packing routine reports the elements it copies. The counters are
// process-wide atomics, so a Probe observes all threads.

#include <cstddef>
#include <span>

#include "smmconv/tensor.hpp"

namespace smmconv::workspace {

struct Snapshot {
  std::size_t allocations = 0;      // ScratchBuffer constructions
  std::size_t allocated_bytes = 0;  // sum over those allocations
  std::size_t peak_live_bytes = 0;  // high-water mark of live scratch
  std::size_t copied_elements = 0;  // input elements moved by packers
  std::size_t pack_calls = 0;       // packer invocations
};

/// Captures counter deltas from construction to read(). Resets the peak, so
/// overlapping probes are not supported.
class Probe {
 public:
  Probe();
  Snapshot read() const;

 private:
  Snapshot base_;
};

void record_copy(std::size_t elements);

/// Heap scratch of `elements` floats, aligned like tensors and zero-filled
/// on construction. Counted as live until destroyed.
class ScratchBuffer {
 public:
  ScratchBuffer() = default;
  explicit ScratchBuffer(std::size_t elements);
  ~ScratchBuffer();

  ScratchBuffer(ScratchBuffer&& other) noexcept;
  ScratchBuffer& operator=(ScratchBuffer&& other) noexcept;
  ScratchBuffer(const ScratchBuffer&) = delete;
  ScratchBuffer& operator=(const ScratchBuffer&) = delete;

  std::size_t size() const { return values_.size(); }
  std::size_t bytes() const { return values_.size() * sizeof(float); }
  float* data() { return values_.data(); }
  const float* data() const { return values_.data(); }
  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }

 private:
  void release() noexcept;

  AlignedFloats values_;
};

}  // namespace smmconv::workspace
