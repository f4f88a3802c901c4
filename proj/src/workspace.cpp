#include "smmconv/workspace.hpp"

#include <atomic>

namespace smmconv::workspace {

namespace {

struct Counters {
  std::atomic<std::size_t> allocations{0};
  std::atomic<std::size_t> allocated_bytes{0};
  std::atomic<std::size_t> live_bytes{0};
  std::atomic<std::size_t> peak_live_bytes{0};
  std::atomic<std::size_t> copied_elements{0};
  std::atomic<std::size_t> pack_calls{0};
};

Counters& counters() {
  static Counters c;
  return c;
}

void on_allocate(std::size_t bytes) {
  auto& c = counters();
  c.allocations.fetch_add(1, std::memory_order_relaxed);
  c.allocated_bytes.fetch_add(bytes, std::memory_order_relaxed);
  const std::size_t live =
      c.live_bytes.fetch_add(bytes, std::memory_order_relaxed) + bytes;
  std::size_t peak = c.peak_live_bytes.load(std::memory_order_relaxed);
  while (live > peak &&
         !c.peak_live_bytes.compare_exchange_weak(peak, live,
                                                  std::memory_order_relaxed)) {
  }
}

}  // namespace

Probe::Probe() {
  auto& c = counters();
  c.peak_live_bytes.store(c.live_bytes.load());
  base_.allocations = c.allocations.load();
  base_.allocated_bytes = c.allocated_bytes.load();
  base_.peak_live_bytes = c.live_bytes.load();
  base_.copied_elements = c.copied_elements.load();
  base_.pack_calls = c.pack_calls.load();
}

Snapshot Probe::read() const {
  auto& c = counters();
  Snapshot s;
  s.allocations = c.allocations.load() - base_.allocations;
  s.allocated_bytes = c.allocated_bytes.load() - base_.allocated_bytes;
  s.peak_live_bytes = c.peak_live_bytes.load() - base_.peak_live_bytes;
  s.copied_elements = c.copied_elements.load() - base_.copied_elements;
  s.pack_calls = c.pack_calls.load() - base_.pack_calls;
  return s;
}

void record_copy(std::size_t elements) {
  auto& c = counters();
  c.copied_elements.fetch_add(elements, std::memory_order_relaxed);
  c.pack_calls.fetch_add(1, std::memory_order_relaxed);
}

ScratchBuffer::ScratchBuffer(std::size_t elements) : values_(elements, 0.0f) {
  on_allocate(bytes());
}

ScratchBuffer::~ScratchBuffer() { release(); }

ScratchBuffer::ScratchBuffer(ScratchBuffer&& other) noexcept
    : values_(std::move(other.values_)) {
  other.values_.clear();
}

ScratchBuffer& ScratchBuffer::operator=(ScratchBuffer&& other) noexcept {
  if (this != &other) {
    release();
    values_ = std::move(other.values_);
    other.values_.clear();
  }
  return *this;
}

void ScratchBuffer::release() noexcept {
  if (!values_.empty()) {
    counters().live_bytes.fetch_sub(bytes(), std::memory_order_relaxed);
    values_ = AlignedFloats();
  }
}

}  // namespace smmconv::workspace
