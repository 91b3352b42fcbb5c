#pragma once

#include <atomic>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <new>
#include <optional>
#include <type_traits>

namespace nvmse {

#ifdef __cpp_lib_hardware_interference_size
inline constexpr std::size_t kCacheLine = std::hardware_destructive_interference_size;
#else
inline constexpr std::size_t kCacheLine = 64;
#endif

/// Bounded lock-free ring for one producer and any number of consumers.
///
/// Each cell carries a sequence stamp. A cell at position p is free for the
/// producer when stamp == p and holds a value for consumers when stamp == p + 1;
/// after a pop it is re-armed with p + capacity. Head and tail advance by
/// compare-and-exchange, so a value is handed to exactly one consumer.
///
/// try_push never blocks: a full ring reports failure and leaves no trace.
template <typename T>
class BoundedSpmcQueue {
   static_assert(std::is_nothrow_copy_assignable_v<T> || std::is_nothrow_move_assignable_v<T>);

  public:
   explicit BoundedSpmcQueue(std::size_t capacity) : mask_(capacity - 1), cells_(new Cell[capacity])
   {
      for (std::size_t i = 0; i < capacity; ++i)
         cells_[i].seq.store(i, std::memory_order_relaxed);
   }

   BoundedSpmcQueue(const BoundedSpmcQueue&) = delete;
   BoundedSpmcQueue& operator=(const BoundedSpmcQueue&) = delete;

   static bool valid_capacity(std::size_t capacity) noexcept { return capacity > 0 && std::has_single_bit(capacity); }

   std::size_t capacity() const noexcept { return mask_ + 1; }

   bool try_push(const T& value) noexcept
   {
      std::size_t pos = tail_.load(std::memory_order_relaxed);
      for (;;) {
         Cell& cell = cells_[pos & mask_];
         const std::size_t seq = cell.seq.load(std::memory_order_acquire);
         const auto diff = static_cast<std::intptr_t>(seq) - static_cast<std::intptr_t>(pos);
         if (diff == 0) {
            if (tail_.compare_exchange_weak(pos, pos + 1, std::memory_order_seq_cst, std::memory_order_relaxed)) {
               cell.value = value;
               cell.seq.store(pos + 1, std::memory_order_release);
               return true;
            }
         } else if (diff < 0) {
            return false;  // full: the consumer has not re-armed this cell yet
         } else {
            pos = tail_.load(std::memory_order_relaxed);
         }
      }
   }

   std::optional<T> try_pop() noexcept
   {
      std::size_t pos = head_.load(std::memory_order_relaxed);
      for (;;) {
         Cell& cell = cells_[pos & mask_];
         const std::size_t seq = cell.seq.load(std::memory_order_acquire);
         const auto diff = static_cast<std::intptr_t>(seq) - static_cast<std::intptr_t>(pos + 1);
         if (diff == 0) {
            if (head_.compare_exchange_weak(pos, pos + 1, std::memory_order_seq_cst, std::memory_order_relaxed)) {
               T value = std::move(cell.value);
               cell.seq.store(pos + mask_ + 1, std::memory_order_release);
               return value;
            }
         } else if (diff < 0) {
            return std::nullopt;  // empty
         } else {
            pos = head_.load(std::memory_order_relaxed);
         }
      }
   }

   /// Approximate under concurrency; exact when quiescent.
   std::size_t size() const noexcept
   {
      const auto tail = tail_.load(std::memory_order_seq_cst);
      const auto head = head_.load(std::memory_order_seq_cst);
      return tail >= head ? tail - head : 0;
   }
   bool empty() const noexcept { return size() == 0; }

  private:
   struct alignas(kCacheLine) Cell {
      std::atomic<std::size_t> seq{0};
      T value{};
   };

   const std::size_t mask_;
   std::unique_ptr<Cell[]> cells_;
   alignas(kCacheLine) std::atomic<std::size_t> tail_{0};
   alignas(kCacheLine) std::atomic<std::size_t> head_{0};
};

}  // namespace nvmse
