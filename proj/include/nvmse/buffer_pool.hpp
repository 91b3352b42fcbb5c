#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace nvmse {

class Device;

struct PageTag {
   std::uint32_t relation = 0;
   std::uint64_t page_no = 0;
   bool operator==(const PageTag&) const = default;
};

struct PageTagHash {
   std::size_t operator()(const PageTag& t) const noexcept
   {
      return std::hash<std::uint64_t>{}(t.page_no * 0x9E3779B97F4A7C15ull ^ t.relation);
   }
};

using SlotId = std::uint32_t;

struct BufferPoolStats {
   std::uint64_t hits = 0;
   std::uint64_t misses = 0;
   std::uint64_t evictions = 0;
   std::uint64_t writebacks = 0;
   std::uint64_t redirects = 0;
   std::uint64_t copybacks = 0;
   std::uint64_t max_victim_visits = 0;
};

inline constexpr std::size_t kDefaultPoolCapacity = 1024;

/// Fixed-capacity page cache with pinning, CLOCK second-chance replacement and
/// dirty tracking. Each slot owns a private frame plus a data handle that either
/// designates that frame or is redirected to a page of a mapped region.
///
/// Invariants:
///  - a pinned slot is never chosen as victim;
///  - a redirected slot is never dirty;
///  - page_table maps every occupied slot's tag to the slot itself.
///
/// Single owner: exactly one thread drives a pool.
class BufferPool {
  public:
   /// Writes a dirty victim or flushed page back to storage.
   using WritebackFn = std::function<void(const PageTag&, std::span<const std::byte>)>;

   struct Lookup {
      SlotId slot;
      bool hit;
   };

   BufferPool(std::size_t capacity, std::size_t page_size);

   void set_writeback(WritebackFn fn) { writeback_ = std::move(fn); }

   /// Pins the slot holding `tag`, claiming a victim on a miss. The frame of a
   /// freshly claimed slot is not loaded; that is the engine's job.
   Lookup get_slot(const PageTag& tag);
   void unpin(SlotId slot);
   void mark_dirty(SlotId slot);

   /// Points the slot's handle at a mapped page. The private frame stays inert.
   void redirect(SlotId slot, std::span<const std::byte> region_view);
   /// Copies the mapped page back into the private frame (one counted copy on
   /// `device`) and points the handle at the frame again.
   void unredirect_with_copyback(SlotId slot, Device& device);

   /// Writes every dirty page through the writeback function and clears the
   /// dirty flags. Pinned pages are flushed too. Returns the writeback count.
   std::size_t flush_all();

   /// Bytes the slot's handle currently designates.
   std::span<const std::byte> data(SlotId slot) const;
   /// The private frame, for loading and modifying. Refused while redirected.
   std::span<std::byte> frame(SlotId slot);

   std::optional<SlotId> find(const PageTag& tag) const;
   std::optional<PageTag> tag(SlotId slot) const;
   std::uint32_t pin_count(SlotId slot) const;
   bool is_dirty(SlotId slot) const;
   bool is_redirected(SlotId slot) const;
   std::uint64_t generation(SlotId slot) const;

   std::size_t capacity() const noexcept { return slots_.size(); }
   std::size_t page_size() const noexcept { return page_size_; }
   std::size_t clock_hand() const noexcept { return hand_; }
   std::size_t occupied() const noexcept { return page_table_.size(); }
   const BufferPoolStats& stats() const noexcept { return stats_; }
   void reset_stats() noexcept { stats_ = {}; }

   /// Throws std::logic_error describing the first broken invariant.
   void check_invariants() const;

  private:
   struct Slot {
      std::byte* frame = nullptr;
      const std::byte* handle = nullptr;
      std::optional<PageTag> tag;
      std::uint32_t pins = 0;
      bool dirty = false;
      bool ref = false;
      std::uint64_t generation = 0;
   };

   Slot& at(SlotId slot);
   const Slot& at(SlotId slot) const;
   SlotId find_victim();
   void release(Slot& s);

   std::size_t page_size_;
   std::unique_ptr<std::byte[]> arena_;
   std::vector<Slot> slots_;
   std::unordered_map<PageTag, SlotId, PageTagHash> page_table_;
   std::size_t hand_ = 0;
   WritebackFn writeback_;
   BufferPoolStats stats_;
};

}  // namespace nvmse
