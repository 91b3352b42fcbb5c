#include "nvmse/buffer_pool.hpp"

#include "nvmse/device.hpp"
#include "nvmse/error.hpp"

#include <cstring>
#include <stdexcept>
#include <string>

namespace nvmse {

BufferPool::BufferPool(std::size_t capacity, std::size_t page_size)
    : page_size_(page_size), slots_(capacity)
{
   if (capacity == 0)
      raise(Errc::InvalidCapacity, "buffer pool needs at least one slot");
   arena_ = std::make_unique<std::byte[]>(capacity * page_size);
   for (std::size_t i = 0; i < capacity; ++i) {
      slots_[i].frame = arena_.get() + i * page_size;
      slots_[i].handle = slots_[i].frame;
   }
   page_table_.reserve(capacity);
}

BufferPool::Slot& BufferPool::at(SlotId slot)
{
   if (slot >= slots_.size())
      raise(Errc::OutOfRange, "slot " + std::to_string(slot) + " out of range");
   return slots_[slot];
}

const BufferPool::Slot& BufferPool::at(SlotId slot) const
{
   if (slot >= slots_.size())
      raise(Errc::OutOfRange, "slot " + std::to_string(slot) + " out of range");
   return slots_[slot];
}

// -------------------------------------------------------------------------------------
SlotId BufferPool::find_victim()
{
   // First pass clears reference bits, second pass is guaranteed to find any
   // unpinned slot, so 2 x capacity visits bound the search.
   const std::size_t limit = 2 * slots_.size();
   for (std::size_t visits = 1; visits <= limit; ++visits) {
      const auto idx = static_cast<SlotId>(hand_);
      hand_ = (hand_ + 1) % slots_.size();
      auto& s = slots_[idx];
      if (!s.tag || (s.pins == 0 && !s.ref)) {
         stats_.max_victim_visits = std::max<std::uint64_t>(stats_.max_victim_visits, visits);
         return idx;
      }
      if (s.pins == 0)
         s.ref = false;
   }
   raise(Errc::PoolExhausted, "all " + std::to_string(slots_.size()) + " slots are pinned");
}

void BufferPool::release(Slot& s)
{
   if (!s.tag)
      return;
   if (s.dirty) {
      if (!writeback_)
         raise(Errc::Io, "dirty victim without a writeback path");
      writeback_(*s.tag, {s.frame, page_size_});
      ++stats_.writebacks;
   }
   // A clean redirected slot needs no action beyond dropping the alias.
   page_table_.erase(*s.tag);
   s.tag.reset();
   s.handle = s.frame;
   s.dirty = false;
   s.ref = false;
   ++stats_.evictions;
}

BufferPool::Lookup BufferPool::get_slot(const PageTag& tag)
{
   if (auto it = page_table_.find(tag); it != page_table_.end()) {
      auto& s = slots_[it->second];
      ++s.pins;
      s.ref = true;
      ++stats_.hits;
      return {it->second, true};
   }
   const auto idx = find_victim();
   auto& s = slots_[idx];
   release(s);
   s.tag = tag;
   s.handle = s.frame;
   s.pins = 1;
   s.ref = false;
   s.dirty = false;
   ++s.generation;
   page_table_.emplace(tag, idx);
   ++stats_.misses;
   return {idx, false};
}

void BufferPool::unpin(SlotId slot)
{
   auto& s = at(slot);
   if (s.pins == 0)
      raise(Errc::NotPinned, "unpin of unpinned slot " + std::to_string(slot));
   --s.pins;
}

void BufferPool::mark_dirty(SlotId slot)
{
   auto& s = at(slot);
   if (s.pins == 0)
      raise(Errc::NotPinned, "mark_dirty on unpinned slot " + std::to_string(slot));
   if (s.handle != s.frame)
      raise(Errc::DirtyRedirected, "slot " + std::to_string(slot) + " is redirected; copy it back first");
   s.dirty = true;
}

void BufferPool::redirect(SlotId slot, std::span<const std::byte> region_view)
{
   auto& s = at(slot);
   if (s.pins == 0)
      raise(Errc::NotPinned, "redirect of unpinned slot " + std::to_string(slot));
   if (s.dirty)
      raise(Errc::DirtySlot, "slot " + std::to_string(slot) + " is dirty");
   if (region_view.size() != page_size_)
      raise(Errc::OutOfRange, "region view is not one page");
   s.handle = region_view.data();
   ++stats_.redirects;
}

void BufferPool::unredirect_with_copyback(SlotId slot, Device& device)
{
   auto& s = at(slot);
   if (s.handle == s.frame)
      raise(Errc::NotRedirected, "slot " + std::to_string(slot) + " is not redirected");
   if (s.pins == 0)
      raise(Errc::NotPinned, "copy-back on unpinned slot " + std::to_string(slot));
   if (device.mapped_ref(s.tag->page_no).data() != s.handle)
      throw std::logic_error("redirected handle does not designate the tagged page");
   device.mapped_copy(s.tag->page_no, {s.frame, page_size_});
   s.handle = s.frame;
   ++stats_.copybacks;
}

std::size_t BufferPool::flush_all()
{
   std::size_t count = 0;
   for (auto& s : slots_) {
      if (!s.tag || !s.dirty)
         continue;
      if (!writeback_)
         raise(Errc::Io, "flush without a writeback path");
      writeback_(*s.tag, {s.frame, page_size_});
      s.dirty = false;
      ++stats_.writebacks;
      ++count;
   }
   return count;
}

// -------------------------------------------------------------------------------------
std::span<const std::byte> BufferPool::data(SlotId slot) const
{
   return {at(slot).handle, page_size_};
}

std::span<std::byte> BufferPool::frame(SlotId slot)
{
   auto& s = at(slot);
   if (s.handle != s.frame)
      raise(Errc::DirtyRedirected, "slot " + std::to_string(slot) + " is redirected; its frame is inert");
   return {s.frame, page_size_};
}

std::optional<SlotId> BufferPool::find(const PageTag& tag) const
{
   if (auto it = page_table_.find(tag); it != page_table_.end())
      return it->second;
   return std::nullopt;
}

std::optional<PageTag> BufferPool::tag(SlotId slot) const
{
   return at(slot).tag;
}

std::uint32_t BufferPool::pin_count(SlotId slot) const
{
   return at(slot).pins;
}

bool BufferPool::is_dirty(SlotId slot) const
{
   return at(slot).dirty;
}

bool BufferPool::is_redirected(SlotId slot) const
{
   const auto& s = at(slot);
   return s.handle != s.frame;
}

std::uint64_t BufferPool::generation(SlotId slot) const
{
   return at(slot).generation;
}

void BufferPool::check_invariants() const
{
   if (hand_ >= slots_.size())
      throw std::logic_error("clock hand out of range");
   std::size_t occupied = 0;
   for (std::size_t i = 0; i < slots_.size(); ++i) {
      const auto& s = slots_[i];
      const bool redirected = s.handle != s.frame;
      if (s.dirty && redirected)
         throw std::logic_error("slot " + std::to_string(i) + " is dirty and redirected");
      if (!s.tag) {
         if (s.pins || s.dirty || redirected)
            throw std::logic_error("free slot " + std::to_string(i) + " carries state");
         continue;
      }
      ++occupied;
      auto it = page_table_.find(*s.tag);
      if (it == page_table_.end() || it->second != i)
         throw std::logic_error("page table does not map slot " + std::to_string(i) + " back to itself");
   }
   if (occupied != page_table_.size())
      throw std::logic_error("page table has entries for unoccupied slots");
   if (stats_.max_victim_visits > 2 * slots_.size())
      throw std::logic_error("victim search exceeded 2 x capacity");
}

}  // namespace nvmse
