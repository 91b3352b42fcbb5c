#pragma once

#include "nvmse/buffer_pool.hpp"
#include "nvmse/device.hpp"

#include <chrono>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace nvmse {

/// Base: block reads through a staging frame (two copies per miss).
/// SE1:  memcpy straight from the mapped region (one copy per miss).
/// SE2:  redirect the slot handle into the mapped region (zero copies per miss),
///       copying the page back before the first modification.
enum class EngineKind { Base, SE1, SE2 };

std::string_view engine_name(EngineKind kind) noexcept;  // "base" / "se1" / "se2"
EngineKind parse_engine(std::string_view text);
/// Copies performed by a cold read miss.
constexpr unsigned read_miss_copies(EngineKind kind) noexcept
{
   return kind == EngineKind::Base ? 2u : kind == EngineKind::SE1 ? 1u : 0u;
}

struct Tid {
   std::uint64_t page_no = 0;
   std::uint16_t slot = 0;
   bool operator==(const Tid&) const = default;
};

/// A pinned page. Unpins on destruction.
class PageRef {
  public:
   PageRef() = default;
   PageRef(BufferPool& pool, SlotId slot, bool hit);
   PageRef(PageRef&& other) noexcept;
   PageRef& operator=(PageRef&& other) noexcept;
   PageRef(const PageRef&) = delete;
   PageRef& operator=(const PageRef&) = delete;
   ~PageRef() { release(); }

   std::span<const std::byte> bytes() const;
   SlotId slot() const noexcept { return slot_; }
   bool hit() const noexcept { return hit_; }
   bool valid() const noexcept;
   void release() noexcept;

  private:
   BufferPool* pool_ = nullptr;
   SlotId slot_ = 0;
   std::uint64_t generation_ = 0;
   bool hit_ = false;
};

class Engine {
  public:
   Engine(EngineKind kind, BufferPool& pool);

   /// Registers a relation's device and returns its relation id. Base needs the
   /// block facade, SE1/SE2 the mapped one.
   std::uint32_t attach(Device& device);

   /// Pins the page, loading it on a miss along the engine's read path.
   PageRef read_page(std::uint32_t rel, std::uint64_t page_no);
   /// In-place, equal-length tuple update into the private frame. The device is
   /// untouched until flush().
   void write_tuple(std::uint32_t rel, Tid tid, std::span<const std::byte> new_bytes);
   /// Writes dirty frames back (Base: block writes, SE1/SE2: mapped writes) and
   /// syncs every attached device.
   std::size_t flush();

   EngineKind kind() const noexcept { return kind_; }
   BufferPool& pool() noexcept { return pool_; }
   Device& device(std::uint32_t rel);
   std::size_t relation_count() const noexcept { return devices_.size(); }

   /// Time spent inside read paths and copy-backs.
   std::chrono::nanoseconds data_movement() const noexcept { return dm_; }
   void reset_data_movement() noexcept { dm_ = {}; }

  private:
   void write_back(const PageTag& tag, std::span<const std::byte> frame);

   EngineKind kind_;
   BufferPool& pool_;
   std::vector<Device*> devices_;
   std::chrono::nanoseconds dm_{0};
};

}  // namespace nvmse
