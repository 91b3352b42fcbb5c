#include "nvmse/engine.hpp"

#include "nvmse/error.hpp"
#include "nvmse/storage_format.hpp"

#include <cstring>
#include <string>

namespace nvmse {

std::string_view engine_name(EngineKind kind) noexcept
{
   switch (kind) {
      case EngineKind::Base: return "base";
      case EngineKind::SE1: return "se1";
      case EngineKind::SE2: return "se2";
   }
   return "?";
}

EngineKind parse_engine(std::string_view text)
{
   if (text == "base")
      return EngineKind::Base;
   if (text == "se1")
      return EngineKind::SE1;
   if (text == "se2")
      return EngineKind::SE2;
   raise(Errc::Config, "unknown engine '" + std::string(text) + "' (expected base, se1 or se2)");
}

// -------------------------------------------------------------------------------------
PageRef::PageRef(BufferPool& pool, SlotId slot, bool hit)
    : pool_(&pool), slot_(slot), generation_(pool.generation(slot)), hit_(hit)
{
}

PageRef::PageRef(PageRef&& other) noexcept
    : pool_(std::exchange(other.pool_, nullptr)), slot_(other.slot_), generation_(other.generation_), hit_(other.hit_)
{
}

PageRef& PageRef::operator=(PageRef&& other) noexcept
{
   if (this != &other) {
      release();
      pool_ = std::exchange(other.pool_, nullptr);
      slot_ = other.slot_;
      generation_ = other.generation_;
      hit_ = other.hit_;
   }
   return *this;
}

bool PageRef::valid() const noexcept
{
   return pool_ && pool_->generation(slot_) == generation_ && pool_->pin_count(slot_) > 0;
}

std::span<const std::byte> PageRef::bytes() const
{
   if (!valid())
      raise(Errc::NotPinned, "stale page reference");
   return pool_->data(slot_);
}

void PageRef::release() noexcept
{
   if (pool_) {
      try {
         pool_->unpin(slot_);
      } catch (...) {
      }
      pool_ = nullptr;
   }
}

// -------------------------------------------------------------------------------------
Engine::Engine(EngineKind kind, BufferPool& pool) : kind_(kind), pool_(pool)
{
   pool_.set_writeback([this](const PageTag& tag, std::span<const std::byte> frame) { write_back(tag, frame); });
}

std::uint32_t Engine::attach(Device& device)
{
   if (device.page_size() != pool_.page_size())
      raise(Errc::Misaligned, "device page size differs from the buffer pool's");
   if (kind_ == EngineKind::Base && !device.options().block_io)
      raise(Errc::BlockIoDisabled, "base engine needs the block facade");
   if (kind_ != EngineKind::Base && !device.options().mapped)
      raise(Errc::MappingDisabled, std::string(engine_name(kind_)) + " needs the mapped facade");
   devices_.push_back(&device);
   return static_cast<std::uint32_t>(devices_.size() - 1);
}

Device& Engine::device(std::uint32_t rel)
{
   if (rel >= devices_.size())
      raise(Errc::OutOfRange, "unknown relation id " + std::to_string(rel));
   return *devices_[rel];
}

PageRef Engine::read_page(std::uint32_t rel, std::uint64_t page_no)
{
   const auto start = std::chrono::steady_clock::now();
   auto& dev = device(rel);
   if (page_no >= dev.page_count())
      raise(Errc::OutOfRange, "page " + std::to_string(page_no) + " beyond relation end");
   const auto [slot, hit] = pool_.get_slot({rel, page_no});
   PageRef ref(pool_, slot, hit);
   if (!hit) {
      switch (kind_) {
         case EngineKind::Base: dev.block_read(page_no, pool_.frame(slot)); break;
         case EngineKind::SE1: dev.mapped_copy(page_no, pool_.frame(slot)); break;
         case EngineKind::SE2: pool_.redirect(slot, dev.mapped_ref(page_no)); break;
      }
   }
   dm_ += std::chrono::steady_clock::now() - start;
   return ref;
}

void Engine::write_tuple(std::uint32_t rel, Tid tid, std::span<const std::byte> new_bytes)
{
   auto ref = read_page(rel, tid.page_no);
   const auto slot = ref.slot();
   {
      // Validate against whatever the handle designates before touching anything.
      const auto body = tuple_body(ref.bytes(), tid.slot);
      if (body.size() != new_bytes.size())
         raise(Errc::LengthMismatch, "tuple is " + std::to_string(body.size()) + " bytes, update has " +
                                         std::to_string(new_bytes.size()));
   }
   if (pool_.is_redirected(slot)) {
      const auto start = std::chrono::steady_clock::now();
      pool_.unredirect_with_copyback(slot, device(rel));
      dm_ += std::chrono::steady_clock::now() - start;
   }
   auto frame = pool_.frame(slot);
   auto body = tuple_body(frame, tid.slot);
   std::memcpy(body.data(), new_bytes.data(), new_bytes.size());
   reseal_page(frame);
   pool_.mark_dirty(slot);
}

void Engine::write_back(const PageTag& tag, std::span<const std::byte> frame)
{
   auto& dev = device(tag.relation);
   if (kind_ == EngineKind::Base)
      dev.block_write(tag.page_no, frame);
   else
      dev.mapped_write(tag.page_no, frame);
}

std::size_t Engine::flush()
{
   const auto count = pool_.flush_all();
   for (auto* dev : devices_)
      dev->flush_region();
   return count;
}

}  // namespace nvmse
