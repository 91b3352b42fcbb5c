#include "nvmse/device.hpp"

#include "nvmse/error.hpp"

#include <cerrno>
#include <cstring>
#include <thread>
#include <utility>

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

namespace nvmse {

namespace {

using SteadyClock = std::chrono::steady_clock;

std::string errno_text()
{
   return std::strerror(errno);
}

}  // namespace

std::string_view storage_name(StorageKind kind) noexcept
{
   return kind == StorageKind::DiskEmu ? "disk-emu" : "nvm-emu";
}

StorageKind parse_storage(std::string_view text)
{
   if (text == "disk-emu" || text == "disk_emu" || text == "disk")
      return StorageKind::DiskEmu;
   if (text == "nvm-emu" || text == "nvm_emu" || text == "nvm")
      return StorageKind::NvmEmu;
   raise(Errc::Config, "unknown storage '" + std::string(text) + "' (expected disk-emu or nvm-emu)");
}

LatencyProfile LatencyProfile::disk_emu()
{
   using std::chrono::nanoseconds;
   return {nanoseconds{1'000'000'000 / kDiskReadIops}, nanoseconds{1'000'000'000 / kDiskWriteIops},
           StorageKind::DiskEmu};
}

LatencyProfile LatencyProfile::nvm_emu(std::chrono::nanoseconds write)
{
   return {std::chrono::nanoseconds{0}, write, StorageKind::NvmEmu};
}

LatencyProfile LatencyProfile::for_storage(StorageKind kind)
{
   return kind == StorageKind::DiskEmu ? disk_emu() : nvm_emu();
}

void inject_latency(std::chrono::nanoseconds delay)
{
   if (delay <= std::chrono::nanoseconds::zero())
      return;
   if (delay >= std::chrono::microseconds{50}) {
      std::this_thread::sleep_for(delay);
      return;
   }
   const auto deadline = SteadyClock::now() + delay;
   while (SteadyClock::now() < deadline) {
#if defined(__x86_64__) || defined(__i386__)
      __builtin_ia32_pause();
#endif
   }
}

// -------------------------------------------------------------------------------------
Device Device::open(const std::filesystem::path& path, std::size_t page_size, LatencyProfile latency,
                    DeviceOptions options)
{
   if (latency.per_block_read.count() < 0 || latency.per_block_write.count() < 0)
      raise(Errc::Config, "latencies must be >= 0");
   if (page_size == 0)
      raise(Errc::Misaligned, "page size must be positive");

   Device dev;
   dev.path_ = path;
   dev.page_size_ = page_size;
   dev.latency_ = latency;
   dev.options_ = options;

   dev.fd_ = ::open(path.c_str(), options.read_only ? O_RDONLY : O_RDWR);
   if (dev.fd_ < 0)
      raise(Errc::Io, "open " + path.string() + ": " + errno_text());
   struct stat st {};
   if (::fstat(dev.fd_, &st) != 0)
      raise(Errc::Io, "stat " + path.string() + ": " + errno_text());
   dev.length_ = static_cast<std::size_t>(st.st_size);
   if (dev.length_ % page_size != 0)
      raise(Errc::Misaligned, path.string() + " length " + std::to_string(dev.length_) +
                                  " is not a multiple of " + std::to_string(page_size));
   dev.page_count_ = dev.length_ / page_size;

   if (dev.length_ > 0) {
      void* view = ::mmap(nullptr, dev.length_, PROT_READ, MAP_SHARED, dev.fd_, 0);
      if (view == MAP_FAILED)
         raise(Errc::Io, "mmap " + path.string() + ": " + errno_text());
      dev.view_ = static_cast<const std::byte*>(view);
      if (!options.read_only) {
         void* rw = ::mmap(nullptr, dev.length_, PROT_READ | PROT_WRITE, MAP_SHARED, dev.fd_, 0);
         if (rw == MAP_FAILED)
            raise(Errc::Io, "mmap rw " + path.string() + ": " + errno_text());
         dev.rw_ = static_cast<std::byte*>(rw);
      }
   }
   dev.staging_.resize(page_size);
   return dev;
}

Device::Device(Device&& other) noexcept
{
   *this = std::move(other);
}

Device& Device::operator=(Device&& other) noexcept
{
   if (this == &other)
      return *this;
   close();
   path_ = std::move(other.path_);
   fd_ = std::exchange(other.fd_, -1);
   page_size_ = other.page_size_;
   page_count_ = std::exchange(other.page_count_, 0);
   length_ = std::exchange(other.length_, 0);
   latency_ = other.latency_;
   options_ = other.options_;
   view_ = std::exchange(other.view_, nullptr);
   rw_ = std::exchange(other.rw_, nullptr);
   staging_ = std::move(other.staging_);
   copies_ = other.copies_.load();
   bytes_copied_ = other.bytes_copied_.load();
   block_reads_ = other.block_reads_.load();
   block_writes_ = other.block_writes_.load();
   mapped_copies_ = other.mapped_copies_.load();
   mapped_writes_ = other.mapped_writes_.load();
   dm_ns_ = other.dm_ns_.load();
   return *this;
}

Device::~Device()
{
   close();
}

void Device::close() noexcept
{
   if (view_)
      ::munmap(const_cast<std::byte*>(view_), length_);
   if (rw_)
      ::munmap(rw_, length_);
   view_ = nullptr;
   rw_ = nullptr;
   if (fd_ >= 0)
      ::close(fd_);
   fd_ = -1;
}

// -------------------------------------------------------------------------------------
void Device::require_open() const
{
   if (fd_ < 0)
      raise(Errc::Io, "device is closed");
}

void Device::require_mapped() const
{
   require_open();
   if (!options_.mapped)
      raise(Errc::MappingDisabled, "mapped access disabled on " + path_.string());
}

void Device::require_block() const
{
   require_open();
   if (!options_.block_io)
      raise(Errc::BlockIoDisabled, "block I/O disabled on " + path_.string());
}

void Device::require_writable() const
{
   if (options_.read_only)
      raise(Errc::ReadOnly, path_.string() + " is read-only");
}

void Device::check_page(std::uint64_t page_no, std::size_t frame_len) const
{
   if (page_no >= page_count_)
      raise(Errc::OutOfRange, "page " + std::to_string(page_no) + " >= page count " + std::to_string(page_count_));
   if (frame_len != page_size_)
      raise(Errc::LengthMismatch, "frame length " + std::to_string(frame_len) + " != page size");
}

void Device::accrue(SteadyClock::time_point start) noexcept
{
   dm_ns_.fetch_add((SteadyClock::now() - start).count(), std::memory_order_relaxed);
}

void Device::account_copy(std::size_t bytes) noexcept
{
   copies_.fetch_add(1, std::memory_order_relaxed);
   bytes_copied_.fetch_add(bytes, std::memory_order_relaxed);
}

// -------------------------------------------------------------------------------------
void Device::block_read(std::uint64_t page_no, std::span<std::byte> dest)
{
   require_block();
   check_page(page_no, dest.size());
   const auto start = SteadyClock::now();
   inject_latency(latency_.per_block_read);
   std::memcpy(staging_.data(), view_ + page_no * page_size_, page_size_);
   account_copy(page_size_);
   std::memcpy(dest.data(), staging_.data(), page_size_);
   account_copy(page_size_);
   block_reads_.fetch_add(1, std::memory_order_relaxed);
   accrue(start);
}

void Device::block_write(std::uint64_t page_no, std::span<const std::byte> src)
{
   require_block();
   require_writable();
   check_page(page_no, src.size());
   const auto start = SteadyClock::now();
   inject_latency(latency_.per_block_write);
   std::memcpy(staging_.data(), src.data(), page_size_);
   account_copy(page_size_);
   std::memcpy(rw_ + page_no * page_size_, staging_.data(), page_size_);
   account_copy(page_size_);
   block_writes_.fetch_add(1, std::memory_order_relaxed);
   accrue(start);
}

void Device::mapped_copy(std::uint64_t page_no, std::span<std::byte> dest)
{
   require_mapped();
   check_page(page_no, dest.size());
   const auto start = SteadyClock::now();
   std::memcpy(dest.data(), view_ + page_no * page_size_, page_size_);
   account_copy(page_size_);
   mapped_copies_.fetch_add(1, std::memory_order_relaxed);
   accrue(start);
}

void Device::mapped_write(std::uint64_t page_no, std::span<const std::byte> src)
{
   require_mapped();
   require_writable();
   check_page(page_no, src.size());
   const auto start = SteadyClock::now();
   std::memcpy(rw_ + page_no * page_size_, src.data(), page_size_);
   account_copy(page_size_);
   mapped_writes_.fetch_add(1, std::memory_order_relaxed);
   accrue(start);
}

std::span<const std::byte> Device::mapped_ref(std::uint64_t page_no) const
{
   require_mapped();
   check_page(page_no, page_size_);
   return {view_ + page_no * page_size_, page_size_};
}

std::span<const std::byte> Device::region() const
{
   require_mapped();
   return {view_, length_};
}

void Device::flush_region()
{
   require_open();
   if (rw_ && ::msync(rw_, length_, MS_SYNC) != 0)
      raise(Errc::Io, "msync " + path_.string() + ": " + errno_text());
   if (!options_.read_only && ::fsync(fd_) != 0)
      raise(Errc::Io, "fsync " + path_.string() + ": " + errno_text());
}

void Device::drop_residency()
{
   require_open();
   if (length_ == 0)
      return;
   if (::madvise(const_cast<std::byte*>(view_), length_, MADV_DONTNEED) != 0)
      raise(Errc::Io, "madvise " + path_.string() + ": " + errno_text());
   if (rw_) {
      // Dirty shared pages must reach the page cache before their PTEs go away.
      if (::msync(rw_, length_, MS_SYNC) != 0 || ::madvise(rw_, length_, MADV_DONTNEED) != 0)
         raise(Errc::Io, "madvise rw " + path_.string() + ": " + errno_text());
   }
}

DeviceCounters Device::counters() const noexcept
{
   DeviceCounters c;
   c.copies = copies_.load(std::memory_order_relaxed);
   c.bytes_copied = bytes_copied_.load(std::memory_order_relaxed);
   c.block_reads = block_reads_.load(std::memory_order_relaxed);
   c.block_writes = block_writes_.load(std::memory_order_relaxed);
   c.mapped_copies = mapped_copies_.load(std::memory_order_relaxed);
   c.mapped_writes = mapped_writes_.load(std::memory_order_relaxed);
   c.data_movement = std::chrono::nanoseconds{dm_ns_.load(std::memory_order_relaxed)};
   return c;
}

void Device::reset_counters() noexcept
{
   copies_ = 0;
   bytes_copied_ = 0;
   block_reads_ = 0;
   block_writes_ = 0;
   mapped_copies_ = 0;
   mapped_writes_ = 0;
   dm_ns_ = 0;
}

// -------------------------------------------------------------------------------------
Backing parse_backing(std::string_view text)
{
   if (text == "ram")
      return Backing::Ram;
   if (text == "file")
      return Backing::File;
   raise(Errc::Config, "unknown backing '" + std::string(text) + "' (expected ram or file)");
}

ScratchCopy::ScratchCopy(const std::filesystem::path& source, Backing backing)
{
   namespace fs = std::filesystem;
   static std::atomic<std::uint64_t> sequence{0};
   fs::path dir = fs::temp_directory_path();
   if (backing == Backing::Ram) {
      const fs::path shm = "/dev/shm";
      if (fs::is_directory(shm) && ::access(shm.c_str(), W_OK) == 0)
         dir = shm;
      else
         warning_ = "no RAM-backed filesystem at /dev/shm; falling back to " + dir.string();
   }
   path_ = dir / ("nvmse-" + std::to_string(::getpid()) + "-" + std::to_string(sequence.fetch_add(1)) + "-" +
                  source.filename().string());
   std::error_code ec;
   fs::copy_file(source, path_, fs::copy_options::overwrite_existing, ec);
   if (ec) {
      path_.clear();
      raise(Errc::Io, "cannot stage " + source.string() + ": " + ec.message());
   }
}

ScratchCopy::ScratchCopy(ScratchCopy&& other) noexcept
    : path_(std::exchange(other.path_, {})), warning_(std::move(other.warning_))
{
}

ScratchCopy& ScratchCopy::operator=(ScratchCopy&& other) noexcept
{
   if (this != &other) {
      std::error_code ec;
      if (!path_.empty())
         std::filesystem::remove(path_, ec);
      path_ = std::exchange(other.path_, {});
      warning_ = std::move(other.warning_);
   }
   return *this;
}

ScratchCopy::~ScratchCopy()
{
   std::error_code ec;
   if (!path_.empty())
      std::filesystem::remove(path_, ec);
}

}  // namespace nvmse
