#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nvmse {

enum class StorageKind { DiskEmu, NvmEmu };

std::string_view storage_name(StorageKind kind) noexcept;  // "disk-emu" / "nvm-emu"
StorageKind parse_storage(std::string_view text);

/// Per-block delays injected on the block facade only.
struct LatencyProfile {
   std::chrono::nanoseconds per_block_read{0};
   std::chrono::nanoseconds per_block_write{0};
   StorageKind label = StorageKind::NvmEmu;

   /// SSD rates of the reference machine: 75k read iops, 36k write iops.
   static LatencyProfile disk_emu();
   static LatencyProfile nvm_emu(std::chrono::nanoseconds write = std::chrono::nanoseconds{0});
   static LatencyProfile for_storage(StorageKind kind);
};

inline constexpr std::uint64_t kDiskReadIops = 75'000;
inline constexpr std::uint64_t kDiskWriteIops = 36'000;

/// Busy-waits below 50 us, sleeps above.
void inject_latency(std::chrono::nanoseconds delay);

struct DeviceOptions {
   bool block_io = true;
   bool mapped = true;
   bool read_only = false;
};

struct DeviceCounters {
   std::uint64_t copies = 0;
   std::uint64_t bytes_copied = 0;
   std::uint64_t block_reads = 0;
   std::uint64_t block_writes = 0;
   std::uint64_t mapped_copies = 0;
   std::uint64_t mapped_writes = 0;
   std::chrono::nanoseconds data_movement{0};

   bool operator==(const DeviceCounters&) const = default;
};

/// Emulated storage over a backing file. The file is mapped twice: a read-only
/// view handed out to callers (so stray writes through a redirected handle fault)
/// and a private writable mapping used by the write paths. The block facade goes
/// through a single staging frame, the analog of the kernel buffer.
///
/// Block facade: one caller at a time. Mapped reads: any number of threads.
class Device {
  public:
   static Device open(const std::filesystem::path& path, std::size_t page_size, LatencyProfile latency,
                      DeviceOptions options = {});

   Device(Device&& other) noexcept;
   Device& operator=(Device&& other) noexcept;
   Device(const Device&) = delete;
   Device& operator=(const Device&) = delete;
   ~Device();

   std::size_t page_size() const noexcept { return page_size_; }
   std::uint64_t page_count() const noexcept { return page_count_; }
   std::size_t region_length() const noexcept { return length_; }
   const LatencyProfile& latency() const noexcept { return latency_; }
   const DeviceOptions& options() const noexcept { return options_; }
   const std::filesystem::path& path() const noexcept { return path_; }
   bool is_open() const noexcept { return fd_ >= 0; }

   /// Two copies: region -> staging -> dest, plus the read latency.
   void block_read(std::uint64_t page_no, std::span<std::byte> dest);
   /// Two copies: src -> staging -> region, plus the write latency.
   void block_write(std::uint64_t page_no, std::span<const std::byte> src);
   /// One copy: region -> dest. No latency.
   void mapped_copy(std::uint64_t page_no, std::span<std::byte> dest);
   /// One copy: src -> region. No latency.
   void mapped_write(std::uint64_t page_no, std::span<const std::byte> src);
   /// Zero copies. The view aliases the read-only mapping until close().
   std::span<const std::byte> mapped_ref(std::uint64_t page_no) const;
   /// Whole read-only region, for registering with the prefetcher.
   std::span<const std::byte> region() const;

   /// msync + fsync of the backing file.
   void flush_region();
   /// Drops the page-table entries of both mappings so the next access faults
   /// again; content is untouched. Used to start cold runs.
   void drop_residency();
   void close() noexcept;

   DeviceCounters counters() const noexcept;
   void reset_counters() noexcept;
   /// Accounts a copy performed by a caller on the device's behalf.
   void account_copy(std::size_t bytes) noexcept;

  private:
   Device() = default;
   void check_page(std::uint64_t page_no, std::size_t frame_len) const;
   void require_open() const;
   void require_mapped() const;
   void require_block() const;
   void require_writable() const;
   void accrue(std::chrono::steady_clock::time_point start) noexcept;

   std::filesystem::path path_;
   int fd_ = -1;
   std::size_t page_size_ = 0;
   std::uint64_t page_count_ = 0;
   std::size_t length_ = 0;
   LatencyProfile latency_;
   DeviceOptions options_;
   const std::byte* view_ = nullptr;
   std::byte* rw_ = nullptr;
   std::vector<std::byte> staging_;

   std::atomic<std::uint64_t> copies_{0};
   std::atomic<std::uint64_t> bytes_copied_{0};
   std::atomic<std::uint64_t> block_reads_{0};
   std::atomic<std::uint64_t> block_writes_{0};
   std::atomic<std::uint64_t> mapped_copies_{0};
   std::atomic<std::uint64_t> mapped_writes_{0};
   std::atomic<std::int64_t> dm_ns_{0};
};

enum class Backing { Ram, File };
Backing parse_backing(std::string_view text);

/// A private working copy of a heap file, placed on a RAM-backed filesystem
/// (/dev/shm) or in the temp directory. Removed on destruction.
class ScratchCopy {
  public:
   ScratchCopy(const std::filesystem::path& source, Backing backing);
   ScratchCopy(ScratchCopy&& other) noexcept;
   ScratchCopy& operator=(ScratchCopy&& other) noexcept;
   ScratchCopy(const ScratchCopy&) = delete;
   ScratchCopy& operator=(const ScratchCopy&) = delete;
   ~ScratchCopy();

   const std::filesystem::path& path() const noexcept { return path_; }
   /// Non-empty when a RAM backing was requested but unavailable.
   const std::string& warning() const noexcept { return warning_; }

  private:
   std::filesystem::path path_;
   std::string warning_;
};

}  // namespace nvmse
