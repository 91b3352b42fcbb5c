#pragma once

#include "nvmse/job_queue.hpp"
#include "nvmse/platform.hpp"

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace nvmse {

/// One unit of prefetch work: a byte range of a registered mapped region.
struct PrefetchJob {
   std::uint64_t id = 0;
   std::uint32_t region_id = 0;
   std::uint64_t base = 0;
   std::uint64_t length = 0;
};

/// Read-only regions helpers may touch, addressed by small integer ids.
class RegionRegistry {
  public:
   std::uint32_t add(std::span<const std::byte> region);
   std::span<const std::byte> region(std::uint32_t id) const;
   std::size_t size() const noexcept { return regions_.size(); }
   /// Throws OutOfRange unless the job lies inside its region and is non-empty.
   void validate(const PrefetchJob& job) const;

  private:
   std::vector<std::span<const std::byte>> regions_;
};

/// Reads one byte every `stride` bytes of [base, base+length) plus the final
/// byte, folding them into a sink the optimizer cannot drop. Page faults are
/// taken by the calling thread. Returns ceil(length / stride).
std::uint64_t touch_region(std::span<const std::byte> region, std::uint64_t base, std::uint64_t length,
                           std::size_t stride);

/// Where helper threads go relative to the computation thread.
///  M1: one helper on a different physical core.
///  M2: one helper on the compute core's hyper-thread sibling.
///  M3: helper A as in M1 feeds a second queue drained by helper B as in M2.
enum class MappingScheme { None, M1, M2, M3 };

std::string_view scheme_name(MappingScheme scheme) noexcept;  // "none", "m1", ...
MappingScheme parse_scheme(std::string_view text);
constexpr std::size_t helper_count(MappingScheme scheme) noexcept
{
   return scheme == MappingScheme::None ? 0 : scheme == MappingScheme::M3 ? 2 : 1;
}

/// Cores for each helper (-1 = unpinned) plus any fallbacks taken.
struct HelperPlacement {
   std::vector<int> cores;
   std::vector<std::string> warnings;
   /// True when a helper has no CPU of its own apart from the compute thread's.
   bool shares_compute_cpu = false;
};

/// Chooses helper cores for `scheme` around `compute`. A non-empty `explicit_cores`
/// is taken as is after validation. Throws InvalidCore.
HelperPlacement plan_helper_placement(MappingScheme scheme, const CpuTopology& topo, int compute,
                                      const std::vector<int>& explicit_cores);

inline constexpr std::size_t kDefaultQueueCapacity = 64;
inline constexpr std::size_t kDefaultTouchStride = 64;

struct PrefetchOptions {
   MappingScheme scheme = MappingScheme::None;
   std::size_t capacity = kDefaultQueueCapacity;
   std::size_t stride = kDefaultTouchStride;
   /// Defaults to the CPU the creating thread runs on.
   std::optional<int> compute_core;
   /// Explicit placement, one entry per helper; empty means derive from topology.
   std::vector<int> helper_cores;
   /// Overrides detection; mostly for tests.
   std::optional<CpuTopology> topology;
   /// When some helper can only run on the compute thread's CPU, a successful
   /// enqueue yields that CPU so the helper runs ahead of the scan, standing in
   /// for a hyper-thread sibling that would run concurrently.
   bool yield_when_shared = true;
   /// Called by a helper before it processes a job (test hook for stalls).
   std::function<void(std::size_t helper)> before_job;
   /// Called by a helper after it completed a job.
   std::function<void(std::size_t helper, const PrefetchJob&)> after_job;
};

enum class EnqueueResult { Accepted, Rejected };

struct PoolStats {
   std::uint64_t enqueued = 0;  // accepted by the first queue
   std::uint64_t rejected = 0;
   std::vector<std::uint64_t> completed_per_helper;
   std::uint64_t touches = 0;

   std::uint64_t completed_total() const noexcept;
   bool operator==(const PoolStats&) const = default;
};

/// Helper threads plus their job queues. Created and drained on the producer
/// (computation) thread; enqueue never blocks it.
class PrefetchPool {
  public:
   enum class State { Running, Draining, Stopped };

   PrefetchPool(PrefetchOptions options, const RegionRegistry& regions);
   ~PrefetchPool();
   PrefetchPool(const PrefetchPool&) = delete;
   PrefetchPool& operator=(const PrefetchPool&) = delete;

   EnqueueResult enqueue(const PrefetchJob& job);

   /// Holds helpers off their queues until resume(); enqueue still works.
   void pause();
   void resume();

   /// Completes every accepted job, joins helpers and returns final stats.
   /// Idempotent.
   PoolStats drain_and_stop();
   PoolStats stats() const;

   MappingScheme scheme() const noexcept { return options_.scheme; }
   std::size_t helper_count() const noexcept { return helpers_.size(); }
   std::size_t queue_count() const noexcept { return queues_.size(); }
   State state() const noexcept { return state_.load(); }
   /// Cores chosen for each helper; -1 when left unpinned.
   const std::vector<int>& helper_placement() const noexcept { return placement_; }
   const std::vector<std::string>& warnings() const noexcept { return warnings_; }
   /// True when a helper has no CPU of its own apart from the compute thread's.
   bool shares_compute_cpu() const noexcept { return shares_cpu_; }

  private:
   struct Channel;
   void plan_placement();
   void helper_loop(std::size_t index, Channel& in, Channel* out);

   PrefetchOptions options_;
   const RegionRegistry& regions_;
   std::vector<std::unique_ptr<Channel>> queues_;
   std::vector<std::thread> helpers_;
   std::vector<int> placement_;
   std::vector<std::string> warnings_;
   std::unique_ptr<std::atomic<std::uint64_t>[]> completed_;
   std::atomic<std::uint64_t> enqueued_{0};
   std::atomic<std::uint64_t> rejected_{0};
   std::atomic<std::uint64_t> touches_{0};
   std::atomic<State> state_{State::Running};
   std::atomic<bool> paused_{false};
   bool shares_cpu_ = false;
   std::optional<PoolStats> final_;
};

}  // namespace nvmse
