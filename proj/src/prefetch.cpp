#include "nvmse/prefetch.hpp"

#include "nvmse/error.hpp"

#include <algorithm>
#include <system_error>

#include <pthread.h>
#include <sched.h>

namespace nvmse {

// -------------------------------------------------------------------------------------
std::uint32_t RegionRegistry::add(std::span<const std::byte> region)
{
   regions_.push_back(region);
   return static_cast<std::uint32_t>(regions_.size() - 1);
}

std::span<const std::byte> RegionRegistry::region(std::uint32_t id) const
{
   if (id >= regions_.size())
      raise(Errc::OutOfRange, "unknown region " + std::to_string(id));
   return regions_[id];
}

void RegionRegistry::validate(const PrefetchJob& job) const
{
   const auto r = region(job.region_id);
   if (job.length == 0 || job.base > r.size() || job.length > r.size() - job.base)
      raise(Errc::OutOfRange, "job [" + std::to_string(job.base) + ", +" + std::to_string(job.length) +
                                  ") outside region of " + std::to_string(r.size()) + " bytes");
}

std::uint64_t touch_region(std::span<const std::byte> region, std::uint64_t base, std::uint64_t length,
                           std::size_t stride)
{
   if (stride == 0)
      raise(Errc::Config, "touch stride must be positive");
   if (length == 0 || base > region.size() || length > region.size() - base)
      raise(Errc::OutOfRange, "touch range outside region");
   const auto* p = reinterpret_cast<const volatile unsigned char*>(region.data() + base);
   unsigned sink = 0;
   std::uint64_t touches = 0;
   for (std::uint64_t off = 0; off < length; off += stride, ++touches)
      sink += p[off];
   sink += p[length - 1];
   asm volatile("" : : "r"(sink) : "memory");
   return touches;
}

std::string_view scheme_name(MappingScheme scheme) noexcept
{
   switch (scheme) {
      case MappingScheme::None: return "none";
      case MappingScheme::M1: return "m1";
      case MappingScheme::M2: return "m2";
      case MappingScheme::M3: return "m3";
   }
   return "?";
}

MappingScheme parse_scheme(std::string_view text)
{
   if (text == "none")
      return MappingScheme::None;
   if (text == "m1" || text == "M1")
      return MappingScheme::M1;
   if (text == "m2" || text == "M2")
      return MappingScheme::M2;
   if (text == "m3" || text == "M3")
      return MappingScheme::M3;
   raise(Errc::Config, "unknown prefetch scheme '" + std::string(text) + "' (expected none, m1, m2 or m3)");
}

std::uint64_t PoolStats::completed_total() const noexcept
{
   std::uint64_t total = 0;
   for (auto c : completed_per_helper)
      total += c;
   return total;
}

// -------------------------------------------------------------------------------------
// A job queue plus the parking spot of the helpers that consume it.
struct PrefetchPool::Channel {
   explicit Channel(std::size_t capacity) : queue(capacity) {}

   void notify() noexcept
   {
      epoch.fetch_add(1, std::memory_order_seq_cst);
      if (sleepers.load(std::memory_order_seq_cst) != 0)
         epoch.notify_all();
   }

   // Spin briefly, then block until notified. Callers re-check their condition.
   template <typename Pred>
   void wait(Pred&& ready, unsigned spins)
   {
      for (unsigned i = 0; i < spins; ++i) {
         if (ready())
            return;
#if defined(__x86_64__) || defined(__i386__)
         __builtin_ia32_pause();
#endif
      }
      const auto seen = epoch.load(std::memory_order_seq_cst);
      if (ready())
         return;
      sleepers.fetch_add(1, std::memory_order_seq_cst);
      if (!ready())
         epoch.wait(seen, std::memory_order_seq_cst);
      sleepers.fetch_sub(1, std::memory_order_seq_cst);
   }

   BoundedSpmcQueue<PrefetchJob> queue;
   std::atomic<std::uint32_t> epoch{0};
   std::atomic<std::uint32_t> sleepers{0};
   std::atomic<bool> closed{false};
};

PrefetchPool::PrefetchPool(PrefetchOptions options, const RegionRegistry& regions)
    : options_(std::move(options)), regions_(regions)
{
   if (!BoundedSpmcQueue<PrefetchJob>::valid_capacity(options_.capacity))
      raise(Errc::InvalidCapacity, "queue capacity must be a power of two > 0, got " +
                                       std::to_string(options_.capacity));
   if (options_.stride == 0)
      raise(Errc::Config, "touch stride must be positive");

   const auto helpers = nvmse::helper_count(options_.scheme);
   completed_ = std::make_unique<std::atomic<std::uint64_t>[]>(helpers);
   if (helpers == 0) {
      return;
   }
   plan_placement();

   // M3 chains two queues; the others use one.
   const std::size_t channels = options_.scheme == MappingScheme::M3 ? 2 : 1;
   for (std::size_t i = 0; i < channels; ++i)
      queues_.push_back(std::make_unique<Channel>(options_.capacity));

   try {
      for (std::size_t h = 0; h < helpers; ++h) {
         Channel& in = *queues_[h];
         Channel* out = h + 1 < channels ? queues_[h + 1].get() : nullptr;
         helpers_.emplace_back([this, h, &in, out] { helper_loop(h, in, out); });
         if (placement_[h] >= 0) {
            cpu_set_t set;
            CPU_ZERO(&set);
            CPU_SET(placement_[h], &set);
            if (pthread_setaffinity_np(helpers_.back().native_handle(), sizeof(set), &set) != 0) {
               warnings_.push_back("could not pin helper " + std::to_string(h) + " to cpu " +
                                   std::to_string(placement_[h]) + "; left unpinned");
               placement_[h] = -1;
            }
         }
      }
   } catch (const std::system_error& e) {
      drain_and_stop();
      raise(Errc::SpawnFailure, std::string("cannot start helper thread: ") + e.what());
   }
}

PrefetchPool::~PrefetchPool()
{
   drain_and_stop();
}

HelperPlacement plan_helper_placement(MappingScheme scheme, const CpuTopology& topo, int compute,
                                      const std::vector<int>& explicit_cores)
{
   HelperPlacement plan;
   const auto helpers = helper_count(scheme);
   auto shares = [&] {
      return topo.cpus().size() == 1 ||
             std::find(plan.cores.begin(), plan.cores.end(), compute) != plan.cores.end();
   };

   if (!explicit_cores.empty()) {
      if (explicit_cores.size() != helpers)
         raise(Errc::InvalidCore, std::string(scheme_name(scheme)) + " needs " + std::to_string(helpers) +
                                      " helper core(s), got " + std::to_string(explicit_cores.size()));
      for (int core : explicit_cores)
         if (!topo.contains(core))
            raise(Errc::InvalidCore, "helper core " + std::to_string(core) + " is not available");
      plan.cores = explicit_cores;
      plan.shares_compute_cpu = shares();
      return plan;
   }

   auto remote = [&]() -> int {
      if (auto r = topo.remote_of(compute))
         return *r;
      plan.warnings.push_back("no physical core other than the compute core's; remote helper left unpinned");
      return -1;
   };
   auto sibling = [&]() -> int {
      if (auto s = topo.sibling_of(compute))
         return *s;
      if (!topo.siblings_known())
         plan.warnings.push_back("hyper-thread topology undetectable; sibling helper placed on the compute cpu");
      else
         plan.warnings.push_back("compute core has no hyper-thread sibling; sibling helper shares the compute cpu");
      return compute;
   };

   switch (scheme) {
      case MappingScheme::None: break;
      case MappingScheme::M1: plan.cores = {remote()}; break;
      case MappingScheme::M2: plan.cores = {sibling()}; break;
      case MappingScheme::M3: {
         const int a = remote();
         const int b = sibling();
         plan.cores = {a, b};
         break;
      }
   }
   plan.shares_compute_cpu = shares();
   return plan;
}

void PrefetchPool::plan_placement()
{
   const auto topo = options_.topology ? *options_.topology : CpuTopology::detect();
   const int compute = options_.compute_core.value_or(current_cpu());
   if (options_.compute_core && !topo.contains(compute))
      raise(Errc::InvalidCore, "compute core " + std::to_string(compute) + " is not available");
   auto plan = plan_helper_placement(options_.scheme, topo, compute, options_.helper_cores);
   placement_ = std::move(plan.cores);
   warnings_ = std::move(plan.warnings);
   shares_cpu_ = plan.shares_compute_cpu;
}

void PrefetchPool::helper_loop(std::size_t index, Channel& in, Channel* out)
{
   const unsigned spins = std::thread::hardware_concurrency() > 1 ? 2048 : 0;
   auto ready = [&] {
      return !paused_.load(std::memory_order_seq_cst) && (!in.queue.empty() || in.closed.load());
   };
   for (;;) {
      if (!paused_.load(std::memory_order_seq_cst)) {
         if (auto job = in.queue.try_pop()) {
            if (options_.before_job)
               options_.before_job(index);
            const auto region = regions_.region(job->region_id);
            touches_.fetch_add(touch_region(region, job->base, job->length, options_.stride),
                               std::memory_order_relaxed);
            if (out) {
               // Only the compute thread must never block; helper A waits for room.
               while (!out->queue.try_push(*job)) {
                  out->notify();
                  std::this_thread::yield();
               }
               out->notify();
            }
            completed_[index].fetch_add(1, std::memory_order_release);
            if (options_.after_job)
               options_.after_job(index, *job);
            continue;
         }
         if (in.closed.load() && in.queue.empty())
            break;
      }
      in.wait(ready, spins);
   }
   if (out) {
      out->closed.store(true);
      out->notify();
   }
}

// -------------------------------------------------------------------------------------
EnqueueResult PrefetchPool::enqueue(const PrefetchJob& job)
{
   if (state_.load() != State::Running)
      raise(Errc::Stopped, "prefetch pool is not running");
   regions_.validate(job);
   if (queues_.empty()) {
      enqueued_.fetch_add(1, std::memory_order_relaxed);
      return EnqueueResult::Accepted;
   }
   auto& first = *queues_.front();
   if (!first.queue.try_push(job)) {
      rejected_.fetch_add(1, std::memory_order_relaxed);
      return EnqueueResult::Rejected;
   }
   enqueued_.fetch_add(1, std::memory_order_relaxed);
   first.notify();
   if (shares_cpu_ && options_.yield_when_shared)
      std::this_thread::yield();
   return EnqueueResult::Accepted;
}

void PrefetchPool::pause()
{
   paused_.store(true, std::memory_order_seq_cst);
}

void PrefetchPool::resume()
{
   paused_.store(false, std::memory_order_seq_cst);
   for (auto& q : queues_)
      q->notify();
}

PoolStats PrefetchPool::stats() const
{
   if (final_)
      return *final_;
   PoolStats s;
   s.enqueued = enqueued_.load();
   s.rejected = rejected_.load();
   s.touches = touches_.load();
   for (std::size_t i = 0; i < nvmse::helper_count(options_.scheme); ++i)
      s.completed_per_helper.push_back(completed_[i].load(std::memory_order_acquire));
   return s;
}

PoolStats PrefetchPool::drain_and_stop()
{
   if (final_)
      return *final_;
   state_.store(State::Draining);
   paused_.store(false, std::memory_order_seq_cst);
   if (!queues_.empty()) {
      queues_.front()->closed.store(true);
      for (auto& q : queues_)
         q->notify();
   }
   for (auto& t : helpers_)
      if (t.joinable())
         t.join();
   state_.store(State::Stopped);
   final_ = stats();
   return *final_;
}

}  // namespace nvmse
