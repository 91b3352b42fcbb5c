#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nvmse {

/// Logical processors usable by this process, with their physical core ids as
/// reported by /sys/devices/system/cpu/cpuN/topology.
class CpuTopology {
  public:
   struct Cpu {
      int id = 0;
      int core = 0;     // physical core id (unique across packages)
      int package = 0;
   };

   static CpuTopology detect();
   static CpuTopology from_list(std::vector<Cpu> cpus, bool siblings_known = true);

   const std::vector<Cpu>& cpus() const noexcept { return cpus_; }
   bool siblings_known() const noexcept { return siblings_known_; }
   bool contains(int cpu) const noexcept;
   std::optional<Cpu> find(int cpu) const noexcept;

   /// Another logical CPU on the same physical core, if any.
   std::optional<int> sibling_of(int cpu) const noexcept;
   /// A logical CPU on a different physical core, preferring the same package.
   std::optional<int> remote_of(int cpu) const noexcept;

  private:
   std::vector<Cpu> cpus_;
   bool siblings_known_ = false;
};

/// CPU the calling thread is running on right now, or 0 if unknown.
int current_cpu() noexcept;
/// Pins the calling thread; returns false when the platform refuses.
bool pin_current_thread(int cpu) noexcept;

/// Page faults charged to the calling thread so far.
struct ThreadFaults {
   std::uint64_t minor = 0;
   std::uint64_t major = 0;
   bool available = false;
};
ThreadFaults current_thread_faults() noexcept;

}  // namespace nvmse
