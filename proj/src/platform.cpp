#include "nvmse/platform.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include <pthread.h>
#include <sched.h>
#include <sys/resource.h>

namespace nvmse {

namespace {

std::optional<int> read_int(const std::string& path)
{
   std::ifstream in(path);
   int value = 0;
   if (in >> value)
      return value;
   return std::nullopt;
}

}  // namespace

CpuTopology CpuTopology::detect()
{
   CpuTopology topo;
   topo.siblings_known_ = true;
   cpu_set_t set;
   CPU_ZERO(&set);
   if (sched_getaffinity(0, sizeof(set), &set) != 0) {
      topo.cpus_.push_back({0, 0, 0});
      topo.siblings_known_ = false;
      return topo;
   }
   for (int cpu = 0; cpu < CPU_SETSIZE; ++cpu) {
      if (!CPU_ISSET(cpu, &set))
         continue;
      const std::string base = "/sys/devices/system/cpu/cpu" + std::to_string(cpu) + "/topology/";
      const auto core = read_int(base + "core_id");
      const auto package = read_int(base + "physical_package_id");
      if (!core || !package)
         topo.siblings_known_ = false;
      // Fold the package into the core id so cores on different sockets never collide.
      const int pkg = package.value_or(0);
      topo.cpus_.push_back({cpu, pkg * 4096 + core.value_or(cpu), pkg});
   }
   if (topo.cpus_.empty())
      topo.cpus_.push_back({0, 0, 0});
   return topo;
}

CpuTopology CpuTopology::from_list(std::vector<Cpu> cpus, bool siblings_known)
{
   CpuTopology topo;
   topo.cpus_ = std::move(cpus);
   topo.siblings_known_ = siblings_known;
   return topo;
}

bool CpuTopology::contains(int cpu) const noexcept
{
   return find(cpu).has_value();
}

std::optional<CpuTopology::Cpu> CpuTopology::find(int cpu) const noexcept
{
   for (const auto& c : cpus_)
      if (c.id == cpu)
         return c;
   return std::nullopt;
}

std::optional<int> CpuTopology::sibling_of(int cpu) const noexcept
{
   const auto self = find(cpu);
   if (!self)
      return std::nullopt;
   for (const auto& c : cpus_)
      if (c.id != cpu && c.core == self->core)
         return c.id;
   return std::nullopt;
}

std::optional<int> CpuTopology::remote_of(int cpu) const noexcept
{
   const auto self = find(cpu);
   if (!self)
      return std::nullopt;
   std::optional<int> other_package;
   for (const auto& c : cpus_) {
      if (c.core == self->core)
         continue;
      if (c.package == self->package)
         return c.id;
      if (!other_package)
         other_package = c.id;
   }
   return other_package;
}

int current_cpu() noexcept
{
   const int cpu = sched_getcpu();
   return cpu < 0 ? 0 : cpu;
}

bool pin_current_thread(int cpu) noexcept
{
   if (cpu < 0 || cpu >= CPU_SETSIZE)
      return false;
   cpu_set_t set;
   CPU_ZERO(&set);
   CPU_SET(cpu, &set);
   return pthread_setaffinity_np(pthread_self(), sizeof(set), &set) == 0;
}

ThreadFaults current_thread_faults() noexcept
{
   ThreadFaults f;
#ifdef RUSAGE_THREAD
   struct rusage ru {};
   if (getrusage(RUSAGE_THREAD, &ru) == 0) {
      f.minor = static_cast<std::uint64_t>(ru.ru_minflt);
      f.major = static_cast<std::uint64_t>(ru.ru_majflt);
      f.available = true;
   }
#endif
   return f;
}

}  // namespace nvmse
