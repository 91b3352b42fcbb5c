// Acceptance suite: one check per criterion, each printing a PASS/FAIL line
// with the measured values. Usage: acceptance [criterion ...]

#include "nvmse/bench.hpp"
#include "nvmse/error.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

using namespace nvmse;
using nvmse::testing::shared_dataset;

namespace {

using SteadyClock = std::chrono::steady_clock;

struct Outcome {
   bool pass = true;
   std::string detail;
};

double median_of(std::vector<double> v)
{
   return median(std::move(v));
}

std::string fmt(double v, int precision = 3)
{
   std::ostringstream os;
   os.setf(std::ios::fixed);
   os.precision(precision);
   os << v;
   return os.str();
}

void count_scan(ExecContext& ctx, QueryResult& out)
{
   std::uint64_t n = 0;
   out.scan = seq_scan(ctx, kLineitem, nullptr, [&](const TupleView&) { ++n; });
}

// ---------------------------------------------------------------------------------------
Outcome copy_law()
{
   const auto& cat = shared_dataset(0.01);
   const auto pages = cat.relation(kLineitem).page_count;
   Outcome o;
   std::ostringstream d;
   for (auto kind : {EngineKind::Base, EngineKind::SE1, EngineKind::SE2}) {
      RunConfig rc;
      rc.data_dir = cat.dir;
      rc.engine = kind;
      QueryRunner runner(rc);
      const auto r = runner.run_custom("scan", count_scan);
      const auto expected = read_miss_copies(kind) * r.buffer.misses;
      const bool ok = r.device.copies == expected && r.buffer.misses == pages &&
                      default_capacity(runner.catalog().relations[0].page_count +
                                       runner.catalog().relations[1].page_count) < pages;
      o.pass = o.pass && ok;
      d << engine_name(kind) << ": copies=" << r.device.copies << " misses=" << r.buffer.misses << " (expect "
        << expected << ", pages=" << pages << ") ";
   }
   o.detail = d.str();
   return o;
}

// ---------------------------------------------------------------------------------------
std::uint64_t apply_script_oracle(const std::filesystem::path& heap, std::size_t page_size,
                                  const std::vector<TupleUpdate>& script)
{
   std::ifstream in(heap, std::ios::binary);
   std::vector<std::byte> bytes(std::filesystem::file_size(heap));
   in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
   for (const auto& u : script) {
      std::span<std::byte> page(bytes.data() + u.tid.page_no * page_size, page_size);
      auto body = tuple_body(page, u.tid.slot);
      std::memcpy(body.data(), u.bytes.data(), body.size());
      reseal_page(page);
   }
   return fnv1a64(bytes);
}

Outcome equivalence()
{
   const auto& cat = shared_dataset(0.01);
   const auto suite = canned_suite();
   const std::vector<MappingScheme> schemes{MappingScheme::None, MappingScheme::M1, MappingScheme::M2,
                                            MappingScheme::M3};
   Outcome o;
   std::vector<std::uint64_t> reference(suite.size(), 0);
   std::size_t cells = 0;
   for (auto kind : {EngineKind::Base, EngineKind::SE1, EngineKind::SE2}) {
      for (auto scheme : schemes) {
         RunConfig rc;
         rc.data_dir = cat.dir;
         rc.engine = kind;
         rc.prefetch.scheme = scheme;
         QueryRunner runner(rc);
         for (std::size_t q = 0; q < suite.size(); ++q) {
            const auto digest = runner.run(suite[q]).result_digest;
            if (cells == 0)
               reference[q] = digest;
            else if (digest != reference[q]) {
               o.pass = false;
               o.detail += suite[q].label + " differs in " + std::string(engine_name(kind)) + "/" +
                           std::string(scheme_name(scheme)) + "; ";
            }
         }
         ++cells;
      }
   }

   const auto& rel = cat.relation(kLineitem);
   const auto heap = cat.path_of(rel);
   const auto script = make_update_script(heap, rel.page_size, 7, 1000);
   const auto expected = apply_script_oracle(heap, rel.page_size, script);
   std::set<std::uint64_t> file_digests;
   for (auto kind : {EngineKind::Base, EngineKind::SE1, EngineKind::SE2}) {
      for (auto scheme : schemes) {
         ScratchCopy copy(heap, Backing::Ram);
         auto dev = Device::open(copy.path(), rel.page_size, LatencyProfile::nvm_emu());
         BufferPool pool(64, rel.page_size);
         Engine engine(kind, pool);
         const auto id = engine.attach(dev);
         RegionRegistry regions;
         regions.add(dev.region());
         std::unique_ptr<PrefetchPool> prefetch;
         if (scheme != MappingScheme::None)
            prefetch = std::make_unique<PrefetchPool>(PrefetchOptions{.scheme = scheme}, regions);
         for (std::size_t i = 0; i < script.size(); ++i) {
            const auto& u = script[i];
            if (prefetch)
               prefetch->enqueue({i, 0, u.tid.page_no * rel.page_size, rel.page_size});
            if (i % 2 == 0)
               engine.read_page(id, u.tid.page_no).release();
            engine.write_tuple(id, u.tid, u.bytes);
         }
         engine.flush();
         if (prefetch)
            prefetch->drain_and_stop();
         const auto digest = file_digest(copy.path());
         file_digests.insert(digest);
         if (digest != expected) {
            o.pass = false;
            o.detail += "file digest differs in " + std::string(engine_name(kind)) + "/" +
                        std::string(scheme_name(scheme)) + "; ";
         }
      }
   }
   o.detail += std::to_string(cells) + " cells x " + std::to_string(suite.size()) + " queries, " +
               std::to_string(script.size()) + " updates, distinct post-flush digests=" +
               std::to_string(file_digests.size()) + " (oracle " + std::to_string(expected) + ")";
   return o;
}

// ---------------------------------------------------------------------------------------
Outcome se2_write_path()
{
   const auto& cat = shared_dataset(0.001);
   const auto& rel = cat.relation(kLineitem);
   const auto ps = rel.page_size;
   constexpr std::size_t kOps = 100'000;
   constexpr std::size_t kEpoch = 2'000;

   ScratchCopy copy(cat.path_of(rel), Backing::Ram);
   auto dev = Device::open(copy.path(), ps, LatencyProfile::nvm_emu());
   std::vector<std::byte> model(dev.region().begin(), dev.region().end());
   SplitMix64 rng(0xC3);

   Outcome o;
   std::uint64_t expected_copybacks = 0, copybacks = 0, writes = 0, digest_checks = 0, flushes = 0;
   std::size_t op = 0;
   while (op < kOps && o.pass) {
      // Each epoch starts cold so pages are redirected again.
      BufferPool pool(rel.page_count + 8, ps);
      Engine engine(EngineKind::SE2, pool);
      const auto id = engine.attach(dev);
      dev.reset_counters();
      const auto file_before = file_digest(copy.path());
      std::vector<PageRef> held;
      for (std::size_t i = 0; i < kEpoch && op < kOps; ++i, ++op) {
         const auto page_no = rng.next() % rel.page_count;
         const auto r = rng.next() % 100;
         if (r < 55) {
            auto ref = engine.read_page(id, page_no);
            if (held.size() < 4 && rng.next() % 4 == 0)
               held.push_back(std::move(ref));
         } else if (r < 60 && !held.empty()) {
            held.erase(held.begin() + static_cast<std::ptrdiff_t>(rng.next() % held.size()));
         } else {
            std::span<std::byte> page(model.data() + page_no * ps, ps);
            const auto count = read_page_header(page).tuple_count;
            const auto slot = static_cast<std::uint16_t>(rng.next() % count);
            auto body = tuple_body(page, slot);
            std::vector<std::byte> bytes(body.begin(), body.end());
            const auto price = static_cast<std::int64_t>(rng.next() % 10'000'000);
            std::memcpy(bytes.data() + 16, &price, sizeof(price));
            const auto resident = pool.find({id, page_no});
            if (!resident || pool.is_redirected(*resident))
               ++expected_copybacks;
            engine.write_tuple(id, {page_no, slot}, bytes);
            std::memcpy(body.data(), bytes.data(), bytes.size());
            reseal_page(page);
            ++writes;
         }
         for (SlotId s = 0; s < pool.capacity(); ++s)
            if (pool.is_dirty(s) && pool.is_redirected(s)) {
               o.pass = false;
               o.detail += "slot " + std::to_string(s) + " dirty and redirected at op " + std::to_string(op) + "; ";
            }
         pool.check_invariants();
         if (op % 100 == 0) {
            ++digest_checks;
            if (file_digest(copy.path()) != file_before || dev.counters().mapped_writes != 0) {
               o.pass = false;
               o.detail += "device file changed before flush at op " + std::to_string(op) + "; ";
            }
         }
      }
      held.clear();
      copybacks += pool.stats().copybacks;
      engine.flush();
      ++flushes;
      if (file_digest(copy.path()) != fnv1a64(model)) {
         o.pass = false;
         o.detail += "post-flush file differs from model; ";
      }
   }
   if (copybacks != expected_copybacks)
      o.pass = false;
   o.detail += std::to_string(op) + " ops, " + std::to_string(writes) + " writes, copy-backs=" +
               std::to_string(copybacks) + " expected=" + std::to_string(expected_copybacks) + ", " +
               std::to_string(digest_checks) + " pre-flush digest checks, " + std::to_string(flushes) + " flushes";
   return o;
}

// ---------------------------------------------------------------------------------------
Outcome prefetch_exactly_once()
{
   constexpr std::uint64_t kJobs = 1'000'000;
   static std::vector<std::byte> arena(1 << 20);
   RegionRegistry regions;
   regions.add(arena);

   Outcome o;
   std::ostringstream d;
   for (auto scheme : {MappingScheme::M1, MappingScheme::M2, MappingScheme::M3}) {
      const auto helpers = helper_count(scheme);
      std::vector<std::vector<std::uint64_t>> seen(helpers);
      for (auto& s : seen)
         s.reserve(kJobs);
      PrefetchOptions opt;
      opt.scheme = scheme;
      opt.before_job = [](std::size_t helper) {
         thread_local SplitMix64 rng(0x5EED + helper);
         const auto r = rng.next() % 1000;
         if (r == 0)
            std::this_thread::sleep_for(std::chrono::microseconds(20));
         else if (r < 20)
            std::this_thread::yield();
      };
      opt.after_job = [&seen](std::size_t helper, const PrefetchJob& job) { seen[helper].push_back(job.id); };
      PrefetchPool pool(opt, regions);
      std::uint64_t accepted = 0, retries = 0;
      for (std::uint64_t id = 0; id < kJobs; ++id) {
         const PrefetchJob job{id, 0, (id * 64) % (arena.size() - 64), 64};
         while (pool.enqueue(job) == EnqueueResult::Rejected) {
            ++retries;
            std::this_thread::yield();
         }
         ++accepted;
      }
      const auto stats = pool.drain_and_stop();
      bool ok = stats.enqueued == accepted && stats.rejected == retries;
      for (std::size_t h = 0; h < helpers; ++h) {
         auto ids = seen[h];
         std::sort(ids.begin(), ids.end());
         const bool exact = ids.size() == accepted && std::adjacent_find(ids.begin(), ids.end()) == ids.end() &&
                            (ids.empty() || (ids.front() == 0 && ids.back() == accepted - 1));
         ok = ok && exact && stats.completed_per_helper[h] == accepted;
      }
      ok = ok && stats.completed_total() == helpers * accepted;
      o.pass = o.pass && ok;
      d << scheme_name(scheme) << ": accepted=" << accepted << " completed=" << stats.completed_total()
        << " rejected=" << stats.rejected << (ok ? " ok" : " MISMATCH") << "; ";
   }
   o.detail = d.str();
   return o;
}

// ---------------------------------------------------------------------------------------
constexpr double kFaultScale = 0.05;

Outcome fault_offload()
{
   const auto& cat = shared_dataset(kFaultScale);
   Outcome o;
   std::ostringstream d;
   if (!current_thread_faults().available) {
      // No per-thread counters: fall back to the data-movement clock.
      auto dm_fraction = [&](EngineKind kind, MappingScheme scheme) {
         RunConfig rc;
         rc.data_dir = cat.dir;
         rc.engine = kind;
         rc.prefetch.scheme = scheme;
         QueryRunner runner(rc);
         std::vector<double> v;
         for (int rep = 0; rep < 3; ++rep)
            v.push_back(runner.run(canned_query("qs1")).time.dm_fraction());
         return median_of(v);
      };
      const double se2 = dm_fraction(EngineKind::SE2, MappingScheme::M3);
      const double base = dm_fraction(EngineKind::Base, MappingScheme::None);
      o.pass = se2 <= 0.3 * base;
      o.detail = "per-thread fault counters unavailable; dm_fraction se2+m3=" + fmt(se2, 4) + " base=" + fmt(base, 4);
      return o;
   }

   std::map<MappingScheme, double> faults;
   for (auto scheme : {MappingScheme::None, MappingScheme::M1, MappingScheme::M2, MappingScheme::M3}) {
      RunConfig rc;
      rc.data_dir = cat.dir;
      rc.engine = EngineKind::SE2;
      rc.prefetch.scheme = scheme;
      QueryRunner runner(rc);
      std::vector<double> v;
      for (int rep = 0; rep < 3; ++rep)
         v.push_back(static_cast<double>(runner.run_custom("scan", count_scan).faults.minor));
      faults[scheme] = median_of(v);
   }
   const double none = faults[MappingScheme::None];
   d << "cpus=" << std::thread::hardware_concurrency() << " pages=" << cat.relation(kLineitem).page_count
     << " median compute minor faults: none=" << none;
   for (auto scheme : {MappingScheme::M1, MappingScheme::M2, MappingScheme::M3}) {
      const double ratio = none > 0 ? faults[scheme] / none : 1.0;
      o.pass = o.pass && none > 0 && faults[scheme] <= 0.05 * none;
      d << " " << scheme_name(scheme) << "=" << faults[scheme] << " (" << fmt(100 * ratio, 1) << "%)";
   }
   d << " threshold 5%";
   o.detail = d.str();
   return o;
}

// ---------------------------------------------------------------------------------------
Outcome storage_direction()
{
   const auto& cat = shared_dataset(0.01);
   auto run = [&](StorageKind storage, std::uint64_t& misses) {
      RunConfig rc;
      rc.data_dir = cat.dir;
      rc.storage = storage;
      QueryRunner runner(rc);
      std::vector<double> wall;
      for (int rep = 0; rep < 3; ++rep) {
         const auto r = runner.run(canned_query("qs1"));
         wall.push_back(static_cast<double>(r.time.total.count()));
         misses = r.buffer.misses;
      }
      return median_of(wall);
   };
   std::uint64_t disk_misses = 0, nvm_misses = 0;
   const double disk = run(StorageKind::DiskEmu, disk_misses);
   const double nvm = run(StorageKind::NvmEmu, nvm_misses);
   const double per_block = static_cast<double>(LatencyProfile::disk_emu().per_block_read.count());
   const double bound = static_cast<double>(nvm_misses) * per_block * 0.8;
   Outcome o;
   o.pass = disk - nvm >= bound;
   o.detail = "median wall disk=" + fmt(disk / 1e6) + " ms nvm=" + fmt(nvm / 1e6) + " ms gap=" +
              fmt((disk - nvm) / 1e6) + " ms >= " + fmt(bound / 1e6) + " ms (" + std::to_string(nvm_misses) +
              " misses x " + fmt(per_block / 1e3, 2) + " us - 20%)";
   return o;
}

// ---------------------------------------------------------------------------------------
Outcome dm_chain()
{
   const auto& cat = shared_dataset(0.01);
   std::map<EngineKind, double> dm;
   std::ostringstream d;
   for (auto kind : {EngineKind::Base, EngineKind::SE1, EngineKind::SE2}) {
      RunConfig rc;
      rc.data_dir = cat.dir;
      rc.engine = kind;
      QueryRunner runner(rc);
      std::vector<double> v;
      for (int rep = 0; rep < 3; ++rep)
         v.push_back(static_cast<double>(runner.run(canned_query("qs1")).time.dm.count()));
      dm[kind] = median_of(v);
      d << engine_name(kind) << "=" << fmt(dm[kind] / 1e3, 1) << " us ";
   }
   Outcome o;
   o.pass = dm[EngineKind::Base] > dm[EngineKind::SE1] && dm[EngineKind::SE1] > dm[EngineKind::SE2];
   o.detail = "median dm_ns " + d.str();
   return o;
}

// ---------------------------------------------------------------------------------------
Outcome clock_properties()
{
   constexpr std::size_t kOps = 100'000;
   constexpr std::size_t kCapacity = 16;
   constexpr std::size_t kPageSize = 512;
   constexpr std::uint64_t kPages = 48;
   static std::vector<std::byte> mapped(kPageSize * kPages);

   BufferPool pool(kCapacity, kPageSize);
   std::uint64_t writebacks = 0;
   bool writeback_ok = true;
   pool.set_writeback([&](const PageTag& tag, std::span<const std::byte>) {
      const auto s = pool.find(tag);
      writeback_ok = writeback_ok && s && pool.is_dirty(*s) && !pool.is_redirected(*s);
      ++writebacks;
   });
   SplitMix64 rng(0xC10C);
   std::vector<SlotId> pins;
   Outcome o;
   std::uint64_t exhausted = 0, gets = 0;
   auto fail = [&](const std::string& why) {
      if (o.pass)
         o.detail += why + "; ";
      o.pass = false;
   };
   for (std::size_t op = 0; op < kOps; ++op) {
      const auto r = rng.next() % 100;
      if (r < 45 || pins.empty()) {
         const PageTag tag{static_cast<std::uint32_t>(rng.next() % 2), rng.next() % (kPages / 2)};
         std::vector<std::pair<SlotId, PageTag>> pinned;
         for (SlotId s = 0; s < kCapacity; ++s)
            if (pool.pin_count(s) > 0)
               pinned.emplace_back(s, *pool.tag(s));
         const bool resident = pool.find(tag).has_value();
         ++gets;
         try {
            const auto lookup = pool.get_slot(tag);
            pins.push_back(lookup.slot);
            if (lookup.hit != resident)
               fail("hit flag disagrees with residency");
         } catch (const Error& e) {
            if (e.code() != Errc::PoolExhausted)
               throw;
            ++exhausted;
            if (pinned.size() != kCapacity)
               fail("PoolExhausted with unpinned slots");
         }
         for (const auto& [s, t] : pinned)
            if (!pool.tag(s) || !(*pool.tag(s) == t))
               fail("pinned slot evicted");
      } else if (r < 85) {
         const auto i = rng.next() % pins.size();
         pool.unpin(pins[i]);
         pins.erase(pins.begin() + static_cast<std::ptrdiff_t>(i));
      } else if (r < 93) {
         const auto s = pins[rng.next() % pins.size()];
         if (!pool.is_redirected(s))
            pool.mark_dirty(s);
      } else if (r < 99) {
         const auto s = pins[rng.next() % pins.size()];
         if (!pool.is_dirty(s) && !pool.is_redirected(s)) {
            const auto page = rng.next() % kPages;
            pool.redirect(s, std::span<const std::byte>(mapped.data() + page * kPageSize, kPageSize));
         }
      } else {
         pool.flush_all();
      }
      pool.check_invariants();
      std::size_t tagged = 0;
      for (SlotId s = 0; s < kCapacity; ++s) {
         if (const auto t = pool.tag(s)) {
            ++tagged;
            if (pool.find(*t) != s)
               fail("page table does not map tag back to its slot");
         }
      }
      if (tagged != pool.occupied())
         fail("page table size differs from occupied slots");
      if (pool.stats().max_victim_visits > 2 * kCapacity)
         fail("victim search exceeded 2 x capacity");
   }
   if (!writeback_ok)
      fail("writeback of a clean or redirected slot");
   o.detail += std::to_string(kOps) + " ops, " + std::to_string(gets) + " lookups, evictions=" +
               std::to_string(pool.stats().evictions) + " writebacks=" + std::to_string(writebacks) +
               " exhausted=" + std::to_string(exhausted) +
               " max_victim_visits=" + std::to_string(pool.stats().max_victim_visits) + " (bound " +
               std::to_string(2 * kCapacity) + ")";
   return o;
}

struct Criterion {
   int id;
   const char* name;
   std::chrono::seconds budget;
   Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "copy-law exactness", std::chrono::seconds(5), copy_law},
    {2, "cross-engine equivalence", std::chrono::seconds(120), equivalence},
    {3, "SE2 write-path consistency", std::chrono::seconds(30), se2_write_path},
    {4, "prefetch exactly-once", std::chrono::seconds(60), prefetch_exactly_once},
    {5, "fault offload", std::chrono::seconds(60), fault_offload},
    {6, "directional storage claim", std::chrono::seconds(60), storage_direction},
    {7, "DM monotonicity chain", std::chrono::seconds(60), dm_chain},
    {8, "CLOCK and buffer properties", std::chrono::seconds(30), clock_properties},
};

}  // namespace

int main(int argc, char** argv)
{
   std::set<int> selected;
   for (int i = 1; i < argc; ++i)
      selected.insert(std::atoi(argv[i]));
   int failures = 0;
   for (const auto& c : kCriteria) {
      if (!selected.empty() && !selected.count(c.id))
         continue;
      const auto start = SteadyClock::now();
      Outcome o;
      try {
         o = c.run();
      } catch (const std::exception& e) {
         o = {false, std::string("exception: ") + e.what()};
      }
      const double secs = std::chrono::duration<double>(SteadyClock::now() - start).count();
      const bool in_budget = secs < static_cast<double>(c.budget.count());
      const bool pass = o.pass && in_budget;
      failures += pass ? 0 : 1;
      std::cout << (pass ? "[PASS] " : "[FAIL] ") << "criterion " << c.id << " " << c.name << ": " << o.detail
                << " [" << fmt(secs, 2) << " s, budget " << c.budget.count() << " s"
                << (in_budget ? "" : ", over budget") << "]" << std::endl;
   }
   return failures == 0 ? 0 : 1;
}
