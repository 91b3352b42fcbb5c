#pragma once

#include "nvmse/buffer_pool.hpp"
#include "nvmse/device.hpp"
#include "nvmse/engine.hpp"
#include "nvmse/platform.hpp"
#include "nvmse/prefetch.hpp"
#include "nvmse/storage_format.hpp"

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace nvmse {

// -------------------------------------------------------------------------------------
// Values and rows
// -------------------------------------------------------------------------------------
using Int128 = __int128;
using Value = std::variant<Int128, std::string>;
using Row = std::vector<Value>;

/// FNV-1a 64 over the canonical row encoding: per value a tag byte, then
/// 0x01 + 16-byte little-endian two's complement, or 0x02 + u32 length + bytes.
std::uint64_t digest_rows(const std::vector<Row>& rows);
void digest_row(Fnv1a64& h, const Row& row);

std::string int128_to_string(Int128 v);
Row to_row(const TupleView& tuple);
void assign_row(Row& row, const TupleView& tuple);

// -------------------------------------------------------------------------------------
// Plans
// -------------------------------------------------------------------------------------
enum class CompareOp { Lt, Le, Gt, Ge, Eq, Ne };

struct Comparison {
   Column column = Column::Key;
   CompareOp op = CompareOp::Lt;
   std::int64_t constant = 0;
   bool matches(const TupleView& t) const noexcept;
};

/// Conjunction of integer comparisons on scan columns.
struct Predicate {
   std::vector<Comparison> terms;
   bool matches(const TupleView& t) const noexcept;
};

enum class AggKind { Sum, Count, Avg };

/// Avg is reported in thousandths, truncated toward zero, so results stay exact.
struct AggSpec {
   AggKind kind = AggKind::Count;
   std::size_t column = 0;
};

struct PlanNode;
using Plan = std::shared_ptr<const PlanNode>;

struct SeqScanNode {
   std::string relation;
   std::optional<Predicate> predicate;
};
struct AggregateNode {
   std::vector<AggSpec> aggregates;
   Plan input;
};
struct SortNode {
   std::size_t column = 0;
   Plan input;
};
/// Output rows are build columns followed by probe columns.
struct HashJoinNode {
   Plan build;
   Plan probe;
   std::size_t build_key = 0;
   std::size_t probe_key = 0;
};

struct PlanNode {
   std::variant<SeqScanNode, AggregateNode, SortNode, HashJoinNode> op;
};

Plan seq_scan_plan(std::string relation, std::optional<Predicate> predicate = std::nullopt);
Plan aggregate_plan(Plan input, std::vector<AggSpec> aggregates);
Plan sort_plan(Plan input, std::size_t column);
Plan hash_join_plan(Plan build, Plan probe, std::size_t build_key, std::size_t probe_key);

/// Width of the rows a plan produces; throws PlanInvalid on bad column refs.
std::size_t output_width(const PlanNode& node);
/// Counts operators of each kind in a plan tree.
struct OperatorCounts {
   std::size_t scans = 0, aggregates = 0, sorts = 0, joins = 0;
};
OperatorCounts count_operators(const PlanNode& node);

struct QueryPlan {
   std::string label;
   Plan root;
};

/// QS1 scan + aggregate, QS2 selective scan, QS3 hash join, QS4 sort.
std::vector<QueryPlan> canned_suite();
const QueryPlan& canned_query(std::string_view label);

// -------------------------------------------------------------------------------------
// Execution
// -------------------------------------------------------------------------------------
enum class OpCategory : std::size_t { SeqScan = 0, Sort, Join, Aggregate, Other, Count_ };
inline constexpr std::size_t kOpCategories = static_cast<std::size_t>(OpCategory::Count_);
std::string_view category_name(OpCategory c) noexcept;

struct TimeBreakdown {
   std::chrono::nanoseconds total{0};
   std::chrono::nanoseconds dm{0};
   std::array<std::chrono::nanoseconds, kOpCategories> per_operator{};

   /// dm / total, 0 when total is 0.
   double dm_fraction() const noexcept;
   std::chrono::nanoseconds operator_sum() const noexcept;
};

/// A relation as the executor sees it: an engine relation id and optionally
/// the prefetch region id of its mapped bytes.
struct BoundRelation {
   std::uint32_t engine_rel = 0;
   std::uint64_t page_count = 0;
   std::size_t page_size = 0;
   std::optional<std::uint32_t> region_id;
};

struct ScanStats {
   std::uint64_t pages = 0;
   std::uint64_t tuples = 0;
   std::uint64_t matched = 0;
   std::uint64_t prefetch_accepted = 0;
   std::uint64_t prefetch_rejected = 0;
};

struct ExecContext {
   Engine& engine;
   std::map<std::string, BoundRelation, std::less<>> relations;
   PrefetchPool* prefetch = nullptr;
   bool adhoc_prefetch = false;
};

/// Visits pages 0..page_count-1 in order; when a prefetch pool is present the
/// job for page k+1 is enqueued as page k is started. Each page is unpinned
/// once its tuples are processed.
ScanStats seq_scan(ExecContext& ctx, std::string_view relation, const Predicate* predicate,
                   const std::function<void(const TupleView&)>& sink);

struct QueryResult {
   std::vector<Row> rows;
   std::uint64_t digest = 0;
   TimeBreakdown time;
   ScanStats scan;
};

QueryResult execute(ExecContext& ctx, const QueryPlan& plan);

// -------------------------------------------------------------------------------------
// Runs
// -------------------------------------------------------------------------------------
struct RunConfig {
   std::filesystem::path data_dir;
   EngineKind engine = EngineKind::Base;
   StorageKind storage = StorageKind::NvmEmu;
   std::optional<LatencyProfile> latency;  // defaults from storage
   Backing backing = Backing::Ram;
   /// Unset: min(1024, max(4, total_pages / 4)) so cold scans miss.
   std::optional<std::size_t> capacity_slots;
   PrefetchOptions prefetch;
   bool adhoc_prefetch = false;
   bool keep_rows = false;
};

struct RunReport {
   std::string query;
   EngineKind engine = EngineKind::Base;
   StorageKind storage = StorageKind::NvmEmu;
   MappingScheme scheme = MappingScheme::None;
   TimeBreakdown time;
   DeviceCounters device;
   BufferPoolStats buffer;
   PoolStats prefetch;
   ScanStats scan;
   ThreadFaults faults;  // charged to the compute thread during the run
   std::uint64_t result_digest = 0;
   std::uint64_t result_rows = 0;
   std::vector<Row> rows;  // only with RunConfig::keep_rows
   std::vector<std::string> warnings;
};

std::size_t default_capacity(std::uint64_t total_pages) noexcept;

/// Stages the dataset once and executes cold runs against it: every run gets a
/// fresh buffer pool, zeroed counters and a mapping with no resident pages.
class QueryRunner {
  public:
   explicit QueryRunner(RunConfig config);

   RunReport run(const QueryPlan& plan);
   /// Runs an arbitrary body against a cold engine; used for scan-only probes.
   RunReport run_custom(std::string label, const std::function<void(ExecContext&, QueryResult&)>& body);

   const Catalog& catalog() const noexcept { return catalog_; }
   const RunConfig& config() const noexcept { return config_; }
   Device& device(std::string_view relation);
   const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  private:
   RunConfig config_;
   Catalog catalog_;
   std::vector<ScratchCopy> staged_;
   std::vector<Device> devices_;
   std::vector<std::string> warnings_;
};

inline RunReport run_query(const QueryPlan& plan, const RunConfig& config)
{
   return QueryRunner(config).run(plan);
}

// -------------------------------------------------------------------------------------
// Scripted in-place updates
// -------------------------------------------------------------------------------------
struct TupleUpdate {
   Tid tid;
   std::vector<std::byte> bytes;
};

/// Deterministic equal-length updates (new price) against a heap file.
std::vector<TupleUpdate> make_update_script(const std::filesystem::path& heap_file, std::size_t page_size,
                                            std::uint64_t seed, std::size_t count);

}  // namespace nvmse
