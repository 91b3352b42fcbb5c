#include "nvmse/query.hpp"

#include "nvmse/error.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

namespace nvmse {

namespace {

using SteadyClock = std::chrono::steady_clock;

constexpr std::size_t kScanRowWidth = kColumnCount;

// Exclusive per-operator timing: time is charged to whichever operator is on
// top of the stack, so nested pushes are not double counted.
class Profiler {
  public:
   explicit Profiler(TimeBreakdown& out) : out_(out), last_(SteadyClock::now()) {}

   void enter(OpCategory c)
   {
      charge();
      stack_.push_back(c);
   }
   void leave()
   {
      charge();
      stack_.pop_back();
   }

  private:
   void charge()
   {
      const auto now = SteadyClock::now();
      if (!stack_.empty())
         out_.per_operator[static_cast<std::size_t>(stack_.back())] += now - last_;
      last_ = now;
   }

   TimeBreakdown& out_;
   SteadyClock::time_point last_;
   std::vector<OpCategory> stack_;
};

class OpScope {
  public:
   OpScope(Profiler& p, OpCategory c) : p_(p) { p_.enter(c); }
   ~OpScope() { p_.leave(); }
   OpScope(const OpScope&) = delete;
   OpScope& operator=(const OpScope&) = delete;

  private:
   Profiler& p_;
};

class Sink {
  public:
   virtual ~Sink() = default;
   virtual void push(std::span<const Row> rows) = 0;
   virtual void finish() = 0;
};

class CollectSink final : public Sink {
  public:
   CollectSink(Profiler& prof, std::vector<Row>& rows) : prof_(prof), rows_(rows) {}
   void push(std::span<const Row> rows) override
   {
      OpScope scope(prof_, OpCategory::Other);
      rows_.insert(rows_.end(), rows.begin(), rows.end());
   }
   void finish() override {}

  private:
   Profiler& prof_;
   std::vector<Row>& rows_;
};

Int128 as_int(const Value& v)
{
   return std::get<Int128>(v);
}

class AggregateOp final : public Sink {
  public:
   AggregateOp(Profiler& prof, Sink& out, std::vector<AggSpec> specs)
       : prof_(prof), out_(out), specs_(std::move(specs)), sums_(specs_.size(), 0)
   {
   }

   void push(std::span<const Row> rows) override
   {
      OpScope scope(prof_, OpCategory::Aggregate);
      for (const auto& row : rows) {
         for (std::size_t i = 0; i < specs_.size(); ++i)
            if (specs_[i].kind != AggKind::Count)
               sums_[i] += as_int(row[specs_[i].column]);
      }
      count_ += static_cast<Int128>(rows.size());
   }

   void finish() override
   {
      Row result;
      {
         OpScope scope(prof_, OpCategory::Aggregate);
         for (std::size_t i = 0; i < specs_.size(); ++i) {
            switch (specs_[i].kind) {
               case AggKind::Sum: result.emplace_back(sums_[i]); break;
               case AggKind::Count: result.emplace_back(count_); break;
               case AggKind::Avg: result.emplace_back(count_ == 0 ? Int128{0} : sums_[i] * 1000 / count_); break;
            }
         }
      }
      out_.push(std::span(&result, 1));
      out_.finish();
   }

  private:
   Profiler& prof_;
   Sink& out_;
   std::vector<AggSpec> specs_;
   std::vector<Int128> sums_;
   Int128 count_ = 0;
};

bool value_less(const Value& a, const Value& b)
{
   if (a.index() != b.index())
      return a.index() < b.index();
   if (const auto* ai = std::get_if<Int128>(&a))
      return *ai < std::get<Int128>(b);
   return std::get<std::string>(a) < std::get<std::string>(b);
}

class SortOp final : public Sink {
  public:
   SortOp(Profiler& prof, Sink& out, std::size_t column) : prof_(prof), out_(out), column_(column) {}

   void push(std::span<const Row> rows) override
   {
      OpScope scope(prof_, OpCategory::Sort);
      buffer_.insert(buffer_.end(), rows.begin(), rows.end());
   }

   void finish() override
   {
      {
         OpScope scope(prof_, OpCategory::Sort);
         std::stable_sort(buffer_.begin(), buffer_.end(),
                          [c = column_](const Row& a, const Row& b) { return value_less(a[c], b[c]); });
      }
      out_.push(buffer_);
      out_.finish();
   }

  private:
   Profiler& prof_;
   Sink& out_;
   std::size_t column_;
   std::vector<Row> buffer_;
};

class HashJoinOp {
  public:
   HashJoinOp(Profiler& prof, Sink& out, std::size_t build_key, std::size_t probe_key)
       : prof_(prof), out_(out), build_key_(build_key), probe_key_(probe_key), build_(*this), probe_(*this)
   {
   }

   Sink& build_side() { return build_; }
   Sink& probe_side() { return probe_; }

  private:
   struct BuildSide final : Sink {
      explicit BuildSide(HashJoinOp& op) : op(op) {}
      void push(std::span<const Row> rows) override
      {
         OpScope scope(op.prof_, OpCategory::Join);
         for (const auto& row : rows) {
            op.table_[as_int(row[op.build_key_])].push_back(op.rows_.size());
            op.rows_.push_back(row);
         }
      }
      void finish() override {}
      HashJoinOp& op;
   };

   struct ProbeSide final : Sink {
      explicit ProbeSide(HashJoinOp& op) : op(op) {}
      void push(std::span<const Row> rows) override
      {
         op.batch_.clear();
         {
            OpScope scope(op.prof_, OpCategory::Join);
            for (const auto& row : rows) {
               auto it = op.table_.find(as_int(row[op.probe_key_]));
               if (it == op.table_.end())
                  continue;
               for (auto idx : it->second) {
                  Row joined = op.rows_[idx];
                  joined.insert(joined.end(), row.begin(), row.end());
                  op.batch_.push_back(std::move(joined));
               }
            }
         }
         if (!op.batch_.empty())
            op.out_.push(op.batch_);
      }
      void finish() override { op.out_.finish(); }
      HashJoinOp& op;
   };

   struct Int128Hash {
      std::size_t operator()(Int128 v) const noexcept
      {
         const auto lo = static_cast<std::uint64_t>(v);
         const auto hi = static_cast<std::uint64_t>(static_cast<unsigned __int128>(v) >> 64);
         return std::hash<std::uint64_t>{}(lo * 0x9E3779B97F4A7C15ull ^ hi);
      }
   };

   Profiler& prof_;
   Sink& out_;
   std::size_t build_key_;
   std::size_t probe_key_;
   BuildSide build_;
   ProbeSide probe_;
   std::unordered_map<Int128, std::vector<std::size_t>, Int128Hash> table_;
   std::vector<Row> rows_;
   std::vector<Row> batch_;
};

// Text columns of each plan's output rows.
std::vector<bool> column_is_text(const PlanNode& node)
{
   return std::visit(
       [](const auto& op) -> std::vector<bool> {
          using T = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<T, SeqScanNode>) {
             return {false, false, false, false, true};
          } else if constexpr (std::is_same_v<T, AggregateNode>) {
             if (!op.input)
                raise(Errc::PlanInvalid, "aggregate without input");
             const auto in = column_is_text(*op.input);
             if (op.aggregates.empty())
                raise(Errc::PlanInvalid, "aggregate without aggregates");
             for (const auto& a : op.aggregates) {
                if (a.kind == AggKind::Count)
                   continue;
                if (a.column >= in.size() || in[a.column])
                   raise(Errc::PlanInvalid, "aggregate over missing or text column " + std::to_string(a.column));
             }
             return std::vector<bool>(op.aggregates.size(), false);
          } else if constexpr (std::is_same_v<T, SortNode>) {
             if (!op.input)
                raise(Errc::PlanInvalid, "sort without input");
             auto in = column_is_text(*op.input);
             if (op.column >= in.size())
                raise(Errc::PlanInvalid, "sort column " + std::to_string(op.column) + " out of range");
             return in;
          } else {
             if (!op.build || !op.probe)
                raise(Errc::PlanInvalid, "hash join needs two inputs");
             auto b = column_is_text(*op.build);
             const auto p = column_is_text(*op.probe);
             if (op.build_key >= b.size() || b[op.build_key] || op.probe_key >= p.size() || p[op.probe_key])
                raise(Errc::PlanInvalid, "hash join key must be an integer column");
             b.insert(b.end(), p.begin(), p.end());
             return b;
          }
       },
       node.op);
}

template <typename OnTuple, typename OnPageEnd>
ScanStats scan_pages(ExecContext& ctx, std::string_view relation, const Predicate* predicate, OnTuple&& on_tuple,
                     OnPageEnd&& on_page_end)
{
   const auto it = ctx.relations.find(relation);
   if (it == ctx.relations.end())
      raise(Errc::PlanInvalid, "relation '" + std::string(relation) + "' is not bound");
   const auto& rel = it->second;
   ScanStats stats;
   for (std::uint64_t page = 0; page < rel.page_count; ++page) {
      if (ctx.prefetch && rel.region_id && page + 1 < rel.page_count) {
         const PrefetchJob job{page + 1, *rel.region_id, (page + 1) * rel.page_size, rel.page_size};
         if (ctx.prefetch->enqueue(job) == EnqueueResult::Accepted)
            ++stats.prefetch_accepted;
         else
            ++stats.prefetch_rejected;
      }
      auto ref = ctx.engine.read_page(rel.engine_rel, page);
      for_each_tuple(ref.bytes(), [&](std::uint16_t, const TupleView& t) {
         if (ctx.adhoc_prefetch)
            __builtin_prefetch(t.bytes().data() + 64);
         ++stats.tuples;
         if (!predicate || predicate->matches(t)) {
            ++stats.matched;
            on_tuple(t);
         }
      });
      ++stats.pages;
      ref.release();
      on_page_end();
   }
   return stats;
}

struct Compiled {
   std::vector<std::function<void()>> drivers;
   std::vector<std::unique_ptr<Sink>> sinks;
   std::vector<std::unique_ptr<HashJoinOp>> joins;
};

void compile(const PlanNode& node, Sink& out, ExecContext& ctx, Profiler& prof, ScanStats& scan_total, Compiled& c)
{
   std::visit(
       [&](const auto& op) {
          using T = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<T, SeqScanNode>) {
             c.drivers.push_back([&ctx, &prof, &scan_total, &out, &op] {
                std::vector<Row> batch;
                std::size_t n = 0;
                ScanStats s;
                {
                   OpScope scope(prof, OpCategory::SeqScan);
                   s = scan_pages(
                       ctx, op.relation, op.predicate ? &*op.predicate : nullptr,
                       [&](const TupleView& t) {
                          if (n < batch.size())
                             assign_row(batch[n], t);
                          else
                             batch.push_back(to_row(t));
                          ++n;
                       },
                       [&] {
                          if (n > 0)
                             out.push(std::span<const Row>(batch.data(), n));
                          n = 0;
                       });
                }
                scan_total.pages += s.pages;
                scan_total.tuples += s.tuples;
                scan_total.matched += s.matched;
                scan_total.prefetch_accepted += s.prefetch_accepted;
                scan_total.prefetch_rejected += s.prefetch_rejected;
                out.finish();
             });
          } else if constexpr (std::is_same_v<T, AggregateNode>) {
             auto& sink = *c.sinks.emplace_back(std::make_unique<AggregateOp>(prof, out, op.aggregates));
             compile(*op.input, sink, ctx, prof, scan_total, c);
          } else if constexpr (std::is_same_v<T, SortNode>) {
             auto& sink = *c.sinks.emplace_back(std::make_unique<SortOp>(prof, out, op.column));
             compile(*op.input, sink, ctx, prof, scan_total, c);
          } else {
             auto& join = *c.joins.emplace_back(std::make_unique<HashJoinOp>(prof, out, op.build_key, op.probe_key));
             compile(*op.build, join.build_side(), ctx, prof, scan_total, c);
             compile(*op.probe, join.probe_side(), ctx, prof, scan_total, c);
          }
       },
       node.op);
}

}  // namespace

// -------------------------------------------------------------------------------------
void digest_row(Fnv1a64& h, const Row& row)
{
   for (const auto& v : row) {
      if (const auto* i = std::get_if<Int128>(&v)) {
         std::array<std::byte, 17> buf{};
         buf[0] = std::byte{0x01};
         std::memcpy(buf.data() + 1, i, sizeof(Int128));
         h.update(buf);
      } else {
         const auto& s = std::get<std::string>(v);
         std::array<std::byte, 5> buf{};
         buf[0] = std::byte{0x02};
         const auto len = static_cast<std::uint32_t>(s.size());
         std::memcpy(buf.data() + 1, &len, sizeof(len));
         h.update(buf);
         h.update(s);
      }
   }
}

std::uint64_t digest_rows(const std::vector<Row>& rows)
{
   Fnv1a64 h;
   for (const auto& r : rows)
      digest_row(h, r);
   return h.value();
}

std::string int128_to_string(Int128 v)
{
   if (v == 0)
      return "0";
   const bool neg = v < 0;
   auto u = neg ? -static_cast<unsigned __int128>(v) : static_cast<unsigned __int128>(v);
   std::string s;
   while (u > 0) {
      s.push_back(static_cast<char>('0' + static_cast<int>(u % 10)));
      u /= 10;
   }
   if (neg)
      s.push_back('-');
   return {s.rbegin(), s.rend()};
}

Row to_row(const TupleView& t)
{
   Row row;
   row.reserve(kScanRowWidth);
   row.emplace_back(Int128{t.key()});
   row.emplace_back(Int128{t.quantity()});
   row.emplace_back(Int128{t.price_cents()});
   row.emplace_back(Int128{t.date()});
   row.emplace_back(std::string(t.text()));
   return row;
}

void assign_row(Row& row, const TupleView& t)
{
   std::get<Int128>(row[0]) = t.key();
   std::get<Int128>(row[1]) = t.quantity();
   std::get<Int128>(row[2]) = t.price_cents();
   std::get<Int128>(row[3]) = t.date();
   std::get<std::string>(row[4]).assign(t.text());
}

bool Comparison::matches(const TupleView& t) const noexcept
{
   const auto v = t.integer(column);
   switch (op) {
      case CompareOp::Lt: return v < constant;
      case CompareOp::Le: return v <= constant;
      case CompareOp::Gt: return v > constant;
      case CompareOp::Ge: return v >= constant;
      case CompareOp::Eq: return v == constant;
      case CompareOp::Ne: return v != constant;
   }
   return false;
}

bool Predicate::matches(const TupleView& t) const noexcept
{
   return std::all_of(terms.begin(), terms.end(), [&](const Comparison& c) { return c.matches(t); });
}

// -------------------------------------------------------------------------------------
Plan seq_scan_plan(std::string relation, std::optional<Predicate> predicate)
{
   if (predicate)
      for (const auto& c : predicate->terms)
         if (c.column == Column::Text)
            raise(Errc::PlanInvalid, "predicates compare integer columns only");
   return std::make_shared<PlanNode>(PlanNode{SeqScanNode{std::move(relation), std::move(predicate)}});
}

Plan aggregate_plan(Plan input, std::vector<AggSpec> aggregates)
{
   return std::make_shared<PlanNode>(PlanNode{AggregateNode{std::move(aggregates), std::move(input)}});
}

Plan sort_plan(Plan input, std::size_t column)
{
   return std::make_shared<PlanNode>(PlanNode{SortNode{column, std::move(input)}});
}

Plan hash_join_plan(Plan build, Plan probe, std::size_t build_key, std::size_t probe_key)
{
   return std::make_shared<PlanNode>(PlanNode{HashJoinNode{std::move(build), std::move(probe), build_key, probe_key}});
}

std::size_t output_width(const PlanNode& node)
{
   return column_is_text(node).size();
}

OperatorCounts count_operators(const PlanNode& node)
{
   OperatorCounts c;
   std::visit(
       [&](const auto& op) {
          using T = std::decay_t<decltype(op)>;
          auto add = [&](const Plan& p) {
             if (!p)
                return;
             const auto sub = count_operators(*p);
             c.scans += sub.scans;
             c.aggregates += sub.aggregates;
             c.sorts += sub.sorts;
             c.joins += sub.joins;
          };
          if constexpr (std::is_same_v<T, SeqScanNode>) {
             ++c.scans;
          } else if constexpr (std::is_same_v<T, AggregateNode>) {
             ++c.aggregates;
             add(op.input);
          } else if constexpr (std::is_same_v<T, SortNode>) {
             ++c.sorts;
             add(op.input);
          } else {
             ++c.joins;
             add(op.build);
             add(op.probe);
          }
       },
       node.op);
   return c;
}

std::vector<QueryPlan> canned_suite()
{
   constexpr auto price = static_cast<std::size_t>(Column::Price);
   constexpr auto quantity = static_cast<std::size_t>(Column::Quantity);
   constexpr auto key = static_cast<std::size_t>(Column::Key);
   const std::string lineitem(kLineitem);
   const std::string orders(kOrders);

   std::vector<QueryPlan> suite;
   // Scan-heavy pricing summary over the whole relation.
   suite.push_back({"qs1", aggregate_plan(seq_scan_plan(lineitem), {{AggKind::Sum, price},
                                                                    {AggKind::Count, 0},
                                                                    {AggKind::Avg, quantity}})});
   // Selective scan: small quantities shipped during 1995.
   Predicate selective{{{Column::Quantity, CompareOp::Lt, 24},
                        {Column::Date, CompareOp::Ge, 9131},
                        {Column::Date, CompareOp::Lt, 9496}}};
   suite.push_back(
       {"qs2", aggregate_plan(seq_scan_plan(lineitem, selective), {{AggKind::Count, 0}, {AggKind::Sum, price}})});
   // Join-heavy: orders build, lineitem probe, on key.
   suite.push_back({"qs3", aggregate_plan(hash_join_plan(seq_scan_plan(orders), seq_scan_plan(lineitem), key, key),
                                          {{AggKind::Count, 0}, {AggKind::Sum, kColumnCount + price}})});
   // Sort-heavy: half the relation ordered by price.
   Predicate half{{{Column::Quantity, CompareOp::Lt, 26}}};
   suite.push_back({"qs4", sort_plan(seq_scan_plan(lineitem, half), price)});
   return suite;
}

const QueryPlan& canned_query(std::string_view label)
{
   static const auto suite = canned_suite();
   for (const auto& q : suite)
      if (q.label == label)
         return q;
   raise(Errc::PlanInvalid, "unknown query '" + std::string(label) + "' (expected qs1..qs4)");
}

// -------------------------------------------------------------------------------------
std::string_view category_name(OpCategory c) noexcept
{
   switch (c) {
      case OpCategory::SeqScan: return "seqscan";
      case OpCategory::Sort: return "sort";
      case OpCategory::Join: return "join";
      case OpCategory::Aggregate: return "aggregate";
      case OpCategory::Other: return "other";
      case OpCategory::Count_: break;
   }
   return "?";
}

double TimeBreakdown::dm_fraction() const noexcept
{
   if (total.count() <= 0)
      return 0.0;
   return std::clamp(static_cast<double>(dm.count()) / static_cast<double>(total.count()), 0.0, 1.0);
}

std::chrono::nanoseconds TimeBreakdown::operator_sum() const noexcept
{
   std::chrono::nanoseconds sum{0};
   for (auto d : per_operator)
      sum += d;
   return sum;
}

ScanStats seq_scan(ExecContext& ctx, std::string_view relation, const Predicate* predicate,
                   const std::function<void(const TupleView&)>& sink)
{
   return scan_pages(ctx, relation, predicate, sink, [] {});
}

QueryResult execute(ExecContext& ctx, const QueryPlan& plan)
{
   if (!plan.root)
      raise(Errc::PlanInvalid, "empty plan");
   column_is_text(*plan.root);

   QueryResult result;
   const auto dm_before = ctx.engine.data_movement();
   const auto start = SteadyClock::now();
   {
      Profiler prof(result.time);
      CollectSink collect(prof, result.rows);
      Compiled compiled;
      compile(*plan.root, collect, ctx, prof, result.scan, compiled);
      for (auto& driver : compiled.drivers)
         driver();
   }
   result.time.total = SteadyClock::now() - start;
   result.time.dm = ctx.engine.data_movement() - dm_before;
   result.digest = digest_rows(result.rows);
   return result;
}

// -------------------------------------------------------------------------------------
std::size_t default_capacity(std::uint64_t total_pages) noexcept
{
   return static_cast<std::size_t>(std::min<std::uint64_t>(kDefaultPoolCapacity, std::max<std::uint64_t>(4, total_pages / 4)));
}

QueryRunner::QueryRunner(RunConfig config) : config_(std::move(config)), catalog_(Catalog::load(config_.data_dir))
{
   staged_.reserve(catalog_.relations.size());
   devices_.reserve(catalog_.relations.size());
   const auto latency = config_.latency.value_or(LatencyProfile::for_storage(config_.storage));
   for (const auto& rel : catalog_.relations) {
      auto& copy = staged_.emplace_back(catalog_.path_of(rel), config_.backing);
      if (!copy.warning().empty() && warnings_.empty())
         warnings_.push_back(copy.warning());
      devices_.push_back(Device::open(copy.path(), rel.page_size, latency));
   }
}

Device& QueryRunner::device(std::string_view relation)
{
   for (std::size_t i = 0; i < catalog_.relations.size(); ++i)
      if (catalog_.relations[i].name == relation)
         return devices_[i];
   raise(Errc::PlanInvalid, "unknown relation '" + std::string(relation) + "'");
}

RunReport QueryRunner::run(const QueryPlan& plan)
{
   return run_custom(plan.label, [&](ExecContext& ctx, QueryResult& out) { out = execute(ctx, plan); });
}

RunReport QueryRunner::run_custom(std::string label, const std::function<void(ExecContext&, QueryResult&)>& body)
{
   std::uint64_t total_pages = 0;
   for (auto& dev : devices_) {
      dev.drop_residency();
      dev.reset_counters();
      total_pages += dev.page_count();
   }
   const auto capacity = config_.capacity_slots.value_or(default_capacity(total_pages));
   BufferPool pool(capacity, catalog_.page_size);
   Engine engine(config_.engine, pool);
   ExecContext ctx{engine, {}, nullptr, config_.adhoc_prefetch};
   RegionRegistry regions;
   for (std::size_t i = 0; i < devices_.size(); ++i) {
      BoundRelation bound;
      bound.engine_rel = engine.attach(devices_[i]);
      bound.page_count = devices_[i].page_count();
      bound.page_size = devices_[i].page_size();
      if (bound.page_count > 0)
         bound.region_id = regions.add(devices_[i].region());
      ctx.relations.emplace(catalog_.relations[i].name, bound);
   }

   RunReport report;
   report.query = std::move(label);
   report.engine = config_.engine;
   report.storage = config_.storage;
   report.scheme = config_.prefetch.scheme;
   report.warnings = warnings_;

   if (config_.prefetch.compute_core && !pin_current_thread(*config_.prefetch.compute_core))
      report.warnings.push_back("could not pin the compute thread");

   std::unique_ptr<PrefetchPool> prefetch;
   if (config_.prefetch.scheme != MappingScheme::None) {
      prefetch = std::make_unique<PrefetchPool>(config_.prefetch, regions);
      ctx.prefetch = prefetch.get();
      for (const auto& w : prefetch->warnings())
         report.warnings.push_back(w);
   }

   QueryResult result;
   const auto faults_before = current_thread_faults();
   const auto start = SteadyClock::now();
   body(ctx, result);
   const auto elapsed = SteadyClock::now() - start;
   const auto faults_after = current_thread_faults();
   if (prefetch)
      report.prefetch = prefetch->drain_and_stop();

   if (result.time.total.count() == 0) {
      result.time.total = elapsed;
      result.time.dm = engine.data_movement();
   }
   report.time = result.time;
   report.scan = result.scan;
   report.buffer = pool.stats();
   for (const auto& dev : devices_) {
      const auto c = dev.counters();
      report.device.copies += c.copies;
      report.device.bytes_copied += c.bytes_copied;
      report.device.block_reads += c.block_reads;
      report.device.block_writes += c.block_writes;
      report.device.mapped_copies += c.mapped_copies;
      report.device.mapped_writes += c.mapped_writes;
      report.device.data_movement += c.data_movement;
   }
   report.faults.available = faults_before.available && faults_after.available;
   report.faults.minor = faults_after.minor - faults_before.minor;
   report.faults.major = faults_after.major - faults_before.major;
   report.result_digest = result.digest;
   report.result_rows = result.rows.size();
   if (config_.keep_rows)
      report.rows = std::move(result.rows);
   return report;
}

// -------------------------------------------------------------------------------------
std::vector<TupleUpdate> make_update_script(const std::filesystem::path& heap_file, std::size_t page_size,
                                            std::uint64_t seed, std::size_t count)
{
   std::ifstream in(heap_file, std::ios::binary);
   if (!in)
      raise(Errc::Io, "cannot open " + heap_file.string());
   std::vector<std::byte> bytes(std::filesystem::file_size(heap_file));
   in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
   if (!in)
      raise(Errc::Io, "cannot read " + heap_file.string());
   validate_page_size(page_size);
   const auto pages = bytes.size() / page_size;
   std::vector<TupleUpdate> script;
   if (pages == 0)
      return script;
   SplitMix64 rng(seed);
   script.reserve(count);
   for (std::size_t i = 0; i < count; ++i) {
      const auto page_no = rng.next() % pages;
      const std::span<const std::byte> page(bytes.data() + page_no * page_size, page_size);
      const auto header = read_page_header(page);
      if (header.tuple_count == 0)
         continue;
      const auto slot = static_cast<std::uint16_t>(rng.next() % header.tuple_count);
      const auto body = tuple_body(page, slot);
      TupleUpdate u{{page_no, slot}, {body.begin(), body.end()}};
      const auto price = static_cast<std::int64_t>(100 + rng.next() % 10'000'000);
      std::memcpy(u.bytes.data() + 16, &price, sizeof(price));
      script.push_back(std::move(u));
   }
   return script;
}

}  // namespace nvmse
