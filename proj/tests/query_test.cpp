#include "nvmse/error.hpp"
#include "nvmse/query.hpp"

#include "golden.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <limits>

using namespace nvmse;
using nvmse::testing::golden;
using nvmse::testing::shared_dataset;
using nvmse::testing::TempDir;

namespace {

template <typename Fn>
Errc error_of(Fn&& fn)
{
   try {
      fn();
   } catch (const Error& e) {
      return e.code();
   }
   ADD_FAILURE() << "no nvmse::Error thrown";
   return Errc::Config;
}

RunConfig small_config(EngineKind engine = EngineKind::Base, MappingScheme scheme = MappingScheme::None)
{
   RunConfig c;
   c.data_dir = shared_dataset(0.001).dir;
   c.engine = engine;
   c.prefetch.scheme = scheme;
   return c;
}

std::uint64_t g(const char* key)
{
   return golden()["sf0.001"][key].get<std::uint64_t>();
}

Int128 value_int(const Value& v)
{
   return std::get<Int128>(v);
}

}  // namespace

TEST(Digest, EncodingVectors)
{
   EXPECT_EQ(digest_rows({}), 14695981039346656037ull);
   EXPECT_EQ(digest_rows({{Int128{1}}}), 5629814885613599085ull);
   EXPECT_EQ(digest_rows({{Int128{-1}, std::string("ab")}}), 17742616372872659835ull);
   EXPECT_EQ(digest_rows({{Int128{1} << 100}}), 18360552862355499580ull);
   // Row boundaries do not enter the digest.
   EXPECT_EQ(digest_rows({{Int128{1}, Int128{2}}}), digest_rows({{Int128{1}}, {Int128{2}}}));
}

TEST(Digest, Int128ToString)
{
   EXPECT_EQ(int128_to_string(0), "0");
   EXPECT_EQ(int128_to_string(-42), "-42");
   EXPECT_EQ(int128_to_string(Int128{1} << 100), "1267650600228229401496703205376");
   const Int128 min = -(Int128{1} << 126) * 2;
   EXPECT_EQ(int128_to_string(min), "-170141183460469231731687303715884105728");
}

TEST(Plan, Validation)
{
   EXPECT_EQ(error_of([] { seq_scan_plan("lineitem", Predicate{{{Column::Text, CompareOp::Eq, 0}}}); }),
             Errc::PlanInvalid);
   auto scan = seq_scan_plan("lineitem");
   EXPECT_EQ(output_width(*scan), kColumnCount);
   auto invalid = [](const Plan& plan) { return error_of([&] { output_width(*plan); }); };
   EXPECT_EQ(invalid(aggregate_plan(scan, {{AggKind::Sum, 4}})), Errc::PlanInvalid);
   EXPECT_EQ(invalid(aggregate_plan(scan, {{AggKind::Sum, 9}})), Errc::PlanInvalid);
   EXPECT_EQ(invalid(aggregate_plan(scan, {})), Errc::PlanInvalid);
   EXPECT_EQ(invalid(sort_plan(scan, 5)), Errc::PlanInvalid);
   EXPECT_EQ(invalid(hash_join_plan(scan, scan, 4, 0)), Errc::PlanInvalid);
   EXPECT_EQ(invalid(aggregate_plan(nullptr, {{AggKind::Count, 0}})), Errc::PlanInvalid);
   EXPECT_EQ(output_width(*aggregate_plan(scan, {{AggKind::Count, 4}})), 1u);
   QueryRunner runner(small_config());
   EXPECT_EQ(error_of([&] { runner.run({"bad", sort_plan(scan, 7)}); }), Errc::PlanInvalid);
   auto join = hash_join_plan(seq_scan_plan("orders"), scan, 0, 0);
   EXPECT_EQ(output_width(*join), 2 * kColumnCount);
   EXPECT_NO_THROW(sort_plan(join, 9));
}

TEST(Plan, CannedSuiteShapes)
{
   const auto suite = canned_suite();
   ASSERT_EQ(suite.size(), 4u);
   const auto c1 = count_operators(*canned_query("qs1").root);
   EXPECT_EQ(c1.scans, 1u);
   EXPECT_EQ(c1.aggregates, 1u);
   const auto c3 = count_operators(*canned_query("qs3").root);
   EXPECT_EQ(c3.scans, 2u);
   EXPECT_EQ(c3.joins, 1u);
   const auto c4 = count_operators(*canned_query("qs4").root);
   EXPECT_EQ(c4.sorts, 1u);
   EXPECT_EQ(c4.aggregates, 0u);
   EXPECT_EQ(error_of([] { canned_query("qs9"); }), Errc::PlanInvalid);
}

TEST(Query, GoldenDigests)
{
   QueryRunner runner(small_config());
   for (const char* q : {"qs1", "qs2", "qs3", "qs4"})
      EXPECT_EQ(runner.run(canned_query(q)).result_digest, g(q)) << q;
}

TEST(Query, Qs1Values)
{
   auto config = small_config();
   config.keep_rows = true;
   const auto r = QueryRunner(config).run(canned_query("qs1"));
   ASSERT_EQ(r.rows.size(), 1u);
   EXPECT_EQ(value_int(r.rows[0][0]), static_cast<Int128>(g("sum_price")));
   EXPECT_EQ(value_int(r.rows[0][1]), 6000);
}

TEST(Query, Qs3JoinCardinality)
{
   auto config = small_config(EngineKind::SE1);
   config.keep_rows = true;
   const auto r = QueryRunner(config).run(canned_query("qs3"));
   ASSERT_EQ(r.rows.size(), 1u);
   EXPECT_EQ(value_int(r.rows[0][0]), static_cast<Int128>(g("qs3_rows")));
}

TEST(Query, ScanVisitsEveryTuple)
{
   QueryRunner runner(small_config(EngineKind::SE2));
   std::int64_t first = -1, last = -1;
   const auto r = runner.run_custom("scan", [&](ExecContext& ctx, QueryResult& out) {
      out.scan = seq_scan(ctx, kLineitem, nullptr, [&](const TupleView& t) {
         if (first < 0)
            first = t.key();
         last = t.key();
      });
   });
   EXPECT_EQ(r.scan.tuples, 6000u);
   EXPECT_EQ(r.scan.pages, g("lineitem_pages"));
   EXPECT_EQ(first, static_cast<std::int64_t>(g("first_key")));
   EXPECT_EQ(last, static_cast<std::int64_t>(g("last_key")));
}

TEST(Query, PredicateSelectivity)
{
   QueryRunner runner(small_config());
   const Predicate p{{{Column::Quantity, CompareOp::Lt, 26}}};
   const auto r = runner.run_custom("filter", [&](ExecContext& ctx, QueryResult& out) {
      out.scan = seq_scan(ctx, kLineitem, &p, [](const TupleView&) {});
   });
   EXPECT_EQ(r.scan.matched, g("qty_lt_26"));
   EXPECT_NEAR(static_cast<double>(r.scan.matched) / 6000.0, 0.4917, 0.02);
}

TEST(Query, AverageInThousandths)
{
   auto config = small_config();
   config.keep_rows = true;
   QueryRunner runner(config);
   const auto plan = QueryPlan{"avg", aggregate_plan(seq_scan_plan("lineitem"),
                                                     {{AggKind::Sum, 1}, {AggKind::Count, 0}, {AggKind::Avg, 1}})};
   const auto r = runner.run(plan);
   const auto sum = value_int(r.rows[0][0]);
   const auto count = value_int(r.rows[0][1]);
   EXPECT_EQ(value_int(r.rows[0][2]), sum * 1000 / count);
}

TEST(Query, HashJoinMatchesNestedLoop)
{
   const auto& cat = shared_dataset(0.001);
   const ScaleSpec scale{0.001};
   const auto li = generate_lineitem(cat.seed, scale);
   const auto od = generate_orders(cat.seed, scale, li.back().key);
   std::vector<Row> expected;
   auto row_of = [](const Tuple& t) {
      return Row{Int128{t.key}, Int128{t.quantity}, Int128{t.price_cents}, Int128{t.date}, t.text};
   };
   for (const auto& p : li)
      for (const auto& b : od)
         if (b.key == p.key) {
            auto row = row_of(b);
            auto probe = row_of(p);
            row.insert(row.end(), probe.begin(), probe.end());
            expected.push_back(std::move(row));
         }
   ASSERT_EQ(expected.size(), g("qs3_rows"));

   auto config = small_config(EngineKind::SE2);
   config.keep_rows = true;
   const auto r = QueryRunner(config).run(
       {"join", hash_join_plan(seq_scan_plan("orders"), seq_scan_plan("lineitem"), 0, 0)});
   EXPECT_EQ(r.rows, expected);
}

TEST(Query, SortIsStableByColumn)
{
   auto config = small_config();
   config.keep_rows = true;
   const auto r = QueryRunner(config).run(canned_query("qs4"));
   ASSERT_EQ(r.rows.size(), g("qty_lt_26"));
   for (std::size_t i = 1; i < r.rows.size(); ++i) {
      ASSERT_LE(value_int(r.rows[i - 1][2]), value_int(r.rows[i][2]));
      if (value_int(r.rows[i - 1][2]) == value_int(r.rows[i][2]))
         ASSERT_LT(value_int(r.rows[i - 1][0]), value_int(r.rows[i][0])) << "ties keep scan order";
   }
}

TEST(QueryProperty, AllCellsAgree)
{
   for (auto engine : {EngineKind::Base, EngineKind::SE1, EngineKind::SE2})
      for (auto scheme : {MappingScheme::None, MappingScheme::M1, MappingScheme::M2, MappingScheme::M3}) {
         QueryRunner runner(small_config(engine, scheme));
         for (const auto& q : canned_suite()) {
            const auto r = runner.run(q);
            EXPECT_EQ(r.result_digest, g(q.label.c_str()))
                << engine_name(engine) << "/" << scheme_name(scheme) << "/" << q.label;
            EXPECT_EQ(r.device.copies, r.buffer.misses * read_miss_copies(engine));
         }
      }
}

TEST(QueryProperty, TimeBreakdownInvariants)
{
   for (auto engine : {EngineKind::Base, EngineKind::SE1, EngineKind::SE2}) {
      QueryRunner runner(small_config(engine, MappingScheme::M1));
      for (const auto& q : canned_suite()) {
         const auto t = runner.run(q).time;
         EXPECT_LE(t.operator_sum(), t.total) << q.label;
         EXPECT_LE(t.dm, t.total);
         EXPECT_GE(t.dm_fraction(), 0.0);
         EXPECT_LE(t.dm_fraction(), 1.0);
         for (auto d : t.per_operator)
            EXPECT_GE(d.count(), 0);
      }
   }
   EXPECT_EQ(TimeBreakdown{}.dm_fraction(), 0.0);
}

TEST(Query, EmptyRelation)
{
   TempDir dir;
   Catalog cat;
   cat.dir = dir.path();
   cat.scale_factor = 0.0;
   cat.seed = 1;
   for (auto name : {kLineitem, kOrders}) {
      const std::string file = std::string(name) + ".heap";
      write_heap_file(dir / file, {}, kDefaultPageSize);
      cat.relations.push_back({std::string(name), file, kDefaultPageSize, 0, 0, 1});
   }
   cat.save();
   RunConfig config;
   config.data_dir = dir.path();
   config.keep_rows = true;
   QueryRunner runner(config);
   const auto qs4 = runner.run(canned_query("qs4"));
   EXPECT_EQ(qs4.result_rows, 0u);
   EXPECT_EQ(qs4.scan.pages, 0u);
   const auto qs1 = runner.run(canned_query("qs1"));
   ASSERT_EQ(qs1.rows.size(), 1u);
   EXPECT_EQ(value_int(qs1.rows[0][1]), 0);
   EXPECT_EQ(value_int(qs1.rows[0][2]), 0);
   EXPECT_GE(qs1.time.dm_fraction(), 0.0);
   EXPECT_EQ(qs1.device.copies, 0u);
}

TEST(Query, UnknownRelation)
{
   QueryRunner runner(small_config());
   EXPECT_EQ(error_of([&] { runner.run({"x", seq_scan_plan("parts")}); }), Errc::PlanInvalid);
}

TEST(Query, DataMovementFollowsEngineAndStorage)
{
   auto median_dm = [](RunConfig config) {
      QueryRunner runner(config);
      std::vector<std::int64_t> dm;
      for (int i = 0; i < 3; ++i)
         dm.push_back(runner.run(canned_query("qs1")).time.dm.count());
      std::sort(dm.begin(), dm.end());
      return dm[1];
   };
   auto disk = small_config();
   disk.storage = StorageKind::DiskEmu;
   const auto disk_dm = median_dm(disk);
   const auto base_dm = median_dm(small_config(EngineKind::Base));
   const auto se2_dm = median_dm(small_config(EngineKind::SE2));
   EXPECT_GT(disk_dm, base_dm);
   EXPECT_GT(base_dm, se2_dm);
}

TEST(Query, RunsStartCold)
{
   QueryRunner runner(small_config(EngineKind::SE1));
   const auto a = runner.run(canned_query("qs1"));
   const auto b = runner.run(canned_query("qs1"));
   EXPECT_EQ(a.buffer.misses, g("lineitem_pages"));
   EXPECT_EQ(b.buffer.misses, a.buffer.misses);
   EXPECT_EQ(b.device.copies, a.device.copies);
}

TEST(Query, DefaultCapacity)
{
   EXPECT_EQ(default_capacity(0), 4u);
   EXPECT_EQ(default_capacity(45), 11u);
   EXPECT_EQ(default_capacity(446), 111u);
   EXPECT_EQ(default_capacity(100'000), 1024u);
}

TEST(Query, UpdateScriptIsDeterministic)
{
   const auto& cat = shared_dataset(0.001);
   const auto path = cat.path_of(cat.relation(kLineitem));
   const auto a = make_update_script(path, cat.page_size, 5, 200);
   const auto b = make_update_script(path, cat.page_size, 5, 200);
   const auto c = make_update_script(path, cat.page_size, 6, 200);
   ASSERT_EQ(a.size(), 200u);
   bool differs = false;
   for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].tid, b[i].tid);
      EXPECT_EQ(a[i].bytes, b[i].bytes);
      differs |= !(a[i].tid == c[i].tid);
      EXPECT_LT(a[i].tid.page_no, cat.relation(kLineitem).page_count);
      EXPECT_NO_THROW(TupleView{a[i].bytes});
   }
   EXPECT_TRUE(differs);
}
