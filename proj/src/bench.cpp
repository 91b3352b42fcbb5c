#include "nvmse/bench.hpp"

#include "nvmse/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace nvmse {

namespace {

std::string_view trim(std::string_view s)
{
   const auto first = s.find_first_not_of(" \t\r\n");
   if (first == std::string_view::npos)
      return {};
   const auto last = s.find_last_not_of(" \t\r\n");
   return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
   std::vector<std::string_view> parts;
   std::size_t start = 0;
   for (;;) {
      const auto pos = s.find(sep, start);
      parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
      if (pos == std::string_view::npos)
         return parts;
      start = pos + 1;
   }
}

template <typename T>
T parse_integer(std::string_view text, std::string_view what)
{
   text = trim(text);
   T value{};
   const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
   if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
      raise(Errc::Config, std::string(what) + ": '" + std::string(text) + "' is not a valid integer");
   return value;
}

double parse_double(std::string_view text, std::string_view what)
{
   text = trim(text);
   double value = 0.0;
   const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
   if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
      raise(Errc::Config, std::string(what) + ": '" + std::string(text) + "' is not a valid number");
   return value;
}

bool parse_bool(std::string_view text, std::string_view what)
{
   text = trim(text);
   if (text == "true" || text == "1" || text == "yes" || text == "on")
      return true;
   if (text == "false" || text == "0" || text == "no" || text == "off")
      return false;
   raise(Errc::Config, std::string(what) + ": '" + std::string(text) + "' is not a boolean");
}

std::string format_double(double v)
{
   std::array<char, 64> buf{};
   const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
   return std::string(buf.data(), ptr);
}

std::string join(const std::vector<std::string>& items)
{
   std::string s;
   for (const auto& item : items) {
      if (!s.empty())
         s += ',';
      s += item;
   }
   return s;
}

template <typename T>
std::string optional_string(const std::optional<T>& v)
{
   if (!v)
      return "";
   if constexpr (std::is_floating_point_v<T>)
      return format_double(*v);
   else
      return std::to_string(*v);
}

std::vector<std::string> parse_queries(std::string_view text)
{
   std::vector<std::string> out;
   for (auto part : split(text, ',')) {
      part = trim(part);
      if (part == "all") {
         for (const auto& q : canned_suite())
            out.push_back(q.label);
         continue;
      }
      bool known = false;
      for (const auto& q : canned_suite())
         known = known || q.label == part;
      if (!known)
         raise(Errc::Config, "bench.queries: unknown query '" + std::string(part) + "' (expected qs1..qs4 or all)");
      out.emplace_back(part);
   }
   if (out.empty())
      raise(Errc::Config, "bench.queries: no queries given");
   return out;
}

std::optional<double> parse_latency(std::string_view text, std::string_view what)
{
   if (trim(text).empty())
      return std::nullopt;
   const double us = parse_double(text, what);
   if (us < 0)
      raise(Errc::Config, std::string(what) + " must not be negative");
   return us;
}

constexpr ConfigKey kKeys[] = {
    {"dataset.seed", "seed", "generator seed", KeyGroup::Dataset,
     [](BenchConfig& c, std::string_view v) { c.seed = parse_integer<std::uint64_t>(v, "dataset.seed"); },
     [](const BenchConfig& c) { return std::to_string(c.seed); }},
    {"dataset.sf", "sf", "scale factor (lineitem rows = sf * 6e6)", KeyGroup::Dataset,
     [](BenchConfig& c, std::string_view v) {
        const double sf = parse_double(v, "dataset.sf");
        if (sf < 0)
           raise(Errc::Config, "dataset.sf must not be negative");
        c.scale_factor = sf;
     },
     [](const BenchConfig& c) { return format_double(c.scale_factor); }},
    {"dataset.page_size", "page-size", "page size in bytes (power of two, 512..32768)", KeyGroup::Dataset,
     [](BenchConfig& c, std::string_view v) {
        const auto size = parse_integer<std::size_t>(v, "dataset.page_size");
        try {
           validate_page_size(size);
        } catch (const Error& e) {
           raise(Errc::Config, std::string("dataset.page_size: ") + e.what());
        }
        c.page_size = size;
     },
     [](const BenchConfig& c) { return std::to_string(c.page_size); }},
    {"bench.data", "data", "dataset directory", KeyGroup::Run,
     [](BenchConfig& c, std::string_view v) { c.data_dir = std::string(trim(v)); },
     [](const BenchConfig& c) { return c.data_dir.string(); }},
    {"device.storage", "storage", "disk-emu or nvm-emu", KeyGroup::Run,
     [](BenchConfig& c, std::string_view v) { c.storage = parse_storage(trim(v)); },
     [](const BenchConfig& c) { return std::string(storage_name(c.storage)); }},
    {"device.latency.disk_read_us", "disk-read-us", "per-block read delay of disk-emu in microseconds", KeyGroup::Run,
     [](BenchConfig& c, std::string_view v) { c.disk_read_us = parse_latency(v, "device.latency.disk_read_us"); },
     [](const BenchConfig& c) { return optional_string(c.disk_read_us); }},
    {"device.latency.disk_write_us", "disk-write-us", "per-block write delay of disk-emu in microseconds",
     KeyGroup::Run,
     [](BenchConfig& c, std::string_view v) { c.disk_write_us = parse_latency(v, "device.latency.disk_write_us"); },
     [](const BenchConfig& c) { return optional_string(c.disk_write_us); }},
    {"device.backing", "backing", "ram or file", KeyGroup::Run,
     [](BenchConfig& c, std::string_view v) { c.backing = parse_backing(trim(v)); },
     [](const BenchConfig& c) { return std::string(c.backing == Backing::Ram ? "ram" : "file"); }},
    {"buffer.capacity_slots", "capacity", "buffer pool slots (default: a quarter of the dataset, 4..1024)",
     KeyGroup::Run,
     [](BenchConfig& c, std::string_view v) {
        if (trim(v).empty()) {
           c.capacity_slots.reset();
           return;
        }
        const auto slots = parse_integer<std::size_t>(v, "buffer.capacity_slots");
        if (slots == 0)
           raise(Errc::Config, "buffer.capacity_slots must be positive");
        c.capacity_slots = slots;
     },
     [](const BenchConfig& c) { return optional_string(c.capacity_slots); }},
    {"engine.kind", "engine", "base, se1 or se2", KeyGroup::Run,
     [](BenchConfig& c, std::string_view v) { c.engine = parse_engine(trim(v)); },
     [](const BenchConfig& c) { return std::string(engine_name(c.engine)); }},
    {"engine.se2_adhoc_prefetch", "adhoc-prefetch", "per-tuple cache-line prefetch in the scan", KeyGroup::Run,
     [](BenchConfig& c, std::string_view v) { c.adhoc_prefetch = parse_bool(v, "engine.se2_adhoc_prefetch"); },
     [](const BenchConfig& c) { return std::string(c.adhoc_prefetch ? "true" : "false"); }},
    {"prefetch.scheme", "prefetch", "none, m1, m2 or m3", KeyGroup::Run,
     [](BenchConfig& c, std::string_view v) { c.scheme = parse_scheme(trim(v)); },
     [](const BenchConfig& c) { return std::string(scheme_name(c.scheme)); }},
    {"prefetch.capacity", "queue-capacity", "job queue capacity (power of two)", KeyGroup::Run,
     [](BenchConfig& c, std::string_view v) {
        const auto cap = parse_integer<std::size_t>(v, "prefetch.capacity");
        if (!BoundedSpmcQueue<PrefetchJob>::valid_capacity(cap))
           raise(Errc::Config, "prefetch.capacity must be a power of two > 0");
        c.queue_capacity = cap;
     },
     [](const BenchConfig& c) { return std::to_string(c.queue_capacity); }},
    {"prefetch.stride", "stride", "helper touch stride in bytes", KeyGroup::Run,
     [](BenchConfig& c, std::string_view v) {
        const auto stride = parse_integer<std::size_t>(v, "prefetch.stride");
        if (stride == 0)
           raise(Errc::Config, "prefetch.stride must be positive");
        c.stride = stride;
     },
     [](const BenchConfig& c) { return std::to_string(c.stride); }},
    {"prefetch.compute_core", "compute-core", "cpu the computation thread is pinned to", KeyGroup::Run,
     [](BenchConfig& c, std::string_view v) {
        if (trim(v).empty())
           c.compute_core.reset();
        else
           c.compute_core = parse_integer<int>(v, "prefetch.compute_core");
     },
     [](const BenchConfig& c) { return optional_string(c.compute_core); }},
    {"prefetch.helper_cores", "helper-cores", "comma-separated helper cpus, one per helper", KeyGroup::Run,
     [](BenchConfig& c, std::string_view v) {
        c.helper_cores.clear();
        if (trim(v).empty())
           return;
        for (auto part : split(v, ','))
           c.helper_cores.push_back(parse_integer<int>(part, "prefetch.helper_cores"));
     },
     [](const BenchConfig& c) {
        std::vector<std::string> parts;
        for (int core : c.helper_cores)
           parts.push_back(std::to_string(core));
        return join(parts);
     }},
    {"bench.queries", "query", "comma-separated queries (qs1..qs4) or all", KeyGroup::Run,
     [](BenchConfig& c, std::string_view v) { c.queries = parse_queries(v); },
     [](const BenchConfig& c) { return join(c.queries); }},
    {"bench.reps", "reps", "repetitions per query (>= 1)", KeyGroup::Run,
     [](BenchConfig& c, std::string_view v) {
        const auto reps = parse_integer<int>(v, "bench.reps");
        if (reps < 1)
           raise(Errc::Config, "bench.reps must be at least 1");
        c.reps = reps;
     },
     [](const BenchConfig& c) { return std::to_string(c.reps); }},
    {"bench.csv", "csv", "CSV file to write", KeyGroup::Report,
     [](BenchConfig& c, std::string_view v) { c.csv = std::string(trim(v)); },
     [](const BenchConfig& c) { return c.csv.string(); }},
};

std::uint64_t parse_u64_field(std::string_view text, std::string_view column)
{
   return parse_integer<std::uint64_t>(text, column);
}

}  // namespace

// -------------------------------------------------------------------------------------
void BenchConfig::validate() const
{
   if (reps < 1)
      raise(Errc::Config, "bench.reps must be at least 1");
   if (queries.empty())
      raise(Errc::Config, "bench.queries: no queries given");
   if (!BoundedSpmcQueue<PrefetchJob>::valid_capacity(queue_capacity))
      raise(Errc::Config, "prefetch.capacity must be a power of two > 0");
   if (stride == 0)
      raise(Errc::Config, "prefetch.stride must be positive");
   if (!helper_cores.empty() && helper_cores.size() != helper_count(scheme))
      raise(Errc::Config, "prefetch.helper_cores lists " + std::to_string(helper_cores.size()) + " cpu(s) but " +
                              std::string(scheme_name(scheme)) + " uses " + std::to_string(helper_count(scheme)) +
                              " helper(s)");
}

BenchConfig layer_config(BenchConfig cfg, const Settings& file_settings, const Settings& flag_settings)
{
   for (const auto& [key, value] : file_settings)
      apply_setting(cfg, key, value);
   for (const auto& [key, value] : flag_settings)
      apply_setting(cfg, key, value);
   cfg.validate();
   return cfg;
}

RunConfig BenchConfig::run_config() const
{
   RunConfig rc;
   rc.data_dir = data_dir;
   rc.engine = engine;
   rc.storage = storage;
   if (storage == StorageKind::DiskEmu && (disk_read_us || disk_write_us)) {
      auto latency = LatencyProfile::disk_emu();
      auto to_ns = [](double us) { return std::chrono::nanoseconds{std::llround(us * 1000.0)}; };
      if (disk_read_us)
         latency.per_block_read = to_ns(*disk_read_us);
      if (disk_write_us)
         latency.per_block_write = to_ns(*disk_write_us);
      rc.latency = latency;
   }
   rc.backing = backing;
   rc.capacity_slots = capacity_slots;
   rc.adhoc_prefetch = adhoc_prefetch;
   rc.prefetch.scheme = scheme;
   rc.prefetch.capacity = queue_capacity;
   rc.prefetch.stride = stride;
   rc.prefetch.compute_core = compute_core;
   rc.prefetch.helper_cores = helper_cores;
   return rc;
}

std::span<const ConfigKey> config_keys()
{
   return kKeys;
}

const ConfigKey& config_key(std::string_view key)
{
   for (const auto& k : kKeys)
      if (k.key == key)
         return k;
   raise(Errc::Config, "unknown config key '" + std::string(key) + "'");
}

void apply_setting(BenchConfig& cfg, std::string_view key, std::string_view value)
{
   config_key(key).set(cfg, value);
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text)
{
   std::vector<std::pair<std::string, std::string>> entries;
   std::size_t line_no = 0;
   for (auto line : split(text, '\n')) {
      ++line_no;
      line = trim(line);
      if (line.empty() || line.front() == '#')
         continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
         raise(Errc::Config, "config line " + std::to_string(line_no) + ": expected key=value");
      const auto key = trim(line.substr(0, eq));
      config_key(key);
      entries.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
   }
   return entries;
}

std::vector<std::pair<std::string, std::string>> load_config_file(const std::filesystem::path& path)
{
   std::ifstream in(path);
   if (!in)
      raise(Errc::Io, "cannot read config file " + path.string());
   std::stringstream ss;
   ss << in.rdbuf();
   return parse_config_text(ss.str());
}

// -------------------------------------------------------------------------------------
CsvRow make_csv_row(const RunReport& report, int rep)
{
   CsvRow row;
   row.query = report.query;
   row.engine = engine_name(report.engine);
   row.scheme = scheme_name(report.scheme);
   row.storage = storage_name(report.storage);
   row.rep = rep;
   row.wall_ns = static_cast<std::uint64_t>(report.time.total.count());
   row.dm_ns = static_cast<std::uint64_t>(report.time.dm.count());
   row.dm_fraction = report.time.dm_fraction();
   row.copies = report.device.copies;
   row.bytes_copied = report.device.bytes_copied;
   row.buf_hits = report.buffer.hits;
   row.buf_misses = report.buffer.misses;
   row.prefetch_accepted = report.prefetch.enqueued;
   row.prefetch_rejected = report.prefetch.rejected;
   row.prefetch_completed = report.prefetch.completed_total();
   row.compute_minor_faults = report.faults.minor;
   row.compute_major_faults = report.faults.major;
   row.result_digest = report.result_digest;
   return row;
}

std::string to_csv_line(const CsvRow& r)
{
   for (const auto* text : {&r.query, &r.engine, &r.scheme, &r.storage})
      if (text->find_first_of(",\n\"") != std::string::npos)
         raise(Errc::Config, "CSV text field '" + *text + "' contains a separator");
   std::ostringstream os;
   os << r.query << ',' << r.engine << ',' << r.scheme << ',' << r.storage << ',' << r.rep << ',' << r.wall_ns << ','
      << r.dm_ns << ',' << format_double(r.dm_fraction) << ',' << r.copies << ',' << r.bytes_copied << ','
      << r.buf_hits << ',' << r.buf_misses << ',' << r.prefetch_accepted << ',' << r.prefetch_rejected << ','
      << r.prefetch_completed << ',' << r.compute_minor_faults << ',' << r.compute_major_faults << ','
      << r.result_digest;
   return os.str();
}

CsvRow parse_csv_line(std::string_view line)
{
   const auto f = split(trim(line), ',');
   if (f.size() != 18)
      raise(Errc::Config, "CSV row has " + std::to_string(f.size()) + " fields, expected 18");
   CsvRow r;
   r.query = f[0];
   r.engine = f[1];
   r.scheme = f[2];
   r.storage = f[3];
   r.rep = parse_integer<int>(f[4], "rep");
   r.wall_ns = parse_u64_field(f[5], "wall_ns");
   r.dm_ns = parse_u64_field(f[6], "dm_ns");
   r.dm_fraction = parse_double(f[7], "dm_fraction");
   r.copies = parse_u64_field(f[8], "copies");
   r.bytes_copied = parse_u64_field(f[9], "bytes_copied");
   r.buf_hits = parse_u64_field(f[10], "buf_hits");
   r.buf_misses = parse_u64_field(f[11], "buf_misses");
   r.prefetch_accepted = parse_u64_field(f[12], "prefetch_accepted");
   r.prefetch_rejected = parse_u64_field(f[13], "prefetch_rejected");
   r.prefetch_completed = parse_u64_field(f[14], "prefetch_completed");
   r.compute_minor_faults = parse_u64_field(f[15], "compute_minor_faults");
   r.compute_major_faults = parse_u64_field(f[16], "compute_major_faults");
   r.result_digest = parse_u64_field(f[17], "result_digest");
   return r;
}

std::vector<CsvRow> read_csv(const std::filesystem::path& path)
{
   std::ifstream in(path);
   if (!in)
      raise(Errc::Io, "cannot read " + path.string());
   std::string line;
   if (!std::getline(in, line) || trim(line) != kCsvHeader)
      raise(Errc::Config, path.string() + ": missing or unexpected CSV header");
   std::vector<CsvRow> rows;
   while (std::getline(in, line))
      if (!trim(line).empty())
         rows.push_back(parse_csv_line(line));
   return rows;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, bool truncate) : path_(path)
{
   std::error_code ec;
   const bool empty = truncate || !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
   std::ofstream out(path, truncate ? std::ios::trunc : std::ios::app);
   if (!out)
      raise(Errc::Io, "cannot write " + path.string());
   if (empty)
      out << kCsvHeader << '\n';
}

void CsvWriter::write(const CsvRow& row)
{
   std::ofstream out(path_, std::ios::app);
   out << to_csv_line(row) << '\n';
   if (!out)
      raise(Errc::Io, "cannot write " + path_.string());
}

// -------------------------------------------------------------------------------------
double median(std::vector<double> values)
{
   if (values.empty())
      raise(Errc::Config, "median of no values");
   std::sort(values.begin(), values.end());
   const auto n = values.size();
   return n % 2 == 1 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

std::optional<double> Summary::normalized(std::size_t cell, std::size_t query) const
{
   if (!baseline)
      return std::nullopt;
   const auto& value = median_wall[cell][query];
   const auto& base = median_wall[*baseline][query];
   if (!value || !base || *base <= 0)
      return std::nullopt;
   return *value / *base;
}

bool Summary::consistent() const
{
   return std::all_of(digest_consistent.begin(), digest_consistent.end(), [](bool b) { return b; });
}

Summary summarize(const std::vector<CsvRow>& rows)
{
   Summary s;
   std::map<std::pair<std::size_t, std::size_t>, std::pair<std::vector<double>, std::vector<double>>> samples;
   std::vector<std::optional<std::uint64_t>> digests;
   auto index_of = [](auto& list, const auto& item) {
      const auto it = std::find(list.begin(), list.end(), item);
      if (it != list.end())
         return static_cast<std::size_t>(it - list.begin());
      list.push_back(item);
      return list.size() - 1;
   };
   for (const auto& r : rows) {
      const auto q = index_of(s.queries, r.query);
      const auto c = index_of(s.cells, CellKey{r.engine, r.storage, r.scheme});
      auto& [wall, dmf] = samples[{c, q}];
      wall.push_back(static_cast<double>(r.wall_ns));
      dmf.push_back(r.dm_fraction);
      digests.resize(s.queries.size());
      s.digest_consistent.resize(s.queries.size(), true);
      if (!digests[q])
         digests[q] = r.result_digest;
      else if (*digests[q] != r.result_digest)
         s.digest_consistent[q] = false;
   }
   s.median_wall.assign(s.cells.size(), std::vector<std::optional<double>>(s.queries.size()));
   s.median_dm_fraction = s.median_wall;
   for (const auto& [key, values] : samples) {
      s.median_wall[key.first][key.second] = median(values.first);
      s.median_dm_fraction[key.first][key.second] = median(values.second);
   }
   const CellKey anchor{"base", std::string(storage_name(StorageKind::NvmEmu)), "none"};
   if (const auto it = std::find(s.cells.begin(), s.cells.end(), anchor); it != s.cells.end())
      s.baseline = static_cast<std::size_t>(it - s.cells.begin());
   return s;
}

void render_summary(const Summary& s, std::ostream& out)
{
   auto header = [&](std::string_view title) {
      out << title << '\n' << std::left << std::setw(8) << "engine" << std::setw(10) << "storage" << std::setw(8)
          << "scheme";
      for (const auto& q : s.queries)
         out << std::right << std::setw(10) << q << std::left;
      out << '\n';
   };
   auto table = [&](std::string_view title, auto&& value) {
      header(title);
      for (std::size_t c = 0; c < s.cells.size(); ++c) {
         out << std::left << std::setw(8) << s.cells[c].engine << std::setw(10) << s.cells[c].storage << std::setw(8)
             << s.cells[c].scheme << std::right;
         for (std::size_t q = 0; q < s.queries.size(); ++q) {
            const std::optional<double> v = value(c, q);
            std::ostringstream cell;
            if (v)
               cell << std::fixed << std::setprecision(3) << *v;
            else
               cell << "n/a";
            out << std::setw(10) << cell.str();
         }
         out << std::left << '\n';
      }
   };
   table("median wall time, normalized to base/nvm-emu/none",
         [&](std::size_t c, std::size_t q) { return s.normalized(c, q); });
   out << '\n';
   table("median dm fraction", [&](std::size_t c, std::size_t q) { return s.median_dm_fraction[c][q]; });
   out << '\n';
   for (std::size_t q = 0; q < s.queries.size(); ++q)
      out << "digest " << s.queries[q] << ": " << (s.digest_consistent[q] ? "consistent" : "MISMATCH") << '\n';
   if (!s.baseline)
      out << "note: no base/nvm-emu/none cell, normalized values unavailable\n";
}

std::vector<std::pair<EngineKind, StorageKind>> reference_configs()
{
   return {{EngineKind::Base, StorageKind::DiskEmu},
           {EngineKind::Base, StorageKind::NvmEmu},
           {EngineKind::SE1, StorageKind::NvmEmu},
           {EngineKind::SE2, StorageKind::NvmEmu}};
}

}  // namespace nvmse
