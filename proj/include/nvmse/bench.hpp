#pragma once

#include "nvmse/query.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nvmse {

// -------------------------------------------------------------------------------------
// Configuration
// -------------------------------------------------------------------------------------
struct BenchConfig {
   // dataset
   std::uint64_t seed = 42;
   double scale_factor = 0.01;
   std::size_t page_size = kDefaultPageSize;
   std::filesystem::path data_dir;

   // device
   StorageKind storage = StorageKind::NvmEmu;
   std::optional<double> disk_read_us;
   std::optional<double> disk_write_us;
   Backing backing = Backing::Ram;

   // buffer and engine
   std::optional<std::size_t> capacity_slots;
   EngineKind engine = EngineKind::Base;
   bool adhoc_prefetch = false;

   // prefetch
   MappingScheme scheme = MappingScheme::None;
   std::size_t queue_capacity = kDefaultQueueCapacity;
   std::size_t stride = kDefaultTouchStride;
   std::optional<int> compute_core;
   std::vector<int> helper_cores;

   // bench
   std::vector<std::string> queries{"qs1"};
   int reps = 3;
   std::filesystem::path csv;

   /// Throws Errc::Config on values that parse but make no sense together.
   void validate() const;
   RunConfig run_config() const;
};

enum class KeyGroup { Dataset, Run, Report };

/// One configurable setting, reachable as `key=value` in a config file and as
/// `--flag value` on the command line.
struct ConfigKey {
   std::string_view key;
   std::string_view flag;
   std::string_view help;
   KeyGroup group;
   void (*set)(BenchConfig&, std::string_view);
   std::string (*get)(const BenchConfig&);
};

std::span<const ConfigKey> config_keys();
const ConfigKey& config_key(std::string_view key);
/// Parses and stores one value; throws Errc::Config on unknown keys or bad values.
void apply_setting(BenchConfig& cfg, std::string_view key, std::string_view value);

/// key=value lines; blank lines and lines starting with '#' are ignored.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text);
std::vector<std::pair<std::string, std::string>> load_config_file(const std::filesystem::path& path);

using Settings = std::vector<std::pair<std::string, std::string>>;

/// Applies config-file settings over `defaults`, then flag settings over those,
/// and validates the result.
BenchConfig layer_config(BenchConfig defaults, const Settings& file_settings, const Settings& flag_settings);

inline constexpr std::string_view kConfigEnv = "NVMSE_CONFIG";

// -------------------------------------------------------------------------------------
// CSV
// -------------------------------------------------------------------------------------
inline constexpr std::string_view kCsvHeader =
    "query,engine,scheme,storage,rep,wall_ns,dm_ns,dm_fraction,copies,bytes_copied,buf_hits,buf_misses,"
    "prefetch_accepted,prefetch_rejected,prefetch_completed,compute_minor_faults,compute_major_faults,"
    "result_digest";

struct CsvRow {
   std::string query;
   std::string engine;
   std::string scheme;
   std::string storage;
   int rep = 0;
   std::uint64_t wall_ns = 0;
   std::uint64_t dm_ns = 0;
   double dm_fraction = 0.0;
   std::uint64_t copies = 0;
   std::uint64_t bytes_copied = 0;
   std::uint64_t buf_hits = 0;
   std::uint64_t buf_misses = 0;
   std::uint64_t prefetch_accepted = 0;
   std::uint64_t prefetch_rejected = 0;
   std::uint64_t prefetch_completed = 0;
   std::uint64_t compute_minor_faults = 0;
   std::uint64_t compute_major_faults = 0;
   std::uint64_t result_digest = 0;

   bool operator==(const CsvRow&) const = default;
};

CsvRow make_csv_row(const RunReport& report, int rep);
std::string to_csv_line(const CsvRow& row);
CsvRow parse_csv_line(std::string_view line);
/// Reads a CSV file; the header must match kCsvHeader.
std::vector<CsvRow> read_csv(const std::filesystem::path& path);

/// Appends rows to a CSV file, writing the header first when the file is new or empty.
class CsvWriter {
  public:
   CsvWriter(const std::filesystem::path& path, bool truncate);
   void write(const CsvRow& row);

  private:
   std::filesystem::path path_;
};

// -------------------------------------------------------------------------------------
// Summaries
// -------------------------------------------------------------------------------------
double median(std::vector<double> values);

/// (engine, storage, scheme) triple a matrix cell is keyed by.
struct CellKey {
   std::string engine;
   std::string storage;
   std::string scheme;
   auto operator<=>(const CellKey&) const = default;
};

struct Summary {
   std::vector<std::string> queries;
   std::vector<CellKey> cells;
   /// median wall_ns per (cell, query); nullopt when the cell has no rows for it.
   std::vector<std::vector<std::optional<double>>> median_wall;
   std::vector<std::vector<std::optional<double>>> median_dm_fraction;
   std::vector<bool> digest_consistent;  // per query
   std::optional<std::size_t> baseline;  // index of (base, nvm-emu, none)

   std::optional<double> normalized(std::size_t cell, std::size_t query) const;
   bool consistent() const;
};

Summary summarize(const std::vector<CsvRow>& rows);
void render_summary(const Summary& summary, std::ostream& out);

/// The four reference configurations as (engine, storage) pairs.
std::vector<std::pair<EngineKind, StorageKind>> reference_configs();

// -------------------------------------------------------------------------------------
// Entry point
// -------------------------------------------------------------------------------------
/// Exit codes: 0 ok, 1 execution or I/O failure, 2 usage error, 3 digest mismatch across reps.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nvmse
