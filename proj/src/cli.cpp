#include "nvmse/bench.hpp"

#include "nvmse/error.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>

namespace nvmse {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
   using std::runtime_error::runtime_error;
};

// Flag storage for one subcommand; entries exist only for keys it exposes.
struct Flags {
   std::map<std::string, std::string, std::less<>> values;
   std::map<std::string, CLI::Option*, std::less<>> options;
   std::string config_file;
};

void add_keys(CLI::App& sub, Flags& flags, std::initializer_list<KeyGroup> groups)
{
   for (const auto& key : config_keys()) {
      if (std::find(groups.begin(), groups.end(), key.group) == groups.end())
         continue;
      auto& slot = flags.values[std::string(key.key)];
      flags.options[std::string(key.key)] =
          sub.add_option("--" + std::string(key.flag), slot, std::string(key.help) + " [" + std::string(key.key) + "]");
   }
   sub.add_option("--config", flags.config_file, "key=value config file (default: $NVMSE_CONFIG)");
}

// Defaults, then the config file, then flags.
BenchConfig merge(const Flags& flags, BenchConfig cfg)
{
   std::string path = flags.config_file;
   if (path.empty())
      if (const char* env = std::getenv(std::string(kConfigEnv).c_str()))
         path = env;
   Settings file_settings;
   if (!path.empty())
      file_settings = load_config_file(path);
   Settings flag_settings;
   for (const auto& [key, opt] : flags.options)
      if (opt->count() > 0)
         flag_settings.emplace_back(key, flags.values.at(key));
   return layer_config(std::move(cfg), file_settings, flag_settings);
}

void print_warnings(const std::vector<std::string>& warnings, std::set<std::string>& seen, std::ostream& err)
{
   for (const auto& w : warnings)
      if (seen.insert(w).second)
         err << "warning: " << w << '\n';
}

void print_summary_line(const CsvRow& r, std::ostream& out)
{
   out << r.query << " rep=" << r.rep << " engine=" << r.engine << " storage=" << r.storage << " scheme=" << r.scheme
       << " wall_ms=" << std::fixed << std::setprecision(3) << static_cast<double>(r.wall_ns) / 1e6
       << " dm_fraction=" << std::setprecision(4) << r.dm_fraction << std::defaultfloat << " copies=" << r.copies
       << " misses=" << r.buf_misses << " faults=" << r.compute_minor_faults << " digest=" << r.result_digest << '\n';
}

int cmd_gen(const BenchConfig& cfg, const fs::path& out_dir, bool force, std::ostream& out, std::ostream& err)
{
   std::error_code ec;
   if (fs::exists(out_dir, ec) && !(fs::is_directory(out_dir, ec) && fs::is_empty(out_dir, ec)) && !force) {
      err << "error: " << out_dir.string() << " already exists; pass --force to overwrite\n";
      return 1;
   }
   const auto catalog = generate_dataset(cfg.seed, ScaleSpec{cfg.scale_factor}, cfg.page_size, out_dir);
   for (const auto& rel : catalog.relations)
      out << rel.name << " rows=" << rel.row_count << " pages=" << rel.page_count << '\n';
   out << "wrote " << (out_dir / kCatalogFile).string() << '\n';
   return 0;
}

fs::path csv_path(const BenchConfig& cfg, std::string_view fallback)
{
   return cfg.csv.empty() ? cfg.data_dir / fallback : cfg.csv;
}

int cmd_run(const BenchConfig& cfg, std::ostream& out, std::ostream& err)
{
   if (cfg.data_dir.empty())
      throw UsageError("--data is required");
   QueryRunner runner(cfg.run_config());
   CsvWriter csv(csv_path(cfg, "results.csv"), false);
   std::set<std::string> seen;
   print_warnings(runner.warnings(), seen, err);
   bool mismatch = false;
   for (const auto& label : cfg.queries) {
      const auto& plan = canned_query(label);
      std::optional<std::uint64_t> digest;
      for (int rep = 0; rep < cfg.reps; ++rep) {
         const auto report = runner.run(plan);
         print_warnings(report.warnings, seen, err);
         const auto row = make_csv_row(report, rep);
         csv.write(row);
         print_summary_line(row, out);
         if (digest && *digest != row.result_digest) {
            err << "error: " << label << " rep " << rep << " digest " << row.result_digest << " differs from rep 0 ("
                << *digest << ")\n";
            mismatch = true;
         }
         digest = digest.value_or(row.result_digest);
      }
   }
   return mismatch ? 3 : 0;
}

int cmd_matrix(const BenchConfig& base_cfg, const std::vector<std::string>& scheme_names, std::ostream& out,
               std::ostream& err)
{
   if (base_cfg.data_dir.empty())
      throw UsageError("--data is required");
   std::vector<MappingScheme> schemes;
   for (const auto& name : scheme_names)
      schemes.push_back(parse_scheme(name));
   if (schemes.empty())
      schemes = {MappingScheme::None, MappingScheme::M1, MappingScheme::M2, MappingScheme::M3};

   const auto path = csv_path(base_cfg, "matrix.csv");
   CsvWriter csv(path, true);
   std::vector<CsvRow> rows;
   std::set<std::string> seen;
   bool failed = false;
   for (const auto& [engine, storage] : reference_configs()) {
      for (auto scheme : schemes) {
         BenchConfig cfg = base_cfg;
         cfg.engine = engine;
         cfg.storage = storage;
         cfg.scheme = scheme;
         if (cfg.helper_cores.size() != helper_count(scheme))
            cfg.helper_cores.clear();
         const std::string cell = std::string(engine_name(engine)) + "/" + std::string(storage_name(storage)) + "/" +
                                  std::string(scheme_name(scheme));
         try {
            QueryRunner runner(cfg.run_config());
            print_warnings(runner.warnings(), seen, err);
            for (const auto& label : cfg.queries) {
               const auto& plan = canned_query(label);
               for (int rep = 0; rep < cfg.reps; ++rep) {
                  const auto report = runner.run(plan);
                  print_warnings(report.warnings, seen, err);
                  rows.push_back(make_csv_row(report, rep));
                  csv.write(rows.back());
               }
            }
            out << "cell " << cell << " done\n";
         } catch (const Error& e) {
            err << "error: cell " << cell << " failed: " << e.what() << '\n';
            failed = true;
         }
      }
   }
   out << '\n';
   const auto summary = summarize(rows);
   render_summary(summary, out);
   out << "csv: " << path.string() << '\n';
   return failed || !summary.consistent() ? 1 : 0;
}

int cmd_report(const BenchConfig& cfg, std::ostream& out)
{
   if (cfg.csv.empty())
      throw UsageError("--csv is required");
   const auto rows = read_csv(cfg.csv);
   const auto summary = summarize(rows);
   render_summary(summary, out);
   return summary.consistent() ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
   CLI::App app{"nvmse: storage-engine laboratory for memory-mapped NVM", "nvmse"};
   app.require_subcommand(1);

   auto* gen = app.add_subcommand("gen", "generate a dataset and its catalog");
   Flags gen_flags;
   add_keys(*gen, gen_flags, {KeyGroup::Dataset});
   std::string gen_out;
   bool force = false;
   gen->add_option("--out", gen_out, "output directory")->required();
   gen->add_flag("--force", force, "overwrite an existing directory");

   auto* run = app.add_subcommand("run", "run queries against one configuration, appending CSV rows");
   Flags run_flags;
   add_keys(*run, run_flags, {KeyGroup::Run, KeyGroup::Report});

   auto* matrix = app.add_subcommand("matrix", "run every reference configuration x scheme x query");
   Flags matrix_flags;
   add_keys(*matrix, matrix_flags, {KeyGroup::Run, KeyGroup::Report});
   std::vector<std::string> schemes;
   matrix->add_option("--schemes", schemes, "schemes to cover (default: none,m1,m2,m3)")->delimiter(',');

   auto* report = app.add_subcommand("report", "summarize an existing CSV file");
   Flags report_flags;
   add_keys(*report, report_flags, {KeyGroup::Report});

   try {
      app.parse(argc, argv);
   } catch (const CLI::CallForHelp&) {
      out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
      return 0;
   } catch (const CLI::ParseError& e) {
      const auto subs = app.get_subcommands();
      err << "error: " << e.what() << "\n\n" << (subs.empty() ? app.help() : subs.front()->help());
      return 2;
   }

   CLI::App* active = app.get_subcommands().front();
   const Flags& flags = active == gen ? gen_flags : active == run ? run_flags : active == matrix ? matrix_flags
                                                                                                 : report_flags;
   // The matrix covers the whole suite unless told otherwise.
   BenchConfig defaults;
   if (active == matrix)
      defaults.queries = {"qs1", "qs2", "qs3", "qs4"};
   BenchConfig cfg;
   try {
      cfg = merge(flags, std::move(defaults));
   } catch (const Error& e) {
      err << "error: " << e.what() << "\n\n" << active->help();
      return 2;
   }

   try {
      if (active == gen)
         return cmd_gen(cfg, gen_out, force, out, err);
      if (active == run)
         return cmd_run(cfg, out, err);
      if (active == matrix)
         return cmd_matrix(cfg, schemes, out, err);
      return cmd_report(cfg, out);
   } catch (const UsageError& e) {
      err << "error: " << e.what() << "\n\n" << active->help();
      return 2;
   } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return 1;
   }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
   std::vector<const char*> argv;
   argv.push_back("nvmse");
   for (const auto& a : args)
      argv.push_back(a.c_str());
   return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace nvmse
