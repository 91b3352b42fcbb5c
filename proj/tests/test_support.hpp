#pragma once

#include "nvmse/storage_format.hpp"

#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <tuple>

namespace nvmse::testing {

/// Directory under the system temp dir, removed on destruction.
class TempDir {
  public:
   explicit TempDir(const std::string& prefix = "nvmse-test")
   {
      auto pattern = (std::filesystem::temp_directory_path() / (prefix + "-XXXXXX")).string();
      if (!mkdtemp(pattern.data()))
         throw std::runtime_error("mkdtemp failed");
      path_ = pattern;
   }
   ~TempDir()
   {
      std::error_code ec;
      std::filesystem::remove_all(path_, ec);
   }
   TempDir(const TempDir&) = delete;
   TempDir& operator=(const TempDir&) = delete;

   const std::filesystem::path& path() const noexcept { return path_; }
   std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
   std::filesystem::path path_;
};

/// Generated once per process and shared by every test that asks for the same parameters.
inline const Catalog& shared_dataset(double sf, std::uint64_t seed = 42, std::size_t page_size = kDefaultPageSize)
{
   struct Entry {
      std::unique_ptr<TempDir> dir;
      Catalog catalog;
   };
   static std::map<std::tuple<double, std::uint64_t, std::size_t>, Entry> cache;
   auto& e = cache[{sf, seed, page_size}];
   if (!e.dir) {
      e.dir = std::make_unique<TempDir>("nvmse-data");
      e.catalog = generate_dataset(seed, ScaleSpec{sf}, page_size, e.dir->path());
   }
   return e.catalog;
}

}  // namespace nvmse::testing
