#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nvmse {

static_assert(std::endian::native == std::endian::little, "heap files are little-endian");

// -------------------------------------------------------------------------------------
// Hashing and deterministic randomness
// -------------------------------------------------------------------------------------
inline constexpr std::uint64_t kFnvOffsetBasis = 0xCBF29CE484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001B3ull;

/// Streaming FNV-1a 64. Used for page checksums, file digests and result digests.
class Fnv1a64 {
  public:
   explicit Fnv1a64(std::uint64_t state = kFnvOffsetBasis) : state_(state) {}
   void update(std::span<const std::byte> bytes) noexcept
   {
      for (auto b : bytes) {
         state_ ^= static_cast<std::uint8_t>(b);
         state_ *= kFnvPrime;
      }
   }
   void update(std::string_view s) noexcept { update(std::as_bytes(std::span(s.data(), s.size()))); }
   std::uint64_t value() const noexcept { return state_; }

  private:
   std::uint64_t state_;
};

std::uint64_t fnv1a64(std::span<const std::byte> bytes) noexcept;
/// Digest of a whole file's content; throws Io if it cannot be read.
std::uint64_t file_digest(const std::filesystem::path& path);

class SplitMix64 {
  public:
   explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
   std::uint64_t next() noexcept
   {
      state_ += 0x9E3779B97F4A7C15ull;
      std::uint64_t z = state_;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
      return z ^ (z >> 31);
   }

  private:
   std::uint64_t state_;
};

// -------------------------------------------------------------------------------------
// Tuples
// -------------------------------------------------------------------------------------
enum class Column : std::uint8_t { Key = 0, Quantity = 1, Price = 2, Date = 3, Text = 4 };
inline constexpr std::size_t kColumnCount = 5;

/// Fixed lineitem-like schema: key, quantity, price in cents, day ordinal, comment.
struct Tuple {
   std::int64_t key = 0;
   std::int64_t quantity = 0;
   std::int64_t price_cents = 0;
   std::int64_t date = 0;
   std::string text;

   std::size_t encoded_size() const noexcept;
   bool operator==(const Tuple&) const = default;
};

inline constexpr std::size_t kTupleFixedBytes = 32;
inline constexpr std::size_t kTupleLengthPrefix = 2;

void encode_tuple(const Tuple& tuple, std::span<std::byte> out);
Tuple decode_tuple(std::span<const std::byte> body);

/// Non-owning accessor over an encoded tuple body. Reads straight out of the page
/// bytes so the executor never has to materialize a Tuple.
class TupleView {
  public:
   explicit TupleView(std::span<const std::byte> body) : body_(body) {}
   std::int64_t key() const noexcept { return load(0); }
   std::int64_t quantity() const noexcept { return load(8); }
   std::int64_t price_cents() const noexcept { return load(16); }
   std::int64_t date() const noexcept { return load(24); }
   std::int64_t integer(Column c) const noexcept { return load(8 * static_cast<std::size_t>(c)); }
   std::string_view text() const noexcept
   {
      return {reinterpret_cast<const char*>(body_.data()) + kTupleFixedBytes, body_.size() - kTupleFixedBytes};
   }
   std::span<const std::byte> bytes() const noexcept { return body_; }
   Tuple materialize() const;

  private:
   std::int64_t load(std::size_t offset) const noexcept;
   std::span<const std::byte> body_;
};

// -------------------------------------------------------------------------------------
// Pages
// -------------------------------------------------------------------------------------
// Layout: magic[4] | checksum u64 | tuple_count u16 | free_offset u16 | payload
// payload holds (u16 length, body) records packed from offset 16; the rest is zero.
// checksum = FNV-1a 64 over bytes [16, page_size).
inline constexpr std::array<std::byte, 4> kPageMagic{std::byte{'N'}, std::byte{'V'}, std::byte{'P'}, std::byte{'G'}};
inline constexpr std::size_t kPageHeaderSize = 16;
inline constexpr std::size_t kDefaultPageSize = 8192;
inline constexpr std::size_t kMinPageSize = 512;
inline constexpr std::size_t kMaxPageSize = 32768;

struct PageHeader {
   std::uint64_t checksum = 0;
   std::uint16_t tuple_count = 0;
   std::uint16_t free_offset = 0;
};

/// Throws Misaligned unless page_size is a power of two in [512, 32768].
void validate_page_size(std::size_t page_size);

PageHeader read_page_header(std::span<const std::byte> page);
std::uint64_t compute_page_checksum(std::span<const std::byte> page) noexcept;
/// Recomputes and stores the checksum after an in-place modification.
void reseal_page(std::span<std::byte> page) noexcept;

/// Checks magic, checksum and the tuple directory; returns the header.
PageHeader verify_page(std::span<const std::byte> page);

std::vector<std::byte> encode_page(std::span<const Tuple> tuples, std::size_t page_size);
std::vector<Tuple> decode_page(std::span<const std::byte> page);

/// Calls fn(slot_index, TupleView) for every tuple on a verified page. No copies.
template <typename Fn>
void for_each_tuple(std::span<const std::byte> page, Fn&& fn)
{
   const auto header = read_page_header(page);
   std::size_t offset = kPageHeaderSize;
   for (std::uint16_t i = 0; i < header.tuple_count; ++i) {
      std::uint16_t len;
      std::memcpy(&len, page.data() + offset, sizeof(len));
      fn(i, TupleView(page.subspan(offset + kTupleLengthPrefix, len)));
      offset += kTupleLengthPrefix + len;
   }
}

/// Locates the body of tuple `slot` on a page; throws TupleNotFound.
std::span<const std::byte> tuple_body(std::span<const std::byte> page, std::uint16_t slot);
std::span<std::byte> tuple_body(std::span<std::byte> page, std::uint16_t slot);

/// Incrementally packs tuples into a page. Tuples never span pages.
class PageBuilder {
  public:
   explicit PageBuilder(std::size_t page_size);
   bool fits(const Tuple& tuple) const noexcept;
   /// Returns false (and leaves the page untouched) if the tuple does not fit.
   bool try_add(const Tuple& tuple);
   std::uint16_t tuple_count() const noexcept { return count_; }
   bool empty() const noexcept { return count_ == 0; }
   /// Seals the page and resets the builder for the next one.
   std::vector<std::byte> finish();

  private:
   std::size_t page_size_;
   std::vector<std::byte> page_;
   std::size_t used_ = kPageHeaderSize;
   std::uint16_t count_ = 0;
};

// -------------------------------------------------------------------------------------
// Dataset
// -------------------------------------------------------------------------------------
inline constexpr std::uint64_t kLineitemRowsPerScale = 6'000'000;
inline constexpr std::uint64_t kOrdersRowsPerScale = 1'500'000;
inline constexpr std::uint64_t kOrdersSeedMix = 0xD1B54A32D192ED03ull;

struct ScaleSpec {
   double scale_factor = 0.0;
   std::uint64_t lineitem_rows() const;
   std::uint64_t orders_rows() const;
};

struct RelationInfo {
   std::string name;
   std::string file;  // relative to the catalog directory
   std::size_t page_size = kDefaultPageSize;
   std::uint64_t page_count = 0;
   std::uint64_t row_count = 0;
   std::uint64_t seed = 0;
};

struct Catalog {
   std::filesystem::path dir;
   double scale_factor = 0.0;
   std::uint64_t seed = 0;
   std::size_t page_size = kDefaultPageSize;
   std::vector<RelationInfo> relations;

   const RelationInfo& relation(std::string_view name) const;
   bool has_relation(std::string_view name) const noexcept;
   std::filesystem::path path_of(const RelationInfo& rel) const { return dir / rel.file; }

   void save() const;
   static Catalog load(const std::filesystem::path& dir);
};

inline constexpr std::string_view kCatalogFile = "catalog.json";
inline constexpr std::string_view kLineitem = "lineitem";
inline constexpr std::string_view kOrders = "orders";

/// Row generators. The lineitem stream is seeded by `seed`; orders by
/// seed ^ kOrdersSeedMix, with its key range placed so half of it overlaps lineitem's.
std::vector<Tuple> generate_lineitem(std::uint64_t seed, const ScaleSpec& scale);
std::vector<Tuple> generate_orders(std::uint64_t seed, const ScaleSpec& scale, std::int64_t lineitem_last_key);

/// Writes lineitem.heap, orders.heap and catalog.json into out_dir.
Catalog generate_dataset(std::uint64_t seed, const ScaleSpec& scale, std::size_t page_size,
                         const std::filesystem::path& out_dir);

/// Packs tuples into a heap file; returns the page count.
std::uint64_t write_heap_file(const std::filesystem::path& path, std::span<const Tuple> tuples, std::size_t page_size);

}  // namespace nvmse
