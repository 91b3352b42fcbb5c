#include "nvmse/storage_format.hpp"

#include "nvmse/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace nvmse {

namespace {

constexpr std::string_view kAlphabet = "abcdefghijklmnopqrstuvwxyz ";

template <typename T>
void store(std::span<std::byte> out, std::size_t offset, T value) noexcept
{
   std::memcpy(out.data() + offset, &value, sizeof(T));
}

template <typename T>
T load(std::span<const std::byte> in, std::size_t offset) noexcept
{
   T value;
   std::memcpy(&value, in.data() + offset, sizeof(T));
   return value;
}

Tuple generate_payload(SplitMix64& rng, std::int64_t key)
{
   Tuple t;
   t.key = key;
   t.quantity = static_cast<std::int64_t>(1 + rng.next() % 50);
   t.price_cents = static_cast<std::int64_t>(100 + rng.next() % 10'000'000);
   t.date = static_cast<std::int64_t>(8035 + rng.next() % 2557);  // 1992-01-01 .. 1998-12-31
   const auto len = 10 + rng.next() % 34;
   t.text.resize(len);
   for (auto& c : t.text)
      c = kAlphabet[rng.next() % kAlphabet.size()];
   return t;
}

std::uint64_t scaled_rows(double scale_factor, std::uint64_t per_scale)
{
   if (!(scale_factor >= 0.0) || !std::isfinite(scale_factor))
      raise(Errc::Config, "scale factor must be a finite value >= 0");
   return static_cast<std::uint64_t>(std::floor(scale_factor * static_cast<double>(per_scale) + 0.5));
}

}  // namespace

// -------------------------------------------------------------------------------------
std::uint64_t fnv1a64(std::span<const std::byte> bytes) noexcept
{
   Fnv1a64 h;
   h.update(bytes);
   return h.value();
}

std::uint64_t file_digest(const std::filesystem::path& path)
{
   std::ifstream in(path, std::ios::binary);
   if (!in)
      raise(Errc::Io, "cannot open " + path.string());
   Fnv1a64 h;
   std::vector<char> buf(1 << 16);
   while (in) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      h.update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
   }
   if (in.bad())
      raise(Errc::Io, "read failed on " + path.string());
   return h.value();
}

// -------------------------------------------------------------------------------------
std::size_t Tuple::encoded_size() const noexcept
{
   return kTupleFixedBytes + text.size();
}

void encode_tuple(const Tuple& tuple, std::span<std::byte> out)
{
   if (out.size() != tuple.encoded_size())
      raise(Errc::LengthMismatch, "tuple buffer has wrong size");
   store(out, 0, tuple.key);
   store(out, 8, tuple.quantity);
   store(out, 16, tuple.price_cents);
   store(out, 24, tuple.date);
   std::memcpy(out.data() + kTupleFixedBytes, tuple.text.data(), tuple.text.size());
}

Tuple decode_tuple(std::span<const std::byte> body)
{
   if (body.size() < kTupleFixedBytes)
      raise(Errc::TruncatedTuple, "tuple body shorter than fixed columns");
   return TupleView(body).materialize();
}

Tuple TupleView::materialize() const
{
   return Tuple{key(), quantity(), price_cents(), date(), std::string(text())};
}

std::int64_t TupleView::load(std::size_t offset) const noexcept
{
   return nvmse::load<std::int64_t>(body_, offset);
}

// -------------------------------------------------------------------------------------
void validate_page_size(std::size_t page_size)
{
   if (page_size < kMinPageSize || page_size > kMaxPageSize || !std::has_single_bit(page_size))
      raise(Errc::Misaligned, "page size must be a power of two in [512, 32768], got " + std::to_string(page_size));
}

PageHeader read_page_header(std::span<const std::byte> page)
{
   if (page.size() < kPageHeaderSize)
      raise(Errc::TruncatedTuple, "page shorter than its header");
   return PageHeader{load<std::uint64_t>(page, 4), load<std::uint16_t>(page, 12), load<std::uint16_t>(page, 14)};
}

std::uint64_t compute_page_checksum(std::span<const std::byte> page) noexcept
{
   return fnv1a64(page.subspan(kPageHeaderSize));
}

void reseal_page(std::span<std::byte> page) noexcept
{
   store(page, 4, compute_page_checksum(page));
}

PageHeader verify_page(std::span<const std::byte> page)
{
   validate_page_size(page.size());
   if ( !std::equal(kPageMagic.begin(), kPageMagic.end(), page.begin()))
      raise(Errc::BadMagic, "page magic mismatch");
   const auto header = read_page_header(page);
   if (compute_page_checksum(page) != header.checksum)
      raise(Errc::BadChecksum, "page checksum mismatch");
   if (header.free_offset < kPageHeaderSize || header.free_offset > page.size())
      raise(Errc::TruncatedTuple, "free offset outside page");
   std::size_t offset = kPageHeaderSize;
   for (std::uint16_t i = 0; i < header.tuple_count; ++i) {
      if (offset + kTupleLengthPrefix > header.free_offset)
         raise(Errc::TruncatedTuple, "tuple directory runs past free offset");
      const auto len = load<std::uint16_t>(page, offset);
      if (len < kTupleFixedBytes || offset + kTupleLengthPrefix + len > header.free_offset)
         raise(Errc::TruncatedTuple, "tuple " + std::to_string(i) + " is truncated");
      offset += kTupleLengthPrefix + len;
   }
   if (offset != header.free_offset)
      raise(Errc::TruncatedTuple, "free offset disagrees with tuple directory");
   return header;
}

std::vector<std::byte> encode_page(std::span<const Tuple> tuples, std::size_t page_size)
{
   PageBuilder builder(page_size);
   for (const auto& t : tuples) {
      if (!builder.try_add(t))
         raise(Errc::Overflow, "tuples do not fit into a " + std::to_string(page_size) + "-byte page");
   }
   return builder.finish();
}

std::vector<Tuple> decode_page(std::span<const std::byte> page)
{
   const auto header = verify_page(page);
   std::vector<Tuple> out;
   out.reserve(header.tuple_count);
   for_each_tuple(page, [&](std::uint16_t, TupleView view) { out.push_back(view.materialize()); });
   return out;
}

std::span<const std::byte> tuple_body(std::span<const std::byte> page, std::uint16_t slot)
{
   const auto header = read_page_header(page);
   if (slot >= header.tuple_count)
      raise(Errc::TupleNotFound, "slot " + std::to_string(slot) + " beyond tuple count " +
                                     std::to_string(header.tuple_count));
   std::size_t offset = kPageHeaderSize;
   for (std::uint16_t i = 0; i < slot; ++i)
      offset += kTupleLengthPrefix + load<std::uint16_t>(page, offset);
   const auto len = load<std::uint16_t>(page, offset);
   if (offset + kTupleLengthPrefix + len > page.size())
      raise(Errc::TruncatedTuple, "tuple " + std::to_string(slot) + " runs past the page");
   return page.subspan(offset + kTupleLengthPrefix, len);
}

std::span<std::byte> tuple_body(std::span<std::byte> page, std::uint16_t slot)
{
   const auto body = tuple_body(std::span<const std::byte>(page), slot);
   return page.subspan(static_cast<std::size_t>(body.data() - page.data()), body.size());
}

// -------------------------------------------------------------------------------------
PageBuilder::PageBuilder(std::size_t page_size) : page_size_(page_size), page_(page_size)
{
   validate_page_size(page_size);
}

bool PageBuilder::fits(const Tuple& tuple) const noexcept
{
   return used_ + kTupleLengthPrefix + tuple.encoded_size() <= page_size_;
}

bool PageBuilder::try_add(const Tuple& tuple)
{
   if (!fits(tuple))
      return false;
   const auto len = static_cast<std::uint16_t>(tuple.encoded_size());
   store(std::span(page_), used_, len);
   encode_tuple(tuple, std::span(page_).subspan(used_ + kTupleLengthPrefix, len));
   used_ += kTupleLengthPrefix + len;
   ++count_;
   return true;
}

std::vector<std::byte> PageBuilder::finish()
{
   std::span page(page_);
   std::copy(kPageMagic.begin(), kPageMagic.end(), page.begin());
   store(page, 12, count_);
   store(page, 14, static_cast<std::uint16_t>(used_));
   reseal_page(page);
   auto out = std::move(page_);
   page_.assign(page_size_, std::byte{0});
   used_ = kPageHeaderSize;
   count_ = 0;
   return out;
}

// -------------------------------------------------------------------------------------
std::uint64_t ScaleSpec::lineitem_rows() const
{
   return scaled_rows(scale_factor, kLineitemRowsPerScale);
}

std::uint64_t ScaleSpec::orders_rows() const
{
   return scaled_rows(scale_factor, kOrdersRowsPerScale);
}

std::vector<Tuple> generate_lineitem(std::uint64_t seed, const ScaleSpec& scale)
{
   SplitMix64 rng(seed);
   const auto rows = scale.lineitem_rows();
   std::vector<Tuple> out;
   out.reserve(rows);
   std::int64_t key = 0;
   for (std::uint64_t i = 0; i < rows; ++i) {
      key += static_cast<std::int64_t>(1 + rng.next() % 3);
      out.push_back(generate_payload(rng, key));
   }
   return out;
}

std::vector<Tuple> generate_orders(std::uint64_t seed, const ScaleSpec& scale, std::int64_t lineitem_last_key)
{
   SplitMix64 rng(seed ^ kOrdersSeedMix);
   const auto rows = scale.orders_rows();
   std::vector<std::int64_t> gaps(rows);
   std::int64_t span = 0;
   for (auto& g : gaps) {
      g = static_cast<std::int64_t>(1 + rng.next() % 3);
      span += g;
   }
   std::int64_t key = std::max<std::int64_t>(0, lineitem_last_key - span / 2);
   std::vector<Tuple> out;
   out.reserve(rows);
   for (auto g : gaps) {
      key += g;
      out.push_back(generate_payload(rng, key));
   }
   return out;
}

std::uint64_t write_heap_file(const std::filesystem::path& path, std::span<const Tuple> tuples, std::size_t page_size)
{
   std::ofstream out(path, std::ios::binary | std::ios::trunc);
   if (!out)
      raise(Errc::Io, "cannot create " + path.string());
   PageBuilder builder(page_size);
   std::uint64_t pages = 0;
   auto emit = [&] {
      const auto page = builder.finish();
      out.write(reinterpret_cast<const char*>(page.data()), static_cast<std::streamsize>(page.size()));
      ++pages;
   };
   for (const auto& t : tuples) {
      if (builder.try_add(t))
         continue;
      if (builder.empty())
         raise(Errc::Overflow, "tuple larger than a page");
      emit();
      builder.try_add(t);
   }
   if (!builder.empty())
      emit();
   out.flush();
   if (!out)
      raise(Errc::Io, "write failed on " + path.string());
   return pages;
}

Catalog generate_dataset(std::uint64_t seed, const ScaleSpec& scale, std::size_t page_size,
                         const std::filesystem::path& out_dir)
{
   validate_page_size(page_size);
   std::error_code ec;
   std::filesystem::create_directories(out_dir, ec);
   if (ec)
      raise(Errc::Io, "cannot create " + out_dir.string() + ": " + ec.message());

   Catalog catalog;
   catalog.dir = out_dir;
   catalog.scale_factor = scale.scale_factor;
   catalog.seed = seed;
   catalog.page_size = page_size;

   const auto lineitem = generate_lineitem(seed, scale);
   const auto orders = generate_orders(seed, scale, lineitem.empty() ? 0 : lineitem.back().key);

   auto add = [&](std::string_view name, std::span<const Tuple> rows, std::uint64_t rel_seed) {
      RelationInfo rel;
      rel.name = name;
      rel.file = std::string(name) + ".heap";
      rel.page_size = page_size;
      rel.row_count = rows.size();
      rel.seed = rel_seed;
      rel.page_count = write_heap_file(out_dir / rel.file, rows, page_size);
      catalog.relations.push_back(std::move(rel));
   };
   add(kLineitem, lineitem, seed);
   add(kOrders, orders, seed ^ kOrdersSeedMix);
   catalog.save();
   return catalog;
}

// -------------------------------------------------------------------------------------
const RelationInfo& Catalog::relation(std::string_view name) const
{
   for (const auto& r : relations)
      if (r.name == name)
         return r;
   raise(Errc::PlanInvalid, "unknown relation '" + std::string(name) + "'");
}

bool Catalog::has_relation(std::string_view name) const noexcept
{
   for (const auto& r : relations)
      if (r.name == name)
         return true;
   return false;
}

void Catalog::save() const
{
   nlohmann::json doc;
   doc["scale_factor"] = scale_factor;
   doc["seed"] = seed;
   doc["page_size"] = page_size;
   doc["relations"] = nlohmann::json::array();
   for (const auto& r : relations) {
      doc["relations"].push_back({{"name", r.name},
                                  {"file", r.file},
                                  {"page_size", r.page_size},
                                  {"page_count", r.page_count},
                                  {"row_count", r.row_count},
                                  {"seed", r.seed}});
   }
   std::ofstream out(dir / kCatalogFile, std::ios::trunc);
   if (!out)
      raise(Errc::Io, "cannot write catalog in " + dir.string());
   out << doc.dump(2) << '\n';
   if (!out)
      raise(Errc::Io, "catalog write failed in " + dir.string());
}

Catalog Catalog::load(const std::filesystem::path& dir)
{
   std::ifstream in(dir / kCatalogFile);
   if (!in)
      raise(Errc::Io, "no catalog in " + dir.string());
   Catalog c;
   c.dir = dir;
   try {
      const auto doc = nlohmann::json::parse(in);
      c.scale_factor = doc.at("scale_factor").get<double>();
      c.seed = doc.at("seed").get<std::uint64_t>();
      c.page_size = doc.at("page_size").get<std::size_t>();
      for (const auto& r : doc.at("relations")) {
         RelationInfo rel;
         rel.name = r.at("name").get<std::string>();
         rel.file = r.at("file").get<std::string>();
         rel.page_size = r.at("page_size").get<std::size_t>();
         rel.page_count = r.at("page_count").get<std::uint64_t>();
         rel.row_count = r.at("row_count").get<std::uint64_t>();
         rel.seed = r.at("seed").get<std::uint64_t>();
         c.relations.push_back(std::move(rel));
      }
   } catch (const nlohmann::json::exception& e) {
      raise(Errc::Io, "malformed catalog in " + dir.string() + ": " + e.what());
   }
   return c;
}

}  // namespace nvmse
