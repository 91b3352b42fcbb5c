#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nvmse {

enum class Errc {
   Overflow,
   BadMagic,
   BadChecksum,
   TruncatedTuple,
   Io,
   Misaligned,
   OutOfRange,
   ReadOnly,
   MappingDisabled,
   BlockIoDisabled,
   PoolExhausted,
   DirtySlot,
   DirtyRedirected,
   NotRedirected,
   NotPinned,
   TupleNotFound,
   LengthMismatch,
   InvalidCore,
   InvalidCapacity,
   SpawnFailure,
   Stopped,
   PlanInvalid,
   Config,
};

std::string_view errc_name(Errc code) noexcept;

/// Every recoverable failure in the library is reported as an Error carrying
/// one of the Errc codes above.
class Error : public std::runtime_error {
  public:
   Error(Errc code, const std::string& what);
   Errc code() const noexcept { return code_; }

  private:
   Errc code_;
};

[[noreturn]] void raise(Errc code, const std::string& what);

}  // namespace nvmse
