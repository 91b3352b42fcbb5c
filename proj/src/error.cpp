#include "nvmse/error.hpp"

namespace nvmse {

std::string_view errc_name(Errc code) noexcept
{
   switch (code) {
      case Errc::Overflow: return "Overflow";
      case Errc::BadMagic: return "BadMagic";
      case Errc::BadChecksum: return "BadChecksum";
      case Errc::TruncatedTuple: return "TruncatedTuple";
      case Errc::Io: return "Io";
      case Errc::Misaligned: return "Misaligned";
      case Errc::OutOfRange: return "OutOfRange";
      case Errc::ReadOnly: return "ReadOnly";
      case Errc::MappingDisabled: return "MappingDisabled";
      case Errc::BlockIoDisabled: return "BlockIoDisabled";
      case Errc::PoolExhausted: return "PoolExhausted";
      case Errc::DirtySlot: return "DirtySlot";
      case Errc::DirtyRedirected: return "DirtyRedirected";
      case Errc::NotRedirected: return "NotRedirected";
      case Errc::NotPinned: return "NotPinned";
      case Errc::TupleNotFound: return "TupleNotFound";
      case Errc::LengthMismatch: return "LengthMismatch";
      case Errc::InvalidCore: return "InvalidCore";
      case Errc::InvalidCapacity: return "InvalidCapacity";
      case Errc::SpawnFailure: return "SpawnFailure";
      case Errc::Stopped: return "Stopped";
      case Errc::PlanInvalid: return "PlanInvalid";
      case Errc::Config: return "Config";
   }
   return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code)
{
}

void raise(Errc code, const std::string& what)
{
   throw Error(code, what);
}

}  // namespace nvmse
