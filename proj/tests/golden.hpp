#pragma once

#include <json.hpp>

#include <fstream>
#include <string>

namespace nvmse::testing {

/// Values frozen from tests/oracles/reference_model.py.
inline const nlohmann::json& golden()
{
   static const nlohmann::json doc = [] {
      std::ifstream in(NVMSE_GOLDEN_JSON);
      return nlohmann::json::parse(in);
   }();
   return doc;
}

}  // namespace nvmse::testing
