#pragma once

namespace sevo {

inline constexpr const char* kVersion = "0.1.0";

// Identifies the config-file dialect understood by the CLI runner; recorded
// in every run manifest so archived outputs stay interpretable.
inline constexpr const char* kConfigDialect = "sevo-ini/1";

}  // namespace sevo
