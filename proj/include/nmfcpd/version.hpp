#pragma once

namespace nmfcpd {

inline constexpr const char* kToolName = "nmfcpd";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kResultSchemaVersion = 1;

}  // namespace nmfcpd
