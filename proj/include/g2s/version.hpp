#pragma once

namespace g2s {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kDatasetFormatVersion = 1;
inline constexpr int kCheckpointFormatVersion = 1;

}  // namespace g2s
