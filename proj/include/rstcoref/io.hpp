#pragma once

#include <filesystem>
#include <string>

namespace rstcoref {

inline constexpr const char* kVersion = "0.1.0";

/// Writes through `<path>.tmp` and renames over `path`.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace rstcoref
