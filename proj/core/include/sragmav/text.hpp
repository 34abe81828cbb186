#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sragmav {

/// Strips ASCII whitespace from both ends. UTF-8 safe: multibyte sequences
/// never contain bytes below 0x80, so they are never trimmed.
std::string_view trim(std::string_view s);

/// Trims, then squeezes every internal run of ASCII whitespace to one space.
std::string collapse_whitespace(std::string_view s);

/// FNV-1a 64-bit hash over raw bytes.
std::uint64_t fnv1a64(std::string_view s) noexcept;

/// splitmix64 finalizer; turns correlated integers into well-spread seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Decodes UTF-8 into code points. Lenient: each invalid byte becomes
/// 0xDC00 + byte, which cannot collide with any correctly decoded character.
std::vector<char32_t> decode_utf8(std::string_view s);

}  // namespace sragmav
