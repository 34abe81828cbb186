#include "sragmav/text.hpp"

namespace sragmav {

namespace {

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

}  // namespace

std::string_view trim(std::string_view s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && is_ascii_space(static_cast<unsigned char>(s[begin]))) {
    ++begin;
  }
  while (end > begin && is_ascii_space(static_cast<unsigned char>(s[end - 1]))) {
    --end;
  }
  return s.substr(begin, end - begin);
}

std::string collapse_whitespace(std::string_view s) {
  std::string_view t = trim(s);
  std::string out;
  out.reserve(t.size());
  bool in_run = false;
  for (char c : t) {
    if (is_ascii_space(static_cast<unsigned char>(c))) {
      in_run = true;
      continue;
    }
    if (in_run && !out.empty()) {
      out.push_back(' ');
    }
    in_run = false;
    out.push_back(c);
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (char c : s) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    unsigned char b0 = static_cast<unsigned char>(s[i]);
    int extra;
    char32_t cp;
    if (b0 < 0x80) {
      extra = 0;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      extra = 1;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      extra = 2;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      extra = 3;
      cp = b0 & 0x07;
    } else {
      out.push_back(0xDC00 + b0);
      ++i;
      continue;
    }
    if (i + extra >= n) {
      out.push_back(0xDC00 + b0);
      ++i;
      continue;
    }
    bool valid = true;
    for (int j = 1; j <= extra; ++j) {
      unsigned char bj = static_cast<unsigned char>(s[i + j]);
      if ((bj & 0xC0) != 0x80) {
        valid = false;
        break;
      }
      cp = (cp << 6) | (bj & 0x3F);
    }
    if (!valid) {
      out.push_back(0xDC00 + b0);
      ++i;
      continue;
    }
    // reject overlong encodings and surrogate/range abuse
    static constexpr char32_t kMin[4] = {0x0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      out.push_back(0xDC00 + b0);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += 1 + extra;
  }
  return out;
}

}  // namespace sragmav
