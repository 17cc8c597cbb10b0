#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace tvcp {

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t v);
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// SplitMix64 finalizer; derives independent stream seeds from (master, salt...).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
  return mix_seed(mix_seed(a, b), c);
}

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);
void append_line(const std::filesystem::path& path, std::string_view line);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Runs body(i) for i in [0, n). Work is split into contiguous chunks, one per
// worker; callers that need reproducible reductions must key on i, not on the
// executing thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  unsigned max_threads = 0);

std::int64_t unix_now();
std::string iso8601(std::int64_t unix_seconds);

}  // namespace tvcp
