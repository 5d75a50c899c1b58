#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sfem::text {

std::string trim(std::string_view s);
std::string lower(std::string_view s);

// Splits on a single separator, keeping empty fields.
std::vector<std::string> split(std::string_view s, char sep);

// Splits on runs of whitespace, dropping empty fields.
std::vector<std::string> split_ws(std::string_view s);

// True for a non-empty token with no whitespace characters.
bool is_token(std::string_view s);

// Strict numeric parsing; throws std::runtime_error naming `what`.
long long parse_int(std::string_view s, const std::string& what);
std::uint64_t parse_uint(std::string_view s, const std::string& what);
double parse_double(std::string_view s, const std::string& what);

// Shortest decimal that round-trips an IEEE double (printf %.17g).
std::string format_double(double x);

std::uint64_t fnv1a(std::string_view s);
std::uint64_t fnv1a_file(const std::string& path);  // io_error if unreadable

std::vector<std::string> read_lines(const std::string& path);  // io_error
std::string read_file(const std::string& path);                // io_error
void write_file(const std::string& path, std::string_view content);

}  // namespace sfem::text
