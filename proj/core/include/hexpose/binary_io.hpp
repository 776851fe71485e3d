#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

// Little-endian primitives shared by the score-map and library containers.
namespace hexpose::binary {

void write_u32(std::ostream& out, std::uint32_t v);
void write_i32(std::ostream& out, std::int32_t v);
void write_f32(std::ostream& out, float v);
void write_f64(std::ostream& out, double v);
void write_string(std::ostream& out, std::string_view s);
void write_magic(std::ostream& out, std::string_view magic);

std::uint32_t read_u32(std::istream& in);
std::int32_t read_i32(std::istream& in);
float read_f32(std::istream& in);
double read_f64(std::istream& in);
std::string read_string(std::istream& in, std::uint32_t max_length = 1u << 20);
/// Throws FormatError if the next four bytes differ from `magic`.
void expect_magic(std::istream& in, std::string_view magic);

}  // namespace hexpose::binary
