#pragma once

#include "tabspec/common.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tabspec::io {

struct CsvDocument {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Minimal RFC-4180 reader: quoted fields, doubled quotes, CRLF tolerant.
CsvDocument parse_csv(std::string_view text);
CsvDocument read_csv(const std::filesystem::path& path);
std::string format_csv_row(const std::vector<std::string>& fields);

// Dense numeric matrix without header.
Matrix read_matrix_csv(const std::filesystem::path& path);
std::string matrix_to_csv(const Matrix& m, const std::vector<std::string>& header = {});

std::string read_text(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over the destination.
void write_atomic(const std::filesystem::path& path, std::string_view contents);
void write_atomic_binary(const std::filesystem::path& path, const std::vector<char>& bytes);

// Hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Round-trip exact decimal form of a double.
std::string format_double(double v);

}  // namespace tabspec::io
