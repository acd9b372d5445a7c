// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace echoguide::detail {

/// Header-indexed CSV reader. Column lookup is case-insensitive.
class CsvTable {
public:
    static CsvTable read(const std::filesystem::path& path);

    std::size_t rows() const { return rows_.size(); }
    std::size_t column(std::string_view name) const;  // throws ParseError when missing
    bool has_column(std::string_view name) const;

    const std::string& cell(std::size_t row, std::size_t col) const { return rows_[row][col]; }
    double number(std::size_t row, std::size_t col) const;
    long integer(std::size_t row, std::size_t col) const;

    /// "file:line" for error messages (1-based, header is line 1).
    std::string where(std::size_t row) const;

private:
    std::string path_;
    std::unordered_map<std::string, std::size_t> header_;
    std::vector<std::vector<std::string>> rows_;
    std::vector<std::size_t> line_numbers_;
};

}  // namespace echoguide::detail
