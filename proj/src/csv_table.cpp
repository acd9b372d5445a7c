// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "csv_table.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>

#include <boost/algorithm/string/trim.hpp>
#include <boost/tokenizer.hpp>

#include "echoguide/error.hpp"

namespace echoguide::detail {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return out;
}

std::vector<std::string> split_line(const std::string& line) {
    using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
    Tokenizer tok(line, boost::escaped_list_separator<char>('\\', ',', '"'));
    std::vector<std::string> cells;
    for (const auto& t : tok) cells.push_back(boost::algorithm::trim_copy(t));
    return cells;
}

}  // namespace

CsvTable CsvTable::read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());

    CsvTable table;
    table.path_ = path.string();
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (boost::algorithm::trim_copy(line).empty()) continue;
        auto cells = split_line(line);
        if (!have_header) {
            for (std::size_t i = 0; i < cells.size(); ++i) table.header_[lower(cells[i])] = i;
            have_header = true;
            continue;
        }
        if (cells.size() < table.header_.size()) {
            throw ParseError(table.path_ + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(table.header_.size()) + " columns, got " +
                             std::to_string(cells.size()));
        }
        table.rows_.push_back(std::move(cells));
        table.line_numbers_.push_back(line_no);
    }
    if (!have_header) throw ParseError(table.path_ + ": empty table");
    return table;
}

bool CsvTable::has_column(std::string_view name) const {
    return header_.count(lower(name)) != 0;
}

std::size_t CsvTable::column(std::string_view name) const {
    auto it = header_.find(lower(name));
    if (it == header_.end()) throw ParseError(path_ + ": missing column " + std::string(name));
    return it->second;
}

double CsvTable::number(std::size_t row, std::size_t col) const {
    const auto& s = rows_[row][col];
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(where(row) + ": not a number: '" + s + "'");
    }
}

long CsvTable::integer(std::size_t row, std::size_t col) const {
    const auto& s = rows_[row][col];
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError(where(row) + ": not an integer: '" + s + "'");
    }
    return v;
}

std::string CsvTable::where(std::size_t row) const {
    return path_ + ":" + std::to_string(line_numbers_[row]);
}

}  // namespace echoguide::detail
