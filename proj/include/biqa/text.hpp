// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

// Small text helpers shared by the file-format readers.

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace biqa {

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);

// Full-string parse; throws DataError mentioning `what` otherwise.
double parse_double(std::string_view s, std::string_view what);
long long parse_int(std::string_view s, std::string_view what);

// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace biqa
