// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "inferdb/ast.hpp"

namespace inferdb {

/// Parses the SQL subset:
///   SELECT (count(*) | model '.' predict '(' '*' ')' | column_list)
///   FROM table (',' table)?
///   (WHERE comparison (AND comparison)*)?
///   (GROUP BY column)?
/// Keywords are case-insensitive, identifiers are case-sensitive. Literals
/// are ints, floats, single-quoted strings (doubled-quote escaping) and
/// True/False. Syntax errors carry the 1-based token index plus line and
/// column. BEGIN/COMMIT are rejected as unsupported.
QueryAst parse_query(const std::string& text);

}  // namespace inferdb
