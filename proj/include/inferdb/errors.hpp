// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace inferdb {

enum class ErrorKind {
  InvalidArgument,
  CapacityExceeded,
  NotFound,
  CorruptRelation,
  InvalidPlan,
  PlanError,
  ParseError,
  BindError,
  LoadError,
  IngestError,
  IoError,
  Unsupported,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::CapacityExceeded: return "capacity-error";
    case ErrorKind::NotFound: return "not-found";
    case ErrorKind::CorruptRelation: return "corrupt-relation";
    case ErrorKind::InvalidPlan: return "invalid-plan";
    case ErrorKind::PlanError: return "plan-error";
    case ErrorKind::ParseError: return "parse-error";
    case ErrorKind::BindError: return "bind-error";
    case ErrorKind::LoadError: return "load-error";
    case ErrorKind::IngestError: return "ingest-error";
    case ErrorKind::IoError: return "io-error";
    case ErrorKind::Unsupported: return "unsupported";
  }
  return "unknown";
}

class EngineError : public std::runtime_error {
 public:
  EngineError(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        message_(message) {}

  ErrorKind kind() const { return kind_; }
  /// The message without the kind prefix, for wrappers that re-raise.
  const std::string& message() const { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw EngineError(kind, message);
}

}  // namespace inferdb
