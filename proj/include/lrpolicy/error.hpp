// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace lrpolicy {

/// Domain failure: bad policy, bad input data, diverged-only results.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed policy / record / IDX document.
class ParseError : public Error {
public:
  using Error::Error;
};

} // namespace lrpolicy
