// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rforge {

// Base of every error the library throws. Callers that only care about
// "something failed" catch this; the subclasses carry the category.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Incompatible or invalid tensor geometry.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A precondition on an argument was violated (bad probability, epsilon, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

// NaN / Inf encountered where finite values are required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Autograd met an op with no registered backward rule.
class UnsupportedOpError : public Error {
public:
    using Error::Error;
};

// Invalid residual block or model wiring.
class SpecError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// A file exists but its layout is wrong (size, magic, version, truncation).
class FormatError : public Error {
public:
    using Error::Error;
};

// A CIFAR record carries an out-of-range label byte.
class CorruptRecordError : public FormatError {
public:
    CorruptRecordError(const std::string& file, std::size_t record_index, int label)
        : FormatError(file + ": record " + std::to_string(record_index) + " has label byte " +
                      std::to_string(label) + " (> 9)"),
          record_index_(record_index) {}

    std::size_t record_index() const noexcept { return record_index_; }

private:
    std::size_t record_index_;
};

// Training produced a non-finite loss.
class DivergedError : public NumericError {
public:
    using NumericError::NumericError;
};

// Train-mode batch norm asked to normalize fewer than two values per channel.
class DegenerateBatchError : public ContractError {
public:
    using ContractError::ContractError;
};

}  // namespace rforge
