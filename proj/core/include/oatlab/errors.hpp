#pragma once

#include <stdexcept>
#include <string>

namespace oatlab {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or layer dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Numerically invalid input, e.g. division by a near-zero tensor.
class DomainError : public Error {
public:
    using Error::Error;
};

/// An API precondition was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// A batch-wise reduction was asked to reduce over zero rows.
class EmptyBatchError : public ContractError {
public:
    using ContractError::ContractError;
};

/// Unparseable or internally inconsistent input file.
class FormatError : public Error {
public:
    using Error::Error;
};

} // namespace oatlab
