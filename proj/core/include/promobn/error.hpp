#pragma once

#include <stdexcept>
#include <string>

namespace promobn {

// Base of every error raised by the engine. Callers that only care about
// "the input was bad" can catch this one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The network violates a structural or numeric invariant.
class ModelError : public Error {
public:
    using Error::Error;
};

// Caller-supplied arguments or evidence are malformed.
class InputError : public Error {
public:
    using Error::Error;
};

// A numeric argument lies outside the domain of the operation.
class DomainError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

// The operation needs a network shape it cannot handle (e.g. selectors not
// determined by a single driver state).
class UnsupportedShapeError : public Error {
public:
    using Error::Error;
};

// Evidence has zero probability under the model.
class InconsistentEvidenceError : public Error {
public:
    using Error::Error;
};

// Every hypothesis assigns zero density to the observed value.
class UndefinedPosteriorError : public Error {
public:
    using Error::Error;
};

}  // namespace promobn
