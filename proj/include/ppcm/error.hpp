#pragma once

#include <stdexcept>
#include <string>

namespace ppcm {

// Error classes map onto distinct CLI exit codes (see cli.hpp).

class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class KeyMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace ppcm
