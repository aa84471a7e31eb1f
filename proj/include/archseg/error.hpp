#pragma once

#include <stdexcept>
#include <string>

namespace archseg {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input documents (ASCII grids, GeoJSON, configs).
class ParseError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Invalid arguments to a kernel or geometry routine.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

// Violations of the subprocess batch protocol.
class ProtocolError : public Error {
public:
    using Error::Error;
};

}  // namespace archseg
