#pragma once

#include <stdexcept>
#include <string>

namespace ledgercast {

// Error taxonomy shared by every module. The CLI maps these onto exit
// codes: ValidationError -> 2, DataError -> 3, NumericalError -> 4.

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace ledgercast
