#pragma once

#include <stdexcept>
#include <string>

namespace qdtk {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated precondition on a caller-supplied value.
class InputError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent file content.
class DataFormatError : public Error {
public:
    DataFormatError(const std::string& what, std::string file = {}, std::string field = {})
        : Error(compose(what, file, field)), file_(std::move(file)), field_(std::move(field)) {}

    const std::string& file() const noexcept { return file_; }
    const std::string& field() const noexcept { return field_; }

private:
    static std::string compose(const std::string& what, const std::string& file,
                               const std::string& field) {
        std::string msg;
        if (!file.empty()) msg += file + ": ";
        if (!field.empty()) msg += "field '" + field + "': ";
        return msg + what;
    }

    std::string file_;
    std::string field_;
};

/// A fit that did not reach a usable optimum.
class FitError : public Error {
public:
    using Error::Error;
};

}  // namespace qdtk
