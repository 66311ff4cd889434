#ifndef PACKTRIAGE_ERRORS_HPP
#define PACKTRIAGE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace packtriage {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// PE parsing failures.
class PeError : public Error {
public:
    enum class Code { MissingMzMagic, MissingPeSignature, Truncated };

    PeError(Code c, const std::string& msg) : Error(msg), code(c) {}
    Code code;
};

/// Dataset CSV schema / cell problems.
class CsvError : public Error {
public:
    enum class Code { SchemaMismatch, BadCell };

    CsvError(Code c, const std::string& msg) : Error(msg), code(c) {}
    Code code;
};

/// Training preconditions.
class TrainError : public Error {
public:
    enum class Code { EmptyDataset, SingleClass, EmptyNode };

    TrainError(Code c, const std::string& msg) : Error(msg), code(c) {}
    Code code;
};

/// Signature database parse failures; `line` is 1-based.
class DbError : public Error {
public:
    DbError(int line_no, const std::string& msg)
        : Error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
    int line;
};

/// Model artifact load failures.
class ArtifactError : public Error {
public:
    enum class Code { VersionMismatch, Corrupt };

    ArtifactError(Code c, const std::string& msg) : Error(msg), code(c) {}
    Code code;
};

/// Invalid synthetic PE description.
class SynthError : public Error {
public:
    explicit SynthError(const std::string& msg) : Error(msg) {}
};

} // namespace packtriage

#endif
