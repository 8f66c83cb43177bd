#pragma once

#include <stdexcept>
#include <string>

namespace fairshare {

// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

// No active user shares left to divide the CPU among.
class EmptyPoolError : public Error {
public:
    EmptyPoolError() : Error("empty pool: no active users") {}
};

class UnknownUserError : public Error {
public:
    explicit UnknownUserError(const std::string& user)
        : Error("unknown user '" + user + "'"), user_(user) {}
    const std::string& user() const noexcept { return user_; }

private:
    std::string user_;
};

class SolverError : public Error {
public:
    using Error::Error;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(int line, int column, const std::string& msg)
        : Error("line " + std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
          line_(line), column_(column) {}
    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

}  // namespace fairshare
