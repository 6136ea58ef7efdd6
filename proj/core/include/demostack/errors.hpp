#pragma once

#include <stdexcept>
#include <string>

namespace demostack {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class DimError : public Error {
public:
    using Error::Error;
};

class MaskError : public Error {
public:
    using Error::Error;
};

class DescriptorError : public Error {
public:
    using Error::Error;
};

class LayoutError : public Error {
public:
    using Error::Error;
};

class RetargetError : public Error {
public:
    using Error::Error;
};

class NotReversibleError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class FrameTooSmallError : public Error {
public:
    using Error::Error;
};

class UndecidableError : public Error {
public:
    using Error::Error;
};

class CriticError : public Error {
public:
    using Error::Error;
};

} // namespace demostack
