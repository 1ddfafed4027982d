#pragma once

#include <stdexcept>
#include <string>

namespace fgp {

// Error taxonomy. The CLI maps data/shape/parameter/io errors to exit code 1
// and factorization/numeric/fit errors to exit code 2.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class data_error : public error {
public:
    using error::error;
};

class parameter_error : public error {
public:
    using error::error;
};

class shape_error : public error {
public:
    using error::error;
};

class factorization_error : public error {
public:
    using error::error;
};

class numeric_error : public error {
public:
    using error::error;
};

class fit_error : public error {
public:
    using error::error;
};

class io_error : public error {
public:
    using error::error;
};

}  // namespace fgp
