#pragma once

#include <stdexcept>
#include <string>

namespace treecut {

// All library errors derive from this. The kind decides the CLI exit code:
// validation -> 2, io -> 1.
class error : public std::runtime_error {
public:
    enum class kind { validation, io };

    error(kind k, std::string message) : std::runtime_error(std::move(message)), kind_(k) {}

    kind error_kind() const noexcept { return kind_; }

private:
    kind kind_;
};

struct invalid_parameter_error : error {
    explicit invalid_parameter_error(std::string m) : error(kind::validation, std::move(m)) {}
};

struct invalid_input_error : error {
    explicit invalid_input_error(std::string m) : error(kind::validation, std::move(m)) {}
};

// Enumeration refused because the cut count exceeds the configured cap.
struct size_overflow_error : error {
    size_overflow_error(std::string m, std::string exact_count)
        : error(kind::validation, std::move(m)), count(std::move(exact_count)) {}
    std::string count;
};

struct missing_score_error : error {
    explicit missing_score_error(std::string m) : error(kind::validation, std::move(m)) {}
};

// Scorer fault re-thrown with the node it occurred at.
struct scorer_error : error {
    explicit scorer_error(std::string m) : error(kind::validation, std::move(m)) {}
};

struct generation_error : error {
    explicit generation_error(std::string m) : error(kind::validation, std::move(m)) {}
};

struct format_error : error {
    explicit format_error(std::string m) : error(kind::io, std::move(m)) {}
};

struct io_error : error {
    explicit io_error(std::string m) : error(kind::io, std::move(m)) {}
};

}  // namespace treecut
