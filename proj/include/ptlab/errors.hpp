#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ptlab {

// Invalid or inconsistent experiment configuration. CLI exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A pipeline stage failed. CLI exit code 3.
struct StageError : std::runtime_error {
    StageError(std::string stage_name, const std::string& msg)
        : std::runtime_error(stage_name + ": " + msg), stage(std::move(stage_name)) {}
    std::string stage;
};

// Training produced a non-finite loss or parameter. CLI exit code 4.
struct DivergenceError : std::runtime_error {
    DivergenceError(int epoch_, int step_, const std::string& msg)
        : std::runtime_error(msg), epoch(epoch_), step(step_) {}
    int epoch;
    int step;
};

// Non-finite values encountered outside a training loop (evaluation,
// isolation inputs). CLI exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ptlab
