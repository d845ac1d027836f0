#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mfc {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration: bad grid parameters, missing evaluators,
/// mismatched grids, failed coefficient probes.
class config_error : public error {
public:
    explicit config_error(const std::string& msg) : error(msg) {}
};

/// Requested grid exceeds the representable index range.
class capacity_error : public error {
public:
    explicit capacity_error(const std::string& msg) : error(msg) {}
};

/// Argument outside its mathematical domain (e.g. theta not in [0,1]).
class domain_error : public error {
public:
    explicit domain_error(const std::string& msg) : error(msg) {}
};

/// Operation called on data of the wrong dimension; the message names
/// the variant to use instead.
class dispatch_error : public error {
public:
    explicit dispatch_error(const std::string& msg) : error(msg) {}
};

/// A declared property was contradicted by a runtime probe.
class precondition_error : public error {
public:
    explicit precondition_error(const std::string& msg) : error(msg) {}
};

/// NaN/Inf appeared in a particle system; carries the offending step.
class divergence_error : public error {
public:
    divergence_error(const std::string& msg, int step)
        : error(msg + " (step " + std::to_string(step) + ")"), step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

/// Picard iteration failed to reach tolerance; carries the norm history.
class nonconvergence_error : public error {
public:
    nonconvergence_error(const std::string& msg, std::vector<double> norms)
        : error(msg), norms_(std::move(norms)) {}
    const std::vector<double>& norm_history() const { return norms_; }

private:
    std::vector<double> norms_;
};

} // namespace mfc
