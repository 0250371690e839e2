#pragma once

#include <stdexcept>
#include <string>

namespace tab {

/// Malformed map or mission text. Message carries the position.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Mission/world combination that cannot be compiled (bad label, horizon
/// too small, automaton blowup, memory cap).
class CompileError : public std::runtime_error {
public:
    explicit CompileError(const std::string& msg) : std::runtime_error(msg) {}
};

/// No trajectory satisfies the mission constraints (Z = 0).
class InfeasibleMission : public std::runtime_error {
public:
    explicit InfeasibleMission(const std::string& msg) : std::runtime_error(msg) {}
};

/// A conditioned quantity was requested at a state the field assigns zero
/// mass to. Signals a caller bug, not a recoverable condition.
class ZeroSupport : public std::runtime_error {
public:
    explicit ZeroSupport(const std::string& msg) : std::runtime_error(msg) {}
};

/// Brute-force enumeration would exceed the configured path cap.
class EnumerationTooLarge : public std::runtime_error {
public:
    explicit EnumerationTooLarge(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad run/suite configuration (missing files, inconsistent settings).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace tab
