#pragma once

#include <stdexcept>
#include <string>

namespace impress {

/// Root of the library's error hierarchy.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Network failure or HTTP >= 500, surfaced after the retry budget is spent.
class TransportError : public Error {
public:
    using Error::Error;
};

/// HTTP 401/403. Never retried.
class AuthError : public Error {
public:
    using Error::Error;
};

/// Backend answered but with nothing usable (empty text, 4xx refusal).
class BackendRefusal : public Error {
public:
    using Error::Error;
};

/// Vector lengths disagree, or an embedding batch came back malformed.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Structured output still unusable after the one repair retry.
class GenerationParseError : public Error {
public:
    using Error::Error;
};

/// Preliminary SPC list empty after repair.
class EmptyQuery : public Error {
public:
    using Error::Error;
};

/// Retrieval produced no candidates at all.
class NoCandidates : public Error {
public:
    using Error::Error;
};

/// Direct search against an index with zero rows.
class EmptyIndex : public Error {
public:
    using Error::Error;
};

/// Persona distribution with bad weights or empty support.
class BadDistribution : public Error {
public:
    using Error::Error;
};

/// Simulated user leaked the scenario root cause verbatim, all regenerations failed.
class DisclosureViolation : public Error {
public:
    using Error::Error;
};

/// Filesystem or serialization failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value (bad temperature, empty model id, unknown source, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Per-query web search failure; recorded in the catalog build report.
class SearchTransportError : public Error {
public:
    using Error::Error;
};

/// Conversation payload that fails structural validation.
class InvalidConversation : public Error {
public:
    using Error::Error;
};

}  // namespace impress
