#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ggssm {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller broke a documented precondition (bad index, shape mismatch, ...).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error("contract violation: " + msg) {}
};

// Input values are structurally fine but semantically unusable (NaN/Inf, ...).
class InvalidInputError : public Error {
 public:
  explicit InvalidInputError(const std::string& msg) : Error("invalid input: " + msg) {}
};

// A configuration object is inconsistent (grid dims, k range, epsilon range, ...).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("invalid config: " + msg) {}
};

// The candidate graph does not span all nodes; names one node from each side.
class DisconnectedError : public Error {
 public:
  DisconnectedError(uint32_t a, uint32_t b)
      : Error("graph disconnected: no path between node " + std::to_string(a) +
              " and node " + std::to_string(b)),
        node_a(a),
        node_b(b) {}
  uint32_t node_a;
  uint32_t node_b;
};

// Brute-force oracle asked to enumerate beyond its size limit.
class OracleSizeError : public Error {
 public:
  explicit OracleSizeError(const std::string& msg) : Error("oracle size: " + msg) {}
};

// extract_min on an empty structure.
class EmptyStructureError : public Error {
 public:
  explicit EmptyStructureError(const std::string& msg) : Error("empty structure: " + msg) {}
};

// Toy training left the finite/bounded regime; carries the offending step.
class DivergedError : public Error {
 public:
  DivergedError(uint64_t step, const std::string& msg)
      : Error("training diverged at step " + std::to_string(step) + ": " + msg), step(step) {}
  uint64_t step;
};

// File and stream problems.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error("i/o error: " + msg) {}
};

// A documented invariant failed at runtime (e.g. the MST ablation saw
// diverging outputs under distinct weights).
class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& msg) : Error("invariant violation: " + msg) {}
};

}  // namespace ggssm
