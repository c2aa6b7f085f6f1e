#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "parley/term.hpp"

namespace parley {

struct ProtocolId {
    std::string ns;
    std::string name;
    std::string version;

    // "trading/open@1.0" — used in event traces (tab-free).
    std::string str() const { return ns + "/" + name + "@" + version; }
    // "trading/open"
    std::string path() const { return ns + "/" + name; }

    auto operator<=>(const ProtocolId&) const = default;
};

enum class StateKind { Initial, Normal, Terminal };

const char* to_string(StateKind kind);

struct StateDecl {
    std::string name;
    StateKind kind;
    bool operator==(const StateDecl&) const = default;
};

// One message-labelled FSM edge. Sender/receiver are participant
// expressions: either a variable or a constant agent name.
struct Transition {
    std::string from;
    std::string to;
    std::string performative;
    Term sender;
    Term receiver;
    Term content; // pattern; may contain variables

    bool operator==(const Transition&) const = default;
};

struct ProtocolDescriptor {
    ProtocolId id;
    std::vector<StateDecl> states;        // declaration order
    std::vector<Transition> transitions;  // declaration order
    std::optional<std::int64_t> timeout;  // ticks; absent = engine default

    const StateDecl* find_state(std::string_view name) const;
    // First declared initial state; throws if none (validate first).
    const std::string& initial_state() const;
    bool is_terminal(std::string_view name) const;

    bool operator==(const ProtocolDescriptor&) const = default;
};

enum class DiagnosticCode {
    UnreachableState,
    TerminalOutgoing,
    NoInitial,
    MultipleInitial,
    NoTerminal,
    DanglingEndpoint,
};

const char* to_string(DiagnosticCode code);

struct Diagnostic {
    DiagnosticCode code;
    std::string element;

    std::string str() const { return std::string(to_string(code)) + "(" + element + ")"; }
    auto operator<=>(const Diagnostic&) const = default;
};

class ProtocolParseError : public std::runtime_error {
public:
    ProtocolParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class ProtocolValidationError : public std::runtime_error {
public:
    ProtocolValidationError(const std::string& what, std::vector<Diagnostic> diagnostics)
        : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;
};

// Structural parse of the protocol DSL. Throws ProtocolParseError on syntax
// errors, duplicate state declarations or a duplicate/missing header; does
// not run FSM validation.
ProtocolDescriptor parse_protocol_lenient(std::string_view source);

// parse_protocol_lenient followed by validate_protocol; throws
// ProtocolValidationError when diagnostics are non-empty.
ProtocolDescriptor parse_protocol(std::string_view source);

// Pure static FSM checks. Empty result iff all descriptor invariants hold.
// Output is sorted by (code, element) and deduplicated, so it is insensitive
// to declaration order.
std::vector<Diagnostic> validate_protocol(const ProtocolDescriptor& p);

// Transitions leaving the initial state, in declaration order.
std::vector<Transition> initiating_transitions(const ProtocolDescriptor& p);

// Canonical DSL text: header, optional timeout, states (initial first, then
// declaration order), transitions in declaration order, content terms in
// canonical form. parse_protocol(serialize_protocol(p)) == canonical(p).
std::string serialize_protocol(const ProtocolDescriptor& p);

} // namespace parley
