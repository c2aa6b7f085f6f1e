#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parley/game.hpp"

namespace parley {

class TraceFormatError : public std::runtime_error {
public:
    TraceFormatError(const std::string& what, std::size_t byte_offset)
        : std::runtime_error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}
    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

class TraceConsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TraceLine {
    std::string kind; // MSG | EVT | RNG | GAME
    Tick tick = 0;
    std::vector<std::string> fields; // everything after the tick
    std::size_t byte_offset = 0;
    std::string raw;
};

struct ParsedTrace {
    std::vector<TraceLine> lines;
};

// Strict tab-separated parse; throws TraceFormatError with the byte offset
// of the offending record (unknown kind, bad tick, short line, missing final
// newline).
ParsedTrace parse_trace_text(std::string_view text);
ParsedTrace parse_trace_file(const std::filesystem::path& path);

struct ConversationView {
    std::string agent;
    std::string cid;
    std::string protocol; // namespace/name
    std::string last_state;
    std::size_t length = 0;
    std::string final_status = "active";

    struct Step {
        Tick tick = 0;
        std::string performative;
        std::string sender;
        std::string receiver;
        std::string content;
        std::string state_after;
        std::size_t length = 0;
    };
    std::vector<Step> steps;
};

// Rebuilds per-agent conversation views from EVT records, pairing each
// advanced event with the message that caused it (an outgoing MSG on the
// same tick, else an incoming MSG from the previous tick).
std::vector<ConversationView> reconstruct_conversations(const ParsedTrace& trace);

struct ScoreOutcome {
    bool no_account = false;
    std::int64_t capital = 0;
};

// Recomputes the final capital from GAME records alone. Verifies the
// running-balance chain in LEDGER records and throws TraceConsistencyError
// on a break (e.g. a deleted line).
ScoreOutcome recompute_score(const ParsedTrace& trace, ScoreMode mode,
                             const std::string& player = "player");

// First tick at which a conversation of the protocol ended in state `done`.
std::optional<Tick> first_completion_tick(const ParsedTrace& trace,
                                          const std::string& protocol_path);

// Strictly increasing PRICE per symbol and non-decreasing OWN value per
// property; on failure fills `error` and returns false.
bool market_monotone(const ParsedTrace& trace, std::string* error);

} // namespace parley
