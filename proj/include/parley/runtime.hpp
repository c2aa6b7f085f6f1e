#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "parley/conversation.hpp"

namespace parley {

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex16(std::uint64_t value);

struct TraceRecord {
    enum class Kind { Msg, Evt, Rng, Game };

    Tick tick;
    Kind kind;
    std::string line; // complete record text, no trailing newline
};

const char* to_string(TraceRecord::Kind kind);

/// Append-only, totally ordered run record. Serializes to LF-terminated
/// tab-separated lines; the 64-bit FNV-1a hash of those exact bytes is the
/// trace hash used for golden comparisons.
class TraceLog {
public:
    void append(Tick tick, TraceRecord::Kind kind, std::string line);

    const std::vector<TraceRecord>& records() const { return records_; }
    std::string serialize() const;
    std::string hash() const { return hex16(fnv1a64(serialize())); }
    void write_file(const std::filesystem::path& path) const;

private:
    std::vector<TraceRecord> records_;
};

struct RngDraw {
    Tick tick;
    std::string stream;
    std::int64_t lo;
    std::int64_t hi;
    std::int64_t value;

    bool operator==(const RngDraw&) const = default;
};

class ReplayDivergenceError : public std::runtime_error {
public:
    ReplayDivergenceError(const std::string& what, std::size_t draw_index)
        : std::runtime_error("replay divergence at draw " + std::to_string(draw_index) + ": " +
                             what),
          draw_index_(draw_index) {}
    std::size_t draw_index() const { return draw_index_; }

private:
    std::size_t draw_index_;
};

// Counter-based generator: draw i on stream s under seed q is
//   mix(q ^ fnv1a64(s) + (i+1) * 0x9E3779B97F4A7C15)
// where mix is the SplitMix64 finalizer, mapped into [lo,hi] by modulo.
// Pure function of (seed, stream, counter), so streams are independent and
// traces are portable. In replay mode draws are consumed strictly in
// recorded order and checked against (stream, lo, hi).
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed) : seed_(seed) {}

    void load_replay(std::vector<RngDraw> draws);
    bool replay_mode() const { return replay_.has_value(); }

    std::int64_t draw(const std::string& stream, std::int64_t lo, std::int64_t hi, Tick now);

    const std::vector<RngDraw>& draw_log() const { return log_; }
    // Replay contract: every recorded draw must be consumed by run end.
    void check_exhausted() const;

private:
    std::uint64_t seed_;
    std::map<std::string, std::uint64_t> counters_;
    std::vector<RngDraw> log_;
    std::optional<std::vector<RngDraw>> replay_;
    std::size_t replay_pos_ = 0;
};

// Replay file: the RNG records alone, trace format.
std::vector<RngDraw> parse_replay_file(const std::filesystem::path& path);
void write_replay_file(const std::filesystem::path& path, const std::vector<RngDraw>& draws);

class Platform;

/// Per-step view handed to an agent behavior: the drained inbox plus the
/// platform services the agent may use during this step.
struct AgentContext {
    Tick now;
    const AgentId& self;
    std::vector<Message> inbox;
    Platform& platform;

    void send(Message msg);
    std::int64_t random(const std::string& stream, std::int64_t lo, std::int64_t hi);
    void trace_game(const std::string& payload);
    void trace_event(const ConversationEvent& event);
};

using Behavior = std::function<void(AgentContext&)>;
// False while the agent still has scheduled work; used for quiescence.
using IdleProbe = std::function<bool(Tick)>;

struct RunResult {
    Tick ticks_run = 0;
    bool quiesced = false;
};

/// Deterministic in-process multi-agent platform: agent registry, tick
/// scheduler, FIFO one-tick-latency message bus, seeded/replayable
/// randomness and the trace log. Single logical thread.
class Platform {
public:
    explicit Platform(std::uint64_t seed);

    void register_agent(AgentId id, Behavior behavior, IdleProbe idle = {});
    bool is_registered(const std::string& name) const;
    const AgentId* agent_id(const std::string& name) const;

    // Enqueues for delivery at the next tick; FIFO per (sender, receiver).
    // Unknown receiver: message dropped, MSG record flagged UNDELIVERABLE.
    void send(Message msg);
    // Bus-level forgery, granted to at most one agent (the rogue probe); the
    // record is flagged FORGED:<true sender>.
    void send_forged(Message msg, const std::string& true_sender);
    void grant_forge_privilege(const std::string& agent_name);

    void step();
    RunResult run(Tick max_ticks);

    Tick now() const { return now_; }
    bool started() const { return now_ > 0; }
    bool is_suspended(const std::string& name) const;

    TraceLog& trace() { return trace_; }
    const TraceLog& trace() const { return trace_; }
    RandomSource& rng() { return rng_; }

private:
    struct AgentSlot {
        AgentId id;
        Behavior behavior;
        IdleProbe idle;
        std::vector<Message> inbox;
        bool suspended = false;
    };

    struct InFlight {
        Message msg;
        Tick deliver_tick;
    };

    void record_message(const Message& msg, const std::string& flag);
    AgentSlot* find_agent(const std::string& name);

    std::uint64_t seed_;
    Tick now_ = 0;
    std::vector<std::unique_ptr<AgentSlot>> agents_; // registration order
    std::deque<InFlight> in_flight_;
    RandomSource rng_;
    TraceLog trace_;
    std::string forge_agent_;
    std::size_t records_at_step_start_ = 0;
    bool step_had_sends_ = false;

    friend struct AgentContext;
};

// `MSG <tick> <sender> <receiver> <performative> <content> <cid|->` with an
// optional trailing FORGED:<name> or UNDELIVERABLE flag.
std::string format_msg_record(const Message& msg, const std::string& flag = "");

} // namespace parley
