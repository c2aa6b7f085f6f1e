#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "parley/repository.hpp"
#include "parley/term.hpp"

namespace parley {

using Tick = std::int64_t;

struct AgentId {
    std::string name;
    std::vector<std::string> addresses;

    bool operator==(const AgentId&) const = default;
};

struct Message {
    std::string performative;
    AgentId sender;
    AgentId receiver;
    Term content; // ground
    std::optional<std::string> cid_hint;
    Tick sent_tick = 0; // stamped by the bus
};

enum class ConversationStatus { Active, Done, Failed, Cancelled, TimedOut };
const char* to_string(ConversationStatus status);

enum class UnmatchedReason {
    NoActiveMatchNoInitiation,
    WrongSender,
    OutOfSequence,
    ContentMismatch,
};
const char* to_string(UnmatchedReason reason);

struct ConversationEvent {
    enum class Kind { Started, Advanced, Ended, TimedOut, Cancelled, Unmatched, Ambiguous };

    Kind kind;
    std::string cid;                      // empty for unmatched
    ProtocolId protocol;                  // started
    std::string state;                    // advanced / ended
    std::size_t length = 0;               // advanced: history size at emission
    ConversationStatus final_status = ConversationStatus::Active; // ended
    std::string reason;                   // cancelled text / unmatched code
    std::vector<std::string> candidates;  // ambiguous: all matching cids

    static const char* kind_name(Kind kind);
    // `EVT <tick> <agent> <kind> <cid|-> <state|-> <length|-> <reason|->`
    std::string trace_line(Tick tick, const std::string& agent) const;
};

struct MatchOutcome {
    enum class Kind { AdvancedExisting, StartedNew, Unmatched };

    Kind kind;
    std::optional<std::string> cid;
    std::vector<ConversationEvent> events;
};

enum class Direction { Incoming, Outgoing };

struct ConversationSnapshot {
    std::string cid;
    ProtocolId protocol;
    std::string state;
    AgentId initiator;
    std::optional<AgentId> counterpart;
    std::vector<Message> history;
    ConversationStatus status = ConversationStatus::Active;
    BindingSet bindings;
    std::optional<Tick> deadline;
};

class ActionError : public std::runtime_error {
public:
    enum class Code {
        UnknownProtocol,
        NoInitiatingTransition,
        UnknownConversation,
        NotActive,
        OutOfSequence,
    };

    ActionError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

struct EngineConfig {
    Tick default_timeout = 50; // used when a protocol declares none
};

/// Per-agent conversation manager. Classifies every sent and received
/// message against active conversations and loaded protocols, tracks
/// conversation state and bindings, emits lifecycle events, and provides
/// the start/advance/cancel actions. Single logical thread of control.
class ConversationManager {
public:
    ConversationManager(AgentId self, const Repository* repo, EngineConfig config = {});

    // Sink receives every emitted event exactly once, in order.
    void set_event_sink(std::function<void(const ConversationEvent&)> sink);

    // Classifies one message. Exactly one of: advances the unique (earliest
    // created) matching active conversation; starts a new conversation from
    // an initiating transition (repository index order, then declaration
    // order); or reports it unmatched. Never throws on mismatch.
    MatchOutcome process_message(const Message& msg, Direction direction);

    // Actions. These throw ActionError on failure and send nothing.
    std::pair<std::string, Message> start_conversation(const ProtocolId& protocol,
                                                       const AgentId& counterpart,
                                                       const std::string& performative,
                                                       const Term& content);
    Message advance_conversation(const std::string& cid, const std::string& performative,
                                 const Term& content);
    std::pair<ConversationEvent, Message> cancel_conversation(const std::string& cid,
                                                              const std::string& reason);

    // Advances the manager clock (monotone) and expires overdue
    // conversations; events ordered by conversation creation.
    std::vector<ConversationEvent> tick(Tick now);
    Tick now() const { return now_; }

    ConversationSnapshot inspect(const std::string& cid) const;
    std::vector<std::string> active_cids() const;
    std::size_t conversation_count() const { return conversations_.size(); }

    const AgentId& self() const { return self_; }

private:
    struct Conversation {
        std::string cid;
        ProtocolId protocol;
        std::string state;
        BindingSet bindings;
        AgentId initiator;
        std::optional<AgentId> counterpart;
        std::vector<Message> history;
        ConversationStatus status = ConversationStatus::Active;
        std::optional<Tick> deadline;
    };

    struct TransitionMatch {
        const Transition* transition;
        BindingSet bindings;
    };

    std::optional<TransitionMatch> match_transition(const Transition& t, const BindingSet& bindings,
                                                    const std::string& sender_name,
                                                    const std::string& receiver_name,
                                                    const Term& content) const;
    std::optional<UnmatchedReason> failure_reason(const Conversation& conv, const Message& msg,
                                                  Direction direction) const;

    Conversation* find_conversation(const std::string& cid);
    const Conversation* find_conversation(const std::string& cid) const;
    bool cid_known(const std::string& cid) const;
    std::string fresh_cid();
    Tick deadline_for(const ProtocolDescriptor& proto) const;
    void emit(std::vector<ConversationEvent>& events, ConversationEvent event);
    std::vector<ConversationEvent> advance(Conversation& conv, const Transition& transition,
                                           BindingSet bindings, const Message& msg);

    AgentId self_;
    const Repository* repo_;
    EngineConfig config_;
    std::function<void(const ConversationEvent&)> sink_;
    std::vector<std::unique_ptr<Conversation>> conversations_; // creation order
    std::uint64_t next_cid_ = 1;
    Tick now_ = 0;
};

} // namespace parley
