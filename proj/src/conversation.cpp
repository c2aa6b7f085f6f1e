#include "parley/conversation.hpp"

#include <algorithm>

namespace parley {

namespace {

std::string sanitize_field(std::string text) {
    for (char& c : text) {
        if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    }
    return text.empty() ? "-" : text;
}

int reason_rank(UnmatchedReason reason) {
    switch (reason) {
    case UnmatchedReason::NoActiveMatchNoInitiation: return 0;
    case UnmatchedReason::WrongSender: return 1;
    case UnmatchedReason::OutOfSequence: return 2;
    case UnmatchedReason::ContentMismatch: return 3;
    }
    return 0;
}

} // namespace

const char* to_string(ConversationStatus status) {
    switch (status) {
    case ConversationStatus::Active: return "active";
    case ConversationStatus::Done: return "done";
    case ConversationStatus::Failed: return "failed";
    case ConversationStatus::Cancelled: return "cancelled";
    case ConversationStatus::TimedOut: return "timed_out";
    }
    return "?";
}

const char* to_string(UnmatchedReason reason) {
    switch (reason) {
    case UnmatchedReason::NoActiveMatchNoInitiation: return "NO_ACTIVE_MATCH_NO_INITIATION";
    case UnmatchedReason::WrongSender: return "WRONG_SENDER";
    case UnmatchedReason::OutOfSequence: return "OUT_OF_SEQUENCE";
    case UnmatchedReason::ContentMismatch: return "CONTENT_MISMATCH";
    }
    return "?";
}

const char* ConversationEvent::kind_name(Kind kind) {
    switch (kind) {
    case Kind::Started: return "started";
    case Kind::Advanced: return "advanced";
    case Kind::Ended: return "ended";
    case Kind::TimedOut: return "timed_out";
    case Kind::Cancelled: return "cancelled";
    case Kind::Unmatched: return "unmatched";
    case Kind::Ambiguous: return "ambiguous";
    }
    return "?";
}

std::string ConversationEvent::trace_line(Tick tick, const std::string& agent) const {
    std::string cid_field = cid.empty() ? "-" : cid;
    std::string state_field = "-";
    std::string length_field = "-";
    std::string reason_field = "-";

    switch (kind) {
    case Kind::Started:
        reason_field = protocol.str();
        break;
    case Kind::Advanced:
        state_field = state;
        length_field = std::to_string(length);
        break;
    case Kind::Ended:
        state_field = state;
        reason_field = to_string(final_status);
        break;
    case Kind::TimedOut:
        break;
    case Kind::Cancelled:
        reason_field = sanitize_field(reason);
        break;
    case Kind::Unmatched:
        reason_field = reason;
        break;
    case Kind::Ambiguous: {
        std::string joined;
        for (const std::string& c : candidates) {
            if (!joined.empty()) joined += ",";
            joined += c;
        }
        reason_field = sanitize_field(joined);
        break;
    }
    }

    return "EVT\t" + std::to_string(tick) + "\t" + agent + "\t" + kind_name(kind) + "\t" +
           cid_field + "\t" + sanitize_field(state_field) + "\t" + length_field + "\t" +
           reason_field;
}

ConversationManager::ConversationManager(AgentId self, const Repository* repo, EngineConfig config)
    : self_(std::move(self)), repo_(repo), config_(config) {
    if (repo_ == nullptr) throw std::invalid_argument("conversation manager requires a repository");
}

void ConversationManager::set_event_sink(std::function<void(const ConversationEvent&)> sink) {
    sink_ = std::move(sink);
}

void ConversationManager::emit(std::vector<ConversationEvent>& events, ConversationEvent event) {
    if (sink_) sink_(event);
    events.push_back(std::move(event));
}

std::string ConversationManager::fresh_cid() {
    return self_.name + "-" + std::to_string(next_cid_++);
}

Tick ConversationManager::deadline_for(const ProtocolDescriptor& proto) const {
    return now_ + (proto.timeout ? *proto.timeout : config_.default_timeout);
}

std::optional<ConversationManager::TransitionMatch> ConversationManager::match_transition(
    const Transition& t, const BindingSet& bindings, const std::string& sender_name,
    const std::string& receiver_name, const Term& content) const {
    auto after_sender = match_pattern(t.sender, Term::constant(sender_name), bindings);
    if (!after_sender) return std::nullopt;
    auto after_receiver = match_pattern(t.receiver, Term::constant(receiver_name), *after_sender);
    if (!after_receiver) return std::nullopt;
    auto after_content = match_pattern(t.content, content, *after_receiver);
    if (!after_content) return std::nullopt;
    return TransitionMatch{&t, std::move(*after_content)};
}

std::vector<ConversationEvent> ConversationManager::advance(Conversation& conv,
                                                            const Transition& transition,
                                                            BindingSet bindings,
                                                            const Message& msg) {
    const ProtocolDescriptor& proto = repo_->get(conv.protocol);
    conv.bindings = std::move(bindings);
    conv.state = transition.to;
    conv.history.push_back(msg);
    conv.deadline = deadline_for(proto);
    if (!conv.counterpart) {
        conv.counterpart = msg.sender.name == self_.name ? msg.receiver : msg.sender;
    }

    std::vector<ConversationEvent> events;
    ConversationEvent advanced;
    advanced.kind = ConversationEvent::Kind::Advanced;
    advanced.cid = conv.cid;
    advanced.state = conv.state;
    advanced.length = conv.history.size();
    emit(events, std::move(advanced));

    if (proto.is_terminal(conv.state)) {
        conv.status = ConversationStatus::Done;
        conv.deadline.reset();
        ConversationEvent ended;
        ended.kind = ConversationEvent::Kind::Ended;
        ended.cid = conv.cid;
        ended.state = conv.state;
        ended.final_status = ConversationStatus::Done;
        emit(events, std::move(ended));
    }
    return events;
}

MatchOutcome ConversationManager::process_message(const Message& msg, Direction direction) {
    if (!msg.content.is_ground()) {
        throw std::invalid_argument("message content must be ground");
    }
    const std::string& sender_name = msg.sender.name;
    const std::string& receiver_name = msg.receiver.name;
    const std::string counterpart_name =
        direction == Direction::Incoming ? sender_name : receiver_name;

    // Active conversations take precedence over starting new ones; candidates
    // are examined in creation order so ties go to the earliest cid.
    struct Candidate {
        Conversation* conv;
        TransitionMatch match;
    };
    std::vector<Candidate> candidates;
    for (const auto& conv : conversations_) {
        if (conv->status != ConversationStatus::Active) continue;
        const ProtocolDescriptor& proto = repo_->get(conv->protocol);
        for (const Transition& t : proto.transitions) {
            if (t.from != conv->state) continue;
            if (t.performative != msg.performative) continue;
            auto match = match_transition(t, conv->bindings, sender_name, receiver_name, msg.content);
            if (match) {
                candidates.push_back({conv.get(), std::move(*match)});
                break;
            }
        }
    }

    MatchOutcome outcome;
    if (!candidates.empty()) {
        Candidate& chosen = candidates.front();
        if (msg.cid_hint && *msg.cid_hint != chosen.conv->cid && cid_known(*msg.cid_hint)) {
            ConversationEvent ev;
            ev.kind = ConversationEvent::Kind::Unmatched;
            ev.reason = to_string(UnmatchedReason::ContentMismatch);
            outcome.kind = MatchOutcome::Kind::Unmatched;
            emit(outcome.events, std::move(ev));
            return outcome;
        }
        if (candidates.size() > 1) {
            ConversationEvent ambiguous;
            ambiguous.kind = ConversationEvent::Kind::Ambiguous;
            ambiguous.cid = chosen.conv->cid;
            for (const Candidate& c : candidates) ambiguous.candidates.push_back(c.conv->cid);
            emit(outcome.events, std::move(ambiguous));
        }
        outcome.kind = MatchOutcome::Kind::AdvancedExisting;
        outcome.cid = chosen.conv->cid;
        auto events = advance(*chosen.conv, *chosen.match.transition,
                              std::move(chosen.match.bindings), msg);
        for (auto& e : events) outcome.events.push_back(std::move(e));
        return outcome;
    }

    // Initiation: first protocol in repository index order, then transition
    // declaration order.
    for (const ProtocolId& pid : repo_->index_order()) {
        const ProtocolDescriptor& proto = repo_->get(pid);
        for (const Transition& t : initiating_transitions(proto)) {
            if (t.performative != msg.performative) continue;
            auto match = match_transition(t, BindingSet{}, sender_name, receiver_name, msg.content);
            if (!match) continue;

            if (msg.cid_hint && cid_known(*msg.cid_hint)) {
                ConversationEvent ev;
                ev.kind = ConversationEvent::Kind::Unmatched;
                ev.reason = to_string(UnmatchedReason::ContentMismatch);
                outcome.kind = MatchOutcome::Kind::Unmatched;
                emit(outcome.events, std::move(ev));
                return outcome;
            }

            auto conv = std::make_unique<Conversation>();
            conv->cid = fresh_cid();
            conv->protocol = pid;
            conv->state = proto.initial_state();
            conv->initiator = direction == Direction::Outgoing ? self_ : msg.sender;
            Conversation* raw = conv.get();
            conversations_.push_back(std::move(conv));

            outcome.kind = MatchOutcome::Kind::StartedNew;
            outcome.cid = raw->cid;
            ConversationEvent started;
            started.kind = ConversationEvent::Kind::Started;
            started.cid = raw->cid;
            started.protocol = pid;
            emit(outcome.events, std::move(started));
            auto events = advance(*raw, *match->transition, std::move(match->bindings), msg);
            for (auto& e : events) outcome.events.push_back(std::move(e));
            return outcome;
        }
    }

    // Unmatched: most specific reason among active conversations that share
    // the message's counterpart, else the generic code.
    std::optional<UnmatchedReason> best;
    for (const auto& conv : conversations_) {
        if (conv->status != ConversationStatus::Active) continue;
        if (!conv->counterpart || conv->counterpart->name != counterpart_name) continue;
        auto reason = failure_reason(*conv, msg, direction);
        if (reason && (!best || reason_rank(*reason) > reason_rank(*best))) best = reason;
    }
    ConversationEvent ev;
    ev.kind = ConversationEvent::Kind::Unmatched;
    ev.reason = to_string(best.value_or(UnmatchedReason::NoActiveMatchNoInitiation));
    outcome.kind = MatchOutcome::Kind::Unmatched;
    emit(outcome.events, std::move(ev));
    return outcome;
}

std::optional<UnmatchedReason> ConversationManager::failure_reason(const Conversation& conv,
                                                                   const Message& msg,
                                                                   Direction direction) const {
    (void)direction;
    const ProtocolDescriptor& proto = repo_->get(conv.protocol);
    std::optional<UnmatchedReason> best;
    auto consider = [&best](UnmatchedReason reason) {
        if (!best || reason_rank(reason) > reason_rank(*best)) best = reason;
    };

    for (const Transition& t : proto.transitions) {
        if (t.performative != msg.performative) continue;
        bool participants_ok = false;
        if (auto after_sender =
                match_pattern(t.sender, Term::constant(msg.sender.name), conv.bindings)) {
            participants_ok =
                match_pattern(t.receiver, Term::constant(msg.receiver.name), *after_sender)
                    .has_value();
        }
        if (t.from == conv.state) {
            bool content_ok = match_pattern(t.content, msg.content, conv.bindings).has_value();
            if (participants_ok && !content_ok) consider(UnmatchedReason::ContentMismatch);
            if (!participants_ok && content_ok) consider(UnmatchedReason::WrongSender);
        } else {
            // Right message shape, wrong point in the protocol.
            if (match_pattern(t.content, msg.content, BindingSet{})) {
                consider(UnmatchedReason::OutOfSequence);
            }
        }
    }
    return best;
}

std::pair<std::string, Message> ConversationManager::start_conversation(
    const ProtocolId& protocol, const AgentId& counterpart, const std::string& performative,
    const Term& content) {
    const ProtocolDescriptor* proto = repo_->find(protocol);
    if (proto == nullptr) {
        throw ActionError(ActionError::Code::UnknownProtocol,
                          "unknown protocol " + protocol.str());
    }
    if (!content.is_ground()) {
        throw std::invalid_argument("start_conversation: content must be ground");
    }

    for (const Transition& t : initiating_transitions(*proto)) {
        if (t.performative != performative) continue;
        auto match = match_transition(t, BindingSet{}, self_.name, counterpart.name, content);
        if (!match) continue;

        auto conv = std::make_unique<Conversation>();
        conv->cid = fresh_cid();
        conv->protocol = protocol;
        conv->state = proto->initial_state();
        conv->initiator = self_;
        Conversation* raw = conv.get();
        conversations_.push_back(std::move(conv));

        Message msg;
        msg.performative = performative;
        msg.sender = self_;
        msg.receiver = counterpart;
        msg.content = content;
        msg.cid_hint = raw->cid;

        std::vector<ConversationEvent> events;
        ConversationEvent started;
        started.kind = ConversationEvent::Kind::Started;
        started.cid = raw->cid;
        started.protocol = protocol;
        emit(events, std::move(started));
        advance(*raw, t, std::move(match->bindings), msg);
        return {raw->cid, msg};
    }
    throw ActionError(ActionError::Code::NoInitiatingTransition,
                      "no initiating transition of " + protocol.str() + " matches " + performative +
                          " " + format_term(content));
}

Message ConversationManager::advance_conversation(const std::string& cid,
                                                  const std::string& performative,
                                                  const Term& content) {
    Conversation* conv = find_conversation(cid);
    if (conv == nullptr) {
        throw ActionError(ActionError::Code::UnknownConversation, "unknown conversation " + cid);
    }
    if (conv->status != ConversationStatus::Active) {
        throw ActionError(ActionError::Code::NotActive,
                          "conversation " + cid + " is not active (" + to_string(conv->status) + ")");
    }
    if (!content.is_ground()) {
        throw std::invalid_argument("advance_conversation: content must be ground");
    }
    if (!conv->counterpart) {
        throw std::logic_error("conversation " + cid + " has no counterpart");
    }

    const ProtocolDescriptor& proto = repo_->get(conv->protocol);
    for (const Transition& t : proto.transitions) {
        if (t.from != conv->state) continue;
        if (t.performative != performative) continue;
        auto match =
            match_transition(t, conv->bindings, self_.name, conv->counterpart->name, content);
        if (!match) continue;

        Message msg;
        msg.performative = performative;
        msg.sender = self_;
        msg.receiver = *conv->counterpart;
        msg.content = content;
        msg.cid_hint = conv->cid;
        advance(*conv, t, std::move(match->bindings), msg);
        return msg;
    }
    throw ActionError(ActionError::Code::OutOfSequence,
                      "no transition from state " + conv->state + " of " + cid + " matches " +
                          performative + " " + format_term(content));
}

std::pair<ConversationEvent, Message> ConversationManager::cancel_conversation(
    const std::string& cid, const std::string& reason) {
    Conversation* conv = find_conversation(cid);
    if (conv == nullptr) {
        throw ActionError(ActionError::Code::UnknownConversation, "unknown conversation " + cid);
    }
    if (conv->status != ConversationStatus::Active) {
        throw ActionError(ActionError::Code::NotActive,
                          "conversation " + cid + " is already terminal (" +
                              to_string(conv->status) + ")");
    }
    conv->status = ConversationStatus::Cancelled;
    conv->deadline.reset();

    ConversationEvent cancelled;
    cancelled.kind = ConversationEvent::Kind::Cancelled;
    cancelled.cid = cid;
    cancelled.reason = reason;
    if (sink_) sink_(cancelled);

    Message msg;
    msg.performative = "cancel";
    msg.sender = self_;
    msg.receiver = conv->counterpart.value_or(AgentId{"unknown", {"-"}});
    msg.content = Term::compound("cancelled", {Term::string(cid), Term::string(reason)});
    msg.cid_hint = cid;
    return {cancelled, msg};
}

std::vector<ConversationEvent> ConversationManager::tick(Tick now) {
    if (now < now_) {
        throw std::logic_error("manager clock must be monotone (" + std::to_string(now) + " < " +
                               std::to_string(now_) + ")");
    }
    now_ = now;
    std::vector<ConversationEvent> events;
    for (const auto& conv : conversations_) {
        if (conv->status != ConversationStatus::Active) continue;
        if (!conv->deadline || *conv->deadline >= now) continue; // deadline inclusive
        conv->status = ConversationStatus::TimedOut;
        conv->deadline.reset();

        ConversationEvent timed_out;
        timed_out.kind = ConversationEvent::Kind::TimedOut;
        timed_out.cid = conv->cid;
        emit(events, std::move(timed_out));
        ConversationEvent ended;
        ended.kind = ConversationEvent::Kind::Ended;
        ended.cid = conv->cid;
        ended.state = conv->state;
        ended.final_status = ConversationStatus::TimedOut;
        emit(events, std::move(ended));
    }
    return events;
}

ConversationSnapshot ConversationManager::inspect(const std::string& cid) const {
    const Conversation* conv = find_conversation(cid);
    if (conv == nullptr) {
        throw ActionError(ActionError::Code::UnknownConversation, "unknown conversation " + cid);
    }
    ConversationSnapshot snap;
    snap.cid = conv->cid;
    snap.protocol = conv->protocol;
    snap.state = conv->state;
    snap.initiator = conv->initiator;
    snap.counterpart = conv->counterpart;
    snap.history = conv->history;
    snap.status = conv->status;
    snap.bindings = conv->bindings;
    snap.deadline = conv->deadline;
    return snap;
}

std::vector<std::string> ConversationManager::active_cids() const {
    std::vector<std::string> out;
    for (const auto& conv : conversations_) {
        if (conv->status == ConversationStatus::Active) out.push_back(conv->cid);
    }
    return out;
}

ConversationManager::Conversation* ConversationManager::find_conversation(const std::string& cid) {
    for (const auto& conv : conversations_) {
        if (conv->cid == cid) return conv.get();
    }
    return nullptr;
}

const ConversationManager::Conversation* ConversationManager::find_conversation(
    const std::string& cid) const {
    for (const auto& conv : conversations_) {
        if (conv->cid == cid) return conv.get();
    }
    return nullptr;
}

bool ConversationManager::cid_known(const std::string& cid) const {
    return find_conversation(cid) != nullptr;
}

} // namespace parley
