#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "parley/conversation.hpp"

using namespace parley;

namespace {

Repository& bundled_repo() {
    static Repository repo =
        Repository::load(std::filesystem::path(PARLEY_SOURCE_DIR) / "protocols");
    return repo;
}

const AgentId kPlayer{"player", {"local:localhost"}};
const AgentId kBanker{"banker", {"local:localhost"}};
const AgentId kBroker{"broker", {"local:localhost"}};
const AgentId kGuru{"guru", {"local:localhost"}};
const AgentId kMallory{"mallory", {"local:elsewhere"}};

Message make_msg(const std::string& perf, const AgentId& from, const AgentId& to,
                 const std::string& content) {
    Message m;
    m.performative = perf;
    m.sender = from;
    m.receiver = to;
    m.content = parse_term(content);
    return m;
}

} // namespace

TEST_CASE("the two-message open exchange") {
    ConversationManager mgr(kPlayer, &bundled_repo());

    auto out = mgr.process_message(make_msg("request", kPlayer, kBanker, "openAccount"),
                                   Direction::Outgoing);
    REQUIRE(out.kind == MatchOutcome::Kind::StartedNew);
    REQUIRE(out.cid == "player-1");
    REQUIRE(out.events.size() == 2);
    CHECK(out.events[0].kind == ConversationEvent::Kind::Started);
    CHECK(out.events[0].protocol == ProtocolId{"trading", "open", "1.0"});
    CHECK(out.events[1].kind == ConversationEvent::Kind::Advanced);
    CHECK(out.events[1].state == "requested");
    CHECK(out.events[1].length == 1);

    auto reply = mgr.process_message(
        make_msg("inform", kBanker, kPlayer, "openedAccount(acc1,10000)"), Direction::Incoming);
    REQUIRE(reply.kind == MatchOutcome::Kind::AdvancedExisting);
    CHECK(reply.cid == "player-1");
    REQUIRE(reply.events.size() == 2);
    CHECK(reply.events[0].kind == ConversationEvent::Kind::Advanced);
    CHECK(reply.events[0].state == "done");
    CHECK(reply.events[0].length == 2);
    CHECK(reply.events[1].kind == ConversationEvent::Kind::Ended);
    CHECK(reply.events[1].final_status == ConversationStatus::Done);

    auto snap = mgr.inspect("player-1");
    CHECK(snap.protocol.path() == "trading/open");
    CHECK(snap.state == "done");
    CHECK(snap.status == ConversationStatus::Done);
    CHECK(snap.history.size() == 2);
    CHECK(snap.initiator.name == "player");
    REQUIRE(snap.counterpart);
    CHECK(snap.counterpart->name == "banker");
    CHECK(*snap.bindings.lookup("id") == Term::constant("acc1"));
    CHECK(*snap.bindings.lookup("amt") == Term::number(10000));
    CHECK(*snap.bindings.lookup("player") == Term::constant("player"));
    CHECK(*snap.bindings.lookup("banker") == Term::constant("banker"));
}

TEST_CASE("unmatched reasons") {
    ConversationManager mgr(kPlayer, &bundled_repo());

    SUBCASE("no conversation with that counterpart") {
        auto out = mgr.process_message(
            make_msg("inform", kMallory, kPlayer, "openedAccount(acc1,10000)"),
            Direction::Incoming);
        REQUIRE(out.kind == MatchOutcome::Kind::Unmatched);
        REQUIRE(out.events.size() == 1);
        CHECK(out.events[0].reason == "NO_ACTIVE_MATCH_NO_INITIATION");
    }

    SUBCASE("purchase inform before any proposal was accepted") {
        // Walk trading/buy to state `requested` only.
        (void)mgr.start_conversation({"trading", "buy", "1.0"}, kBroker, "request",
                                     parse_term("buy(acme,10)"));
        auto out = mgr.process_message(
            make_msg("inform", kBroker, kPlayer, "purchased(acme,10,170)"), Direction::Incoming);
        REQUIRE(out.kind == MatchOutcome::Kind::Unmatched);
        CHECK(out.events[0].reason == "OUT_OF_SEQUENCE");
    }

    SUBCASE("content conflict with an established binding") {
        // Subscribe, agree, first tip binds ?stock=acme.
        (void)mgr.start_conversation({"trading", "guru-subscribe", "1.0"}, kGuru, "subscribe",
                                     parse_term("tips"));
        (void)mgr.process_message(make_msg("agree", kGuru, kPlayer, "tips"), Direction::Incoming);
        auto tip = mgr.process_message(make_msg("inform", kGuru, kPlayer, "tip(acme,rise)"),
                                       Direction::Incoming);
        REQUIRE(tip.kind == MatchOutcome::Kind::AdvancedExisting);

        auto forged = mgr.process_message(make_msg("inform", kGuru, kPlayer, "tip(vapor,rise)"),
                                          Direction::Incoming);
        REQUIRE(forged.kind == MatchOutcome::Kind::Unmatched);
        CHECK(forged.events[0].reason == "CONTENT_MISMATCH");
    }

    SUBCASE("wrong sender on a constant-sender transition") {
        // A protocol where a third, fixed-name agent must send the second message.
        ProtocolDescriptor audit = parse_protocol(
            "protocol test/audit 1.0\n"
            "state a initial\n"
            "state b normal\n"
            "state c terminal\n"
            "transition a -> b : request from ?asker to ?clerk content check\n"
            "transition b -> c : inform from auditor to ?asker content verdict(?v)\n");
        // Stash it in a temp repository on disk so the manager can load it.
        auto dir = std::filesystem::temp_directory_path() / "parley_wrong_sender";
        std::filesystem::create_directories(dir);
        {
            std::ofstream(dir / "audit.proto") << serialize_protocol(audit);
            std::ofstream(dir / "index") << "test/audit 1.0 audit.proto\n";
        }
        Repository repo = Repository::load(dir);
        ConversationManager m(kPlayer, &repo);
        (void)m.start_conversation({"test", "audit", "1.0"}, kBanker, "request",
                                   parse_term("check"));
        // The counterpart (banker) sends the message the auditor should send.
        auto out = m.process_message(make_msg("inform", kBanker, kPlayer, "verdict(ok)"),
                                     Direction::Incoming);
        REQUIRE(out.kind == MatchOutcome::Kind::Unmatched);
        CHECK(out.events[0].reason == "WRONG_SENDER");
        std::filesystem::remove_all(dir);
    }
}

TEST_CASE("start_conversation") {
    ConversationManager mgr(kPlayer, &bundled_repo());

    auto [cid, msg] = mgr.start_conversation({"trading", "open", "1.0"}, kBanker, "request",
                                             parse_term("openAccount"));
    CHECK(cid == "player-1");
    CHECK(msg.performative == "request");
    CHECK(msg.sender.name == "player");
    CHECK(msg.receiver.name == "banker");
    CHECK(msg.receiver.addresses == kBanker.addresses);
    CHECK(msg.content == Term::constant("openAccount"));
    CHECK(msg.cid_hint == cid);

    CHECK_THROWS_AS((void)mgr.start_conversation({"trading", "open", "1.0"}, kBanker, "inform",
                                                 parse_term("openAccount")),
                    ActionError);
    CHECK_THROWS_AS((void)mgr.start_conversation({"unloaded", "xyz", "1.0"}, kBanker, "request",
                                                 parse_term("openAccount")),
                    ActionError);
    try {
        (void)mgr.start_conversation({"unloaded", "xyz", "1.0"}, kBanker, "request",
                                     parse_term("openAccount"));
    } catch (const ActionError& e) {
        CHECK(e.code() == ActionError::Code::UnknownProtocol);
    }
    // Failed starts create no conversations.
    CHECK(mgr.conversation_count() == 1);
}

TEST_CASE("advance_conversation walks broker-buy by hand") {
    ConversationManager mgr(kPlayer, &bundled_repo());
    auto [cid, request] = mgr.start_conversation({"trading", "buy", "1.0"}, kBroker, "request",
                                                 parse_term("buy(acme,10)"));
    auto proposal = mgr.process_message(make_msg("propose", kBroker, kPlayer, "cost(acme,10,170)"),
                                        Direction::Incoming);
    REQUIRE(proposal.kind == MatchOutcome::Kind::AdvancedExisting);
    CHECK(mgr.inspect(cid).state == "proposed");

    Message accept = mgr.advance_conversation(cid, "accept-proposal", parse_term("accept(acme,10,170)"));
    CHECK(accept.receiver.name == "broker"); // addressed to the bound counterpart
    CHECK(accept.cid_hint == cid);
    CHECK(mgr.inspect(cid).state == "accepted");

    auto done = mgr.process_message(make_msg("inform", kBroker, kPlayer, "purchased(acme,10,170)"),
                                    Direction::Incoming);
    REQUIRE(done.kind == MatchOutcome::Kind::AdvancedExisting);
    CHECK(mgr.inspect(cid).status == ConversationStatus::Done);

    // Advancing a done conversation is a not-active error.
    CHECK_THROWS_AS((void)mgr.advance_conversation(cid, "inform", parse_term("x")), ActionError);

    // A performative matching no outgoing transition is out-of-sequence.
    auto [cid2, _] = mgr.start_conversation({"trading", "buy", "1.0"}, kBroker, "request",
                                            parse_term("buy(ibex,5)"));
    try {
        (void)mgr.advance_conversation(cid2, "inform", parse_term("purchased(ibex,5,100)"));
        FAIL("expected ActionError");
    } catch (const ActionError& e) {
        CHECK(e.code() == ActionError::Code::OutOfSequence);
    }
    CHECK(mgr.inspect(cid2).state == "requested"); // nothing sent, nothing advanced
}

TEST_CASE("cancel_conversation") {
    ConversationManager mgr(kPlayer, &bundled_repo());
    auto [cid, _] = mgr.start_conversation({"trading", "open", "1.0"}, kBanker, "request",
                                           parse_term("openAccount"));

    auto [event, notice] = mgr.cancel_conversation(cid, "timeout upstream");
    CHECK(event.kind == ConversationEvent::Kind::Cancelled);
    CHECK(event.reason == "timeout upstream");
    CHECK(notice.performative == "cancel");
    CHECK(notice.receiver.name == "banker");
    CHECK(format_term(notice.content) == "cancelled(\"player-1\",\"timeout upstream\")");
    CHECK(mgr.inspect(cid).status == ConversationStatus::Cancelled);

    CHECK_THROWS_AS((void)mgr.cancel_conversation(cid, "again"), ActionError);

    // A counterpart reply after cancellation is unmatched.
    auto out = mgr.process_message(
        make_msg("inform", kBanker, kPlayer, "openedAccount(acc1,10000)"), Direction::Incoming);
    CHECK(out.kind == MatchOutcome::Kind::Unmatched);

    CHECK_THROWS_AS((void)mgr.cancel_conversation("player-99", "nope"), ActionError);
}

TEST_CASE("timeouts") {
    ConversationManager mgr(kPlayer, &bundled_repo(), EngineConfig{20});
    mgr.tick(5);
    auto [cid, _] = mgr.start_conversation({"trading", "open", "1.0"}, kBanker, "request",
                                           parse_term("openAccount"));
    CHECK(mgr.inspect(cid).deadline == 25);

    CHECK(mgr.tick(25).empty()); // deadline inclusive
    auto events = mgr.tick(26);
    REQUIRE(events.size() == 2);
    CHECK(events[0].kind == ConversationEvent::Kind::TimedOut);
    CHECK(events[0].cid == cid);
    CHECK(events[1].kind == ConversationEvent::Kind::Ended);
    CHECK(events[1].final_status == ConversationStatus::TimedOut);
    CHECK(mgr.inspect(cid).status == ConversationStatus::TimedOut);

    // Two conversations expiring on the same tick: events in creation order.
    ConversationManager mgr2(kPlayer, &bundled_repo(), EngineConfig{10});
    mgr2.tick(1);
    auto [c1, m1] = mgr2.start_conversation({"trading", "open", "1.0"}, kBanker, "request",
                                            parse_term("openAccount"));
    auto [c2, m2] = mgr2.start_conversation({"trading", "buy", "1.0"}, kBroker, "request",
                                            parse_term("buy(acme,1)"));
    auto expired = mgr2.tick(12);
    REQUIRE(expired.size() == 4);
    CHECK(expired[0].cid == c1);
    CHECK(expired[2].cid == c2);

    // The clock must be monotone.
    CHECK_THROWS_AS((void)mgr2.tick(5), std::logic_error);
}

TEST_CASE("advancement refreshes the deadline") {
    ConversationManager mgr(kPlayer, &bundled_repo(), EngineConfig{20});
    mgr.tick(1);
    auto [cid, _] = mgr.start_conversation({"trading", "guru-subscribe", "1.0"}, kGuru,
                                           "subscribe", parse_term("tips"));
    mgr.tick(10);
    (void)mgr.process_message(make_msg("agree", kGuru, kPlayer, "tips"), Direction::Incoming);
    CHECK(mgr.inspect(cid).deadline == 30);
}

TEST_CASE("loop traversals produce distinct advanced events") {
    ConversationManager mgr(kPlayer, &bundled_repo());
    auto [cid, _] = mgr.start_conversation({"trading", "guru-subscribe", "1.0"}, kGuru,
                                           "subscribe", parse_term("tips"));
    (void)mgr.process_message(make_msg("agree", kGuru, kPlayer, "tips"), Direction::Incoming);

    std::vector<std::size_t> lengths;
    for (int i = 0; i < 3; ++i) {
        auto out = mgr.process_message(make_msg("inform", kGuru, kPlayer, "tip(acme,rise)"),
                                       Direction::Incoming);
        REQUIRE(out.kind == MatchOutcome::Kind::AdvancedExisting);
        REQUIRE(out.events.size() == 1);
        CHECK(out.events[0].state == "subscribed");
        lengths.push_back(out.events[0].length);
    }
    CHECK(lengths == std::vector<std::size_t>{3, 4, 5});
}

TEST_CASE("ambiguity resolves to the earliest conversation and is reported") {
    ConversationManager mgr(kPlayer, &bundled_repo());
    auto [c1, m1] = mgr.start_conversation({"trading", "buy", "1.0"}, kBroker, "request",
                                           parse_term("buy(acme,10)"));
    auto [c2, m2] = mgr.start_conversation({"trading", "buy", "1.0"}, kBroker, "request",
                                           parse_term("buy(acme,10)"));
    auto out = mgr.process_message(make_msg("propose", kBroker, kPlayer, "cost(acme,10,170)"),
                                   Direction::Incoming);
    REQUIRE(out.kind == MatchOutcome::Kind::AdvancedExisting);
    CHECK(out.cid == c1);
    REQUIRE(out.events.size() >= 2);
    CHECK(out.events[0].kind == ConversationEvent::Kind::Ambiguous);
    CHECK(out.events[0].candidates == std::vector<std::string>{c1, c2});
    CHECK(mgr.inspect(c2).state == "requested");
}

TEST_CASE("cid hints naming a different known conversation unmatch") {
    ConversationManager mgr(kPlayer, &bundled_repo());
    auto [c1, m1] = mgr.start_conversation({"trading", "buy", "1.0"}, kBroker, "request",
                                           parse_term("buy(acme,10)"));
    auto [c2, m2] = mgr.start_conversation({"trading", "sell", "1.0"}, kBroker, "request",
                                           parse_term("sell(ibex,5)"));

    Message propose = make_msg("propose", kBroker, kPlayer, "cost(acme,10,170)");
    propose.cid_hint = c2; // names the sell conversation, matches the buy
    auto out = mgr.process_message(propose, Direction::Incoming);
    REQUIRE(out.kind == MatchOutcome::Kind::Unmatched);
    CHECK(out.events[0].reason == "CONTENT_MISMATCH");
    CHECK(mgr.inspect(c1).state == "requested"); // nothing advanced

    // An unknown hint (the counterpart's own cid) passes through.
    propose.cid_hint = "broker-7";
    auto ok = mgr.process_message(propose, Direction::Incoming);
    CHECK(ok.kind == MatchOutcome::Kind::AdvancedExisting);
}

TEST_CASE("trichotomy and replay determinism over a scripted exchange") {
    auto run_script = [](ConversationManager& mgr) {
        std::vector<std::string> log;
        auto sink = [&log](const ConversationEvent& e) {
            log.push_back(e.trace_line(0, "player"));
        };
        mgr.set_event_sink(sink);
        std::vector<std::pair<Message, Direction>> script = {
            {make_msg("request", kPlayer, kBanker, "openAccount"), Direction::Outgoing},
            {make_msg("inform", kBanker, kPlayer, "openedAccount(acc1,10000)"), Direction::Incoming},
            {make_msg("inform", kMallory, kPlayer, "tip(acme,rise)"), Direction::Incoming},
            {make_msg("subscribe", kPlayer, kGuru, "tips"), Direction::Outgoing},
            {make_msg("agree", kGuru, kPlayer, "tips"), Direction::Incoming},
            {make_msg("inform", kGuru, kPlayer, "tip(acme,rise)"), Direction::Incoming},
            {make_msg("query", kPlayer, kBanker, "balance"), Direction::Outgoing},
            {make_msg("failure", kBanker, kPlayer, "noAccount"), Direction::Incoming},
        };
        for (auto& [msg, dir] : script) {
            auto out = mgr.process_message(msg, dir);
            // Trichotomy: exactly one outcome kind, cid present iff not unmatched.
            CHECK((out.kind == MatchOutcome::Kind::Unmatched) == !out.cid.has_value());
        }
        return log;
    };

    ConversationManager a(kPlayer, &bundled_repo());
    ConversationManager b(kPlayer, &bundled_repo());
    auto log_a = run_script(a);
    auto log_b = run_script(b);
    CHECK(log_a == log_b);
    CHECK_FALSE(log_a.empty());
}

TEST_CASE("event trace lines") {
    ConversationEvent started;
    started.kind = ConversationEvent::Kind::Started;
    started.cid = "player-1";
    started.protocol = {"trading", "open", "1.0"};
    CHECK(started.trace_line(3, "player") == "EVT\t3\tplayer\tstarted\tplayer-1\t-\t-\ttrading/open@1.0");

    ConversationEvent advanced;
    advanced.kind = ConversationEvent::Kind::Advanced;
    advanced.cid = "player-1";
    advanced.state = "done";
    advanced.length = 2;
    CHECK(advanced.trace_line(3, "player") == "EVT\t3\tplayer\tadvanced\tplayer-1\tdone\t2\t-");

    ConversationEvent unmatched;
    unmatched.kind = ConversationEvent::Kind::Unmatched;
    unmatched.reason = "WRONG_SENDER";
    CHECK(unmatched.trace_line(9, "player") == "EVT\t9\tplayer\tunmatched\t-\t-\t-\tWRONG_SENDER");

    ConversationEvent cancelled;
    cancelled.kind = ConversationEvent::Kind::Cancelled;
    cancelled.cid = "player-2";
    cancelled.reason = "weird\treason";
    CHECK(cancelled.trace_line(4, "player") ==
          "EVT\t4\tplayer\tcancelled\tplayer-2\t-\t-\tweird reason");
}

TEST_CASE("message content must be ground") {
    ConversationManager mgr(kPlayer, &bundled_repo());
    Message bad = make_msg("request", kPlayer, kBanker, "buy(?stock,1)");
    CHECK_THROWS_AS((void)mgr.process_message(bad, Direction::Outgoing), std::invalid_argument);
    CHECK_THROWS_AS((void)mgr.start_conversation({"trading", "buy", "1.0"}, kBroker, "request",
                                                 parse_term("buy(?stock,1)")),
                    std::invalid_argument);
}

TEST_CASE("inspect on an unknown cid errors") {
    ConversationManager mgr(kPlayer, &bundled_repo());
    CHECK_THROWS_AS((void)mgr.inspect("player-1"), ActionError);
}
