#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "parley/protocol.hpp"
#include "parley/repository.hpp"

using namespace parley;

namespace {

const char* kOpenSource =
    "protocol trading/open 1.0\n"
    "state start initial\n"
    "state requested normal\n"
    "state done terminal\n"
    "transition start -> requested : request from ?player to ?banker content openAccount\n"
    "transition requested -> done : inform from ?banker to ?player content openedAccount(?id,?amt)\n";

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::filesystem::path protocols_dir() {
    return std::filesystem::path(PARLEY_SOURCE_DIR) / "protocols";
}

} // namespace

TEST_CASE("parse_protocol on the bundled open source") {
    ProtocolDescriptor p = parse_protocol(kOpenSource);
    CHECK(p.id == ProtocolId{"trading", "open", "1.0"});
    REQUIRE(p.states.size() == 3);
    CHECK(p.states[0] == StateDecl{"start", StateKind::Initial});
    CHECK(p.states[1] == StateDecl{"requested", StateKind::Normal});
    CHECK(p.states[2] == StateDecl{"done", StateKind::Terminal});
    REQUIRE(p.transitions.size() == 2);
    CHECK(p.transitions[0].performative == "request");
    CHECK(p.transitions[0].sender == Term::variable("player"));
    CHECK(p.transitions[0].receiver == Term::variable("banker"));
    CHECK(p.transitions[0].content == Term::constant("openAccount"));
    CHECK(p.transitions[1].content == parse_term("openedAccount(?id,?amt)"));
    CHECK_FALSE(p.timeout.has_value());
    CHECK(p.initial_state() == "start");
    CHECK(p.is_terminal("done"));
    CHECK_FALSE(p.is_terminal("requested"));
}

TEST_CASE("parse_protocol errors") {
    CHECK_THROWS_WITH_AS((void)parse_protocol(""), "line 1: missing protocol header",
                         ProtocolParseError);
    CHECK_THROWS_AS((void)parse_protocol("state start initial\n"), ProtocolParseError);

    // Undeclared endpoint surfaces as a validation failure naming the state.
    std::string missing_state =
        "protocol t/p 1.0\n"
        "state start initial\n"
        "state done terminal\n"
        "transition start -> middle : request from ?a to ?b content go\n";
    try {
        (void)parse_protocol(missing_state);
        FAIL("expected ProtocolValidationError");
    } catch (const ProtocolValidationError& e) {
        bool named = false;
        for (const Diagnostic& d : e.diagnostics()) {
            if (d.code == DiagnosticCode::DanglingEndpoint && d.element == "middle") named = true;
        }
        CHECK(named);
        CHECK(std::string(e.what()).find("middle") != std::string::npos);
    }

    std::string dup_state = "protocol t/p 1.0\nstate a initial\nstate a terminal\n";
    CHECK_THROWS_AS((void)parse_protocol_lenient(dup_state), ProtocolParseError);

    std::string dup_header = "protocol t/p 1.0\nprotocol t/q 1.0\n";
    CHECK_THROWS_AS((void)parse_protocol_lenient(dup_header), ProtocolParseError);

    std::string bad_timeout = "protocol t/p 1.0\ntimeout 0\n";
    CHECK_THROWS_AS((void)parse_protocol_lenient(bad_timeout), ProtocolParseError);

    std::string self_talk =
        "protocol t/p 1.0\nstate a initial\nstate b terminal\n"
        "transition a -> b : request from alice to alice content go\n";
    CHECK_THROWS_AS((void)parse_protocol_lenient(self_talk), ProtocolParseError);
}

TEST_CASE("timeout and comments parse") {
    std::string src =
        "# a protocol\n"
        "protocol t/p 2.1\n"
        "timeout 20\n"
        "state a initial # the start\n"
        "state b terminal\n"
        "transition a -> b : inform from ?x to ?y content msg(\"has # inside\")\n";
    ProtocolDescriptor p = parse_protocol(src);
    CHECK(p.timeout == 20);
    CHECK(p.transitions[0].content == Term::compound("msg", {Term::string("has # inside")}));
}

TEST_CASE("validate_protocol diagnostics") {
    ProtocolDescriptor p = parse_protocol(kOpenSource);
    CHECK(validate_protocol(p).empty());

    SUBCASE("terminal with outgoing transition") {
        ProtocolDescriptor bad = p;
        bad.transitions.push_back({"done", "requested", "inform", Term::variable("a"),
                                   Term::variable("b"), Term::constant("again")});
        auto diags = validate_protocol(bad);
        REQUIRE(diags.size() == 1);
        CHECK(diags[0] == Diagnostic{DiagnosticCode::TerminalOutgoing, "done"});
    }

    SUBCASE("isolated state is unreachable") {
        ProtocolDescriptor bad = p;
        bad.states.push_back({"limbo", StateKind::Normal});
        auto diags = validate_protocol(bad);
        REQUIRE(diags.size() == 1);
        CHECK(diags[0] == Diagnostic{DiagnosticCode::UnreachableState, "limbo"});
        CHECK(diags[0].str() == "UNREACHABLE_STATE(limbo)");
    }

    SUBCASE("no initial / multiple initial / no terminal") {
        ProtocolDescriptor bad = p;
        bad.states[0].kind = StateKind::Normal;
        auto diags = validate_protocol(bad);
        CHECK(std::count_if(diags.begin(), diags.end(), [](const Diagnostic& d) {
                  return d.code == DiagnosticCode::NoInitial;
              }) == 1);

        ProtocolDescriptor multi = p;
        multi.states[1].kind = StateKind::Initial;
        diags = validate_protocol(multi);
        CHECK(std::count_if(diags.begin(), diags.end(), [](const Diagnostic& d) {
                  return d.code == DiagnosticCode::MultipleInitial;
              }) == 1);

        ProtocolDescriptor open_ended = p;
        open_ended.states[2].kind = StateKind::Normal;
        diags = validate_protocol(open_ended);
        CHECK(std::count_if(diags.begin(), diags.end(), [](const Diagnostic& d) {
                  return d.code == DiagnosticCode::NoTerminal;
              }) == 1);
    }

    SUBCASE("diagnostic set is insensitive to declaration order") {
        ProtocolDescriptor bad = p;
        bad.states.push_back({"limbo", StateKind::Normal});
        bad.transitions.push_back({"done", "requested", "inform", Term::variable("a"),
                                   Term::variable("b"), Term::constant("again")});
        auto base = validate_protocol(bad);

        ProtocolDescriptor permuted = bad;
        std::reverse(permuted.transitions.begin(), permuted.transitions.end());
        std::reverse(permuted.states.begin(), permuted.states.end());
        CHECK(validate_protocol(permuted) == base);
    }
}

TEST_CASE("initiating_transitions") {
    Repository repo = Repository::load(protocols_dir());

    auto open = initiating_transitions(repo.get({"trading", "open", "1.0"}));
    REQUIRE(open.size() == 1);
    CHECK(open[0].performative == "request");
    CHECK(open[0].content == Term::constant("openAccount"));

    auto buy = initiating_transitions(repo.get({"trading", "buy", "1.0"}));
    REQUIRE(buy.size() == 1);
    CHECK(buy[0].performative == "request");
    CHECK(buy[0].content == parse_term("buy(?stock,?qty)"));

    // Two declared initiating transitions come back in file order.
    std::string two =
        "protocol t/two 1.0\n"
        "state a initial\n"
        "state b terminal\n"
        "transition a -> b : request from ?x to ?y content first\n"
        "transition a -> b : inform from ?x to ?y content second\n";
    auto both = initiating_transitions(parse_protocol(two));
    REQUIRE(both.size() == 2);
    CHECK(both[0].content == Term::constant("first"));
    CHECK(both[1].content == Term::constant("second"));
}

TEST_CASE("serialize_protocol canonical round-trip") {
    // The bundled open fixture is already canonical.
    ProtocolDescriptor open = parse_protocol(kOpenSource);
    CHECK(serialize_protocol(open) == kOpenSource);

    // Initial state moves to the front in canonical form.
    std::string shuffled =
        "protocol t/p 1.0\n"
        "state done terminal\n"
        "state start initial\n"
        "transition start -> done : inform from ?x to ?y content go\n";
    ProtocolDescriptor p = parse_protocol(shuffled);
    std::string canonical = serialize_protocol(p);
    CHECK(canonical.find("state start initial\nstate done terminal\n") != std::string::npos);
    CHECK(parse_protocol(canonical) == p);
    CHECK(serialize_protocol(parse_protocol(canonical)) == canonical); // fixed point

    for (const ProtocolId& id : Repository::load(protocols_dir()).index_order()) {
        ProtocolDescriptor proto = Repository::load(protocols_dir()).get(id);
        std::string text = serialize_protocol(proto);
        CHECK(parse_protocol(text) == proto);
        CHECK(serialize_protocol(parse_protocol(text)) == text);
    }
}

TEST_CASE("every bundled non-initial state has an incoming transition") {
    Repository repo = Repository::load(protocols_dir());
    for (const ProtocolId& id : repo.index_order()) {
        const ProtocolDescriptor& p = repo.get(id);
        for (const StateDecl& s : p.states) {
            if (s.kind == StateKind::Initial) continue;
            bool incoming = std::any_of(p.transitions.begin(), p.transitions.end(),
                                        [&](const Transition& t) { return t.to == s.name; });
            INFO(id.str(), " state ", s.name);
            CHECK(incoming);
        }
    }
}

TEST_CASE("bundled fixture files are canonical modulo comments") {
    Repository repo = Repository::load(protocols_dir());
    for (const ProtocolId& id : repo.index_order()) {
        const ProtocolDescriptor& p = repo.get(id);
        std::string canonical = serialize_protocol(p);
        CHECK(parse_protocol(canonical) == p);
    }
    // The normative open fixture is byte-canonical.
    std::string open_text = read_file(protocols_dir() / "open.proto");
    CHECK(serialize_protocol(parse_protocol(open_text)) == open_text);
    CHECK(open_text == kOpenSource);
}
