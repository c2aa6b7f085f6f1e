#include "doctest.h"

#include "parley/term.hpp"
#include "oracle.hpp"

using namespace parley;
using parley::testing::TermGen;
using parley::testing::brute_force_match;

TEST_CASE("parse_term handles each production") {
    CHECK(parse_term("openAccount") == Term::constant("openAccount"));

    Term t = parse_term("openedAccount(?id,?amt)");
    REQUIRE(t.kind() == TermKind::Compound);
    CHECK(t.functor() == "openedAccount");
    REQUIRE(t.args().size() == 2);
    CHECK(t.args()[0] == Term::variable("id"));
    CHECK(t.args()[1] == Term::variable("amt"));

    CHECK(parse_term("buy(acme, 10)") ==
          Term::compound("buy", {Term::constant("acme"), Term::number(10)}));
    CHECK(parse_term("-42") == Term::number(-42));
    CHECK(parse_term("\"local:localhost\"") == Term::string("local:localhost"));
    CHECK(parse_term("\"a\\\"b\\\\c\"") == Term::string("a\"b\\c"));
    CHECK(parse_term(" nested ( a , b( ?X ) , \"s\" ) ") ==
          Term::compound("nested", {Term::constant("a"),
                                    Term::compound("b", {Term::variable("X")}),
                                    Term::string("s")}));
}

TEST_CASE("parse_term rejects malformed input with a position") {
    auto expect_error = [](const char* src) {
        CHECK_THROWS_AS((void)parse_term(src), TermParseError);
    };
    expect_error("");
    expect_error("buy(acme");       // unbalanced parens
    expect_error("buy()");          // empty arg list
    expect_error("(a)");            // empty functor
    expect_error("?1bad");          // bad variable name
    expect_error("?");
    expect_error("\"unterminated");
    expect_error("\"bad\\escape\"");
    expect_error("a b");            // trailing garbage
    expect_error("1x");
    expect_error("buy(a,)");
    expect_error("99999999999999999999"); // out of int64 range

    try {
        (void)parse_term("buy(acme");
        FAIL("expected TermParseError");
    } catch (const TermParseError& e) {
        CHECK(e.position() == 8);
    }
}

TEST_CASE("format_term canonical rendering") {
    CHECK(format_term(Term::compound("buy", {Term::constant("acme"), Term::number(10)})) ==
          "buy(acme,10)");
    CHECK(format_term(Term::variable("amt")) == "?amt");
    CHECK(format_term(Term::string("local:localhost")) == "\"local:localhost\"");
    CHECK(format_term(Term::string("a\"b\\c")) == "\"a\\\"b\\\\c\"");
    CHECK(format_term(parse_term("f( a ,  -3 , g(?X) )")) == "f(a,-3,g(?X))");
}

TEST_CASE("match_pattern basic cases") {
    BindingSet empty;

    auto identical = match_pattern(Term::constant("openAccount"), Term::constant("openAccount"), empty);
    REQUIRE(identical);
    CHECK(identical->empty());

    auto bound = match_pattern(parse_term("openedAccount(?id,?amt)"),
                               parse_term("openedAccount(acc1,10000)"), empty);
    REQUIRE(bound);
    CHECK(*bound->lookup("id") == Term::constant("acc1"));
    CHECK(*bound->lookup("amt") == Term::number(10000));

    BindingSet preset;
    REQUIRE(preset.bind("s", Term::constant("ibex")));
    CHECK_FALSE(match_pattern(parse_term("price(?s,?p)"), parse_term("price(acme,17)"), preset));

    CHECK_FALSE(match_pattern(parse_term("f(?X)"), parse_term("g(a)"), empty));    // functor
    CHECK_FALSE(match_pattern(parse_term("f(?X)"), parse_term("f(a,b)"), empty));  // arity
    CHECK_FALSE(match_pattern(parse_term("a"), parse_term("b"), empty));           // constants
    CHECK_FALSE(match_pattern(parse_term("f(?X,?X)"), parse_term("f(a,b)"), empty)); // rebind

    auto same_twice = match_pattern(parse_term("f(?X,?X)"), parse_term("f(a,a)"), empty);
    REQUIRE(same_twice);
    CHECK(*same_twice->lookup("X") == Term::constant("a"));
}

TEST_CASE("match_pattern requires a ground right-hand side") {
    BindingSet empty;
    CHECK_THROWS_AS((void)match_pattern(parse_term("?X"), parse_term("f(?Y)"), empty),
                    std::invalid_argument);
}

TEST_CASE("substitute") {
    BindingSet b;
    REQUIRE(b.bind("amt", Term::number(10000)));
    CHECK(substitute(Term::variable("amt"), b) == Term::number(10000));

    BindingSet partial;
    REQUIRE(partial.bind("s", Term::constant("acme")));
    CHECK(substitute(parse_term("buy(?s,?q)"), partial) == parse_term("buy(acme,?q)"));

    CHECK(substitute(Term::constant("done"), BindingSet{}) == Term::constant("done"));
}

TEST_CASE("groundness") {
    CHECK(parse_term("f(a,1,\"s\")").is_ground());
    CHECK_FALSE(parse_term("f(a,g(?X))").is_ground());
    CHECK_FALSE(Term::variable("X").is_ground());
}

TEST_CASE("bindings are write-once and require ground values") {
    BindingSet b;
    CHECK(b.bind("X", Term::constant("a")));
    CHECK(b.bind("X", Term::constant("a")));        // identical rebind is fine
    CHECK_FALSE(b.bind("X", Term::constant("b")));  // conflicting rebind fails
    CHECK(*b.lookup("X") == Term::constant("a"));   // and did not overwrite
    CHECK_THROWS_AS((void)b.bind("Y", Term::variable("Z")), std::invalid_argument);
}

TEST_CASE("parse/format round-trip on generated corpus") {
    TermGen gen(20260810);
    for (int i = 0; i < 1000; ++i) {
        Term t = gen.pattern();
        Term reparsed = parse_term(format_term(t));
        CHECK(reparsed == t);
        // format of canonical input is canonical (fixed point)
        CHECK(format_term(reparsed) == format_term(t));
    }
}

TEST_CASE("match_pattern agrees with the brute-force oracle") {
    TermGen gen(42);
    int successes = 0;
    for (int i = 0; i < 2000; ++i) {
        Term pattern = gen.pattern();
        // Half the time derive the ground term from the pattern so matches
        // actually occur; otherwise use an unrelated ground term.
        Term ground = gen.ground();
        if (i % 2 == 0) {
            BindingSet fill;
            (void)fill.bind("X", gen.ground(1));
            (void)fill.bind("Y", gen.ground(1));
            (void)fill.bind("Z", gen.ground(1));
            Term candidate = substitute(pattern, fill);
            if (candidate.is_ground()) ground = candidate;
        }
        BindingSet initial = gen.bindings(ground);

        auto fast = match_pattern(pattern, ground, initial);
        auto slow = brute_force_match(pattern, ground, initial);
        REQUIRE(fast.has_value() == slow.has_value());
        if (fast) {
            ++successes;
            CHECK(*fast == *slow);
            // Soundness: substitute(pattern, result) == ground.
            CHECK(substitute(pattern, *fast) == ground);
            // Monotonicity: result restricted to initial's domain equals initial.
            for (const auto& [name, value] : initial) {
                REQUIRE(fast->lookup(name) != nullptr);
                CHECK(*fast->lookup(name) == value);
            }
            // Determinism: same inputs, same outputs.
            auto again = match_pattern(pattern, ground, initial);
            REQUIRE(again);
            CHECK(*again == *fast);
        }
    }
    CHECK(successes > 200); // the derived-ground half must exercise real matches
}
