#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace parley {

enum class TermKind { Constant, Number, String, Variable, Compound };

/// Content-language value: bare constants, exact integers, quoted strings,
/// `?`-variables and functor(arg,...) compounds. Immutable, value-semantic.
class Term {
public:
    Term() : node_(ConstantNode{"nil"}) {}

    static Term constant(std::string symbol);
    static Term number(std::int64_t value);
    static Term string(std::string text);
    static Term variable(std::string name);
    static Term compound(std::string functor, std::vector<Term> args);

    TermKind kind() const;

    const std::string& symbol() const;        // Constant
    std::int64_t number_value() const;        // Number
    const std::string& string_value() const;  // String
    const std::string& variable_name() const; // Variable
    const std::string& functor() const;       // Compound
    const std::vector<Term>& args() const;    // Compound

    // True iff no variable occurs at any depth.
    bool is_ground() const;

    bool operator==(const Term& other) const;
    bool operator!=(const Term& other) const { return !(*this == other); }

private:
    struct ConstantNode {
        std::string symbol;
        bool operator==(const ConstantNode&) const = default;
    };
    struct NumberNode {
        std::int64_t value;
        bool operator==(const NumberNode&) const = default;
    };
    struct StringNode {
        std::string text;
        bool operator==(const StringNode&) const = default;
    };
    struct VariableNode {
        std::string name;
        bool operator==(const VariableNode&) const = default;
    };
    struct CompoundNode {
        std::string functor;
        std::vector<Term> args;
        bool operator==(const CompoundNode& other) const;
    };

    using Node = std::variant<ConstantNode, NumberNode, StringNode, VariableNode, CompoundNode>;

    explicit Term(Node node) : node_(std::move(node)) {}

    Node node_;
};

// True for [A-Za-z][A-Za-z0-9_]* (constant and variable-name syntax).
bool is_valid_symbol(std::string_view text);

/// Write-once map from variable name to ground term. Binding an
/// already-bound name to a non-identical value fails; it never overwrites.
class BindingSet {
public:
    bool contains(const std::string& name) const { return map_.count(name) != 0; }
    const Term* lookup(const std::string& name) const;

    // Returns false on a write-once conflict (name bound to a different value).
    // The value must be ground.
    [[nodiscard]] bool bind(const std::string& name, Term value);

    std::size_t size() const { return map_.size(); }
    bool empty() const { return map_.empty(); }

    auto begin() const { return map_.begin(); }
    auto end() const { return map_.end(); }

    bool operator==(const BindingSet&) const = default;

private:
    std::map<std::string, Term> map_;
};

class TermParseError : public std::runtime_error {
public:
    TermParseError(const std::string& what, std::size_t position)
        : std::runtime_error(what), position_(position) {}
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

// Parses the term grammar:
//   term     := constant | number | string | variable | compound
//   constant := [A-Za-z][A-Za-z0-9_]*
//   number   := -?[0-9]+
//   string   := '"' (plain chars | \" | \\) '"'
//   variable := '?' [A-Za-z][A-Za-z0-9_]*
//   compound := functor '(' term (',' term)* ')'
// Whitespace between tokens is ignored. Throws TermParseError with the
// byte offset of the offending input.
Term parse_term(std::string_view source);

// Canonical rendering: no interior whitespace, strings quoted with \" and
// \\ escapes. parse_term(format_term(t)) == t for every term.
std::string format_term(const Term& t);

// One-way match of a pattern against a ground term under existing bindings.
// On success the result extends `bindings` so substitute(pattern, result)
// equals `ground`; returns nullopt on any structural or binding conflict.
// `bindings` is never mutated.
std::optional<BindingSet> match_pattern(const Term& pattern, const Term& ground,
                                        const BindingSet& bindings);

// Replaces every bound variable in `t` by its value; unbound variables stay.
Term substitute(const Term& t, const BindingSet& bindings);

} // namespace parley
