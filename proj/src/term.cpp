#include "parley/term.hpp"

#include <cctype>
#include <limits>

namespace parley {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

} // namespace

bool is_valid_symbol(std::string_view text) {
    if (text.empty() || !is_ident_start(text[0])) return false;
    for (char c : text.substr(1)) {
        if (!is_ident_char(c)) return false;
    }
    return true;
}

bool Term::CompoundNode::operator==(const CompoundNode& other) const {
    return functor == other.functor && args == other.args;
}

Term Term::constant(std::string symbol) {
    if (!is_valid_symbol(symbol)) {
        throw std::invalid_argument("invalid constant symbol: '" + symbol + "'");
    }
    return Term(ConstantNode{std::move(symbol)});
}

Term Term::number(std::int64_t value) { return Term(NumberNode{value}); }

Term Term::string(std::string text) {
    for (char c : text) {
        if (static_cast<unsigned char>(c) < 0x20) {
            throw std::invalid_argument("control character in string term");
        }
    }
    return Term(StringNode{std::move(text)});
}

Term Term::variable(std::string name) {
    if (!is_valid_symbol(name)) {
        throw std::invalid_argument("invalid variable name: '" + name + "'");
    }
    return Term(VariableNode{std::move(name)});
}

Term Term::compound(std::string functor, std::vector<Term> args) {
    if (!is_valid_symbol(functor)) {
        throw std::invalid_argument("invalid functor: '" + functor + "'");
    }
    if (args.empty()) {
        throw std::invalid_argument("compound term requires at least one argument");
    }
    return Term(CompoundNode{std::move(functor), std::move(args)});
}

TermKind Term::kind() const {
    switch (node_.index()) {
    case 0: return TermKind::Constant;
    case 1: return TermKind::Number;
    case 2: return TermKind::String;
    case 3: return TermKind::Variable;
    default: return TermKind::Compound;
    }
}

const std::string& Term::symbol() const { return std::get<ConstantNode>(node_).symbol; }
std::int64_t Term::number_value() const { return std::get<NumberNode>(node_).value; }
const std::string& Term::string_value() const { return std::get<StringNode>(node_).text; }
const std::string& Term::variable_name() const { return std::get<VariableNode>(node_).name; }
const std::string& Term::functor() const { return std::get<CompoundNode>(node_).functor; }
const std::vector<Term>& Term::args() const { return std::get<CompoundNode>(node_).args; }

bool Term::is_ground() const {
    switch (kind()) {
    case TermKind::Variable: return false;
    case TermKind::Compound:
        for (const Term& arg : args()) {
            if (!arg.is_ground()) return false;
        }
        return true;
    default: return true;
    }
}

bool Term::operator==(const Term& other) const { return node_ == other.node_; }

const Term* BindingSet::lookup(const std::string& name) const {
    auto it = map_.find(name);
    return it == map_.end() ? nullptr : &it->second;
}

bool BindingSet::bind(const std::string& name, Term value) {
    if (!value.is_ground()) {
        throw std::invalid_argument("binding value must be ground: " + name);
    }
    auto it = map_.find(name);
    if (it != map_.end()) return it->second == value;
    map_.emplace(name, std::move(value));
    return true;
}

namespace {

class TermParser {
public:
    explicit TermParser(std::string_view src) : src_(src) {}

    Term parse() {
        Term t = parse_term();
        skip_ws();
        if (pos_ != src_.size()) {
            fail("unexpected trailing input");
        }
        return t;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw TermParseError(what + " at offset " + std::to_string(pos_), pos_);
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }

    std::string read_ident() {
        std::size_t start = pos_;
        if (pos_ >= src_.size() || !is_ident_start(src_[pos_])) {
            fail("expected identifier");
        }
        ++pos_;
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
        return std::string(src_.substr(start, pos_ - start));
    }

    Term parse_term() {
        skip_ws();
        if (pos_ >= src_.size()) fail("unexpected end of input");
        char c = src_[pos_];
        if (c == '?') {
            ++pos_;
            return Term::variable(read_ident_or_fail("variable name"));
        }
        if (c == '"') return parse_string();
        if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) return parse_number();
        if (is_ident_start(c)) {
            std::string ident = read_ident();
            skip_ws();
            if (peek() == '(') return parse_compound(std::move(ident));
            return Term::constant(std::move(ident));
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    std::string read_ident_or_fail(const char* what) {
        if (pos_ >= src_.size() || !is_ident_start(src_[pos_])) {
            fail(std::string("expected ") + what);
        }
        return read_ident();
    }

    Term parse_string() {
        ++pos_; // opening quote
        std::string text;
        while (true) {
            if (pos_ >= src_.size()) fail("unterminated string");
            char c = src_[pos_];
            if (c == '"') {
                ++pos_;
                return Term::string(std::move(text));
            }
            if (c == '\\') {
                ++pos_;
                if (pos_ >= src_.size()) fail("unterminated escape");
                char esc = src_[pos_];
                if (esc != '"' && esc != '\\') fail("unknown escape sequence");
                text.push_back(esc);
                ++pos_;
                continue;
            }
            if (static_cast<unsigned char>(c) < 0x20) fail("control character in string");
            text.push_back(c);
            ++pos_;
        }
    }

    Term parse_number() {
        std::size_t start = pos_;
        bool negative = false;
        if (peek() == '-') {
            negative = true;
            ++pos_;
        }
        if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
            fail("expected digit");
        }
        std::int64_t value = 0;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
            int digit = src_[pos_] - '0';
            if (value > (std::numeric_limits<std::int64_t>::max() - digit) / 10) {
                pos_ = start;
                fail("integer literal out of range");
            }
            value = value * 10 + digit;
            ++pos_;
        }
        return Term::number(negative ? -value : value);
    }

    Term parse_compound(std::string functor) {
        ++pos_; // '('
        std::vector<Term> args;
        while (true) {
            args.push_back(parse_term());
            skip_ws();
            char c = peek();
            if (c == ',') {
                ++pos_;
                continue;
            }
            if (c == ')') {
                ++pos_;
                return Term::compound(std::move(functor), std::move(args));
            }
            fail("expected ',' or ')'");
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

void format_into(const Term& t, std::string& out) {
    switch (t.kind()) {
    case TermKind::Constant:
        out += t.symbol();
        break;
    case TermKind::Number:
        out += std::to_string(t.number_value());
        break;
    case TermKind::String:
        out += '"';
        for (char c : t.string_value()) {
            if (c == '"' || c == '\\') out += '\\';
            out += c;
        }
        out += '"';
        break;
    case TermKind::Variable:
        out += '?';
        out += t.variable_name();
        break;
    case TermKind::Compound:
        out += t.functor();
        out += '(';
        for (std::size_t i = 0; i < t.args().size(); ++i) {
            if (i > 0) out += ',';
            format_into(t.args()[i], out);
        }
        out += ')';
        break;
    }
}

bool match_into(const Term& pattern, const Term& ground, BindingSet& bindings) {
    switch (pattern.kind()) {
    case TermKind::Variable:
        return bindings.bind(pattern.variable_name(), ground);
    case TermKind::Compound: {
        if (ground.kind() != TermKind::Compound) return false;
        if (pattern.functor() != ground.functor()) return false;
        if (pattern.args().size() != ground.args().size()) return false;
        for (std::size_t i = 0; i < pattern.args().size(); ++i) {
            if (!match_into(pattern.args()[i], ground.args()[i], bindings)) return false;
        }
        return true;
    }
    default:
        return pattern == ground;
    }
}

} // namespace

Term parse_term(std::string_view source) { return TermParser(source).parse(); }

std::string format_term(const Term& t) {
    std::string out;
    format_into(t, out);
    return out;
}

std::optional<BindingSet> match_pattern(const Term& pattern, const Term& ground,
                                        const BindingSet& bindings) {
    if (!ground.is_ground()) {
        throw std::invalid_argument("match_pattern: right-hand term must be ground");
    }
    BindingSet result = bindings;
    if (!match_into(pattern, ground, result)) return std::nullopt;
    return result;
}

Term substitute(const Term& t, const BindingSet& bindings) {
    switch (t.kind()) {
    case TermKind::Variable: {
        const Term* bound = bindings.lookup(t.variable_name());
        return bound ? *bound : t;
    }
    case TermKind::Compound: {
        std::vector<Term> args;
        args.reserve(t.args().size());
        for (const Term& arg : t.args()) args.push_back(substitute(arg, bindings));
        return Term::compound(t.functor(), std::move(args));
    }
    default:
        return t;
    }
}

} // namespace parley
