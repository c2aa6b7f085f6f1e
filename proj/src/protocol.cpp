#include "parley/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

namespace parley {

namespace {

// Identifier class for protocol/state/performative names. Wider than the
// term grammar's constant syntax: FIPA performatives and protocol names
// like accept-proposal / bidder-sell carry hyphens.
bool is_dsl_ident(std::string_view text) {
    if (text.empty() || std::isalpha(static_cast<unsigned char>(text[0])) == 0) return false;
    for (char c : text.substr(1)) {
        if (std::isalnum(static_cast<unsigned char>(c)) == 0 && c != '_' && c != '-') return false;
    }
    return true;
}

bool is_version(std::string_view text) {
    bool digit_seen = false;
    bool last_dot = true;
    for (char c : text) {
        if (c == '.') {
            if (last_dot) return false;
            last_dot = true;
        } else if (std::isdigit(static_cast<unsigned char>(c)) != 0) {
            digit_seen = true;
            last_dot = false;
        } else {
            return false;
        }
    }
    return digit_seen && !last_dot;
}

// Strips a '#' comment, ignoring '#' inside double-quoted strings.
std::string strip_comment(std::string_view line) {
    std::string out;
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_string) {
            if (c == '\\' && i + 1 < line.size()) {
                out += c;
                out += line[++i];
                continue;
            }
            if (c == '"') in_string = false;
        } else {
            if (c == '#') break;
            if (c == '"') in_string = true;
        }
        out += c;
    }
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

Term parse_participant_expr(const std::string& token, std::size_t line) {
    try {
        if (!token.empty() && token[0] == '?') {
            return Term::variable(token.substr(1));
        }
        return Term::constant(token);
    } catch (const std::invalid_argument& e) {
        throw ProtocolParseError(std::string("bad participant expression '") + token + "': " + e.what(),
                                 line);
    }
}

} // namespace

const char* to_string(StateKind kind) {
    switch (kind) {
    case StateKind::Initial: return "initial";
    case StateKind::Normal: return "normal";
    case StateKind::Terminal: return "terminal";
    }
    return "?";
}

const char* to_string(DiagnosticCode code) {
    switch (code) {
    case DiagnosticCode::UnreachableState: return "UNREACHABLE_STATE";
    case DiagnosticCode::TerminalOutgoing: return "TERMINAL_OUTGOING";
    case DiagnosticCode::NoInitial: return "NO_INITIAL";
    case DiagnosticCode::MultipleInitial: return "MULTIPLE_INITIAL";
    case DiagnosticCode::NoTerminal: return "NO_TERMINAL";
    case DiagnosticCode::DanglingEndpoint: return "DANGLING_ENDPOINT";
    }
    return "?";
}

const StateDecl* ProtocolDescriptor::find_state(std::string_view name) const {
    for (const StateDecl& s : states) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

const std::string& ProtocolDescriptor::initial_state() const {
    for (const StateDecl& s : states) {
        if (s.kind == StateKind::Initial) return s.name;
    }
    throw std::logic_error("protocol " + id.str() + " has no initial state");
}

bool ProtocolDescriptor::is_terminal(std::string_view name) const {
    const StateDecl* s = find_state(name);
    return s != nullptr && s->kind == StateKind::Terminal;
}

ProtocolDescriptor parse_protocol_lenient(std::string_view source) {
    ProtocolDescriptor proto;
    bool header_seen = false;
    std::set<std::string> state_names;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= source.size()) {
        std::size_t eol = source.find('\n', pos);
        std::string raw(eol == std::string_view::npos ? source.substr(pos)
                                                      : source.substr(pos, eol - pos));
        pos = eol == std::string_view::npos ? source.size() + 1 : eol + 1;
        ++line_no;

        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;

        std::vector<std::string> tokens = split_ws(line);
        const std::string& keyword = tokens[0];

        if (keyword == "protocol") {
            if (header_seen) throw ProtocolParseError("duplicate protocol header", line_no);
            if (tokens.size() != 3) {
                throw ProtocolParseError("expected 'protocol <namespace>/<name> <version>'", line_no);
            }
            std::size_t slash = tokens[1].find('/');
            if (slash == std::string::npos) {
                throw ProtocolParseError("protocol id must be <namespace>/<name>", line_no);
            }
            proto.id.ns = tokens[1].substr(0, slash);
            proto.id.name = tokens[1].substr(slash + 1);
            proto.id.version = tokens[2];
            if (!is_dsl_ident(proto.id.ns) || !is_dsl_ident(proto.id.name)) {
                throw ProtocolParseError("bad protocol id '" + tokens[1] + "'", line_no);
            }
            if (!is_version(proto.id.version)) {
                throw ProtocolParseError("bad version '" + proto.id.version + "'", line_no);
            }
            header_seen = true;
            continue;
        }

        if (!header_seen) throw ProtocolParseError("missing protocol header", line_no);

        if (keyword == "timeout") {
            if (proto.timeout) throw ProtocolParseError("duplicate timeout", line_no);
            if (tokens.size() != 2) throw ProtocolParseError("expected 'timeout <ticks>'", line_no);
            std::int64_t ticks = 0;
            try {
                ticks = std::stoll(tokens[1]);
            } catch (...) {
                throw ProtocolParseError("bad timeout value '" + tokens[1] + "'", line_no);
            }
            if (ticks <= 0) throw ProtocolParseError("timeout must be positive", line_no);
            proto.timeout = ticks;
            continue;
        }

        if (keyword == "state") {
            if (tokens.size() != 3) {
                throw ProtocolParseError("expected 'state <name> initial|normal|terminal'", line_no);
            }
            if (!is_dsl_ident(tokens[1])) {
                throw ProtocolParseError("bad state name '" + tokens[1] + "'", line_no);
            }
            StateKind kind;
            if (tokens[2] == "initial") kind = StateKind::Initial;
            else if (tokens[2] == "normal") kind = StateKind::Normal;
            else if (tokens[2] == "terminal") kind = StateKind::Terminal;
            else throw ProtocolParseError("bad state kind '" + tokens[2] + "'", line_no);
            if (!state_names.insert(tokens[1]).second) {
                throw ProtocolParseError("duplicate state declaration '" + tokens[1] + "'", line_no);
            }
            proto.states.push_back({tokens[1], kind});
            continue;
        }

        if (keyword == "transition") {
            // transition <from> -> <to> : <perf> from <expr> to <expr> content <term...>
            std::size_t content_kw = line.find(" content ");
            if (content_kw == std::string::npos) {
                throw ProtocolParseError("transition missing 'content' clause", line_no);
            }
            std::string head = line.substr(0, content_kw);
            std::string term_src = trim(line.substr(content_kw + 9));
            std::vector<std::string> ht = split_ws(head);
            if (ht.size() != 10 || ht[2] != "->" || ht[4] != ":" || ht[6] != "from" || ht[8] != "to") {
                throw ProtocolParseError(
                    "expected 'transition <from> -> <to> : <performative> from <expr> to <expr> content <term>'",
                    line_no);
            }
            Transition t;
            t.from = ht[1];
            t.to = ht[3];
            t.performative = ht[5];
            if (!is_dsl_ident(t.from) || !is_dsl_ident(t.to)) {
                throw ProtocolParseError("bad state name in transition", line_no);
            }
            if (!is_dsl_ident(t.performative)) {
                throw ProtocolParseError("bad performative '" + t.performative + "'", line_no);
            }
            t.sender = parse_participant_expr(ht[7], line_no);
            t.receiver = parse_participant_expr(ht[9], line_no);
            if (t.sender.kind() == TermKind::Constant && t.receiver.kind() == TermKind::Constant &&
                t.sender == t.receiver) {
                throw ProtocolParseError("transition sender and receiver are the same constant", line_no);
            }
            try {
                t.content = parse_term(term_src);
            } catch (const TermParseError& e) {
                throw ProtocolParseError(std::string("bad content term: ") + e.what(), line_no);
            }
            proto.transitions.push_back(std::move(t));
            continue;
        }

        throw ProtocolParseError("unknown directive '" + keyword + "'", line_no);
    }

    if (!header_seen) throw ProtocolParseError("missing protocol header", 1);
    // States are a set; store them in canonical order (initial first, then
    // declaration order) so parse/serialize round-trips are identities.
    std::stable_partition(proto.states.begin(), proto.states.end(),
                          [](const StateDecl& s) { return s.kind == StateKind::Initial; });
    return proto;
}

ProtocolDescriptor parse_protocol(std::string_view source) {
    ProtocolDescriptor proto = parse_protocol_lenient(source);
    std::vector<Diagnostic> diags = validate_protocol(proto);
    if (!diags.empty()) {
        std::string what = "protocol " + proto.id.str() + " is invalid:";
        for (const Diagnostic& d : diags) what += " " + d.str();
        throw ProtocolValidationError(what, std::move(diags));
    }
    return proto;
}

std::vector<Diagnostic> validate_protocol(const ProtocolDescriptor& p) {
    std::vector<Diagnostic> diags;

    std::vector<std::string> initials;
    bool has_terminal = false;
    for (const StateDecl& s : p.states) {
        if (s.kind == StateKind::Initial) initials.push_back(s.name);
        if (s.kind == StateKind::Terminal) has_terminal = true;
    }
    if (initials.empty()) diags.push_back({DiagnosticCode::NoInitial, p.id.path()});
    for (std::size_t i = 1; i < initials.size(); ++i) {
        diags.push_back({DiagnosticCode::MultipleInitial, initials[i]});
    }
    if (!has_terminal) diags.push_back({DiagnosticCode::NoTerminal, p.id.path()});

    for (const Transition& t : p.transitions) {
        for (const std::string* endpoint : {&t.from, &t.to}) {
            if (p.find_state(*endpoint) == nullptr) {
                diags.push_back({DiagnosticCode::DanglingEndpoint, *endpoint});
            }
        }
        const StateDecl* from = p.find_state(t.from);
        if (from != nullptr && from->kind == StateKind::Terminal) {
            diags.push_back({DiagnosticCode::TerminalOutgoing, t.from});
        }
    }

    if (initials.size() == 1) {
        std::set<std::string> reachable{initials[0]};
        bool grew = true;
        while (grew) {
            grew = false;
            for (const Transition& t : p.transitions) {
                if (reachable.count(t.from) != 0 && reachable.insert(t.to).second) grew = true;
            }
        }
        for (const StateDecl& s : p.states) {
            if (reachable.count(s.name) == 0) {
                diags.push_back({DiagnosticCode::UnreachableState, s.name});
            }
        }
    }

    std::sort(diags.begin(), diags.end());
    diags.erase(std::unique(diags.begin(), diags.end()), diags.end());
    return diags;
}

std::vector<Transition> initiating_transitions(const ProtocolDescriptor& p) {
    std::vector<Transition> out;
    const std::string& initial = p.initial_state();
    for (const Transition& t : p.transitions) {
        if (t.from == initial) out.push_back(t);
    }
    return out;
}

namespace {

std::string format_participant(const Term& expr) {
    if (expr.kind() == TermKind::Variable) return "?" + expr.variable_name();
    return expr.symbol();
}

} // namespace

std::string serialize_protocol(const ProtocolDescriptor& p) {
    std::string out = "protocol " + p.id.ns + "/" + p.id.name + " " + p.id.version + "\n";
    if (p.timeout) out += "timeout " + std::to_string(*p.timeout) + "\n";

    std::vector<const StateDecl*> ordered;
    for (const StateDecl& s : p.states) {
        if (s.kind == StateKind::Initial) ordered.push_back(&s);
    }
    for (const StateDecl& s : p.states) {
        if (s.kind != StateKind::Initial) ordered.push_back(&s);
    }
    for (const StateDecl* s : ordered) {
        out += "state " + s->name + " " + to_string(s->kind) + "\n";
    }
    for (const Transition& t : p.transitions) {
        out += "transition " + t.from + " -> " + t.to + " : " + t.performative + " from " +
               format_participant(t.sender) + " to " + format_participant(t.receiver) + " content " +
               format_term(t.content) + "\n";
    }
    return out;
}

} // namespace parley
