#include "parley/trace_view.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace parley {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

bool parse_tick(const std::string& text, Tick& out) {
    if (text.empty()) return false;
    try {
        std::size_t used = 0;
        out = std::stoll(text, &used);
        return used == text.size();
    } catch (...) {
        return false;
    }
}

std::size_t min_fields(const std::string& kind) {
    if (kind == "MSG") return 5; // sender receiver performative content cid
    if (kind == "EVT") return 6; // agent kind cid state length reason
    if (kind == "RNG") return 4; // stream lo hi value
    if (kind == "GAME") return 2;
    return 0;
}

} // namespace

ParsedTrace parse_trace_text(std::string_view text) {
    ParsedTrace trace;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            throw TraceFormatError("truncated record (missing newline)", pos);
        }
        std::string raw(text.substr(pos, eol - pos));
        std::vector<std::string> fields = split_tabs(raw);
        if (fields.size() < 2) throw TraceFormatError("short record", pos);

        TraceLine line;
        line.kind = fields[0];
        if (min_fields(line.kind) == 0) {
            throw TraceFormatError("unknown record kind '" + line.kind + "'", pos);
        }
        if (!parse_tick(fields[1], line.tick)) {
            throw TraceFormatError("bad tick '" + fields[1] + "'", pos);
        }
        if (fields.size() - 2 < min_fields(line.kind)) {
            throw TraceFormatError("record has too few fields", pos);
        }
        line.fields.assign(fields.begin() + 2, fields.end());
        line.byte_offset = pos;
        line.raw = std::move(raw);
        trace.lines.push_back(std::move(line));
        pos = eol + 1;
    }
    return trace;
}

ParsedTrace parse_trace_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open trace file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_trace_text(buf.str());
}

std::vector<ConversationView> reconstruct_conversations(const ParsedTrace& trace) {
    std::vector<ConversationView> views;
    auto find_view = [&views](const std::string& agent, const std::string& cid) {
        for (auto& v : views) {
            if (v.agent == agent && v.cid == cid) return &v;
        }
        return static_cast<ConversationView*>(nullptr);
    };

    // Message consumption cursors per agent, for event/message pairing.
    std::map<std::string, std::size_t> cursor;

    for (std::size_t i = 0; i < trace.lines.size(); ++i) {
        const TraceLine& line = trace.lines[i];
        if (line.kind != "EVT") continue;
        const std::string& agent = line.fields[0];
        const std::string& kind = line.fields[1];
        const std::string& cid = line.fields[2];

        if (kind == "started") {
            ConversationView view;
            view.agent = agent;
            view.cid = cid;
            std::string proto = line.fields[5]; // ns/name@version
            std::size_t at = proto.find('@');
            view.protocol = at == std::string::npos ? proto : proto.substr(0, at);
            views.push_back(std::move(view));
        } else if (kind == "advanced") {
            ConversationView* view = find_view(agent, cid);
            if (view == nullptr) continue;
            view->last_state = line.fields[3];
            view->length = static_cast<std::size_t>(std::stoll(line.fields[4]));

            // Pair with the causing message: outgoing on the same tick, else
            // incoming sent the tick before.
            ConversationView::Step step;
            step.tick = line.tick;
            step.state_after = view->last_state;
            step.length = view->length;
            std::size_t& at = cursor[agent];
            for (std::size_t j = std::max(at, std::size_t{0}); j < trace.lines.size(); ++j) {
                const TraceLine& m = trace.lines[j];
                if (m.kind != "MSG") continue;
                if (m.tick > line.tick) break;
                bool outgoing = m.tick == line.tick && m.fields[0] == agent;
                bool incoming = m.tick == line.tick - 1 && m.fields[1] == agent;
                if ((outgoing || incoming) && j >= at) {
                    step.sender = m.fields[0];
                    step.receiver = m.fields[1];
                    step.performative = m.fields[2];
                    step.content = m.fields[3];
                    at = j + 1;
                    break;
                }
            }
            view->steps.push_back(std::move(step));
        } else if (kind == "ended" || kind == "cancelled" || kind == "timed_out") {
            ConversationView* view = find_view(agent, cid);
            if (view == nullptr) continue;
            if (kind == "ended") view->final_status = line.fields[5];
            else if (kind == "cancelled") view->final_status = "cancelled";
            else view->final_status = "timed_out";
        }
    }
    return views;
}

ScoreOutcome recompute_score(const ParsedTrace& trace, ScoreMode mode,
                             const std::string& player) {
    struct AccountState {
        std::string owner;
        std::int64_t balance = 0;
    };
    std::map<std::string, AccountState> accounts;          // account id -> state
    std::map<std::string, std::int64_t> player_holdings;   // symbol -> qty
    std::map<std::string, std::int64_t> last_price;        // symbol -> price
    std::map<std::string, std::pair<std::string, std::int64_t>> property; // name -> (owner, value)

    for (const TraceLine& line : trace.lines) {
        if (line.kind != "GAME") continue;
        const std::string& kind = line.fields[0];
        if (kind == "LEDGER") {
            if (line.fields.size() < 5) {
                throw TraceConsistencyError("malformed LEDGER record: " + line.raw);
            }
            const std::string& account = line.fields[1];
            std::int64_t delta = std::stoll(line.fields[2]);
            std::int64_t after = std::stoll(line.fields[3]);
            Term reason = parse_term(line.fields[4]);

            AccountState& state = accounts[account];
            state.balance += delta;
            if (state.balance != after) {
                throw TraceConsistencyError(
                    "ledger inconsistency for " + account + " at tick " +
                    std::to_string(line.tick) + ": running balance " +
                    std::to_string(state.balance) + " != recorded " + std::to_string(after));
            }
            if (reason.kind() == TermKind::Compound && reason.functor() == "grant") {
                state.owner = reason.args()[0].symbol();
            }
            if (state.owner == player && reason.kind() == TermKind::Compound) {
                if (reason.functor() == "buy") {
                    player_holdings[reason.args()[0].symbol()] += reason.args()[1].number_value();
                } else if (reason.functor() == "sell") {
                    player_holdings[reason.args()[0].symbol()] -= reason.args()[1].number_value();
                }
            }
        } else if (kind == "PRICE") {
            last_price[line.fields[1]] = std::stoll(line.fields[2]);
        } else if (kind == "OWN") {
            property[line.fields[1]] = {line.fields[2], std::stoll(line.fields[3])};
        }
    }

    ScoreOutcome outcome;
    const AccountState* player_account = nullptr;
    for (const auto& [id, state] : accounts) {
        if (state.owner == player) player_account = &state;
    }
    if (player_account == nullptr) {
        outcome.no_account = true;
        outcome.capital = 0;
        return outcome;
    }
    outcome.capital = player_account->balance;
    if (mode == ScoreMode::MarkToMarket) {
        for (const auto& [symbol, qty] : player_holdings) {
            if (qty != 0) {
                auto it = last_price.find(symbol);
                if (it == last_price.end()) {
                    throw TraceConsistencyError("no PRICE record for held stock " + symbol);
                }
                outcome.capital += qty * it->second;
            }
        }
        for (const auto& [name, state] : property) {
            if (state.first == player) outcome.capital += state.second;
        }
    }
    return outcome;
}

std::optional<Tick> first_completion_tick(const ParsedTrace& trace,
                                          const std::string& protocol_path) {
    // cid -> protocol, per agent, from started events.
    std::map<std::pair<std::string, std::string>, std::string> protocol_of;
    for (const TraceLine& line : trace.lines) {
        if (line.kind != "EVT") continue;
        const std::string& agent = line.fields[0];
        const std::string& kind = line.fields[1];
        if (kind == "started") {
            std::string proto = line.fields[5];
            std::size_t at = proto.find('@');
            protocol_of[{agent, line.fields[2]}] =
                at == std::string::npos ? proto : proto.substr(0, at);
        } else if (kind == "ended" && line.fields[5] == "done" && line.fields[3] == "done") {
            auto it = protocol_of.find({agent, line.fields[2]});
            if (it != protocol_of.end() && it->second == protocol_path) return line.tick;
        }
    }
    return std::nullopt;
}

bool market_monotone(const ParsedTrace& trace, std::string* error) {
    std::map<std::string, std::int64_t> price;
    std::map<std::string, std::int64_t> value;
    for (const TraceLine& line : trace.lines) {
        if (line.kind != "GAME") continue;
        if (line.fields[0] == "PRICE") {
            const std::string& symbol = line.fields[1];
            std::int64_t p = std::stoll(line.fields[2]);
            auto it = price.find(symbol);
            if (it != price.end() && p <= it->second) {
                if (error != nullptr) {
                    *error = "price of " + symbol + " did not rise at tick " +
                             std::to_string(line.tick);
                }
                return false;
            }
            price[symbol] = p;
        } else if (line.fields[0] == "OWN") {
            const std::string& name = line.fields[1];
            std::int64_t v = std::stoll(line.fields[3]);
            auto it = value.find(name);
            if (it != value.end() && v < it->second) {
                if (error != nullptr) {
                    *error = "value of " + name + " decreased at tick " + std::to_string(line.tick);
                }
                return false;
            }
            value[name] = v;
        }
    }
    return true;
}

} // namespace parley
