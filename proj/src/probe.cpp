#include "parley/probe.hpp"

#include <algorithm>
#include <set>

#include "parley/trace_view.hpp"

namespace parley {

namespace {

// Injection schedule. Fixed ticks, placed after the bundled configs' early
// tip window so a reference player's subscription bindings are established.
struct SenderProbe {
    Tick tick;
    const char* stock;
    bool forged; // claimed sender is the guru; otherwise the rogue's own name
};
constexpr SenderProbe kSenderProbes[] = {
    {25, "vapor1", false},
    {27, "vapor2", true},
    {29, "vapor3", false},
    {31, "vapor4", true},
};

struct ProgressProbe {
    Tick tick;
    const char* stock;
};
constexpr ProgressProbe kProgressProbes[] = {
    {33, "phantom1"},
    {35, "phantom2"},
    {37, "phantom3"},
};

Message probe_message(const std::string& claimed_sender, const std::string& performative,
                      Term content) {
    Message msg;
    msg.performative = performative;
    msg.sender = AgentId{claimed_sender, {"local:localhost"}};
    msg.receiver = AgentId{"player", {"local:localhost"}};
    msg.content = std::move(content);
    return msg;
}

void check_collisions(const GameConfig& config, const std::vector<RogueInjection>& script) {
    std::set<Tick> scheduled;
    for (const TipEntry& tip : config.guru_tips) scheduled.insert(tip.tick);
    for (const AuctionEntry& auction : config.auctions) scheduled.insert(auction.tick);
    for (const RogueInjection& injection : script) {
        if (scheduled.count(injection.tick) != 0) {
            throw ProbeError("probe tick " + std::to_string(injection.tick) +
                             " collides with the config schedule");
        }
    }
}

// MSG fields: sender receiver performative content cid [flag]
bool is_player_request(const TraceLine& line, const std::string& functor,
                       const std::string& arg0) {
    if (line.kind != "MSG") return false;
    if (line.fields[0] != "player" || line.fields[2] != "request") return false;
    Term content = parse_term(line.fields[3]);
    return content.kind() == TermKind::Compound && content.functor() == functor &&
           content.args()[0] == Term::constant(arg0);
}

void append_probe_record(IssueResult& result) {
    ParsedTrace parsed = parse_trace_text(result.artifacts.trace_text);
    Tick final_tick = parsed.lines.empty() ? 0 : parsed.lines.back().tick;
    result.artifacts.trace_text += "GAME\t" + std::to_string(final_tick) + "\tPROBE\t" +
                                   to_string(result.issue) + "\t" + std::to_string(result.hits) +
                                   "/" + std::to_string(result.opportunities) + "\t" +
                                   to_string(result.classification) + "\n";
    result.artifacts.trace_hash = hex16(fnv1a64(result.artifacts.trace_text));
    result.trace_hash = result.artifacts.trace_hash;
}

IssueResult run_sender_check(const GameConfig& config, PlayerKind player,
                             const Repository& repo) {
    HarnessOptions options;
    options.player = player;
    for (const SenderProbe& probe : kSenderProbes) {
        Term tip = Term::compound("tip", {Term::constant(probe.stock), Term::constant("rise")});
        options.rogue.push_back({probe.tick, probe_message("guru", "inform", tip), probe.forged});
        if (!probe.forged) options.rogue.back().msg.sender.name = "rogue";
    }
    check_collisions(config, options.rogue);

    IssueResult result;
    result.issue = ProbeIssue::Sender;
    result.opportunities = static_cast<int>(std::size(kSenderProbes));
    (void)run_game(config, repo, options, &result.artifacts);

    ParsedTrace trace = parse_trace_text(result.artifacts.trace_text);
    for (const SenderProbe& probe : kSenderProbes) {
        for (const TraceLine& line : trace.lines) {
            if (is_player_request(line, "buy", probe.stock)) {
                ++result.hits;
                result.evidence.push_back(line.raw);
                break;
            }
        }
    }
    result.classification = classify(result.hits, result.opportunities);
    append_probe_record(result);
    return result;
}

IssueResult run_progress_check(const GameConfig& config, PlayerKind player,
                               const Repository& repo) {
    HarnessOptions options;
    options.player = player;
    for (const ProgressProbe& probe : kProgressProbes) {
        Term purchased = Term::compound(
            "purchased", {Term::constant(probe.stock), Term::number(5), Term::number(500)});
        // Claimed sender is the legitimate broker, so only conversation
        // tracking (not sender string checks) can reject it.
        options.rogue.push_back({probe.tick, probe_message("broker", "inform", purchased), true});
    }
    check_collisions(config, options.rogue);

    IssueResult result;
    result.issue = ProbeIssue::Progress;
    result.opportunities = static_cast<int>(std::size(kProgressProbes));
    (void)run_game(config, repo, options, &result.artifacts);

    ParsedTrace trace = parse_trace_text(result.artifacts.trace_text);
    for (const ProgressProbe& probe : kProgressProbes) {
        for (const TraceLine& line : trace.lines) {
            if (is_player_request(line, "sell", probe.stock)) {
                ++result.hits;
                result.evidence.push_back(line.raw);
                break;
            }
        }
    }
    result.classification = classify(result.hits, result.opportunities);
    append_probe_record(result);
    return result;
}

IssueResult run_counterpart_check(const GameConfig& config, PlayerKind player,
                                  const Repository& repo, ProbeIssue issue) {
    HarnessOptions options;
    options.player = player;
    std::string variant_broker;
    if (issue == ProbeIssue::Name) {
        options.add_second_broker = true;
        variant_broker = options.second_broker_name;
    } else {
        options.broker_addresses = {"local:node2"};
        variant_broker = options.broker_name;
    }

    IssueResult result;
    result.issue = issue;
    result.opportunities = 1;
    (void)run_game(config, repo, options, &result.artifacts);

    // Robust iff the variant broker's buy conversation completed; the hit
    // counts over-restriction.
    ParsedTrace trace = parse_trace_text(result.artifacts.trace_text);
    bool completed = false;
    std::string last_attempt;
    for (const ConversationView& view : reconstruct_conversations(trace)) {
        if (view.agent != variant_broker || view.protocol != "trading/buy") continue;
        last_attempt = view.agent + " " + view.cid + " " + view.last_state;
        if (view.final_status == "done" && view.last_state == "done") completed = true;
    }
    if (!completed) {
        result.hits = 1;
        result.evidence.push_back(last_attempt.empty()
                                      ? "no buy conversation reached the variant broker"
                                      : "stalled: " + last_attempt);
    }
    result.classification = classify(result.hits, result.opportunities);
    append_probe_record(result);
    return result;
}

} // namespace

const char* to_string(ProbeIssue issue) {
    switch (issue) {
    case ProbeIssue::Sender: return "Sender";
    case ProbeIssue::Progress: return "Progress";
    case ProbeIssue::Name: return "Name";
    case ProbeIssue::Address: return "Address";
    }
    return "?";
}

std::optional<ProbeIssue> probe_issue_from_string(const std::string& text) {
    if (text == "sender") return ProbeIssue::Sender;
    if (text == "progress") return ProbeIssue::Progress;
    if (text == "name") return ProbeIssue::Name;
    if (text == "address") return ProbeIssue::Address;
    return std::nullopt;
}

const char* to_string(Susceptibility s) {
    switch (s) {
    case Susceptibility::Not: return "not susceptible";
    case Susceptibility::Somewhat: return "somewhat susceptible";
    case Susceptibility::Totally: return "totally susceptible";
    }
    return "?";
}

Susceptibility classify(int hits, int opportunities) {
    if (hits == 0) return Susceptibility::Not;
    if (hits == opportunities) return Susceptibility::Totally;
    return Susceptibility::Somewhat;
}

bool VulnerabilityReport::all_clear() const {
    return std::all_of(results.begin(), results.end(), [](const IssueResult& r) {
        return r.classification == Susceptibility::Not;
    });
}

VulnerabilityReport probe_player(const GameConfig& config, PlayerKind player,
                                 const std::vector<ProbeIssue>& checks, const Repository& repo) {
    if (checks.empty()) throw ProbeError("no probe checks selected");
    config.validate();

    VulnerabilityReport report;
    report.player = player;
    const ProbeIssue order[] = {ProbeIssue::Sender, ProbeIssue::Progress, ProbeIssue::Name,
                                ProbeIssue::Address};
    for (ProbeIssue issue : order) {
        if (std::find(checks.begin(), checks.end(), issue) == checks.end()) continue;
        switch (issue) {
        case ProbeIssue::Sender:
            report.results.push_back(run_sender_check(config, player, repo));
            break;
        case ProbeIssue::Progress:
            report.results.push_back(run_progress_check(config, player, repo));
            break;
        case ProbeIssue::Name:
        case ProbeIssue::Address:
            report.results.push_back(run_counterpart_check(config, player, repo, issue));
            break;
        }
    }
    return report;
}

std::string explain_report(const VulnerabilityReport& report) {
    std::string out = "probe report: player=" + std::string(to_string(report.player)) +
                      " checks=" + std::to_string(report.results.size()) + "\n";
    for (const IssueResult& result : report.results) {
        out += std::string(to_string(result.issue)) + ": " + to_string(result.classification) +
               " (" + std::to_string(result.hits) + "/" + std::to_string(result.opportunities) +
               ")\n";
        for (std::size_t i = 0; i < result.evidence.size(); ++i) {
            out += "  evidence[" + std::to_string(i) + "]: " + result.evidence[i] + "\n";
        }
    }
    return out;
}

} // namespace parley
