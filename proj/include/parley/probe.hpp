#pragma once

#include <optional>
#include <string>
#include <vector>

#include "parley/game.hpp"

namespace parley {

enum class ProbeIssue { Sender, Progress, Name, Address };
const char* to_string(ProbeIssue issue);
std::optional<ProbeIssue> probe_issue_from_string(const std::string& text);

enum class Susceptibility { Not, Somewhat, Totally };
const char* to_string(Susceptibility s);

// The three-level rubric: no hit at all, hits everywhere it was relevant,
// or anything in between.
Susceptibility classify(int hits, int opportunities);

struct IssueResult {
    ProbeIssue issue;
    int hits = 0;          // occurrences of the issue
    int opportunities = 0; // injections, or variant-counterpart chances
    Susceptibility classification = Susceptibility::Not;
    std::vector<std::string> evidence; // trace lines backing each hit
    std::string trace_hash;
    RunArtifacts artifacts; // full per-issue run, probe record included
};

struct VulnerabilityReport {
    PlayerKind player = PlayerKind::Reference;
    std::vector<IssueResult> results; // in canonical issue order
    bool all_clear() const;
};

class ProbeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Runs one instrumented game per selected issue against the given player:
//   Sender   — rogue tips for unlisted stocks, alternating the rogue's true
//              name and a bus-forged `guru`; a hit is the player acting on
//              the content (it requests a buy of that stock).
//   Progress — forged purchase confirmations with no prior proposal; a hit
//              is the player later trying to sell the phantom stock.
//   Name     — a second broker under a different name serves the player; a
//              hit is failing to complete a buy with it (over-restriction).
//   Address  — the broker is reachable at a different address; same oracle.
// Throws ProbeError when an injection tick collides with the config
// schedule, or when checks is empty.
VulnerabilityReport probe_player(const GameConfig& config, PlayerKind player,
                                 const std::vector<ProbeIssue>& checks, const Repository& repo);

// Stable human-readable summary: one classification line per issue
// (`<Issue>: <classification> (<hits>/<opportunities>)`), evidence indented
// beneath it.
std::string explain_report(const VulnerabilityReport& report);

} // namespace parley
