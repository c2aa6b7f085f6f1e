#include "doctest.h"

#include <filesystem>

#include "parley/probe.hpp"
#include "parley/trace_view.hpp"

using namespace parley;

namespace {

std::filesystem::path source_dir() { return std::filesystem::path(PARLEY_SOURCE_DIR); }

Repository& bundled_repo() {
    static Repository repo = Repository::load(source_dir() / "protocols");
    return repo;
}

GameConfig default_config() { return GameConfig::load(source_dir() / "games" / "default.game"); }

const std::vector<ProbeIssue> kAllChecks = {ProbeIssue::Sender, ProbeIssue::Progress,
                                            ProbeIssue::Name, ProbeIssue::Address};

const IssueResult& result_for(const VulnerabilityReport& report, ProbeIssue issue) {
    for (const IssueResult& r : report.results) {
        if (r.issue == issue) return r;
    }
    throw std::logic_error("issue not in report");
}

} // namespace

TEST_CASE("classification rubric") {
    CHECK(classify(0, 4) == Susceptibility::Not);
    CHECK(classify(4, 4) == Susceptibility::Totally);
    CHECK(classify(1, 4) == Susceptibility::Somewhat);
    CHECK(classify(3, 4) == Susceptibility::Somewhat);
}

TEST_CASE("reference player is immune to every check") {
    VulnerabilityReport report =
        probe_player(default_config(), PlayerKind::Reference, kAllChecks, bundled_repo());
    REQUIRE(report.results.size() == 4);
    for (const IssueResult& result : report.results) {
        INFO(to_string(result.issue));
        CHECK(result.classification == Susceptibility::Not);
        CHECK(result.hits == 0);
    }
    CHECK(report.all_clear());

    // Engine guarantee: every injected message produced an unmatched event
    // on the player's manager and advanced nothing at its delivery tick.
    for (ProbeIssue issue : {ProbeIssue::Sender, ProbeIssue::Progress}) {
        const IssueResult& result = result_for(report, issue);
        ParsedTrace trace = parse_trace_text(result.artifacts.trace_text);
        int injected = 0;
        for (std::size_t i = 0; i < trace.lines.size(); ++i) {
            const TraceLine& line = trace.lines[i];
            bool from_rogue = line.kind == "MSG" &&
                              (line.fields.back().rfind("FORGED:", 0) == 0 ||
                               line.fields[0] == "rogue");
            if (!from_rogue || line.fields[1] != "player") continue;
            ++injected;
            Tick delivery = line.tick + 1;
            bool unmatched = false;
            bool advanced = false;
            for (const TraceLine& evt : trace.lines) {
                if (evt.kind != "EVT" || evt.tick != delivery) continue;
                if (evt.fields[0] != "player") continue;
                if (evt.fields[1] == "unmatched") unmatched = true;
                if (evt.fields[1] == "advanced") advanced = true;
            }
            INFO("injection at tick ", line.tick);
            CHECK(unmatched);
            CHECK_FALSE(advanced);
        }
        CHECK(injected == result.opportunities);
    }
}

TEST_CASE("naive player is totally susceptible to Sender and Progress") {
    VulnerabilityReport report =
        probe_player(default_config(), PlayerKind::Naive, kAllChecks, bundled_repo());
    CHECK(result_for(report, ProbeIssue::Sender).classification == Susceptibility::Totally);
    CHECK(result_for(report, ProbeIssue::Sender).hits == 4);
    CHECK(result_for(report, ProbeIssue::Progress).classification == Susceptibility::Totally);
    CHECK(result_for(report, ProbeIssue::Progress).hits == 3);
    // Sender checking is absent entirely, so hard-coded name/address issues
    // cannot arise: the naive player happily trades with the variants.
    CHECK(result_for(report, ProbeIssue::Name).classification == Susceptibility::Not);
    CHECK(result_for(report, ProbeIssue::Address).classification == Susceptibility::Not);
    CHECK_FALSE(report.all_clear());
}

TEST_CASE("partial player spans the rubric") {
    VulnerabilityReport report =
        probe_player(default_config(), PlayerKind::Partial, kAllChecks, bundled_repo());
    const IssueResult& sender = result_for(report, ProbeIssue::Sender);
    CHECK(sender.classification == Susceptibility::Somewhat);
    CHECK(sender.hits == 2); // the name-forged half defeats its string check
    CHECK(sender.opportunities == 4);
    CHECK(result_for(report, ProbeIssue::Progress).classification == Susceptibility::Totally);
    // Hard-coded name and address checks block the legitimate variants.
    CHECK(result_for(report, ProbeIssue::Name).classification == Susceptibility::Totally);
    CHECK(result_for(report, ProbeIssue::Address).classification == Susceptibility::Totally);
}

TEST_CASE("probe runs are deterministic and carry PROBE records") {
    GameConfig config = default_config();
    VulnerabilityReport a =
        probe_player(config, PlayerKind::Naive, {ProbeIssue::Sender}, bundled_repo());
    VulnerabilityReport b =
        probe_player(config, PlayerKind::Naive, {ProbeIssue::Sender}, bundled_repo());
    REQUIRE(a.results.size() == 1);
    CHECK(a.results[0].trace_hash == b.results[0].trace_hash);
    CHECK(a.results[0].artifacts.trace_text.find("PROBE\tSender\t4/4\ttotally susceptible") !=
          std::string::npos);
}

TEST_CASE("probe tick collisions are config errors") {
    GameConfig config = default_config();
    config.guru_tips.push_back({27, "acme", "rise"}); // collides with a Sender injection
    CHECK_THROWS_AS(
        (void)probe_player(config, PlayerKind::Reference, {ProbeIssue::Sender}, bundled_repo()),
        ProbeError);
}

TEST_CASE("empty check set is rejected") {
    CHECK_THROWS_AS((void)probe_player(default_config(), PlayerKind::Reference, {}, bundled_repo()),
                    ProbeError);
}

TEST_CASE("explain_report formatting") {
    VulnerabilityReport report =
        probe_player(default_config(), PlayerKind::Reference, kAllChecks, bundled_repo());
    std::string text = explain_report(report);
    CHECK(text.find("Sender: not susceptible (0/4)\n") != std::string::npos);
    CHECK(text.find("Progress: not susceptible (0/3)\n") != std::string::npos);
    CHECK(text.find("Name: not susceptible (0/1)\n") != std::string::npos);
    CHECK(text.find("Address: not susceptible (0/1)\n") != std::string::npos);

    VulnerabilityReport naive =
        probe_player(default_config(), PlayerKind::Naive, {ProbeIssue::Sender}, bundled_repo());
    std::string naive_text = explain_report(naive);
    CHECK(naive_text.find("Sender: totally susceptible (4/4)\n") != std::string::npos);
    CHECK(naive_text.find("evidence[0]") != std::string::npos);

    VulnerabilityReport empty;
    empty.player = PlayerKind::Reference;
    CHECK(explain_report(empty) == "probe report: player=reference checks=0\n");
}
