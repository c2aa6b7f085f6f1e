// parley — protocol-checked multi-agent trading games: validate protocol
// repositories, run/record/replay deterministic games, probe players for
// communication vulnerabilities, and inspect or re-score recorded traces.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "parley/game.hpp"
#include "parley/players.hpp"
#include "parley/probe.hpp"
#include "parley/trace_view.hpp"

namespace {

using namespace parley;

constexpr int kExitOk = 0;
constexpr int kExitFindings = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDivergence = 3;

struct RunFlags {
    std::string protocols = "protocols";
    std::string player = "reference";
    std::optional<std::int64_t> seed;
    std::string prices;
    std::string record;
    unsigned jobs = 1;
    bool quiet = false;
};

int cmd_validate(const std::string& repo_path) {
    std::vector<Repository::InspectEntry> entries;
    try {
        entries = Repository::inspect(repo_path);
    } catch (const RepositoryError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    bool clean = true;
    for (const auto& entry : entries) {
        if (entry.diagnostics.empty()) continue;
        clean = false;
        for (const Diagnostic& d : entry.diagnostics) {
            std::cout << entry.id.path() << "\t" << d.str() << "\n";
        }
    }
    if (clean) {
        std::cout << entries.size() << " protocols OK\n";
        return kExitOk;
    }
    return kExitFindings;
}

std::string run_summary(const GameConfig& config, const HarnessOptions& options,
                        const GameResult& result, bool quiet) {
    std::ostringstream out;
    out << "player\t" << to_string(options.player) << "\n";
    out << "seed\t" << (options.seed_override ? *options.seed_override : config.seed) << "\n";
    if (!quiet) {
        out << "ticks\t" << result.ticks_run << "\n";
        for (const auto& [protocol, done] : result.flags) {
            out << "flag." << protocol << "\t" << (done ? "done" : "incomplete") << "\n";
        }
    }
    out << "flags\t" << result.flags_summary() << "\n";
    out << "capital\t" << result.final_capital << "\n";
    if (result.no_account) out << "flag\tno_account\n";
    out << "trace_hash\t" << result.trace_hash << "\n";
    return out.str();
}

int run_one(const std::filesystem::path& config_path, const RunFlags& flags,
            const std::optional<std::vector<RngDraw>>& replay, std::string& output) {
    std::ostringstream out;
    try {
        GameConfig config = GameConfig::load(config_path);
        Repository repo = Repository::load(flags.protocols);

        HarnessOptions options;
        auto kind = player_kind_from_string(flags.player);
        if (!kind) {
            std::cerr << "error: unknown player '" << flags.player << "'\n";
            return kExitUsage;
        }
        options.player = *kind;
        if (flags.seed) options.seed_override = static_cast<std::uint64_t>(*flags.seed);
        if (!flags.prices.empty()) options.price_series_override = flags.prices;
        if (replay) options.replay = *replay;

        RunArtifacts artifacts;
        GameResult result = run_game(config, repo, options, &artifacts);

        if (!flags.record.empty()) {
            std::ofstream trace_out(flags.record, std::ios::binary);
            if (!trace_out) {
                std::cerr << "error: cannot write " << flags.record << "\n";
                return kExitUsage;
            }
            trace_out << artifacts.trace_text;
            write_replay_file(flags.record + ".replay", artifacts.draws);
            out << "record\t" << flags.record << "\n";
        }
        out << "config\t" << config_path.string() << "\n";
        out << run_summary(config, options, result, flags.quiet);
        output = out.str();
        return kExitOk;
    } catch (const ReplayDivergenceError& e) {
        std::cerr << "replay divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

int cmd_run(const std::vector<std::string>& configs, const RunFlags& flags) {
    if (configs.size() == 1 || flags.jobs <= 1) {
        int status = kExitOk;
        for (const std::string& path : configs) {
            std::string output;
            int rc = run_one(path, flags, std::nullopt, output);
            if (rc != kExitOk) return rc;
            std::cout << output;
            (void)status;
        }
        return kExitOk;
    }

    // Parallel only across independent configs; outputs print in input order.
    std::vector<std::string> outputs(configs.size());
    std::vector<int> codes(configs.size(), kExitOk);
    std::size_t next = 0;
    std::mutex mu;
    auto worker = [&] {
        while (true) {
            std::size_t index;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= configs.size()) return;
                index = next++;
            }
            codes[index] = run_one(configs[index], flags, std::nullopt, outputs[index]);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < flags.jobs; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (codes[i] != kExitOk) return codes[i];
        std::cout << outputs[i];
    }
    return kExitOk;
}

int cmd_replay(const std::string& config_path, const std::string& replay_path, RunFlags flags) {
    std::vector<RngDraw> draws;
    try {
        draws = parse_replay_file(replay_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    std::string output;
    int rc = run_one(config_path, flags, draws, output);
    if (rc == kExitOk) std::cout << output;
    return rc;
}

int cmd_probe(const std::string& config_path, const RunFlags& flags,
              const std::string& checks_arg, const std::string& record_dir) {
    std::vector<ProbeIssue> checks;
    std::stringstream list(checks_arg);
    std::string item;
    while (std::getline(list, item, ',')) {
        auto issue = probe_issue_from_string(item);
        if (!issue) {
            std::cerr << "error: unknown check '" << item << "'\n";
            return kExitUsage;
        }
        checks.push_back(*issue);
    }
    auto kind = player_kind_from_string(flags.player);
    if (!kind) {
        std::cerr << "error: unknown player '" << flags.player << "'\n";
        return kExitUsage;
    }
    try {
        GameConfig config = GameConfig::load(config_path);
        Repository repo = Repository::load(flags.protocols);
        VulnerabilityReport report = probe_player(config, *kind, checks, repo);
        std::cout << explain_report(report);
        if (!record_dir.empty()) {
            std::filesystem::create_directories(record_dir);
            for (const IssueResult& result : report.results) {
                std::ofstream out(std::filesystem::path(record_dir) /
                                      (std::string(to_string(result.issue)) + ".trace"),
                                  std::ios::binary);
                out << result.artifacts.trace_text;
            }
        }
        return report.all_clear() ? kExitOk : kExitFindings;
    } catch (const ProbeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

int cmd_trace(const std::string& trace_path, bool conversations, const std::string& explain) {
    ParsedTrace trace;
    try {
        trace = parse_trace_file(trace_path);
    } catch (const TraceFormatError& e) {
        std::cerr << "error: corrupt trace: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    std::vector<ConversationView> views = reconstruct_conversations(trace);
    if (!explain.empty()) {
        bool found = false;
        for (const ConversationView& view : views) {
            if (view.cid != explain) continue;
            found = true;
            std::cout << view.cid << "\t" << view.protocol << "\t" << view.agent << "\n";
            for (const ConversationView::Step& step : view.steps) {
                std::cout << step.tick << "\t" << step.performative << "\t" << step.sender << "->"
                          << step.receiver << "\t" << step.content << "\t=> " << step.state_after
                          << "\n";
            }
            std::cout << "status\t" << view.final_status << "\n";
        }
        if (!found) {
            std::cerr << "error: no conversation " << explain << " in trace\n";
            return kExitUsage;
        }
        return kExitOk;
    }
    (void)conversations; // listing is also the default action
    for (const ConversationView& view : views) {
        std::cout << view.cid << "\t" << view.protocol << "\t" << view.last_state << "\t"
                  << view.length << "\n";
    }
    return kExitOk;
}

int cmd_score(const std::string& trace_path, const std::string& mode_arg) {
    ScoreMode mode;
    if (mode_arg == "bank_only") mode = ScoreMode::BankOnly;
    else if (mode_arg == "mark_to_market") mode = ScoreMode::MarkToMarket;
    else {
        std::cerr << "error: unknown score mode '" << mode_arg << "'\n";
        return kExitUsage;
    }
    try {
        ParsedTrace trace = parse_trace_file(trace_path);
        ScoreOutcome outcome = recompute_score(trace, mode);
        std::cout << "capital\t" << outcome.capital << "\n";
        if (outcome.no_account) std::cout << "flag\tno_account\n";
        return kExitOk;
    } catch (const TraceConsistencyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFindings;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"conversation-checked multi-agent trading games"};
    app.require_subcommand(1);

    RunFlags flags;

    auto* validate = app.add_subcommand("validate", "load a protocol repository and report diagnostics");
    std::string repo_path;
    validate->add_option("repository", repo_path, "repository directory")->required();

    auto* run = app.add_subcommand("run", "run a game and print its summary");
    std::vector<std::string> run_configs;
    run->add_option("config", run_configs, "game config file(s)")->required();
    run->add_option("--protocols", flags.protocols, "protocol repository directory");
    run->add_option("--player", flags.player, "reference|naive|partial|idle");
    run->add_option("--seed", flags.seed, "seed override");
    run->add_option("--prices", flags.prices, "price series file override");
    run->add_option("--record", flags.record, "write the trace here (plus <file>.replay)");
    run->add_option("--jobs", flags.jobs, "parallelism across independent configs");
    run->add_flag("--quiet", flags.quiet, "suppress per-protocol detail");

    auto* replay = app.add_subcommand("replay", "re-run a game from a recorded draw log");
    std::string replay_config, replay_file;
    replay->add_option("config", replay_config, "game config file")->required();
    replay->add_option("replay", replay_file, "replay (.replay) file")->required();
    replay->add_option("--protocols", flags.protocols, "protocol repository directory");
    replay->add_option("--player", flags.player, "reference|naive|partial|idle");
    replay->add_option("--record", flags.record, "write the replayed trace here");
    replay->add_flag("--quiet", flags.quiet, "suppress per-protocol detail");

    auto* probe = app.add_subcommand("probe", "run the rogue-agent vulnerability checks");
    std::string probe_config, checks = "sender,progress,name,address", record_dir;
    probe->add_option("config", probe_config, "game config file")->required();
    probe->add_option("--protocols", flags.protocols, "protocol repository directory");
    probe->add_option("--player", flags.player, "reference|naive|partial|idle");
    probe->add_option("--checks", checks, "comma list of sender,progress,name,address");
    probe->add_option("--record-dir", record_dir, "write one trace per issue here");

    auto* trace = app.add_subcommand("trace", "inspect a recorded trace");
    std::string trace_path, explain_cid;
    bool conversations = false;
    trace->add_option("trace", trace_path, "trace file")->required();
    trace->add_flag("--conversations", conversations, "list conversations (default)");
    trace->add_option("--explain", explain_cid, "print one conversation's message path");

    auto* score = app.add_subcommand("score", "recompute the final capital from a trace");
    std::string score_path, mode = "mark_to_market";
    score->add_option("trace", score_path, "trace file")->required();
    score->add_option("--mode", mode, "bank_only|mark_to_market");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (validate->parsed()) return cmd_validate(repo_path);
    if (run->parsed()) return cmd_run(run_configs, flags);
    if (replay->parsed()) return cmd_replay(replay_config, replay_file, flags);
    if (probe->parsed()) return cmd_probe(probe_config, flags, checks, record_dir);
    if (trace->parsed()) return cmd_trace(trace_path, conversations, explain_cid);
    if (score->parsed()) return cmd_score(score_path, mode);
    return kExitUsage;
}
