#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parley/runtime.hpp"

namespace parley {

enum class ScoreMode { BankOnly, MarkToMarket };

struct StockConfig {
    std::string symbol;
    std::int64_t initial_price;
    std::int64_t step_lo;
    std::int64_t step_hi;
};

struct PropertyConfig {
    std::string name;
    std::int64_t initial_value;
    std::int64_t growth_num;
    std::int64_t growth_den;
};

struct TipEntry {
    Tick tick;
    std::string stock;
    std::string kind; // rise | avoid
};

struct AuctionEntry {
    Tick tick;
    std::string property;
};

struct BidderConfig {
    std::string name;
    std::int64_t factor_lo; // percent of current value
    std::int64_t factor_hi;
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, std::vector<std::string> problems)
        : std::runtime_error(what), problems_(std::move(problems)) {}
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

struct GameConfig {
    std::uint64_t seed = 1;
    Tick max_ticks = 500;
    std::int64_t initial_capital = 10000;
    std::int64_t min_property_price = 15000;
    Tick conversation_timeout = 50;
    Tick auction_round_ticks = 5;
    ScoreMode score_mode = ScoreMode::MarkToMarket;
    std::vector<StockConfig> stocks;
    std::vector<PropertyConfig> properties;
    std::vector<TipEntry> guru_tips;
    std::vector<AuctionEntry> auctions;
    std::vector<BidderConfig> bidders;
    std::optional<std::filesystem::path> price_series; // resolved against the config file

    static GameConfig load(const std::filesystem::path& path);
    // Collects every violated field into one ConfigError.
    void validate() const;
};

// Strictly rising price update: the draw is a configured positive step.
std::int64_t price_step(std::int64_t price, std::int64_t draw);
// value + ceil(value * num / den); strictly increasing for positive growth.
std::int64_t property_step(std::int64_t value, std::int64_t growth_num, std::int64_t growth_den);

/// Shared economic state mutated by the core agents: prices, the bank
/// ledger, stock holdings, the property registry, auction bookkeeping and
/// the per-protocol completion flags. Emits GAME trace records.
class GameWorld {
public:
    GameWorld(const GameConfig& config, Platform& platform);

    const GameConfig& config() const { return config_; }

    // Market.
    void step_market(AgentContext& ctx);
    bool has_stock(const std::string& symbol) const;
    std::int64_t price(const std::string& symbol) const;
    const std::vector<StockConfig>& stocks() const { return config_.stocks; }

    // Bank.
    bool has_account(const std::string& owner) const;
    std::string open_account(const std::string& owner); // grants initial capital
    std::int64_t balance(const std::string& owner) const;
    const std::string& account_id(const std::string& owner) const;
    [[nodiscard]] bool debit(const std::string& owner, std::int64_t amount, const Term& reason);
    void credit(const std::string& owner, std::int64_t amount, const Term& reason);

    // Holdings.
    std::int64_t holding(const std::string& owner, const std::string& symbol) const;
    void add_holding(const std::string& owner, const std::string& symbol, std::int64_t qty);
    [[nodiscard]] bool remove_holding(const std::string& owner, const std::string& symbol,
                                      std::int64_t qty);
    const std::map<std::string, std::int64_t>& holdings_of(const std::string& owner) const;

    // Properties.
    struct Property {
        std::string owner;
        std::int64_t value;
    };
    const Property& property(const std::string& name) const;
    void transfer_property(const std::string& name, const std::string& new_owner);

    void auction_record(const std::string& payload); // AUCTION <...> fields

    // Completion flags, keyed by protocol path in Table order.
    void set_flag(const std::string& protocol_path);
    const std::vector<std::pair<std::string, bool>>& flags() const { return flags_; }

    std::int64_t capital_of(const std::string& owner) const; // per score_mode

    void load_price_series(const std::filesystem::path& path);
    bool series_mode() const { return !series_rows_.empty(); }

private:
    struct Account {
        std::string id;
        std::int64_t balance = 0;
    };

    void game_record(const std::string& payload);
    void ledger_record(const Account& account, std::int64_t delta, const Term& reason);

    GameConfig config_;
    Platform* platform_;
    std::map<std::string, std::int64_t> prices_;
    std::map<std::string, Account> accounts_; // owner -> account
    std::map<std::string, std::map<std::string, std::int64_t>> holdings_;
    std::vector<std::pair<std::string, Property>> properties_; // config order
    std::vector<std::pair<std::string, bool>> flags_;
    std::vector<std::vector<std::int64_t>> series_rows_;
    int next_account_ = 1;
};

// Per-role contacts the player is configured with; the probe harness swaps
// in variant counterparts here.
struct ContactDirectory {
    AgentId banker;
    AgentId broker;
    AgentId guru;
    AgentId auctioneer;
    std::vector<AgentId> bidders;
};

enum class PlayerKind { Reference, Naive, Partial, Idle };
const char* to_string(PlayerKind kind);
std::optional<PlayerKind> player_kind_from_string(const std::string& text);

struct RogueInjection {
    Tick tick;
    Message msg;  // sender carries the claimed identity
    bool forged;  // true: bus stamps the claimed name and flags the record
};

struct HarnessOptions {
    PlayerKind player = PlayerKind::Reference;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::filesystem::path> price_series_override;
    std::optional<std::vector<RngDraw>> replay;

    std::string broker_name = "broker";
    std::vector<std::string> broker_addresses{"local:localhost"};
    bool add_second_broker = false; // registers a second broker the player is pointed at
    std::string second_broker_name = "broker2";

    std::vector<RogueInjection> rogue; // delivered by a privileged rogue agent
};

struct GameResult {
    std::int64_t final_capital = 0;
    bool no_account = false;
    std::vector<std::pair<std::string, bool>> flags;
    std::string trace_hash;
    Tick ticks_run = 0;

    int completed() const;
    std::string flags_summary() const; // e.g. "10/10"
};

struct RunArtifacts {
    std::string trace_text;
    std::string trace_hash;
    std::vector<RngDraw> draws;
};

// Core agent behaviors; run_game composes these, and tests drive them on
// small purpose-built platforms.
Behavior make_banker_agent(const AgentId& id, const Repository& repo, GameWorld& world);
Behavior make_broker_agent(const AgentId& id, const Repository& repo, GameWorld& world);
Behavior make_guru_agent(const AgentId& id, const Repository& repo, GameWorld& world);
Behavior make_auctioneer_agent(const AgentId& id, const Repository& repo, GameWorld& world);
Behavior make_bidder_agent(const AgentId& id, const Repository& repo, GameWorld& world,
                           const BidderConfig& config);

// Registers the market, the core agents, the configured bidders and the
// selected player, runs the platform to max_ticks (or quiescence) and scores
// the outcome. Fully deterministic for a fixed (config, options) pair.
GameResult run_game(const GameConfig& config, const Repository& repo,
                    const HarnessOptions& options = {}, RunArtifacts* artifacts = nullptr);

} // namespace parley
