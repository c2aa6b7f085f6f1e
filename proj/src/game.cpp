#include "parley/game.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "parley/players.hpp"

namespace parley {

namespace {

const char* kFlagOrder[] = {
    "trading/open",           "trading/enquiry",        "trading/listing",
    "trading/price",          "trading/portfolio",      "trading/buy",
    "trading/sell",           "trading/guru-subscribe", "trading/auction-subscribe",
    "trading/bidder-sell",
};

} // namespace

std::int64_t price_step(std::int64_t price, std::int64_t draw) {
    if (draw < 1) throw std::invalid_argument("price step draw must be >= 1");
    return price + draw;
}

std::int64_t property_step(std::int64_t value, std::int64_t growth_num, std::int64_t growth_den) {
    if (growth_num <= 0 || growth_den <= 0) {
        throw std::invalid_argument("property growth must be positive");
    }
    std::int64_t increment = (value * growth_num + growth_den - 1) / growth_den;
    return value + increment;
}

const char* to_string(PlayerKind kind) {
    switch (kind) {
    case PlayerKind::Reference: return "reference";
    case PlayerKind::Naive: return "naive";
    case PlayerKind::Partial: return "partial";
    case PlayerKind::Idle: return "idle";
    }
    return "?";
}

std::optional<PlayerKind> player_kind_from_string(const std::string& text) {
    if (text == "reference") return PlayerKind::Reference;
    if (text == "naive") return PlayerKind::Naive;
    if (text == "partial") return PlayerKind::Partial;
    if (text == "idle") return PlayerKind::Idle;
    return std::nullopt;
}

GameConfig GameConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open game config: " + path.string(),
                          {"cannot open " + path.string()});
    }

    GameConfig config;
    std::vector<std::string> problems;
    std::string line;
    std::size_t line_no = 0;

    auto parse_int = [&problems, &line_no](const std::string& tok, std::int64_t& out) {
        try {
            out = std::stoll(tok);
            return true;
        } catch (...) {
            problems.push_back("line " + std::to_string(line_no) + ": bad integer '" + tok + "'");
            return false;
        }
    };

    while (std::getline(in, line)) {
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream fields(line);
        std::string key;
        if (!(fields >> key)) continue;

        std::vector<std::string> args;
        std::string tok;
        while (fields >> tok) args.push_back(tok);
        auto want = [&](std::size_t n) {
            if (args.size() == n) return true;
            problems.push_back("line " + std::to_string(line_no) + ": '" + key + "' expects " +
                               std::to_string(n) + " values");
            return false;
        };

        std::int64_t v0 = 0, v1 = 0, v2 = 0;
        if (key == "seed") {
            if (want(1) && parse_int(args[0], v0)) config.seed = static_cast<std::uint64_t>(v0);
        } else if (key == "max_ticks") {
            if (want(1) && parse_int(args[0], v0)) config.max_ticks = v0;
        } else if (key == "initial_capital") {
            if (want(1) && parse_int(args[0], v0)) config.initial_capital = v0;
        } else if (key == "min_property_price") {
            if (want(1) && parse_int(args[0], v0)) config.min_property_price = v0;
        } else if (key == "conversation_timeout") {
            if (want(1) && parse_int(args[0], v0)) config.conversation_timeout = v0;
        } else if (key == "auction_round_ticks") {
            if (want(1) && parse_int(args[0], v0)) config.auction_round_ticks = v0;
        } else if (key == "score_mode") {
            if (want(1)) {
                if (args[0] == "bank_only") config.score_mode = ScoreMode::BankOnly;
                else if (args[0] == "mark_to_market") config.score_mode = ScoreMode::MarkToMarket;
                else problems.push_back("line " + std::to_string(line_no) + ": bad score_mode");
            }
        } else if (key == "stock") {
            if (want(4) && parse_int(args[1], v0) && parse_int(args[2], v1) &&
                parse_int(args[3], v2)) {
                config.stocks.push_back({args[0], v0, v1, v2});
            }
        } else if (key == "property") {
            if (want(4) && parse_int(args[1], v0) && parse_int(args[2], v1) &&
                parse_int(args[3], v2)) {
                config.properties.push_back({args[0], v0, v1, v2});
            }
        } else if (key == "guru_tip") {
            if (want(3) && parse_int(args[0], v0)) config.guru_tips.push_back({v0, args[1], args[2]});
        } else if (key == "auction") {
            if (want(2) && parse_int(args[0], v0)) config.auctions.push_back({v0, args[1]});
        } else if (key == "bidder") {
            if (want(3) && parse_int(args[1], v0) && parse_int(args[2], v1)) {
                config.bidders.push_back({args[0], v0, v1});
            }
        } else if (key == "price_series") {
            if (want(1)) config.price_series = path.parent_path() / args[0];
        } else {
            problems.push_back("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    if (!problems.empty()) {
        std::string what = "invalid game config " + path.string();
        for (const std::string& p : problems) what += "\n  " + p;
        throw ConfigError(what, problems);
    }
    config.validate();
    return config;
}

void GameConfig::validate() const {
    std::vector<std::string> problems;
    auto check = [&problems](bool ok, const std::string& what) {
        if (!ok) problems.push_back(what);
    };

    check(max_ticks > 0, "max_ticks: must be positive");
    check(initial_capital > 0, "initial_capital: must be positive");
    check(min_property_price > initial_capital,
          "min_property_price: must exceed initial_capital");
    check(conversation_timeout > 0, "conversation_timeout: must be positive");
    check(auction_round_ticks > 0, "auction_round_ticks: must be positive");
    check(!stocks.empty(), "stock: at least one stock is required");

    std::set<std::string> seen;
    for (const StockConfig& s : stocks) {
        check(is_valid_symbol(s.symbol), "stock " + s.symbol + ": bad symbol");
        check(seen.insert(s.symbol).second, "stock " + s.symbol + ": duplicate symbol");
        check(s.initial_price > 0, "stock " + s.symbol + ": initial price must be positive");
        check(s.step_lo >= 1, "stock " + s.symbol + ": step lower bound must be >= 1");
        check(s.step_hi >= s.step_lo, "stock " + s.symbol + ": step bounds out of order");
    }
    seen.clear();
    for (const PropertyConfig& p : properties) {
        check(is_valid_symbol(p.name), "property " + p.name + ": bad name");
        check(seen.insert(p.name).second, "property " + p.name + ": duplicate name");
        check(p.initial_value > 0, "property " + p.name + ": initial value must be positive");
        check(p.growth_num > 0 && p.growth_den > 0,
              "property " + p.name + ": growth must be positive");
    }
    auto has_stock = [this](const std::string& s) {
        return std::any_of(stocks.begin(), stocks.end(),
                           [&](const StockConfig& c) { return c.symbol == s; });
    };
    auto has_property = [this](const std::string& p) {
        return std::any_of(properties.begin(), properties.end(),
                           [&](const PropertyConfig& c) { return c.name == p; });
    };
    for (const TipEntry& t : guru_tips) {
        check(t.tick >= 1, "guru_tip: tick must be >= 1");
        check(has_stock(t.stock), "guru_tip: unknown stock " + t.stock);
        check(t.kind == "rise" || t.kind == "avoid", "guru_tip: kind must be rise|avoid");
    }
    for (const AuctionEntry& a : auctions) {
        check(a.tick >= 1, "auction: tick must be >= 1");
        check(has_property(a.property), "auction: unknown property " + a.property);
    }
    seen.clear();
    for (const BidderConfig& b : bidders) {
        check(is_valid_symbol(b.name), "bidder " + b.name + ": bad name");
        check(seen.insert(b.name).second, "bidder " + b.name + ": duplicate name");
        check(b.factor_lo >= 1 && b.factor_hi >= b.factor_lo,
              "bidder " + b.name + ": factor bounds out of order");
    }

    if (!problems.empty()) {
        std::string what = "invalid game config:";
        for (const std::string& p : problems) what += "\n  " + p;
        throw ConfigError(what, problems);
    }
}

GameWorld::GameWorld(const GameConfig& config, Platform& platform)
    : config_(config), platform_(&platform) {
    for (const StockConfig& s : config_.stocks) prices_[s.symbol] = s.initial_price;
    for (const PropertyConfig& p : config_.properties) {
        properties_.push_back({p.name, Property{"auctioneer", p.initial_value}});
    }
    for (const char* name : kFlagOrder) flags_.push_back({name, false});
    if (config_.price_series) load_price_series(*config_.price_series);
}

void GameWorld::game_record(const std::string& payload) {
    platform_->trace().append(platform_->now(), TraceRecord::Kind::Game,
                              "GAME\t" + std::to_string(platform_->now()) + "\t" + payload);
}

void GameWorld::load_price_series(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open price series: " + path.string(), {});
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty price series: " + path.string(), {});
    std::istringstream header(line);
    std::string tag;
    header >> tag;
    if (tag != "PRICES") throw ConfigError("price series must start with a PRICES header", {});
    std::vector<std::string> symbols;
    std::string sym;
    while (header >> sym) symbols.push_back(sym);
    if (symbols.size() != config_.stocks.size()) {
        throw ConfigError("price series symbol count does not match the config", {});
    }
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (symbols[i] != config_.stocks[i].symbol) {
            throw ConfigError("price series symbols must match config order (" + symbols[i] +
                                  " vs " + config_.stocks[i].symbol + ")",
                              {});
        }
    }
    std::vector<std::int64_t> prev;
    for (const StockConfig& s : config_.stocks) prev.push_back(s.initial_price);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::vector<std::int64_t> values;
        std::int64_t v;
        while (row >> v) values.push_back(v);
        if (values.size() != symbols.size()) {
            throw ConfigError("price series row " + std::to_string(series_rows_.size() + 1) +
                                  " has wrong arity",
                              {});
        }
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (values[i] <= prev[i]) {
                throw ConfigError("price series must be strictly increasing (row " +
                                      std::to_string(series_rows_.size() + 1) + ", " + symbols[i] +
                                      ")",
                                  {});
            }
        }
        prev = values;
        series_rows_.push_back(std::move(values));
    }
    if (static_cast<Tick>(series_rows_.size()) < config_.max_ticks) {
        throw ConfigError("price series has " + std::to_string(series_rows_.size()) +
                              " rows but max_ticks is " + std::to_string(config_.max_ticks),
                          {});
    }
}

void GameWorld::step_market(AgentContext& ctx) {
    if (series_mode()) {
        const auto& row = series_rows_[static_cast<std::size_t>(ctx.now - 1)];
        for (std::size_t i = 0; i < config_.stocks.size(); ++i) {
            prices_[config_.stocks[i].symbol] = row[i];
        }
    } else {
        for (const StockConfig& s : config_.stocks) {
            std::int64_t draw = ctx.random("price." + s.symbol, s.step_lo, s.step_hi);
            prices_[s.symbol] = price_step(prices_[s.symbol], draw);
        }
    }
    for (const StockConfig& s : config_.stocks) {
        game_record("PRICE\t" + s.symbol + "\t" + std::to_string(prices_[s.symbol]));
    }
    for (const PropertyConfig& p : config_.properties) {
        for (auto& [name, prop] : properties_) {
            if (name != p.name) continue;
            prop.value = property_step(prop.value, p.growth_num, p.growth_den);
            game_record("OWN\t" + name + "\t" + prop.owner + "\t" + std::to_string(prop.value));
        }
    }
}

bool GameWorld::has_stock(const std::string& symbol) const { return prices_.count(symbol) != 0; }

std::int64_t GameWorld::price(const std::string& symbol) const {
    auto it = prices_.find(symbol);
    if (it == prices_.end()) throw std::invalid_argument("unknown stock " + symbol);
    return it->second;
}

bool GameWorld::has_account(const std::string& owner) const {
    return accounts_.count(owner) != 0;
}

std::string GameWorld::open_account(const std::string& owner) {
    if (has_account(owner)) throw std::logic_error("account already open for " + owner);
    Account account;
    account.id = "acc" + std::to_string(next_account_++);
    account.balance = config_.initial_capital;
    accounts_[owner] = account;
    ledger_record(account, config_.initial_capital,
                  Term::compound("grant", {Term::constant(owner)}));
    return account.id;
}

std::int64_t GameWorld::balance(const std::string& owner) const {
    auto it = accounts_.find(owner);
    if (it == accounts_.end()) throw std::invalid_argument("no account for " + owner);
    return it->second.balance;
}

const std::string& GameWorld::account_id(const std::string& owner) const {
    auto it = accounts_.find(owner);
    if (it == accounts_.end()) throw std::invalid_argument("no account for " + owner);
    return it->second.id;
}

void GameWorld::ledger_record(const Account& account, std::int64_t delta, const Term& reason) {
    game_record("LEDGER\t" + account.id + "\t" + std::to_string(delta) + "\t" +
                std::to_string(account.balance) + "\t" + format_term(reason));
}

bool GameWorld::debit(const std::string& owner, std::int64_t amount, const Term& reason) {
    auto it = accounts_.find(owner);
    if (it == accounts_.end()) return false;
    if (amount < 0 || it->second.balance < amount) return false; // balances never go negative
    it->second.balance -= amount;
    ledger_record(it->second, -amount, reason);
    return true;
}

void GameWorld::credit(const std::string& owner, std::int64_t amount, const Term& reason) {
    auto it = accounts_.find(owner);
    if (it == accounts_.end()) throw std::invalid_argument("no account for " + owner);
    if (amount < 0) throw std::invalid_argument("credit amount must be non-negative");
    it->second.balance += amount;
    ledger_record(it->second, amount, reason);
}

std::int64_t GameWorld::holding(const std::string& owner, const std::string& symbol) const {
    auto it = holdings_.find(owner);
    if (it == holdings_.end()) return 0;
    auto jt = it->second.find(symbol);
    return jt == it->second.end() ? 0 : jt->second;
}

void GameWorld::add_holding(const std::string& owner, const std::string& symbol,
                            std::int64_t qty) {
    holdings_[owner][symbol] += qty;
}

bool GameWorld::remove_holding(const std::string& owner, const std::string& symbol,
                               std::int64_t qty) {
    if (holding(owner, symbol) < qty) return false;
    holdings_[owner][symbol] -= qty;
    return true;
}

const std::map<std::string, std::int64_t>& GameWorld::holdings_of(const std::string& owner) const {
    static const std::map<std::string, std::int64_t> empty;
    auto it = holdings_.find(owner);
    return it == holdings_.end() ? empty : it->second;
}

const GameWorld::Property& GameWorld::property(const std::string& name) const {
    for (const auto& [n, prop] : properties_) {
        if (n == name) return prop;
    }
    throw std::invalid_argument("unknown property " + name);
}

void GameWorld::transfer_property(const std::string& name, const std::string& new_owner) {
    for (auto& [n, prop] : properties_) {
        if (n != name) continue;
        prop.owner = new_owner;
        game_record("OWN\t" + name + "\t" + prop.owner + "\t" + std::to_string(prop.value));
        return;
    }
    throw std::invalid_argument("unknown property " + name);
}

void GameWorld::auction_record(const std::string& payload) { game_record("AUCTION\t" + payload); }

void GameWorld::set_flag(const std::string& protocol_path) {
    for (auto& [name, value] : flags_) {
        if (name == protocol_path) {
            value = true;
            return;
        }
    }
}

std::int64_t GameWorld::capital_of(const std::string& owner) const {
    auto it = accounts_.find(owner);
    if (it == accounts_.end()) return 0;
    std::int64_t capital = it->second.balance;
    if (config_.score_mode == ScoreMode::MarkToMarket) {
        for (const auto& [symbol, qty] : holdings_of(owner)) {
            capital += qty * prices_.at(symbol);
        }
        for (const auto& [name, prop] : properties_) {
            if (prop.owner == owner) capital += prop.value;
        }
    }
    return capital;
}

int GameResult::completed() const {
    int n = 0;
    for (const auto& [_, done] : flags) n += done ? 1 : 0;
    return n;
}

std::string GameResult::flags_summary() const {
    return std::to_string(completed()) + "/" + std::to_string(flags.size());
}

// ---------------------------------------------------------------------------
// Core agents. Each one is engine-backed: every message in or out passes
// through its own conversation manager, and replies are driven off the
// resulting conversation state.
// ---------------------------------------------------------------------------

namespace {

const ProtocolId kOpen{"trading", "open", "1.0"};
const ProtocolId kEnquiry{"trading", "enquiry", "1.0"};
const ProtocolId kListing{"trading", "listing", "1.0"};
const ProtocolId kPrice{"trading", "price", "1.0"};
const ProtocolId kPortfolio{"trading", "portfolio", "1.0"};
const ProtocolId kBuy{"trading", "buy", "1.0"};
const ProtocolId kSell{"trading", "sell", "1.0"};
const ProtocolId kGuruSubscribe{"trading", "guru-subscribe", "1.0"};
const ProtocolId kAuctionSubscribe{"trading", "auction-subscribe", "1.0"};
const ProtocolId kBidderSell{"trading", "bidder-sell", "1.0"};

std::int64_t bound_number(const BindingSet& bindings, const std::string& name) {
    const Term* t = bindings.lookup(name);
    if (t == nullptr || t->kind() != TermKind::Number) {
        throw std::logic_error("missing numeric binding ?" + name);
    }
    return t->number_value();
}

std::string bound_symbol(const BindingSet& bindings, const std::string& name) {
    const Term* t = bindings.lookup(name);
    if (t == nullptr || t->kind() != TermKind::Constant) {
        throw std::logic_error("missing constant binding ?" + name);
    }
    return t->symbol();
}

// Shared wiring for engine-backed game agents: routes manager events into
// the trace and the completion flags, and pumps the inbox.
class EngineAgent {
public:
    EngineAgent(AgentId id, const Repository& repo, GameWorld& world)
        : world_(&world), mgr_(id, &repo, EngineConfig{world.config().conversation_timeout}) {
        mgr_.set_event_sink([this](const ConversationEvent& event) { on_event(event); });
    }
    virtual ~EngineAgent() = default;

    Behavior behavior(std::shared_ptr<EngineAgent> self) {
        return [self](AgentContext& ctx) { self->step(ctx); };
    }

    void step(AgentContext& ctx) {
        ctx_ = &ctx;
        mgr_.tick(ctx.now);
        for (const Message& msg : ctx.inbox) {
            MatchOutcome outcome = mgr_.process_message(msg, Direction::Incoming);
            if (outcome.kind == MatchOutcome::Kind::Unmatched) {
                on_unmatched(ctx, msg);
            } else {
                on_activity(ctx, *outcome.cid, msg);
            }
        }
        on_tick(ctx);
        ctx_ = nullptr;
    }

protected:
    virtual void on_activity(AgentContext& ctx, const std::string& cid, const Message& msg) = 0;
    virtual void on_tick(AgentContext&) {}
    virtual void on_unmatched(AgentContext&, const Message&) {}

    // Advance one of our conversations and put the reply on the bus.
    void reply(AgentContext& ctx, const std::string& cid, const std::string& performative,
               const Term& content) {
        ctx.send(mgr_.advance_conversation(cid, performative, content));
    }

    // Raw send observed passively; an unmatched observation only warns.
    void send_raw(AgentContext& ctx, const AgentId& to, const std::string& performative,
                  const Term& content) {
        Message msg;
        msg.performative = performative;
        msg.sender = mgr_.self();
        msg.receiver = to;
        msg.content = content;
        (void)mgr_.process_message(msg, Direction::Outgoing);
        ctx.send(msg);
    }

    void on_event(const ConversationEvent& event) {
        if (ctx_ != nullptr) ctx_->trace_event(event);
        // Completion flags are world-side observations made by core agents.
        if (event.kind == ConversationEvent::Kind::Ended &&
            event.final_status == ConversationStatus::Done && event.state == "done") {
            world_->set_flag(mgr_.inspect(event.cid).protocol.path());
        }
        if (event.kind == ConversationEvent::Kind::Advanced && event.state == "subscribed" &&
            event.length >= 3 && mgr_.inspect(event.cid).protocol == kGuruSubscribe) {
            world_->set_flag(kGuruSubscribe.path());
        }
    }

    GameWorld* world_;
    ConversationManager mgr_;
    AgentContext* ctx_ = nullptr;
};

class BankerAgent : public EngineAgent {
public:
    using EngineAgent::EngineAgent;

protected:
    void on_activity(AgentContext& ctx, const std::string& cid, const Message& msg) override {
        ConversationSnapshot snap = mgr_.inspect(cid);
        if (snap.protocol == kOpen && snap.state == "requested") {
            const std::string& owner = msg.sender.name;
            if (!world_->has_account(owner)) {
                std::string account = world_->open_account(owner);
                reply(ctx, cid, "inform",
                      Term::compound("openedAccount",
                                     {Term::constant(account),
                                      Term::number(world_->config().initial_capital)}));
            } else {
                // Not part of the open protocol; goes out as a passively
                // observed send (warned as unmatched).
                send_raw(ctx, msg.sender, "refuse", Term::constant("alreadyOpen"));
            }
        } else if (snap.protocol == kEnquiry && snap.state == "asked") {
            const std::string& owner = msg.sender.name;
            if (world_->has_account(owner)) {
                reply(ctx, cid, "inform",
                      Term::compound("balance", {Term::number(world_->balance(owner))}));
            } else {
                reply(ctx, cid, "failure", Term::constant("noAccount"));
            }
        }
    }

    void on_unmatched(AgentContext& ctx, const Message& msg) override {
        if (msg.performative == "not-understood" || msg.performative == "cancel") return;
        send_raw(ctx, msg.sender, "not-understood", Term::constant("notUnderstood"));
    }
};

class BrokerAgent : public EngineAgent {
public:
    using EngineAgent::EngineAgent;

protected:
    void on_activity(AgentContext& ctx, const std::string& cid, const Message& msg) override {
        ConversationSnapshot snap = mgr_.inspect(cid);
        const std::string& player = msg.sender.name;

        if (snap.protocol == kListing && snap.state == "asked") {
            std::vector<Term> symbols;
            for (const StockConfig& s : world_->stocks()) symbols.push_back(Term::constant(s.symbol));
            reply(ctx, cid, "inform",
                  Term::compound("stocks", {Term::compound("symbols", std::move(symbols))}));
        } else if (snap.protocol == kPrice && snap.state == "asked") {
            std::string stock = bound_symbol(snap.bindings, "stock");
            if (world_->has_stock(stock)) {
                reply(ctx, cid, "inform",
                      Term::compound("price", {Term::constant(stock),
                                               Term::number(world_->price(stock))}));
            } else {
                reply(ctx, cid, "failure", Term::constant("unknownStock"));
            }
        } else if (snap.protocol == kPortfolio && snap.state == "asked") {
            const auto& holdings = world_->holdings_of(player);
            std::vector<Term> entries;
            for (const auto& [symbol, qty] : holdings) {
                if (qty > 0) {
                    entries.push_back(
                        Term::compound("holding", {Term::constant(symbol), Term::number(qty)}));
                }
            }
            Term body = entries.empty() ? Term::constant("none")
                                        : Term::compound("entries", std::move(entries));
            reply(ctx, cid, "inform", Term::compound("holdings", {body}));
        } else if (snap.protocol == kBuy && snap.state == "requested") {
            std::string stock = bound_symbol(snap.bindings, "stock");
            std::int64_t qty = bound_number(snap.bindings, "qty");
            if (!world_->has_stock(stock)) {
                reply(ctx, cid, "refuse", Term::constant("unknownStock"));
            } else {
                std::int64_t cost = qty * world_->price(stock);
                reply(ctx, cid, "propose",
                      Term::compound("cost", {Term::constant(stock), Term::number(qty),
                                              Term::number(cost)}));
            }
        } else if (snap.protocol == kBuy && snap.state == "accepted") {
            std::string stock = bound_symbol(snap.bindings, "stock");
            std::int64_t qty = bound_number(snap.bindings, "qty");
            std::int64_t cost = bound_number(snap.bindings, "cost");
            Term reason = Term::compound("buy", {Term::constant(stock), Term::number(qty)});
            if (world_->debit(player, cost, reason)) {
                world_->add_holding(player, stock, qty);
                reply(ctx, cid, "inform",
                      Term::compound("purchased", {Term::constant(stock), Term::number(qty),
                                                   Term::number(cost)}));
            } else {
                reply(ctx, cid, "failure", Term::constant("insufficientFunds"));
            }
        } else if (snap.protocol == kSell && snap.state == "requested") {
            std::string stock = bound_symbol(snap.bindings, "stock");
            std::int64_t qty = bound_number(snap.bindings, "qty");
            if (!world_->has_stock(stock)) {
                reply(ctx, cid, "refuse", Term::constant("unknownStock"));
            } else if (world_->holding(player, stock) < qty) {
                reply(ctx, cid, "refuse", Term::constant("insufficientHoldings"));
            } else {
                std::int64_t amount = qty * world_->price(stock);
                reply(ctx, cid, "propose",
                      Term::compound("proceeds", {Term::constant(stock), Term::number(qty),
                                                  Term::number(amount)}));
            }
        } else if (snap.protocol == kSell && snap.state == "accepted") {
            std::string stock = bound_symbol(snap.bindings, "stock");
            std::int64_t qty = bound_number(snap.bindings, "qty");
            std::int64_t amount = bound_number(snap.bindings, "amount");
            if (world_->remove_holding(player, stock, qty)) {
                world_->credit(player, amount,
                               Term::compound("sell", {Term::constant(stock), Term::number(qty)}));
                reply(ctx, cid, "inform",
                      Term::compound("sold", {Term::constant(stock), Term::number(qty),
                                              Term::number(amount)}));
            } else {
                reply(ctx, cid, "failure", Term::constant("insufficientHoldings"));
            }
        }
    }
};

class GuruAgent : public EngineAgent {
public:
    using EngineAgent::EngineAgent;

protected:
    void on_activity(AgentContext& ctx, const std::string& cid, const Message& msg) override {
        ConversationSnapshot snap = mgr_.inspect(cid);
        if (snap.protocol != kGuruSubscribe || snap.state != "pending") return;
        const std::string& who = msg.sender.name;
        auto existing = subscribers_.end();
        for (auto it = subscribers_.begin(); it != subscribers_.end(); ++it) {
            if (it->first == who) existing = it;
        }
        if (existing != subscribers_.end() &&
            mgr_.inspect(existing->second).status == ConversationStatus::Active) {
            reply(ctx, cid, "refuse", Term::constant("alreadySubscribed"));
            return;
        }
        if (existing != subscribers_.end()) existing->second = cid;
        else subscribers_.push_back({who, cid});
        reply(ctx, cid, "agree", Term::constant("tips"));
    }

    void on_tick(AgentContext& ctx) override {
        for (const TipEntry& tip : world_->config().guru_tips) {
            if (tip.tick != ctx.now) continue;
            Term content =
                Term::compound("tip", {Term::constant(tip.stock), Term::constant(tip.kind)});
            for (const auto& [who, cid] : subscribers_) {
                if (mgr_.inspect(cid).status != ConversationStatus::Active) continue;
                reply(ctx, cid, "inform", content);
            }
        }
    }

private:
    std::vector<std::pair<std::string, std::string>> subscribers_; // (agent, cid) in order
};

class AuctioneerAgent : public EngineAgent {
public:
    using EngineAgent::EngineAgent;

protected:
    void on_activity(AgentContext& ctx, const std::string& cid, const Message& msg) override {
        ConversationSnapshot snap = mgr_.inspect(cid);
        if (snap.protocol != kAuctionSubscribe) return;
        if (snap.state == "pending") {
            const std::string& who = msg.sender.name;
            auto existing = subscribers_.end();
            for (auto it = subscribers_.begin(); it != subscribers_.end(); ++it) {
                if (it->first == who) existing = it;
            }
            if (existing != subscribers_.end() &&
                mgr_.inspect(existing->second).status == ConversationStatus::Active) {
                reply(ctx, cid, "refuse", Term::constant("alreadySubscribed"));
                return;
            }
            if (existing != subscribers_.end()) existing->second = cid;
            else subscribers_.push_back({who, cid});
            reply(ctx, cid, "agree", Term::constant("auctions"));
        } else if (snap.state == "proposed") {
            std::int64_t offer = bound_number(snap.bindings, "offer");
            for (Auction& auction : auctions_) {
                if (!auction.open || auction.property != bound_symbol(snap.bindings, "property")) {
                    continue;
                }
                if (offer < auction.ask) {
                    reply(ctx, cid, "reject-proposal", Term::constant("lowBid"));
                } else {
                    auction.bids.push_back({msg.sender.name, cid, offer});
                }
            }
        }
    }

    void on_tick(AgentContext& ctx) override {
        for (const AuctionEntry& entry : world_->config().auctions) {
            if (entry.tick != ctx.now) continue;
            const GameWorld::Property& prop = world_->property(entry.property);
            Auction auction;
            auction.property = entry.property;
            auction.ask = std::max(world_->config().min_property_price, prop.value);
            auction.close_tick = ctx.now + world_->config().auction_round_ticks;
            world_->auction_record(entry.property + "\tannounced\t" + std::to_string(auction.ask));
            Term announce = Term::compound(
                "announce", {Term::constant(entry.property), Term::number(auction.ask)});
            Term ask = Term::compound("bid", {Term::constant(entry.property),
                                              Term::number(auction.ask)});
            for (const auto& [who, cid] : subscribers_) {
                ConversationSnapshot snap = mgr_.inspect(cid);
                if (snap.status != ConversationStatus::Active || snap.state != "subscribed") continue;
                reply(ctx, cid, "inform", announce);
                reply(ctx, cid, "cfp", ask);
                auction.participants.push_back(cid);
            }
            auctions_.push_back(std::move(auction));
        }

        for (Auction& auction : auctions_) {
            if (!auction.open || ctx.now < auction.close_tick) continue;
            close_auction(ctx, auction);
        }
    }

private:
    struct Bid {
        std::string bidder;
        std::string cid;
        std::int64_t amount;
    };
    struct Auction {
        std::string property;
        std::int64_t ask = 0;
        Tick close_tick = 0;
        std::vector<std::string> participants; // cids asked
        std::vector<Bid> bids;                 // arrival order
        bool open = true;
    };

    void close_auction(AgentContext& ctx, Auction& auction) {
        auction.open = false;
        if (auction.bids.empty()) {
            for (const std::string& cid : auction.participants) {
                if (mgr_.inspect(cid).state == "asked") {
                    reply(ctx, cid, "inform",
                          Term::compound("unsold", {Term::constant(auction.property)}));
                }
            }
            world_->auction_record(auction.property + "\tunsold");
            return;
        }
        const Bid* winner = &auction.bids.front();
        for (const Bid& bid : auction.bids) {
            if (bid.amount > winner->amount) winner = &bid;
        }
        Term reason = Term::compound("wonAuction", {Term::constant(auction.property)});
        if (!world_->debit(winner->bidder, winner->amount, reason)) {
            reply(ctx, winner->cid, "failure", Term::constant("insufficientFunds"));
            world_->auction_record(auction.property + "\tunsold");
            return;
        }
        world_->transfer_property(auction.property, winner->bidder);
        world_->auction_record(auction.property + "\tsold\t" + winner->bidder + "\t" +
                               std::to_string(winner->amount));
        Term winning_bid = Term::compound(
            "bid", {Term::constant(auction.property), Term::number(winner->amount)});
        reply(ctx, winner->cid, "accept-proposal", winning_bid);
        reply(ctx, winner->cid, "inform",
              Term::compound("sold", {Term::constant(auction.property),
                                      Term::number(winner->amount)}));
        for (const Bid& bid : auction.bids) {
            if (bid.cid != winner->cid) {
                reply(ctx, bid.cid, "reject-proposal", Term::constant("lowBid"));
            }
        }
    }

    std::vector<std::pair<std::string, std::string>> subscribers_;
    std::vector<Auction> auctions_;
};

class BidderAgent : public EngineAgent {
public:
    BidderAgent(AgentId id, const Repository& repo, GameWorld& world, BidderConfig config)
        : EngineAgent(std::move(id), repo, world), config_(std::move(config)) {}

protected:
    void on_activity(AgentContext& ctx, const std::string& cid, const Message& msg) override {
        ConversationSnapshot snap = mgr_.inspect(cid);
        if (snap.protocol != kBidderSell) return;
        if (snap.state == "called") {
            std::string property = bound_symbol(snap.bindings, "property");
            std::int64_t reserve = bound_number(snap.bindings, "reserve");
            std::int64_t factor = ctx.random("bidder." + config_.name + ".factor",
                                             config_.factor_lo, config_.factor_hi);
            std::int64_t offer = world_->property(property).value * factor / 100;
            if (offer >= reserve) {
                reply(ctx, cid, "propose",
                      Term::compound("offer", {Term::constant(property), Term::number(offer)}));
            } else {
                reply(ctx, cid, "refuse", Term::constant("noOffer"));
            }
        } else if (snap.state == "accepted") {
            std::string property = bound_symbol(snap.bindings, "property");
            std::int64_t amount = bound_number(snap.bindings, "amount");
            world_->credit(msg.sender.name, amount,
                           Term::compound("soldProperty", {Term::constant(property)}));
            world_->transfer_property(property, mgr_.self().name);
            reply(ctx, cid, "inform",
                  Term::compound("paid", {Term::constant(property), Term::number(amount)}));
        }
    }

private:
    BidderConfig config_;
};

AgentId make_agent(const std::string& name, std::vector<std::string> addresses = {
                                                "local:localhost"}) {
    return AgentId{name, std::move(addresses)};
}

} // namespace

Behavior make_banker_agent(const AgentId& id, const Repository& repo, GameWorld& world) {
    auto agent = std::make_shared<BankerAgent>(id, repo, world);
    return agent->behavior(agent);
}

Behavior make_broker_agent(const AgentId& id, const Repository& repo, GameWorld& world) {
    auto agent = std::make_shared<BrokerAgent>(id, repo, world);
    return agent->behavior(agent);
}

Behavior make_guru_agent(const AgentId& id, const Repository& repo, GameWorld& world) {
    auto agent = std::make_shared<GuruAgent>(id, repo, world);
    return agent->behavior(agent);
}

Behavior make_auctioneer_agent(const AgentId& id, const Repository& repo, GameWorld& world) {
    auto agent = std::make_shared<AuctioneerAgent>(id, repo, world);
    return agent->behavior(agent);
}

Behavior make_bidder_agent(const AgentId& id, const Repository& repo, GameWorld& world,
                           const BidderConfig& config) {
    auto agent = std::make_shared<BidderAgent>(id, repo, world, config);
    return agent->behavior(agent);
}

GameResult run_game(const GameConfig& config, const Repository& repo,
                    const HarnessOptions& options, RunArtifacts* artifacts) {
    config.validate();
    GameConfig effective = config;
    if (options.seed_override) effective.seed = *options.seed_override;
    if (options.price_series_override) effective.price_series = options.price_series_override;

    Platform platform(effective.seed);
    if (options.replay) platform.rng().load_replay(*options.replay);
    GameWorld world(effective, platform);

    // Market first: prices move before anyone trades within a tick.
    platform.register_agent(make_agent("market"),
                            [&world](AgentContext& ctx) { world.step_market(ctx); },
                            [](Tick) { return false; });

    platform.register_agent(make_agent("banker"),
                            make_banker_agent(make_agent("banker"), repo, world));

    AgentId broker_id{options.broker_name, options.broker_addresses};
    platform.register_agent(broker_id, make_broker_agent(broker_id, repo, world));

    AgentId player_facing_broker = broker_id;
    if (options.add_second_broker) {
        AgentId second_id = make_agent(options.second_broker_name);
        platform.register_agent(second_id, make_broker_agent(second_id, repo, world));
        player_facing_broker = second_id;
    }

    platform.register_agent(make_agent("guru"), make_guru_agent(make_agent("guru"), repo, world));
    platform.register_agent(make_agent("auctioneer"),
                            make_auctioneer_agent(make_agent("auctioneer"), repo, world));

    ContactDirectory directory;
    directory.banker = *platform.agent_id("banker");
    directory.broker = player_facing_broker;
    directory.guru = *platform.agent_id("guru");
    directory.auctioneer = *platform.agent_id("auctioneer");
    for (const BidderConfig& b : config.bidders) {
        AgentId id = make_agent(b.name);
        platform.register_agent(id, make_bidder_agent(id, repo, world, b));
        directory.bidders.push_back(id);
    }

    AgentId player_id = make_agent("player");
    platform.register_agent(player_id,
                            make_player(options.player, player_id, repo, directory,
                                        EngineConfig{effective.conversation_timeout}));

    if (!options.rogue.empty()) {
        AgentId rogue_id = make_agent("rogue");
        platform.grant_forge_privilege("rogue");
        std::vector<RogueInjection> script = options.rogue;
        platform.register_agent(
            rogue_id,
            [script](AgentContext& ctx) {
                for (const RogueInjection& injection : script) {
                    if (injection.tick != ctx.now) continue;
                    if (injection.forged) {
                        ctx.platform.send_forged(injection.msg, ctx.self.name);
                    } else {
                        Message msg = injection.msg;
                        msg.sender = ctx.self;
                        ctx.send(msg);
                    }
                }
            },
            [script](Tick now) {
                for (const RogueInjection& injection : script) {
                    if (injection.tick > now) return false;
                }
                return true;
            });
    }

    RunResult run = platform.run(effective.max_ticks);

    GameResult result;
    result.ticks_run = run.ticks_run;
    result.flags = world.flags();
    result.no_account = !world.has_account("player");
    result.final_capital = world.capital_of("player");
    result.trace_hash = platform.trace().hash();
    if (artifacts != nullptr) {
        artifacts->trace_text = platform.trace().serialize();
        artifacts->trace_hash = result.trace_hash;
        artifacts->draws = platform.rng().draw_log();
    }
    return result;
}

} // namespace parley
