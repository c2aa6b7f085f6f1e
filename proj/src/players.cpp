#include "parley/players.hpp"

#include <memory>

namespace parley {

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

Term num(std::int64_t v) { return Term::number(v); }
Term sym(const std::string& s) { return Term::constant(s); }

// Strategy pacing; in game ticks.
constexpr Tick kHoldTicks = 22;
constexpr Tick kResaleWait = 30;
constexpr Tick kOfferWindow = 10;

class ReferencePlayer {
public:
    ReferencePlayer(AgentId self, const Repository& repo, ContactDirectory dir,
                    EngineConfig engine_config)
        : dir_(std::move(dir)), mgr_(std::move(self), &repo, engine_config) {
        mgr_.set_event_sink([this](const ConversationEvent& event) {
            if (ctx_ != nullptr) ctx_->trace_event(event);
        });
    }

    void step(AgentContext& ctx) {
        ctx_ = &ctx;
        mgr_.tick(ctx.now);
        for (const Message& msg : ctx.inbox) {
            MatchOutcome outcome = mgr_.process_message(msg, Direction::Incoming);
            // Unmatched traffic is logged by the sink; the strategy continues.
            if (outcome.kind == MatchOutcome::Kind::Unmatched) continue;
            for (const ConversationEvent& event : outcome.events) handle_event(ctx, event);
        }
        run_timers(ctx);
        ctx_ = nullptr;
    }

private:
    enum class Phase {
        Boot,
        AwaitAccount,
        AwaitBalance,
        AwaitListing,
        AwaitTip,
        AwaitPrice,
        AwaitProposal,
        AwaitPurchase,
        AwaitPortfolio,
        Holding,
        AwaitSellProposal,
        AwaitSold,
        AuctionWatch,
        AwaitWin,
        OwnProperty,
        AwaitOffers,
        AwaitPaid,
        Done,
    };

    void start(AgentContext& ctx, const ProtocolId& protocol, const AgentId& to,
               const std::string& performative, const Term& content) {
        auto [cid, msg] = mgr_.start_conversation(protocol, to, performative, content);
        ctx.send(msg);
    }

    void advance(AgentContext& ctx, const std::string& cid, const std::string& performative,
                 const Term& content) {
        ctx.send(mgr_.advance_conversation(cid, performative, content));
    }

    void run_timers(AgentContext& ctx) {
        if (phase_ == Phase::Boot) {
            phase_ = Phase::AwaitAccount;
            start(ctx, kOpen, dir_.banker, "request", sym("openAccount"));
        } else if (phase_ == Phase::Holding && ctx.now >= sell_at_) {
            phase_ = Phase::AwaitSellProposal;
            start(ctx, kSell, dir_.broker, "request",
                  Term::compound("sell", {sym(stock_), num(qty_)}));
        } else if (phase_ == Phase::OwnProperty && ctx.now >= resale_at_) {
            phase_ = Phase::AwaitOffers;
            offers_.clear();
            offers_pending_ = dir_.bidders.size();
            offers_deadline_ = ctx.now + kOfferWindow;
            Term call = Term::compound("sellProperty", {sym(property_), num(reserve_)});
            for (const AgentId& bidder : dir_.bidders) {
                auto [cid, msg] = mgr_.start_conversation(kBidderSell, bidder, "cfp", call);
                ctx.send(msg);
            }
        } else if (phase_ == Phase::AwaitOffers &&
                   (offers_pending_ == 0 || ctx.now >= offers_deadline_)) {
            decide_offers(ctx);
        }
    }

    void handle_event(AgentContext& ctx, const ConversationEvent& event) {
        if (event.kind != ConversationEvent::Kind::Advanced &&
            event.kind != ConversationEvent::Kind::Ended) {
            return;
        }
        ConversationSnapshot snap = mgr_.inspect(event.cid);
        const std::string& proto = snap.protocol.name;
        bool done = event.kind == ConversationEvent::Kind::Ended &&
                    event.final_status == ConversationStatus::Done;

        if (proto == "open" && done && snap.state == "done") {
            balance_ = snap.bindings.lookup("amt")->number_value();
            phase_ = Phase::AwaitBalance;
            start(ctx, kEnquiry, dir_.banker, "query", sym("balance"));
        } else if (proto == "enquiry" && done) {
            if (phase_ == Phase::AwaitBalance) {
                phase_ = Phase::AwaitListing;
                start(ctx, kListing, dir_.broker, "query", sym("listing"));
            }
        } else if (proto == "listing" && done) {
            if (phase_ == Phase::AwaitListing) {
                phase_ = Phase::AwaitTip;
                start(ctx, kGuruSubscribe, dir_.guru, "subscribe", sym("tips"));
            }
        } else if (proto == "guru-subscribe" &&
                   event.kind == ConversationEvent::Kind::Advanced &&
                   event.state == "subscribed" && event.length >= 3) {
            if (phase_ == Phase::AwaitTip) {
                const Term& tip = snap.history.back().content;
                if (tip.kind() == TermKind::Compound && tip.functor() == "tip" &&
                    tip.args()[1] == sym("rise")) {
                    stock_ = tip.args()[0].symbol();
                    phase_ = Phase::AwaitPrice;
                    start(ctx, kPrice, dir_.broker, "query",
                          Term::compound("price", {sym(stock_)}));
                }
            }
        } else if (proto == "price" && done) {
            if (phase_ == Phase::AwaitPrice) {
                std::int64_t price = snap.bindings.lookup("price")->number_value();
                qty_ = balance_ * 8 / 10 / price;
                if (qty_ < 1) {
                    phase_ = Phase::AwaitTip; // cannot afford a single share yet
                } else {
                    phase_ = Phase::AwaitProposal;
                    start(ctx, kBuy, dir_.broker, "request",
                          Term::compound("buy", {sym(stock_), num(qty_)}));
                }
            }
        } else if (proto == "buy") {
            if (event.kind == ConversationEvent::Kind::Advanced && event.state == "proposed") {
                std::int64_t cost = snap.bindings.lookup("cost")->number_value();
                Term body = Term::compound("accept", {sym(stock_), num(qty_), num(cost)});
                if (cost <= balance_) {
                    phase_ = Phase::AwaitPurchase;
                    advance(ctx, event.cid, "accept-proposal", body);
                } else {
                    phase_ = Phase::AwaitTip;
                    advance(ctx, event.cid, "reject-proposal",
                            Term::compound("reject", {sym(stock_), num(qty_), num(cost)}));
                }
            } else if (done && snap.state == "done") {
                balance_ -= snap.bindings.lookup("cost")->number_value();
                sell_at_ = ctx.now + kHoldTicks;
                phase_ = Phase::AwaitPortfolio;
                start(ctx, kPortfolio, dir_.broker, "query", sym("portfolio"));
            }
        } else if (proto == "portfolio" && done) {
            if (phase_ == Phase::AwaitPortfolio) phase_ = Phase::Holding;
        } else if (proto == "sell") {
            if (event.kind == ConversationEvent::Kind::Advanced && event.state == "proposed") {
                std::int64_t amount = snap.bindings.lookup("amount")->number_value();
                phase_ = Phase::AwaitSold;
                advance(ctx, event.cid, "accept-proposal",
                        Term::compound("accept", {sym(stock_), num(qty_), num(amount)}));
            } else if (done && snap.state == "done") {
                balance_ += snap.bindings.lookup("amount")->number_value();
                phase_ = Phase::AuctionWatch;
                start(ctx, kAuctionSubscribe, dir_.auctioneer, "subscribe", sym("auctions"));
            }
        } else if (proto == "auction-subscribe") {
            if (event.kind == ConversationEvent::Kind::Advanced && event.state == "asked") {
                std::string property = snap.bindings.lookup("property")->symbol();
                std::int64_t ask = snap.bindings.lookup("ask")->number_value();
                if (balance_ >= ask) {
                    phase_ = Phase::AwaitWin;
                    advance(ctx, event.cid, "propose",
                            Term::compound("bid", {sym(property), num(ask)}));
                }
            } else if (done && snap.state == "done") {
                property_ = snap.bindings.lookup("property")->symbol();
                std::int64_t paid = snap.bindings.lookup("offer")->number_value();
                balance_ -= paid;
                reserve_ = paid;
                resale_at_ = ctx.now + kResaleWait;
                phase_ = Phase::OwnProperty;
            } else if (event.kind == ConversationEvent::Kind::Ended && snap.state == "unsold") {
                phase_ = Phase::Done; // no second auction in bundled games
            }
        } else if (proto == "bidder-sell") {
            if (event.kind == ConversationEvent::Kind::Advanced && event.state == "offered") {
                offers_.push_back({event.cid, snap.bindings.lookup("amount")->number_value()});
                if (offers_pending_ > 0) --offers_pending_;
            } else if (event.kind == ConversationEvent::Kind::Ended && snap.state == "refused") {
                if (offers_pending_ > 0) --offers_pending_;
            } else if (done && snap.state == "done") {
                balance_ += snap.bindings.lookup("amount")->number_value();
                phase_ = Phase::Done;
            }
        }
    }

    void decide_offers(AgentContext& ctx) {
        if (offers_.empty()) {
            phase_ = Phase::Done;
            return;
        }
        std::size_t best = 0;
        for (std::size_t i = 1; i < offers_.size(); ++i) {
            if (offers_[i].amount > offers_[best].amount) best = i;
        }
        phase_ = Phase::AwaitPaid;
        for (std::size_t i = 0; i < offers_.size(); ++i) {
            Term body = Term::compound("offer", {sym(property_), num(offers_[i].amount)});
            advance(ctx, offers_[i].cid, i == best ? "accept-proposal" : "reject-proposal", body);
        }
    }

    struct Offer {
        std::string cid;
        std::int64_t amount;
    };

    ContactDirectory dir_;
    ConversationManager mgr_;
    AgentContext* ctx_ = nullptr;
    Phase phase_ = Phase::Boot;

    std::int64_t balance_ = 0;
    std::string stock_;
    std::int64_t qty_ = 0;
    Tick sell_at_ = 0;
    std::string property_;
    std::int64_t reserve_ = 0;
    Tick resale_at_ = 0;
    std::vector<Offer> offers_;
    std::size_t offers_pending_ = 0;
    Tick offers_deadline_ = 0;
};

// Message-by-message fixture player. Reacts to performative + content shape
// alone: no conversation state, no sender checks.
class NaivePlayer {
public:
    NaivePlayer(AgentId self, ContactDirectory dir)
        : self_(std::move(self)), dir_(std::move(dir)) {}

    virtual ~NaivePlayer() = default;

    void step(AgentContext& ctx) {
        if (ctx.now == 1) {
            send(ctx, dir_.banker, "request", sym("openAccount"));
            send(ctx, dir_.guru, "subscribe", sym("tips"));
        }
        for (const Message& msg : ctx.inbox) handle(ctx, msg);
        std::vector<std::string> due;
        for (const auto& [stock, at] : sell_at_) {
            if (ctx.now >= at && holdings_[stock] > 0) due.push_back(stock);
        }
        for (const std::string& stock : due) {
            send(ctx, dir_.broker, "request",
                 Term::compound("sell", {sym(stock), num(holdings_[stock])}));
            sell_at_.erase(stock);
        }
    }

protected:
    virtual bool accept_tip(const Message& msg) {
        (void)msg;
        return true;
    }
    virtual bool accept_proposal(const Message& msg) {
        (void)msg;
        return true;
    }

    void handle(AgentContext& ctx, const Message& msg) {
        const Term& body = msg.content;
        bool compound = body.kind() == TermKind::Compound;

        if (msg.performative == "inform" && compound && body.functor() == "tip") {
            if (!accept_tip(msg)) return;
            if (body.args()[1] == sym("rise")) {
                send(ctx, dir_.broker, "request",
                     Term::compound("buy", {body.args()[0], num(10)}));
            }
        } else if (msg.performative == "propose" && compound &&
                   (body.functor() == "cost" || body.functor() == "proceeds")) {
            if (!accept_proposal(msg)) return;
            std::vector<Term> args = body.args();
            send(ctx, msg.sender, "accept-proposal", Term::compound("accept", std::move(args)));
        } else if (msg.performative == "inform" && compound && body.functor() == "purchased") {
            const std::string& stock = body.args()[0].symbol();
            holdings_[stock] += body.args()[1].number_value();
            sell_at_[stock] = msg.sent_tick + 20;
        } else if (msg.performative == "inform" && compound && body.functor() == "sold") {
            holdings_[body.args()[0].symbol()] -= body.args()[1].number_value();
        }
    }

    void send(AgentContext& ctx, const AgentId& to, const std::string& performative,
              Term content) {
        Message msg;
        msg.performative = performative;
        msg.sender = self_;
        msg.receiver = to;
        msg.content = std::move(content);
        ctx.send(msg);
    }

    AgentId self_;
    ContactDirectory dir_;
    std::map<std::string, std::int64_t> holdings_;
    std::map<std::string, Tick> sell_at_;
};

// Checks senders on its tip handler and sender name + address on its
// proposal handler, all against hard-coded values; everything else is as
// naive as NaivePlayer.
class PartialPlayer : public NaivePlayer {
public:
    using NaivePlayer::NaivePlayer;

protected:
    bool accept_tip(const Message& msg) override { return msg.sender.name == "guru"; }

    bool accept_proposal(const Message& msg) override {
        if (msg.sender.name != "broker") return false;
        for (const std::string& address : msg.sender.addresses) {
            if (address == "local:localhost") return true;
        }
        return false;
    }
};

} // namespace

Behavior make_reference_player(const AgentId& self, const Repository& repo,
                               const ContactDirectory& directory, EngineConfig engine_config) {
    auto player = std::make_shared<ReferencePlayer>(self, repo, directory, engine_config);
    return [player](AgentContext& ctx) { player->step(ctx); };
}

Behavior make_naive_player(const AgentId& self, const ContactDirectory& directory) {
    auto player = std::make_shared<NaivePlayer>(self, directory);
    return [player](AgentContext& ctx) { player->step(ctx); };
}

Behavior make_partial_player(const AgentId& self, const ContactDirectory& directory) {
    auto player = std::make_shared<PartialPlayer>(self, directory);
    return [player](AgentContext& ctx) { player->step(ctx); };
}

Behavior make_idle_player() {
    return [](AgentContext&) {};
}

Behavior make_player(PlayerKind kind, const AgentId& self, const Repository& repo,
                     const ContactDirectory& directory, EngineConfig engine_config) {
    switch (kind) {
    case PlayerKind::Reference:
        return make_reference_player(self, repo, directory, engine_config);
    case PlayerKind::Naive: return make_naive_player(self, directory);
    case PlayerKind::Partial: return make_partial_player(self, directory);
    case PlayerKind::Idle: return make_idle_player();
    }
    throw std::logic_error("unknown player kind");
}

} // namespace parley
