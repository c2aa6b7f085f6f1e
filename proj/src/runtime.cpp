#include "parley/runtime.hpp"

#include <fstream>
#include <sstream>

namespace parley {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char byte : bytes) {
        hash ^= byte;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string hex16(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

const char* to_string(TraceRecord::Kind kind) {
    switch (kind) {
    case TraceRecord::Kind::Msg: return "MSG";
    case TraceRecord::Kind::Evt: return "EVT";
    case TraceRecord::Kind::Rng: return "RNG";
    case TraceRecord::Kind::Game: return "GAME";
    }
    return "?";
}

void TraceLog::append(Tick tick, TraceRecord::Kind kind, std::string line) {
    if (!records_.empty() && tick < records_.back().tick) {
        throw std::logic_error("trace records must be tick-monotone");
    }
    records_.push_back({tick, kind, std::move(line)});
}

std::string TraceLog::serialize() const {
    std::string out;
    for (const TraceRecord& r : records_) {
        out += r.line;
        out += '\n';
    }
    return out;
}

void TraceLog::write_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write trace file: " + path.string());
    out << serialize();
}

namespace {

std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace

void RandomSource::load_replay(std::vector<RngDraw> draws) {
    replay_ = std::move(draws);
    replay_pos_ = 0;
}

std::int64_t RandomSource::draw(const std::string& stream, std::int64_t lo, std::int64_t hi,
                                Tick now) {
    if (lo > hi) throw std::invalid_argument("random draw requires lo <= hi");

    std::int64_t value = 0;
    if (replay_) {
        if (replay_pos_ >= replay_->size()) {
            throw ReplayDivergenceError("draw log exhausted (stream " + stream + ")", replay_pos_);
        }
        const RngDraw& recorded = (*replay_)[replay_pos_];
        if (recorded.stream != stream || recorded.lo != lo || recorded.hi != hi) {
            throw ReplayDivergenceError("expected stream " + recorded.stream + " [" +
                                            std::to_string(recorded.lo) + "," +
                                            std::to_string(recorded.hi) + "], got " + stream +
                                            " [" + std::to_string(lo) + "," + std::to_string(hi) +
                                            "]",
                                        replay_pos_);
        }
        value = recorded.value;
        ++replay_pos_;
    } else {
        std::uint64_t counter = counters_[stream]++;
        std::uint64_t key = (seed_ ^ fnv1a64(stream)) + (counter + 1) * 0x9E3779B97F4A7C15ULL;
        std::uint64_t raw = splitmix64_mix(key);
        std::uint64_t range = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
        value = range == 0 ? static_cast<std::int64_t>(raw)
                           : lo + static_cast<std::int64_t>(raw % range);
    }
    log_.push_back({now, stream, lo, hi, value});
    return value;
}

void RandomSource::check_exhausted() const {
    if (replay_ && replay_pos_ < replay_->size()) {
        throw ReplayDivergenceError("recorded draws left unconsumed at run end", replay_pos_);
    }
}

std::vector<RngDraw> parse_replay_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open replay file: " + path.string());
    std::vector<RngDraw> draws;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string kind;
        RngDraw d;
        if (!(fields >> kind >> d.tick >> d.stream >> d.lo >> d.hi >> d.value) || kind != "RNG") {
            throw std::runtime_error("bad replay record at line " + std::to_string(line_no) +
                                     " of " + path.string());
        }
        draws.push_back(std::move(d));
    }
    return draws;
}

void write_replay_file(const std::filesystem::path& path, const std::vector<RngDraw>& draws) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write replay file: " + path.string());
    for (const RngDraw& d : draws) {
        out << "RNG\t" << d.tick << '\t' << d.stream << '\t' << d.lo << '\t' << d.hi << '\t'
            << d.value << '\n';
    }
}

std::string format_msg_record(const Message& msg, const std::string& flag) {
    std::string line = "MSG\t" + std::to_string(msg.sent_tick) + "\t" + msg.sender.name + "\t" +
                       msg.receiver.name + "\t" + msg.performative + "\t" +
                       format_term(msg.content) + "\t" + msg.cid_hint.value_or("-");
    if (!flag.empty()) line += "\t" + flag;
    return line;
}

void AgentContext::send(Message msg) { platform.send(std::move(msg)); }

std::int64_t AgentContext::random(const std::string& stream, std::int64_t lo, std::int64_t hi) {
    std::int64_t value = platform.rng().draw(stream, lo, hi, platform.now());
    platform.trace().append(platform.now(), TraceRecord::Kind::Rng,
                            "RNG\t" + std::to_string(platform.now()) + "\t" + stream + "\t" +
                                std::to_string(lo) + "\t" + std::to_string(hi) + "\t" +
                                std::to_string(value));
    return value;
}

void AgentContext::trace_game(const std::string& payload) {
    platform.trace().append(platform.now(), TraceRecord::Kind::Game,
                            "GAME\t" + std::to_string(platform.now()) + "\t" + payload);
}

void AgentContext::trace_event(const ConversationEvent& event) {
    platform.trace().append(platform.now(), TraceRecord::Kind::Evt,
                            event.trace_line(platform.now(), self.name));
}

Platform::Platform(std::uint64_t seed) : seed_(seed), rng_(seed) {}

void Platform::register_agent(AgentId id, Behavior behavior, IdleProbe idle) {
    if (started()) throw std::logic_error("cannot register agents after the run has started");
    if (id.name.empty() || !is_valid_symbol(id.name)) {
        throw std::invalid_argument("agent name must use constant syntax: '" + id.name + "'");
    }
    if (id.addresses.empty()) {
        throw std::invalid_argument("agent " + id.name + " needs at least one address");
    }
    if (is_registered(id.name)) {
        throw std::invalid_argument("duplicate agent name: " + id.name);
    }
    auto slot = std::make_unique<AgentSlot>();
    slot->id = std::move(id);
    slot->behavior = std::move(behavior);
    slot->idle = std::move(idle);
    agents_.push_back(std::move(slot));
}

bool Platform::is_registered(const std::string& name) const {
    for (const auto& a : agents_) {
        if (a->id.name == name) return true;
    }
    return false;
}

const AgentId* Platform::agent_id(const std::string& name) const {
    for (const auto& a : agents_) {
        if (a->id.name == name) return &a->id;
    }
    return nullptr;
}

bool Platform::is_suspended(const std::string& name) const {
    for (const auto& a : agents_) {
        if (a->id.name == name) return a->suspended;
    }
    return false;
}

Platform::AgentSlot* Platform::find_agent(const std::string& name) {
    for (auto& a : agents_) {
        if (a->id.name == name) return a.get();
    }
    return nullptr;
}

void Platform::record_message(const Message& msg, const std::string& flag) {
    trace_.append(now_, TraceRecord::Kind::Msg, format_msg_record(msg, flag));
}

void Platform::send(Message msg) {
    msg.sent_tick = now_;
    if (!is_registered(msg.receiver.name)) {
        record_message(msg, "UNDELIVERABLE");
        return;
    }
    record_message(msg, "");
    step_had_sends_ = true;
    in_flight_.push_back({std::move(msg), now_ + 1});
}

void Platform::send_forged(Message msg, const std::string& true_sender) {
    if (forge_agent_.empty() || true_sender != forge_agent_) {
        throw std::logic_error("agent " + true_sender + " has no forge privilege");
    }
    msg.sent_tick = now_;
    if (!is_registered(msg.receiver.name)) {
        record_message(msg, "UNDELIVERABLE");
        return;
    }
    record_message(msg, "FORGED:" + true_sender);
    step_had_sends_ = true;
    in_flight_.push_back({std::move(msg), now_ + 1});
}

void Platform::grant_forge_privilege(const std::string& agent_name) {
    forge_agent_ = agent_name;
}

void Platform::step() {
    ++now_;
    records_at_step_start_ = trace_.records().size();
    step_had_sends_ = false;

    // Deliver everything due this tick, preserving enqueue order (FIFO per
    // ordered pair follows from global FIFO).
    while (!in_flight_.empty() && in_flight_.front().deliver_tick <= now_) {
        Message msg = std::move(in_flight_.front().msg);
        in_flight_.pop_front();
        AgentSlot* receiver = find_agent(msg.receiver.name);
        if (receiver != nullptr) receiver->inbox.push_back(std::move(msg));
    }

    for (auto& agent : agents_) {
        if (agent->suspended) {
            agent->inbox.clear();
            continue;
        }
        AgentContext ctx{now_, agent->id, std::move(agent->inbox), *this};
        agent->inbox.clear();
        try {
            agent->behavior(ctx);
        } catch (const ReplayDivergenceError&) {
            throw; // platform-level failure, never an agent fault
        } catch (const std::exception& e) {
            agent->suspended = true;
            std::string what = e.what();
            for (char& c : what) {
                if (c == '\t' || c == '\n' || c == '\r') c = ' ';
            }
            trace_.append(now_, TraceRecord::Kind::Evt,
                          "EVT\t" + std::to_string(now_) + "\t" + agent->id.name +
                              "\tsuspended\t-\t-\t-\t" + what);
        }
    }
}

RunResult Platform::run(Tick max_ticks) {
    if (max_ticks <= 0) throw std::invalid_argument("run requires max_ticks > 0");
    RunResult result;
    for (Tick i = 0; i < max_ticks; ++i) {
        step();
        result.ticks_run = now_;

        bool inboxes_empty = true;
        bool all_idle = true;
        for (const auto& agent : agents_) {
            if (!agent->inbox.empty()) inboxes_empty = false;
            if (agent->idle && !agent->suspended && !agent->idle(now_)) all_idle = false;
        }
        bool quiet_step =
            trace_.records().size() == records_at_step_start_ && !step_had_sends_;
        if (in_flight_.empty() && inboxes_empty && all_idle && quiet_step) {
            result.quiesced = true;
            break;
        }
    }
    rng_.check_exhausted();
    return result;
}

} // namespace parley
