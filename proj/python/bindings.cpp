// Python bindings for the core operations: the term model, protocol
// parsing/validation, repositories, the conversation manager, game runs and
// the vulnerability probe.
#include <fstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "parley/players.hpp"
#include "parley/probe.hpp"
#include "parley/trace_view.hpp"

namespace py = pybind11;
using namespace parley;

namespace {

py::dict bindings_to_dict(const BindingSet& bindings) {
    py::dict out;
    for (const auto& [name, value] : bindings) out[py::str(name)] = value;
    return out;
}

BindingSet dict_to_bindings(const py::dict& d) {
    BindingSet out;
    for (const auto& item : d) {
        std::string name = py::cast<std::string>(item.first);
        Term value = py::cast<Term>(item.second);
        if (!out.bind(name, value)) {
            throw py::value_error("conflicting binding for " + name);
        }
    }
    return out;
}

py::dict result_to_dict(const GameResult& result) {
    py::dict out;
    out["capital"] = result.final_capital;
    out["no_account"] = result.no_account;
    out["trace_hash"] = result.trace_hash;
    out["ticks"] = result.ticks_run;
    out["completed"] = result.completed();
    py::dict flags;
    for (const auto& [protocol, done] : result.flags) flags[py::str(protocol)] = done;
    out["flags"] = flags;
    return out;
}

} // namespace

PYBIND11_MODULE(parley, m) {
    m.doc() = "conversation-managed multi-agent trading games";

    py::enum_<TermKind>(m, "TermKind")
        .value("CONSTANT", TermKind::Constant)
        .value("NUMBER", TermKind::Number)
        .value("STRING", TermKind::String)
        .value("VARIABLE", TermKind::Variable)
        .value("COMPOUND", TermKind::Compound);

    py::class_<Term>(m, "Term")
        .def_static("constant", &Term::constant)
        .def_static("number", &Term::number)
        .def_static("string", &Term::string)
        .def_static("variable", &Term::variable)
        .def_static("compound", &Term::compound)
        .def_property_readonly("kind", &Term::kind)
        .def_property_readonly("ground", &Term::is_ground)
        .def("__eq__", [](const Term& a, const Term& b) { return a == b; })
        .def("__str__", [](const Term& t) { return format_term(t); })
        .def("__repr__", [](const Term& t) { return "Term(" + format_term(t) + ")"; });

    m.def("parse_term", [](const std::string& source) { return parse_term(source); });
    m.def("format_term", &format_term);
    m.def(
        "match_pattern",
        [](const Term& pattern, const Term& ground, const py::dict& bindings) -> py::object {
            auto result = match_pattern(pattern, ground, dict_to_bindings(bindings));
            if (!result) return py::none();
            return bindings_to_dict(*result);
        },
        py::arg("pattern"), py::arg("ground"), py::arg("bindings") = py::dict());
    m.def(
        "substitute",
        [](const Term& t, const py::dict& bindings) {
            return substitute(t, dict_to_bindings(bindings));
        },
        py::arg("term"), py::arg("bindings"));

    py::class_<ProtocolId>(m, "ProtocolId")
        .def(py::init([](const std::string& ns, const std::string& name,
                         const std::string& version) {
                 return ProtocolId{ns, name, version};
             }),
             py::arg("namespace"), py::arg("name"), py::arg("version"))
        .def_readonly("namespace", &ProtocolId::ns)
        .def_readonly("name", &ProtocolId::name)
        .def_readonly("version", &ProtocolId::version)
        .def("__str__", &ProtocolId::str)
        .def("__eq__", [](const ProtocolId& a, const ProtocolId& b) { return a == b; });

    py::class_<Transition>(m, "Transition")
        .def_readonly("from_state", &Transition::from)
        .def_readonly("to_state", &Transition::to)
        .def_readonly("performative", &Transition::performative)
        .def_readonly("sender", &Transition::sender)
        .def_readonly("receiver", &Transition::receiver)
        .def_readonly("content", &Transition::content);

    py::class_<ProtocolDescriptor>(m, "ProtocolDescriptor")
        .def_readonly("id", &ProtocolDescriptor::id)
        .def_property_readonly("states",
                               [](const ProtocolDescriptor& p) {
                                   py::list out;
                                   for (const StateDecl& s : p.states) {
                                       out.append(py::make_tuple(s.name, to_string(s.kind)));
                                   }
                                   return out;
                               })
        .def_readonly("transitions", &ProtocolDescriptor::transitions)
        .def("initial_state", &ProtocolDescriptor::initial_state)
        .def("is_terminal", [](const ProtocolDescriptor& p, const std::string& s) {
            return p.is_terminal(s);
        })
        .def("__eq__",
             [](const ProtocolDescriptor& a, const ProtocolDescriptor& b) { return a == b; });

    m.def("parse_protocol", [](const std::string& source) { return parse_protocol(source); });
    m.def("serialize_protocol", &serialize_protocol);
    m.def("validate_protocol", [](const ProtocolDescriptor& p) {
        py::list out;
        for (const Diagnostic& d : validate_protocol(p)) out.append(d.str());
        return out;
    });
    m.def("initiating_transitions", &initiating_transitions);

    py::class_<Repository>(m, "Repository")
        .def_static("load", &Repository::load, py::arg("root"))
        .def("get", &Repository::get, py::return_value_policy::reference_internal)
        .def_property_readonly("ids", &Repository::index_order)
        .def("__len__", &Repository::size);

    py::class_<AgentId>(m, "AgentId")
        .def(py::init([](const std::string& name, std::vector<std::string> addresses) {
                 return AgentId{name, std::move(addresses)};
             }),
             py::arg("name"), py::arg("addresses") = std::vector<std::string>{"local:localhost"})
        .def_readonly("name", &AgentId::name)
        .def_readonly("addresses", &AgentId::addresses);

    py::class_<Message>(m, "Message")
        .def(py::init([](const std::string& performative, const AgentId& sender,
                         const AgentId& receiver, const Term& content,
                         std::optional<std::string> cid_hint) {
                 Message msg;
                 msg.performative = performative;
                 msg.sender = sender;
                 msg.receiver = receiver;
                 msg.content = content;
                 msg.cid_hint = std::move(cid_hint);
                 return msg;
             }),
             py::arg("performative"), py::arg("sender"), py::arg("receiver"), py::arg("content"),
             py::arg("cid_hint") = std::nullopt)
        .def_readonly("performative", &Message::performative)
        .def_readonly("sender", &Message::sender)
        .def_readonly("receiver", &Message::receiver)
        .def_readonly("content", &Message::content)
        .def_readonly("cid_hint", &Message::cid_hint)
        .def_readonly("sent_tick", &Message::sent_tick);

    py::enum_<Direction>(m, "Direction")
        .value("INCOMING", Direction::Incoming)
        .value("OUTGOING", Direction::Outgoing);

    py::class_<ConversationEvent>(m, "ConversationEvent")
        .def_property_readonly(
            "kind", [](const ConversationEvent& e) { return ConversationEvent::kind_name(e.kind); })
        .def_readonly("cid", &ConversationEvent::cid)
        .def_readonly("state", &ConversationEvent::state)
        .def_readonly("length", &ConversationEvent::length)
        .def_readonly("reason", &ConversationEvent::reason)
        .def_readonly("candidates", &ConversationEvent::candidates)
        .def("trace_line", &ConversationEvent::trace_line);

    py::class_<MatchOutcome>(m, "MatchOutcome")
        .def_property_readonly("kind",
                               [](const MatchOutcome& o) {
                                   switch (o.kind) {
                                   case MatchOutcome::Kind::AdvancedExisting:
                                       return "advanced_existing";
                                   case MatchOutcome::Kind::StartedNew: return "started_new";
                                   default: return "unmatched";
                                   }
                               })
        .def_readonly("cid", &MatchOutcome::cid)
        .def_readonly("events", &MatchOutcome::events);

    py::class_<ConversationSnapshot>(m, "ConversationSnapshot")
        .def_readonly("cid", &ConversationSnapshot::cid)
        .def_readonly("protocol", &ConversationSnapshot::protocol)
        .def_readonly("state", &ConversationSnapshot::state)
        .def_readonly("history", &ConversationSnapshot::history)
        .def_property_readonly(
            "status", [](const ConversationSnapshot& s) { return to_string(s.status); })
        .def_property_readonly("bindings", [](const ConversationSnapshot& s) {
            return bindings_to_dict(s.bindings);
        });

    py::class_<ConversationManager>(m, "ConversationManager")
        .def(py::init([](const AgentId& self, const Repository* repo, Tick default_timeout) {
                 return new ConversationManager(self, repo, EngineConfig{default_timeout});
             }),
             py::arg("self_id"), py::arg("repository"), py::arg("default_timeout") = 50,
             py::keep_alive<1, 3>())
        .def("process_message", &ConversationManager::process_message, py::arg("message"),
             py::arg("direction"))
        .def("start_conversation", &ConversationManager::start_conversation, py::arg("protocol"),
             py::arg("counterpart"), py::arg("performative"), py::arg("content"))
        .def("advance_conversation", &ConversationManager::advance_conversation, py::arg("cid"),
             py::arg("performative"), py::arg("content"))
        .def("cancel_conversation", &ConversationManager::cancel_conversation, py::arg("cid"),
             py::arg("reason"))
        .def("tick", &ConversationManager::tick)
        .def("inspect", &ConversationManager::inspect)
        .def("active_cids", &ConversationManager::active_cids);

    m.def(
        "run_game",
        [](const std::filesystem::path& config_path, const std::filesystem::path& protocols,
           const std::string& player, std::optional<std::uint64_t> seed,
           std::optional<std::filesystem::path> record) {
            GameConfig config = GameConfig::load(config_path);
            Repository repo = Repository::load(protocols);
            HarnessOptions options;
            auto kind = player_kind_from_string(player);
            if (!kind) throw py::value_error("unknown player '" + player + "'");
            options.player = *kind;
            options.seed_override = seed;
            RunArtifacts artifacts;
            GameResult result = run_game(config, repo, options, &artifacts);
            if (record) {
                std::ofstream out(*record, std::ios::binary);
                if (!out) throw py::value_error("cannot write " + record->string());
                out << artifacts.trace_text;
            }
            return result_to_dict(result);
        },
        py::arg("config"), py::arg("protocols"), py::arg("player") = "reference",
        py::arg("seed") = std::nullopt, py::arg("record") = std::nullopt);

    m.def(
        "probe_player",
        [](const std::filesystem::path& config_path, const std::filesystem::path& protocols,
           const std::string& player, const std::vector<std::string>& checks) {
            GameConfig config = GameConfig::load(config_path);
            Repository repo = Repository::load(protocols);
            auto kind = player_kind_from_string(player);
            if (!kind) throw py::value_error("unknown player '" + player + "'");
            std::vector<ProbeIssue> issues;
            for (const std::string& check : checks) {
                auto issue = probe_issue_from_string(check);
                if (!issue) throw py::value_error("unknown check '" + check + "'");
                issues.push_back(*issue);
            }
            VulnerabilityReport report = probe_player(config, *kind, issues, repo);
            py::dict out;
            py::dict results;
            for (const IssueResult& r : report.results) {
                py::dict entry;
                entry["classification"] = to_string(r.classification);
                entry["hits"] = r.hits;
                entry["opportunities"] = r.opportunities;
                entry["trace_hash"] = r.trace_hash;
                results[to_string(r.issue)] = entry;
            }
            out["player"] = player;
            out["all_clear"] = report.all_clear();
            out["results"] = results;
            out["text"] = explain_report(report);
            return out;
        },
        py::arg("config"), py::arg("protocols"), py::arg("player") = "reference",
        py::arg("checks") = std::vector<std::string>{"sender", "progress", "name", "address"});

    py::register_exception<TermParseError>(m, "TermParseError", PyExc_ValueError);
    py::register_exception<ProtocolParseError>(m, "ProtocolParseError", PyExc_ValueError);
    py::register_exception<ProtocolValidationError>(m, "ProtocolValidationError", PyExc_ValueError);
    py::register_exception<RepositoryError>(m, "RepositoryError", PyExc_ValueError);
    py::register_exception<ActionError>(m, "ActionError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ProbeError>(m, "ProbeError", PyExc_ValueError);
}
