#pragma once

#include "parley/game.hpp"

namespace parley {

// The deterministic scripted player: every message goes through its
// conversation manager, counterparts come from the directory, and the
// strategy follows the enforced task order (account, market queries, tips,
// a buy, a profitable sell, the auction, the contract-net resale).
Behavior make_reference_player(const AgentId& self, const Repository& repo,
                               const ContactDirectory& directory, EngineConfig engine_config);

// Fixture player that matches incoming messages on performative and content
// only: no conversation tracking, no sender checks.
Behavior make_naive_player(const AgentId& self, const ContactDirectory& directory);

// Fixture player that string-checks hard-coded sender names (and, for
// proposals, a hard-coded address) on some handlers but tracks no
// conversation state.
Behavior make_partial_player(const AgentId& self, const ContactDirectory& directory);

Behavior make_idle_player();

Behavior make_player(PlayerKind kind, const AgentId& self, const Repository& repo,
                     const ContactDirectory& directory, EngineConfig engine_config);

} // namespace parley
