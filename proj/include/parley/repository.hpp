#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "parley/protocol.hpp"

namespace parley {

class RepositoryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownProtocolError : public RepositoryError {
public:
    UnknownProtocolError(const std::string& what, bool version_mismatch)
        : RepositoryError(what), version_mismatch_(version_mismatch) {}
    // True when the namespace/name is known but the requested version is not.
    bool version_mismatch() const { return version_mismatch_; }

private:
    bool version_mismatch_;
};

/// Platform-shared protocol store. Loaded eagerly and fail-fast from a
/// directory containing an `index` file (one `<ns>/<name> <version> <file>`
/// line per protocol) plus DSL files; immutable afterwards.
class Repository {
public:
    static Repository load(const std::filesystem::path& root);

    struct InspectEntry {
        ProtocolId id;
        std::filesystem::path file;
        std::vector<Diagnostic> diagnostics;
    };
    // Lenient variant for `validate`: load-level problems (missing index or
    // file, syntax error, duplicate id) still throw RepositoryError, but FSM
    // diagnostics are reported per protocol instead of failing the load.
    static std::vector<InspectEntry> inspect(const std::filesystem::path& root);

    const ProtocolDescriptor& get(const ProtocolId& id) const;
    const ProtocolDescriptor* find(const ProtocolId& id) const;

    // Ids in index-file order; drives deterministic initiation matching.
    const std::vector<ProtocolId>& index_order() const { return order_; }
    std::size_t size() const { return order_.size(); }
    const std::filesystem::path& root() const { return root_; }

    bool operator==(const Repository& other) const {
        return order_ == other.order_ && protocols_ == other.protocols_;
    }

private:
    std::filesystem::path root_;
    std::vector<ProtocolId> order_;
    std::map<ProtocolId, ProtocolDescriptor> protocols_;
};

} // namespace parley
