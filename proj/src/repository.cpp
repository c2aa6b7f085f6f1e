#include "parley/repository.hpp"

#include <fstream>
#include <sstream>

namespace parley {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RepositoryError("cannot open file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct IndexEntry {
    ProtocolId id;
    std::filesystem::path file;
};

std::vector<IndexEntry> read_index(const std::filesystem::path& root) {
    std::filesystem::path index_path = root / "index";
    if (!std::filesystem::exists(index_path)) {
        throw RepositoryError("missing index file: " + index_path.string());
    }
    std::string text = read_file(index_path);

    std::vector<IndexEntry> entries;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream fields(line);
        std::string id_text, version, file;
        if (!(fields >> id_text)) continue; // blank / comment line
        if (!(fields >> version >> file)) {
            throw RepositoryError("bad index line " + std::to_string(line_no) + " in " +
                                  index_path.string());
        }
        std::string extra;
        if (fields >> extra) {
            throw RepositoryError("bad index line " + std::to_string(line_no) + " in " +
                                  index_path.string());
        }
        std::size_t slash = id_text.find('/');
        if (slash == std::string::npos) {
            throw RepositoryError("bad protocol id '" + id_text + "' in index line " +
                                  std::to_string(line_no));
        }
        IndexEntry e;
        e.id = ProtocolId{id_text.substr(0, slash), id_text.substr(slash + 1), version};
        e.file = root / file;
        entries.push_back(std::move(e));
    }
    return entries;
}

} // namespace

Repository Repository::load(const std::filesystem::path& root) {
    Repository repo;
    repo.root_ = root;
    for (const IndexEntry& entry : read_index(root)) {
        if (repo.protocols_.count(entry.id) != 0) {
            throw RepositoryError("duplicate protocol id in index: " + entry.id.str());
        }
        if (!std::filesystem::exists(entry.file)) {
            throw RepositoryError("protocol file listed in index does not exist: " +
                                  entry.file.string());
        }
        ProtocolDescriptor proto;
        try {
            proto = parse_protocol(read_file(entry.file));
        } catch (const ProtocolValidationError& e) {
            throw RepositoryError(entry.file.string() + ": " + e.what());
        } catch (const ProtocolParseError& e) {
            throw RepositoryError(entry.file.string() + ": " + e.what());
        }
        if (proto.id != entry.id) {
            throw RepositoryError(entry.file.string() + ": header declares " + proto.id.str() +
                                  " but index lists " + entry.id.str());
        }
        repo.order_.push_back(entry.id);
        repo.protocols_.emplace(entry.id, std::move(proto));
    }
    return repo;
}

std::vector<Repository::InspectEntry> Repository::inspect(const std::filesystem::path& root) {
    std::vector<InspectEntry> out;
    std::map<ProtocolId, bool> seen;
    for (const IndexEntry& entry : read_index(root)) {
        if (seen[entry.id]) {
            throw RepositoryError("duplicate protocol id in index: " + entry.id.str());
        }
        seen[entry.id] = true;
        if (!std::filesystem::exists(entry.file)) {
            throw RepositoryError("protocol file listed in index does not exist: " +
                                  entry.file.string());
        }
        ProtocolDescriptor proto;
        try {
            proto = parse_protocol_lenient(read_file(entry.file));
        } catch (const ProtocolParseError& e) {
            throw RepositoryError(entry.file.string() + ": " + e.what());
        }
        out.push_back({entry.id, entry.file, validate_protocol(proto)});
    }
    return out;
}

const ProtocolDescriptor* Repository::find(const ProtocolId& id) const {
    auto it = protocols_.find(id);
    return it == protocols_.end() ? nullptr : &it->second;
}

const ProtocolDescriptor& Repository::get(const ProtocolId& id) const {
    const ProtocolDescriptor* found = find(id);
    if (found != nullptr) return *found;
    std::vector<std::string> versions;
    for (const auto& [pid, _] : protocols_) {
        if (pid.ns == id.ns && pid.name == id.name) versions.push_back(pid.version);
    }
    if (!versions.empty()) {
        std::string have;
        for (const std::string& v : versions) {
            if (!have.empty()) have += ", ";
            have += v;
        }
        throw UnknownProtocolError("unknown version " + id.version + " of protocol " + id.path() +
                                       " (have: " + have + ")",
                                   true);
    }
    throw UnknownProtocolError("unknown protocol " + id.path(), false);
}

} // namespace parley
