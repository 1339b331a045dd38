#include "reflectrag/corpus.hpp"

#include "reflectrag/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <istream>
#include <ostream>

namespace reflectrag {

namespace {

bool is_token_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char to_lower_ascii(unsigned char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

Passage parse_passage_line(const std::string& line, std::size_t line_number) {
    nlohmann::json record;
    try {
        record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(std::string("malformed JSON: ") + e.what(), line_number);
    }
    if (!record.is_object()) {
        throw InputError("record is not a JSON object", line_number);
    }

    Passage passage;
    const auto id = record.find("id");
    if (id == record.end() || !id->is_string()) {
        throw InputError("missing or non-string \"id\"", line_number);
    }
    passage.id = id->get<std::string>();
    if (passage.id.empty()) {
        throw InputError("empty \"id\"", line_number);
    }

    const auto text = record.find("text");
    if (text == record.end() || !text->is_string()) {
        throw InputError("missing or non-string \"text\" for id \"" + passage.id + "\"", line_number);
    }
    passage.text = text->get<std::string>();
    if (passage.text.empty()) {
        throw InputError("empty \"text\" for id \"" + passage.id + "\"", line_number);
    }

    if (const auto title = record.find("title"); title != record.end() && !title->is_null()) {
        if (!title->is_string()) {
            throw InputError("non-string \"title\" for id \"" + passage.id + "\"", line_number);
        }
        passage.title = title->get<std::string>();
    }
    return passage;
}

} // namespace

std::vector<std::string> analyze(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_token_byte(c)) {
            current.push_back(to_lower_ascii(c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

Corpus::Corpus(std::vector<Passage> passages) : passages_(std::move(passages)) {
    index_.reserve(passages_.size());
    for (std::size_t pos = 0; pos < passages_.size(); ++pos) {
        Passage& p = passages_[pos];
        if (p.id.empty()) {
            throw InputError("passage at position " + std::to_string(pos) + " has an empty id");
        }
        if (p.text.empty()) {
            throw InputError("passage \"" + p.id + "\" has empty text");
        }
        if (!index_.emplace(p.id, pos).second) {
            throw InputError("duplicate passage id \"" + p.id + "\"");
        }
        p.tokens = analyze(p.text);
    }
}

std::optional<std::size_t> Corpus::position_of(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

const Passage& Corpus::at(std::string_view id) const {
    const auto pos = position_of(id);
    if (!pos) {
        throw InputError("unknown passage id \"" + std::string(id) + "\"");
    }
    return passages_[*pos];
}

Corpus read_corpus(std::istream& in) {
    std::vector<Passage> passages;
    std::unordered_map<std::string, std::size_t> seen;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        Passage passage = parse_passage_line(line, line_number);
        if (const auto [it, inserted] = seen.emplace(passage.id, line_number); !inserted) {
            throw InputError("duplicate passage id \"" + passage.id + "\" (first seen on line " +
                                 std::to_string(it->second) + ")",
                             line_number);
        }
        passages.push_back(std::move(passage));
    }
    return Corpus(std::move(passages));
}

Corpus ingest_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open corpus file " + path.string());
    }
    try {
        return read_corpus(in);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
    for (const Passage& p : corpus.passages()) {
        nlohmann::ordered_json record;
        record["id"] = p.id;
        if (p.title) {
            record["title"] = *p.title;
        }
        record["text"] = p.text;
        out << record.dump() << '\n';
    }
}

} // namespace reflectrag
