#include "wsireport/tokenizer.hpp"
#include "wsireport/errors.hpp"
#include "wsireport/text.hpp"

#include <fstream>

namespace wsireport {

Vocab Vocab::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open vocab file: " + path.string());
    Vocab v;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            throw ValidationError("vocab file has an empty line " +
                                  std::to_string(v.id_to_token_.size()) + ": " + path.string());
        if (v.token_to_id_.count(line))
            throw ValidationError("vocab file repeats token '" + line + "': " + path.string());
        v.token_to_id_[line] = static_cast<int>(v.id_to_token_.size());
        v.id_to_token_.push_back(line);
    }
    if (v.size() < 4)
        throw ValidationError("vocab file must reserve the first four lines for "
                              "PAD/BOS/EOS/UNK: " +
                              path.string());
    return v;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& content_tokens) {
    Vocab v;
    for (const auto& s : {"<pad>", "<bos>", "<eos>", "<unk>"}) {
        v.token_to_id_[s] = static_cast<int>(v.id_to_token_.size());
        v.id_to_token_.emplace_back(s);
    }
    for (const auto& t : content_tokens) {
        if (t.empty() || v.token_to_id_.count(t))
            continue;
        v.token_to_id_[t] = static_cast<int>(v.id_to_token_.size());
        v.id_to_token_.push_back(t);
    }
    return v;
}

void Vocab::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot open for writing: " + path.string());
    for (const auto& t : id_to_token_)
        out << t << "\n";
    if (!out)
        throw IoError("write failed: " + path.string());
}

int Vocab::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token_of(int id) const {
    if (id < 0 || id >= size())
        throw ValidationError("token id " + std::to_string(id) + " out of range");
    return id_to_token_[static_cast<size_t>(id)];
}

std::vector<int> tokenize(const std::string& text, const Vocab& vocab) {
    std::vector<int> ids;
    for (const auto& tok : normalize_tokens(text))
        ids.push_back(vocab.id_of(tok));
    return ids;
}

std::string detokenize(const std::vector<int>& ids, const Vocab& vocab) {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i)
            out.push_back(' ');
        out += vocab.token_of(ids[i]);
    }
    return out;
}

} // namespace wsireport
