#include "choreo/cau.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "choreo/io.hpp"
#include "choreo/motion_io.hpp"

namespace choreo::cau {

namespace {

const char* kind_name(TokenKind k) {
    switch (k) {
        case TokenKind::Sod: return "sod";
        case TokenKind::Eod: return "eod";
        case TokenKind::Nil: return "nil";
        case TokenKind::Cau: return "cau";
    }
    return "?";
}

TokenKind kind_from(const std::string& s) {
    if (s == "sod") return TokenKind::Sod;
    if (s == "eod") return TokenKind::Eod;
    if (s == "nil") return TokenKind::Nil;
    if (s == "cau") return TokenKind::Cau;
    throw ValidationError("unknown token kind '" + s + "'");
}

}  // namespace

CauCatalog CauCatalog::with_specials() {
    CauCatalog c;
    c.entries_ = {{"SOD", TokenKind::Sod, 0, "", nullptr},
                  {"EOD", TokenKind::Eod, 0, "", nullptr},
                  {"NIL", TokenKind::Nil, 1, "", nullptr}};
    return c;
}

int CauCatalog::add_cau(const std::string& name, int beats, std::string clip_path,
                        std::shared_ptr<const motion::MotionClip> clip) {
    if (beats < 1) throw ValidationError("CAU '" + name + "' must span at least one beat");
    if (!clip) throw ValidationError("CAU '" + name + "' has no motion clip");
    entries_.push_back({name, TokenKind::Cau, beats, std::move(clip_path), std::move(clip)});
    return vocab_size() - 1;
}

const CatalogEntry& CauCatalog::entry(int id) const {
    if (id < 0 || id >= vocab_size())
        throw ValidationError("token id " + std::to_string(id) + " outside vocabulary of " +
                              std::to_string(vocab_size()));
    return entries_[static_cast<std::size_t>(id)];
}

int CauCatalog::id_of(const std::string& name) const {
    for (int i = 0; i < vocab_size(); ++i)
        if (entries_[static_cast<std::size_t>(i)].name == name) return i;
    throw ValidationError("unknown token '" + name + "'");
}

std::vector<int> CauCatalog::beat_lengths() const {
    std::vector<int> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.beats);
    return out;
}

void CauCatalog::save(const std::filesystem::path& path) const {
    std::ostringstream out;
    out << "CHOREO-CATALOG v1\n";
    for (int i = 0; i < vocab_size(); ++i) {
        const auto& e = entries_[static_cast<std::size_t>(i)];
        out << "token " << i << " " << e.name << " " << kind_name(e.kind) << " " << e.beats << " "
            << (e.clip_path.empty() ? "-" : e.clip_path) << "\n";
    }
    io::write_file(path, out.str());
}

CauCatalog CauCatalog::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open catalog " + path.string());
    io::Header h = io::Header::parse(in, "CHOREO-CATALOG");
    std::map<int, CatalogEntry> by_id;
    for (const io::Line* l : h.all("token")) {
        int id = static_cast<int>(l->integer(1));
        CatalogEntry e;
        e.name = l->str(2);
        e.kind = kind_from(l->str(3));
        e.beats = static_cast<int>(l->integer(4));
        e.clip_path = l->str(5) == "-" ? "" : l->str(5);
        if (by_id.count(id))
            throw ValidationError("catalog: duplicate token id " + std::to_string(id));
        by_id[id] = std::move(e);
    }
    CauCatalog c;
    std::set<std::string> names;
    for (int i = 0; i < static_cast<int>(by_id.size()); ++i) {
        auto it = by_id.find(i);
        if (it == by_id.end())
            throw ValidationError("catalog: token ids must be dense, missing " + std::to_string(i));
        if (!names.insert(it->second.name).second)
            throw ValidationError("catalog: duplicate token name '" + it->second.name + "'");
        c.entries_.push_back(std::move(it->second));
    }
    if (c.vocab_size() < 3 || c.entries_[0].kind != TokenKind::Sod ||
        c.entries_[1].kind != TokenKind::Eod || c.entries_[2].kind != TokenKind::Nil)
        throw ValidationError("catalog: ids 0/1/2 must be SOD/EOD/NIL");
    if (c.entries_[2].beats != 1) throw ValidationError("catalog: NIL must span one beat");
    for (auto& e : c.entries_) {
        if (e.kind == TokenKind::Cau) {
            if (e.beats < 1)
                throw ValidationError("catalog: CAU '" + e.name + "' has zero beat length");
            if (e.clip_path.empty())
                throw ValidationError("catalog: CAU '" + e.name + "' has no motion clip path");
            auto clip_file = path.parent_path() / e.clip_path;
            if (!std::filesystem::exists(clip_file))
                throw ValidationError("catalog: CAU '" + e.name + "' references missing clip " +
                                      clip_file.string());
            auto clip = std::make_shared<motion::MotionClip>(motion::load_clip(clip_file));
            e.clip = std::move(clip);
        } else if (e.kind == TokenKind::Sod || e.kind == TokenKind::Eod) {
            if (e.beats != 0)
                throw ValidationError("catalog: special '" + e.name + "' must have zero beats");
        }
    }
    return c;
}

void CauSequence::validate(const CauCatalog& catalog) const {
    double cursor = -1e-12;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const SequenceItem& it = items[i];
        TokenKind k = catalog.kind(it.token);
        if (k == TokenKind::Sod) throw ValidationError("sequence: SOD cannot appear in items");
        if (k == TokenKind::Eod && i + 1 != items.size())
            throw ValidationError("sequence: EOD must be terminal");
        if (it.start_beat < cursor - 1e-9)
            throw ValidationError("sequence: overlapping beat spans at item " + std::to_string(i));
        if (it.end_beat < it.start_beat)
            throw ValidationError("sequence: negative span at item " + std::to_string(i));
        cursor = it.end_beat;
    }
}

std::vector<int> CauSequence::tokens() const {
    std::vector<int> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(it.token);
    return out;
}

std::vector<int> CauSequence::content_tokens() const {
    std::vector<int> out;
    for (const auto& it : items)
        if (it.token != kSod && it.token != kEod) out.push_back(it.token);
    return out;
}

long sequence_duration_beats(const CauSequence& seq, const CauCatalog& catalog) {
    long total = 0;
    for (const auto& it : seq.items) {
        TokenKind k = catalog.kind(it.token);  // throws on unknown token
        if (k == TokenKind::Cau || k == TokenKind::Nil) total += catalog.beats(it.token);
    }
    return total;
}

double bleu4(const std::vector<int>& candidate, const std::vector<int>& reference) {
    if (candidate.empty()) return 0.0;
    constexpr double kEps = 1e-9;
    double log_sum = 0.0;
    for (int n = 1; n <= 4; ++n) {
        long total = static_cast<long>(candidate.size()) - n + 1;
        if (total <= 0) continue;  // no n-grams of this order: neutral factor
        std::map<std::vector<int>, long> ref_counts;
        for (std::size_t i = 0; i + n <= reference.size(); ++i)
            ref_counts[std::vector<int>(reference.begin() + i, reference.begin() + i + n)] += 1;
        std::map<std::vector<int>, long> cand_counts;
        for (std::size_t i = 0; i + n <= candidate.size(); ++i)
            cand_counts[std::vector<int>(candidate.begin() + i, candidate.begin() + i + n)] += 1;
        long matched = 0;
        for (const auto& [gram, cnt] : cand_counts) {
            auto it = ref_counts.find(gram);
            if (it != ref_counts.end()) matched += std::min(cnt, it->second);
        }
        double p = matched > 0 ? static_cast<double>(matched) / total : kEps;
        log_sum += 0.25 * std::log(p);
    }
    double bp = 1.0;
    if (candidate.size() < reference.size())
        bp = std::exp(1.0 - static_cast<double>(reference.size()) / candidate.size());
    return bp * std::exp(log_sum);
}

void save_annotation(const Annotation& a, const std::filesystem::path& path,
                     const CauCatalog& catalog) {
    std::ostringstream out;
    out << "CHOREO-ANNOT v1\n";
    out << "pack " << a.pack_path << "\n";
    for (const auto& it : a.sequence.items)
        out << "item " << catalog.entry(it.token).name << " " << fmt_double(it.start_beat) << " "
            << fmt_double(it.end_beat) << "\n";
    io::write_file(path, out.str());
}

Annotation load_annotation(const std::filesystem::path& path, const CauCatalog& catalog) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open annotation " + path.string());
    io::Header h = io::Header::parse(in, "CHOREO-ANNOT");
    const io::Line* pack = h.find("pack");
    if (!pack) throw DataError("annotation missing pack path: " + path.string());
    Annotation a;
    a.pack_path = pack->str(1);
    for (const io::Line* l : h.all("item"))
        a.sequence.items.push_back({catalog.id_of(l->str(1)), l->num(2), l->num(3)});
    a.sequence.validate(catalog);
    return a;
}

}  // namespace choreo::cau
