#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "choreo/motion.hpp"

namespace choreo::cau {

// ids 0/1/2 are reserved for the special annotations.
enum class TokenKind { Sod, Eod, Nil, Cau };

constexpr int kSod = 0;
constexpr int kEod = 1;
constexpr int kNil = 2;

struct CauToken {
    int id = 0;
    TokenKind kind = TokenKind::Cau;
};

struct CatalogEntry {
    std::string name;
    TokenKind kind = TokenKind::Cau;
    int beats = 0;  // len(y); 0 for SOD/EOD, 1 for NIL, >= 1 for CAU
    std::string clip_path;                      // relative to the catalog file
    std::shared_ptr<const motion::MotionClip> clip;  // loaded for CAU entries
};

// Token vocabulary: the three specials plus every annotated action unit, each
// CAU carrying its beat length and reference motion clip.
class CauCatalog {
public:
    static CauCatalog load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    int vocab_size() const { return static_cast<int>(entries_.size()); }
    const CatalogEntry& entry(int id) const;
    TokenKind kind(int id) const { return entry(id).kind; }
    int beats(int id) const { return entry(id).beats; }
    int id_of(const std::string& name) const;  // ValidationError if unknown

    // builder API used by the synthetic generator
    static CauCatalog with_specials();
    int add_cau(const std::string& name, int beats, std::string clip_path,
                std::shared_ptr<const motion::MotionClip> clip);

    const std::vector<CatalogEntry>& entries() const { return entries_; }
    std::vector<int> beat_lengths() const;

private:
    std::vector<CatalogEntry> entries_;
};

struct SequenceItem {
    int token = 0;
    double start_beat = 0.0;
    double end_beat = 0.0;
};

// Expert or generated CAU sequence. SOD is implicit context and never stored;
// EOD, when present, is terminal with a zero-length span.
struct CauSequence {
    std::vector<SequenceItem> items;

    void validate(const CauCatalog& catalog) const;
    std::vector<int> tokens() const;
    // tokens with SOD/EOD stripped (BLEU convention; NIL stays)
    std::vector<int> content_tokens() const;
};

// Sum of len(y) over CAU and NIL tokens.
long sequence_duration_beats(const CauSequence& seq, const CauCatalog& catalog);

// Sentence-level BLEU-4: modified n-gram precision (n = 1..4, uniform 1/4
// weights), brevity penalty exp(1 - r/c) for c < r, add-eps smoothing on zero
// match counts; orders with no n-grams contribute a neutral factor.
double bleu4(const std::vector<int>& candidate, const std::vector<int>& reference);

// Annotation file: feature-pack path plus the token/beat-span list.
struct Annotation {
    std::string pack_path;  // relative to the annotation file
    CauSequence sequence;
};

void save_annotation(const Annotation& a, const std::filesystem::path& path,
                     const CauCatalog& catalog);
Annotation load_annotation(const std::filesystem::path& path, const CauCatalog& catalog);

}  // namespace choreo::cau
