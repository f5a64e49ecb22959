#pragma once

#include <cstdint>
#include <filesystem>

#include "choreo/cau.hpp"
#include "choreo/music.hpp"

namespace choreo::synth {

// Generator for the training corpus: a CAU catalog with procedurally built
// motion clips, and per-song feature packs whose chroma carries a per-token
// motif over each annotated span so the prediction task is solvable. Motion
// clips stop dead at beat boundaries, giving kinematic-beat detection a
// clean per-beat deceleration spike.
struct SynthConfig {
    int n_songs = 8;
    int n_caus = 8;  // vocabulary beyond the three specials
    double tempo_lo = 100.0;
    double tempo_hi = 150.0;
    int beats_lo = 24, beats_hi = 40;        // per song
    int cau_beats_lo = 3, cau_beats_hi = 8;  // len(y) range
    int max_leading_nils = 2;
    double fps = 80.0;
    std::shared_ptr<const motion::Skeleton> skeleton;  // desk default if null

    void validate() const;
    // seconds-per-beat choices within the tempo range; quantized so that both
    // spb*fps and spb*100 are integers (beat times land on every grid)
    std::vector<double> quantized_spb() const;
};

struct SynthSong {
    music::MusicFeaturePack pack;
    cau::CauSequence annotation;
};

struct SynthCorpus {
    cau::CauCatalog catalog;
    std::vector<SynthSong> songs;
};

SynthCorpus generate_synthetic_corpus(std::uint64_t seed, const SynthConfig& config);

// One procedural CAU clip at the reference tempo (120 bpm), `beats` beats.
motion::MotionClip build_cau_clip(std::uint64_t seed, int beats,
                                  std::shared_ptr<const motion::Skeleton> skeleton, double fps);

// ---- corpus on disk ----
//
//   <dir>/corpus.txt       index: seed, catalog path, song entries
//   <dir>/catalog.txt      + clips/cau_###.mclip
//   <dir>/songs/song_###/{pack/, annot.txt}

void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir, std::uint64_t seed);

struct CorpusSong {
    music::MusicFeaturePack pack;
    cau::CauSequence annotation;
};

struct Corpus {
    cau::CauCatalog catalog;
    std::vector<CorpusSong> songs;
    std::uint64_t seed = 0;
};

Corpus load_corpus(const std::filesystem::path& index_file);

}  // namespace choreo::synth
