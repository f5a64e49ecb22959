#pragma once

#include <filesystem>
#include <vector>

#include "choreo/tensor.hpp"

namespace choreo::music {

constexpr double kChromaFps = 10.0;
constexpr double kActivationFps = 100.0;
constexpr int kChromaBins = 12;
constexpr int kWindowChannels = 14;  // 12 chroma + beat + onset

// One song's acoustic features: 12-d chroma at 10 frames/s plus beat and
// onset activations at 100 frames/s.
struct MusicFeaturePack {
    nn::Tensor chroma;          // [12, Tc]
    std::vector<double> beat;   // [Tb]
    std::vector<double> onset;  // [Ts]
    double duration = 0.0;      // seconds

    void validate() const;

    // Directory layout: manifest.txt plus one raw float64 blob per stream.
    void save(const std::filesystem::path& dir) const;
    static MusicFeaturePack load(const std::filesystem::path& dir);
};

// Strictly increasing beat times in seconds.
struct BeatGrid {
    std::vector<double> times;

    bool empty() const { return times.empty(); }
    std::size_t size() const { return times.size(); }

    // time of beat index `beat` (0-based); past the detected grid the median
    // inter-beat interval extrapolates.
    double time_of_beat(double beat) const;
};

double median_gap(const BeatGrid& grid);

// 14 x (2w * 100) tensor over [t-w, t+w): the three streams resampled to a
// common 100 frames/s grid (chroma sample-and-hold), zero outside the song.
nn::Tensor window(const MusicFeaturePack& pack, double t, double w);

// Peak-picked beat activations: local maxima above threshold with >= 250 ms
// separation, converted to seconds.
BeatGrid beat_times(const MusicFeaturePack& pack, double threshold = 0.5);

}  // namespace choreo::music
