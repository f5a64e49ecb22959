#include "choreo/music.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "choreo/common.hpp"
#include "choreo/io.hpp"

namespace choreo::music {

void MusicFeaturePack::validate() const {
    if (chroma.rank() != 2 || chroma.shape[0] != kChromaBins)
        throw ValidationError("feature pack: chroma must be [12, Tc]");
    if (duration <= 0.0) throw ValidationError("feature pack: non-positive duration");
    double dc = chroma.shape[1] / kChromaFps;
    double db = static_cast<double>(beat.size()) / kActivationFps;
    double ds = static_cast<double>(onset.size()) / kActivationFps;
    // streams must agree within one coarse (chroma) frame
    double tol = 1.0 / kChromaFps + 1e-9;
    if (std::abs(dc - db) > tol || std::abs(dc - ds) > tol || std::abs(dc - duration) > tol)
        throw ValidationError("feature pack: stream durations disagree (chroma " + fmt_double(dc) +
                              "s, beat " + fmt_double(db) + "s, onset " + fmt_double(ds) + "s)");
    chroma.check_finite("chroma");
    for (double v : beat)
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("feature pack: beat activation outside [0,1]");
    for (double v : onset)
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("feature pack: onset activation outside [0,1]");
}

void MusicFeaturePack::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ostringstream man;
    man << "CHOREO-PACK v1\n";
    man << "duration " << fmt_double(duration) << "\n";
    man << "stream chroma 10 12 " << chroma.shape[1] << " chroma.f64\n";
    man << "stream beat 100 1 " << beat.size() << " beat.f64\n";
    man << "stream onset 100 1 " << onset.size() << " onset.f64\n";
    io::write_file(dir / "manifest.txt", man.str());
    auto dump = [&](const char* name, const std::vector<double>& v) {
        std::ofstream out(dir / name, std::ios::binary);
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(double)));
        if (!out) throw DataError("cannot write " + (dir / name).string());
    };
    dump("chroma.f64", chroma.values);
    dump("beat.f64", beat);
    dump("onset.f64", onset);
}

MusicFeaturePack MusicFeaturePack::load(const std::filesystem::path& dir) {
    std::ifstream man(dir / "manifest.txt", std::ios::binary);
    if (!man) throw DataError("cannot open feature pack manifest in " + dir.string());
    io::Header h = io::Header::parse(man, "CHOREO-PACK");
    const io::Line* dur = h.find("duration");
    if (!dur) throw DataError("feature pack: missing duration");
    MusicFeaturePack pack;
    pack.duration = dur->num(1);
    auto read_stream = [&](const io::Line* l) {
        auto path = dir / l->str(5);
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open stream " + path.string());
        std::size_t count = static_cast<std::size_t>(l->integer(3)) *
                            static_cast<std::size_t>(l->integer(4));
        auto size = std::filesystem::file_size(path);
        if (size != count * sizeof(double))
            throw ValidationError("stream " + l->str(1) + ": expected " +
                                  std::to_string(count * sizeof(double)) + " bytes, got " +
                                  std::to_string(size));
        return io::read_blob(in, count);
    };
    for (const io::Line* l : h.all("stream")) {
        const std::string& name = l->str(1);
        double rate = l->num(2);
        int width = static_cast<int>(l->integer(3));
        int length = static_cast<int>(l->integer(4));
        if (name == "chroma") {
            if (rate != kChromaFps || width != kChromaBins)
                throw ValidationError("feature pack: chroma rate/shape mismatch");
            pack.chroma = nn::Tensor({width, length}, read_stream(l));
        } else if (name == "beat" || name == "onset") {
            if (rate != kActivationFps || width != 1)
                throw ValidationError("feature pack: " + name + " rate/shape mismatch");
            auto v = read_stream(l);
            (name == "beat" ? pack.beat : pack.onset) = std::move(v);
        } else {
            throw ValidationError("feature pack: unknown stream '" + name + "'");
        }
    }
    pack.validate();
    return pack;
}

double median_gap(const BeatGrid& grid) {
    if (grid.times.size() < 2) return 0.5;
    std::vector<double> gaps;
    for (std::size_t i = 1; i < grid.times.size(); ++i)
        gaps.push_back(grid.times[i] - grid.times[i - 1]);
    std::sort(gaps.begin(), gaps.end());
    return gaps[gaps.size() / 2];
}

double BeatGrid::time_of_beat(double beat) const {
    if (times.empty()) throw DataError("beat grid is empty");
    if (beat <= 0.0) return times.front() + beat * median_gap(*this);
    std::size_t idx = static_cast<std::size_t>(beat);
    double frac = beat - static_cast<double>(idx);
    if (idx < times.size() - 1) return times[idx] + frac * (times[idx + 1] - times[idx]);
    double gap = median_gap(*this);
    return times.back() + (beat - static_cast<double>(times.size() - 1)) * gap;
}

nn::Tensor window(const MusicFeaturePack& pack, double t, double w) {
    if (w <= 0.0) throw ParameterError("window: w must be positive");
    int width = static_cast<int>(std::lround(2.0 * w * kActivationFps));
    nn::Tensor out({kWindowChannels, width});
    int tc = pack.chroma.shape[1];
    int tb = static_cast<int>(pack.beat.size());
    int ts = static_cast<int>(pack.onset.size());
    for (int j = 0; j < width; ++j) {
        double time = t - w + j / kActivationFps;
        if (time < 0.0 || time >= pack.duration) continue;  // zero padding
        int ci = static_cast<int>(time * kChromaFps);
        int ai = static_cast<int>(time * kActivationFps);
        if (ci >= 0 && ci < tc)
            for (int c = 0; c < kChromaBins; ++c)
                out.at(c, j) = pack.chroma.at(c, ci);
        if (ai >= 0 && ai < tb) out.at(12, j) = pack.beat[static_cast<std::size_t>(ai)];
        if (ai >= 0 && ai < ts) out.at(13, j) = pack.onset[static_cast<std::size_t>(ai)];
    }
    return out;
}

BeatGrid beat_times(const MusicFeaturePack& pack, double threshold) {
    const auto& act = pack.beat;
    int n = static_cast<int>(act.size());
    int min_sep = static_cast<int>(std::lround(0.25 * kActivationFps));
    BeatGrid grid;
    int last = -min_sep - 1;
    for (int i = 0; i < n; ++i) {
        double v = act[static_cast<std::size_t>(i)];
        if (v < threshold) continue;
        double left = i > 0 ? act[static_cast<std::size_t>(i - 1)] : -1.0;
        double right = i + 1 < n ? act[static_cast<std::size_t>(i + 1)] : -1.0;
        if (v < left || v < right) continue;
        if (i - last < min_sep) continue;
        grid.times.push_back(i / kActivationFps);
        last = i;
    }
    return grid;
}

}  // namespace choreo::music
