#include "choreo/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "choreo/io.hpp"
#include "choreo/motion_io.hpp"

namespace choreo::synth {

namespace {

constexpr double kRefSpb = 0.5;  // reference tempo 120 bpm
constexpr double kRestHeight = 0.9;

std::string cau_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "C-%03d", index);
    return buf;
}

}  // namespace

void SynthConfig::validate() const {
    if (n_songs < 1) throw ParameterError("synth config: n_songs must be >= 1");
    if (n_caus < 1) throw ParameterError("synth config: n_caus must be >= 1");
    if (!(tempo_lo > 0.0) || !(tempo_hi > 0.0) || tempo_lo > tempo_hi)
        throw ParameterError("synth config: invalid tempo range [" + fmt_double(tempo_lo) + ", " +
                             fmt_double(tempo_hi) + "]");
    if (beats_lo < 4 || beats_hi < beats_lo)
        throw ParameterError("synth config: invalid beats range");
    if (cau_beats_lo < 1 || cau_beats_hi < cau_beats_lo)
        throw ParameterError("synth config: invalid cau_beats range");
    if (max_leading_nils < 0) throw ParameterError("synth config: negative max_leading_nils");
    if (fps <= 0.0) throw ParameterError("synth config: fps must be positive");
    if (quantized_spb().empty())
        throw ParameterError("synth config: tempo range [" + fmt_double(tempo_lo) + ", " +
                             fmt_double(tempo_hi) + "] admits no quantized tempo");
}

std::vector<double> SynthConfig::quantized_spb() const {
    std::vector<double> out;
    for (double spb : {0.40, 0.45, 0.50, 0.55, 0.60}) {
        double tempo = 60.0 / spb;
        if (tempo >= tempo_lo - 1e-9 && tempo <= tempo_hi + 1e-9) out.push_back(spb);
    }
    return out;
}

motion::MotionClip build_cau_clip(std::uint64_t seed, int beats,
                                  std::shared_ptr<const motion::Skeleton> skeleton, double fps) {
    Rng rng(seed);
    int fpb = static_cast<int>(std::lround(kRefSpb * fps));
    int n = beats * fpb + 1;
    int jc = skeleton->joint_count();

    // per-joint swing axis and per-beat signed step; steps reflect away from
    // +-0.8 rad so quaternions stay far from the hemisphere boundary
    std::vector<motion::Vec3> axes(static_cast<std::size_t>(jc));
    std::vector<double> amp(static_cast<std::size_t>(jc));
    std::vector<double> wiggle(static_cast<std::size_t>(jc));
    for (int j = 0; j < jc; ++j) {
        motion::Vec3 a{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        double norm = a.norm();
        if (norm < 1e-6) a = {0.0, 1.0, 0.0};
        else a = a * (1.0 / norm);
        axes[static_cast<std::size_t>(j)] = a;
        amp[static_cast<std::size_t>(j)] = rng.uniform(0.3, 0.5);
        wiggle[static_cast<std::size_t>(j)] = rng.uniform(0.05, 0.12);
    }
    double root_step = rng.uniform(0.006, 0.012);  // ground speed, m/frame
    double yaw_amp = rng.uniform(0.15, 0.35);
    double bob = rng.uniform(0.01, 0.03);

    // per-frame speed profile inside one beat: smooth ramp-up, constant
    // cruise, dead stop into the boundary frame (the kinematic beat)
    std::vector<double> prof(static_cast<std::size_t>(fpb), 0.0);
    double prof_sum = 0.0;
    for (int m = 1; m <= fpb; ++m) {
        double v = m >= fpb ? 0.0 : std::min(1.0, m / (0.2 * fpb));
        prof[static_cast<std::size_t>(m - 1)] = v;
        prof_sum += v;
    }

    std::vector<double> theta(static_cast<std::size_t>(jc), 0.0);
    std::vector<double> jstep(static_cast<std::size_t>(jc), 0.0);
    double yaw = 0.0, yaw_step = 0.0;

    motion::MotionClip clip;
    clip.skeleton = skeleton;
    clip.fps = fps;
    clip.frames.resize(static_cast<std::size_t>(n));
    auto& f0 = clip.frames[0];
    f0.root_velocity = {0.0, kRestHeight, 0.0};
    f0.joint_rotations.assign(static_cast<std::size_t>(jc), motion::Quaternion::identity());

    for (int b = 0; b < beats; ++b) {
        for (int j = 0; j < jc; ++j) {
            double step = amp[static_cast<std::size_t>(j)] * (rng.uniform() < 0.5 ? -1.0 : 1.0);
            if (std::abs(theta[static_cast<std::size_t>(j)] + step) > 0.8) step = -step;
            jstep[static_cast<std::size_t>(j)] = step;
        }
        double ys = yaw_amp * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        if (std::abs(yaw + ys) > 0.7) ys = -ys;
        yaw_step = ys;

        for (int m = 1; m <= fpb; ++m) {
            int i = b * fpb + m;
            double v = prof[static_cast<std::size_t>(m - 1)] / prof_sum;
            double u = static_cast<double>(m) / fpb;
            double wig = std::sin(2.0 * M_PI * u);  // zero at boundaries
            auto& fr = clip.frames[static_cast<std::size_t>(i)];
            fr.joint_rotations.resize(static_cast<std::size_t>(jc));
            for (int j = 0; j < jc; ++j) {
                theta[static_cast<std::size_t>(j)] += jstep[static_cast<std::size_t>(j)] * v;
                double angle = theta[static_cast<std::size_t>(j)] +
                               wiggle[static_cast<std::size_t>(j)] * wig;
                fr.joint_rotations[static_cast<std::size_t>(j)] =
                    motion::Quaternion::from_axis_angle(axes[static_cast<std::size_t>(j)], angle);
            }
            yaw += yaw_step * v;
            double speed = root_step * prof[static_cast<std::size_t>(m - 1)];
            fr.root_velocity = {std::sin(yaw) * speed,
                                kRestHeight + bob * 0.5 * (1.0 - std::cos(2.0 * M_PI * u)),
                                std::cos(yaw) * speed};
            fr.root_rotation = motion::yaw_rotation(yaw);
        }
    }
    // thetas were advanced with normalized profile, so each beat ends exactly
    // at its target and the boundary frame repeats the previous pose
    return clip;
}

namespace {

struct MotifPattern {
    int bin1, bin2;
    double amp1 = 0.9, amp2 = 0.6;
};

MotifPattern motif_for(int token) {
    return {(7 * token + 1) % music::kChromaBins, (3 * token + 5) % music::kChromaBins};
}

music::MusicFeaturePack build_pack(const cau::CauSequence& seq, double spb, int n_beats) {
    music::MusicFeaturePack pack;
    pack.duration = n_beats * spb;
    int tc = static_cast<int>(std::lround(pack.duration * music::kChromaFps));
    int tb = static_cast<int>(std::lround(pack.duration * music::kActivationFps));
    pack.chroma = nn::Tensor({music::kChromaBins, tc});
    pack.beat.assign(static_cast<std::size_t>(tb), 0.0);
    pack.onset.assign(static_cast<std::size_t>(tb), 0.0);

    auto bump = [&](std::vector<double>& act, double t, double a) {
        int center = static_cast<int>(std::lround(t * music::kActivationFps));
        for (int k = -8; k <= 8; ++k) {
            int i = center + k;
            if (i < 0 || i >= tb) continue;
            double dt = k / music::kActivationFps;
            double v = a * std::exp(-dt * dt / (2.0 * 0.02 * 0.02));
            act[static_cast<std::size_t>(i)] = std::min(1.0, act[static_cast<std::size_t>(i)] + v);
        }
    };
    for (int b = 0; b < n_beats; ++b) bump(pack.beat, b * spb, 1.0);

    for (const auto& item : seq.items) {
        if (item.token == cau::kEod) continue;
        bump(pack.onset, item.start_beat * spb, 0.9);
        MotifPattern m = motif_for(item.token);
        for (int i = 0; i < tc; ++i) {
            double t = (i + 0.5) / music::kChromaFps;
            if (t < item.start_beat * spb || t >= item.end_beat * spb) continue;
            if (item.token == cau::kNil) {
                for (int c = 0; c < music::kChromaBins; ++c) pack.chroma.at(c, i) = 0.12;
            } else {
                for (int c = 0; c < music::kChromaBins; ++c) pack.chroma.at(c, i) = 0.05;
                pack.chroma.at(m.bin1, i) = m.amp1;
                pack.chroma.at(m.bin2, i) = std::max(pack.chroma.at(m.bin2, i), m.amp2);
            }
        }
    }
    pack.validate();
    return pack;
}

}  // namespace

SynthCorpus generate_synthetic_corpus(std::uint64_t seed, const SynthConfig& config) {
    config.validate();
    auto skeleton = config.skeleton ? config.skeleton : motion::Skeleton::desk_default();
    Rng rng(seed ^ 0xc0ffee1234abcdefull);

    SynthCorpus corpus;
    corpus.catalog = cau::CauCatalog::with_specials();
    for (int k = 0; k < config.n_caus; ++k) {
        int beats = config.cau_beats_lo +
                    static_cast<int>(rng.below(static_cast<std::uint64_t>(
                        config.cau_beats_hi - config.cau_beats_lo + 1)));
        auto clip = std::make_shared<motion::MotionClip>(
            build_cau_clip(rng.fork(), beats, skeleton, config.fps));
        char rel[48];
        std::snprintf(rel, sizeof(rel), "clips/cau_%03d.mclip", k);
        corpus.catalog.add_cau(cau_name(k), beats, rel, std::move(clip));
    }

    auto spbs = config.quantized_spb();
    for (int s = 0; s < config.n_songs; ++s) {
        double spb = spbs[rng.below(spbs.size())];
        int n_beats = config.beats_lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(
                                            config.beats_hi - config.beats_lo + 1)));
        cau::CauSequence seq;
        int cursor = 0;
        int nils = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.max_leading_nils + 1)));
        for (int i = 0; i < nils && cursor < n_beats; ++i) {
            seq.items.push_back({cau::kNil, static_cast<double>(cursor), cursor + 1.0});
            cursor += 1;
        }
        while (true) {
            // CAUs that still fit in the remaining beats
            std::vector<int> fits;
            for (int id = 3; id < corpus.catalog.vocab_size(); ++id)
                if (corpus.catalog.beats(id) <= n_beats - cursor) fits.push_back(id);
            if (fits.empty()) break;
            int id = fits[rng.below(fits.size())];
            int len = corpus.catalog.beats(id);
            seq.items.push_back({id, static_cast<double>(cursor), static_cast<double>(cursor + len)});
            cursor += len;
        }
        while (cursor < n_beats) {  // pad so the annotated spans tile the song
            seq.items.push_back({cau::kNil, static_cast<double>(cursor), cursor + 1.0});
            cursor += 1;
        }
        seq.items.push_back({cau::kEod, static_cast<double>(n_beats), static_cast<double>(n_beats)});
        seq.validate(corpus.catalog);
        corpus.songs.push_back({build_pack(seq, spb, n_beats), std::move(seq)});
    }
    return corpus;
}

void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir, std::uint64_t seed) {
    std::filesystem::create_directories(dir / "clips");
    std::filesystem::create_directories(dir / "songs");
    corpus.catalog.save(dir / "catalog.txt");
    for (const auto& e : corpus.catalog.entries())
        if (e.kind == cau::TokenKind::Cau) motion::save_clip(*e.clip, dir / e.clip_path);

    std::ostringstream index;
    index << "CHOREO-CORPUS v1\n";
    index << "seed " << seed << "\n";
    index << "catalog catalog.txt\n";
    for (std::size_t i = 0; i < corpus.songs.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "song_%03zu", i);
        auto song_dir = dir / "songs" / name;
        std::filesystem::create_directories(song_dir);
        corpus.songs[i].pack.save(song_dir / "pack");
        cau::Annotation a;
        a.pack_path = "pack";
        a.sequence = corpus.songs[i].annotation;
        cau::save_annotation(a, song_dir / "annot.txt", corpus.catalog);
        index << "song songs/" << name << "/pack songs/" << name << "/annot.txt\n";
    }
    io::write_file(dir / "corpus.txt", index.str());
}

Corpus load_corpus(const std::filesystem::path& index_file) {
    std::ifstream in(index_file, std::ios::binary);
    if (!in) throw DataError("cannot open corpus index " + index_file.string());
    io::Header h = io::Header::parse(in, "CHOREO-CORPUS");
    const io::Line* cat = h.find("catalog");
    if (!cat) throw DataError("corpus index missing catalog line");
    auto base = index_file.parent_path();
    Corpus corpus;
    if (const io::Line* seed = h.find("seed"))
        corpus.seed = static_cast<std::uint64_t>(seed->integer(1));
    corpus.catalog = cau::CauCatalog::load(base / cat->str(1));
    for (const io::Line* l : h.all("song")) {
        cau::Annotation a = cau::load_annotation(base / l->str(2), corpus.catalog);
        CorpusSong song;
        song.pack = music::MusicFeaturePack::load(base / l->str(1));
        song.annotation = std::move(a.sequence);
        corpus.songs.push_back(std::move(song));
    }
    if (corpus.songs.empty()) throw DataError("corpus index lists no songs");
    return corpus;
}

}  // namespace choreo::synth
