#include "choreo/predictor.hpp"

#include <cmath>
#include <sstream>

namespace choreo::predictor {

using nn::Graph;
using nn::ParamSet;
using nn::Tensor;
using nn::Var;

void PredictorConfig::validate() const {
    if (half_window <= 0.0) throw ParameterError("predictor config: half_window must be positive");
    if (conv_channels.empty()) throw ParameterError("predictor config: no conv layers");
    if (conv_kernel < 1 || conv_stride < 1)
        throw ParameterError("predictor config: bad conv kernel/stride");
    if (music_dim < 1 || embed_dim < 1 || hidden_dim < 1)
        throw ParameterError("predictor config: dims must be positive");
    if (vocab < 4) throw ParameterError("predictor config: vocabulary must hold specials + CAUs");
    if (conv_out_width() < 1)
        throw ParameterError("predictor config: conv stack consumes the whole window");
}

int PredictorConfig::window_frames() const {
    return static_cast<int>(std::lround(2.0 * half_window * music::kActivationFps));
}

int PredictorConfig::conv_out_width() const {
    int t = window_frames();
    for (std::size_t i = 0; i < conv_channels.size(); ++i) {
        if (t < conv_kernel) return 0;
        t = (t - conv_kernel) / conv_stride + 1;
    }
    return t;
}

namespace {

std::string conv_name(std::size_t i, const char* part) {
    return "enc.conv" + std::to_string(i) + "." + part;
}

}  // namespace

nn::ParamSet init_predictor_params(const PredictorConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed ^ 0x9d2c5680aull);
    ParamSet p;
    int in_ch = music::kWindowChannels;
    for (std::size_t i = 0; i < config.conv_channels.size(); ++i) {
        int out_ch = config.conv_channels[i];
        Tensor& w = p.create(conv_name(i, "w"), {out_ch, in_ch, config.conv_kernel});
        nn::init_uniform_fanin(w, in_ch * config.conv_kernel, rng);
        p.create(conv_name(i, "b"), {out_ch});
        in_ch = out_ch;
    }
    int flat = config.conv_channels.back() * config.conv_out_width();
    nn::init_uniform_fanin(p.create("enc.fc.w", {config.music_dim, flat}), flat, rng);
    p.create("enc.fc.b", {config.music_dim});

    nn::init_uniform_fanin(p.create("dec.embed", {config.vocab, config.embed_dim}),
                           config.embed_dim, rng);
    int fuse_in = config.embed_dim + config.music_dim;
    nn::init_uniform_fanin(p.create("dec.fuse.w", {config.embed_dim, fuse_in}), fuse_in, rng);
    p.create("dec.fuse.b", {config.embed_dim});
    const char* gates[3] = {"r", "z", "n"};
    for (const char* gate : gates) {
        nn::init_uniform_fanin(
            p.create(std::string("dec.gru.wi_") + gate, {config.hidden_dim, config.embed_dim}),
            config.embed_dim, rng);
        nn::init_uniform_fanin(
            p.create(std::string("dec.gru.wh_") + gate, {config.hidden_dim, config.hidden_dim}),
            config.hidden_dim, rng);
        p.create(std::string("dec.gru.bi_") + gate, {config.hidden_dim});
        p.create(std::string("dec.gru.bh_") + gate, {config.hidden_dim});
    }
    nn::init_uniform_fanin(p.create("dec.out.w", {config.vocab, config.hidden_dim}),
                           config.hidden_dim, rng);
    p.create("dec.out.b", {config.vocab});
    return p;
}

nn::Var encode(Graph& g, ParamSet& params, Tensor window, const PredictorConfig& config) {
    if (window.rank() != 2 || window.shape[0] != music::kWindowChannels ||
        window.shape[1] != config.window_frames())
        throw DimensionError("encode: window " + window.shape_str() + " does not match config [" +
                             std::to_string(music::kWindowChannels) + "," +
                             std::to_string(config.window_frames()) + "]");
    Var x = g.input(std::move(window));
    for (std::size_t i = 0; i < config.conv_channels.size(); ++i) {
        x = relu(conv1d(x, g.param(params.at(conv_name(i, "w"))),
                        g.param(params.at(conv_name(i, "b"))), config.conv_stride, 0));
    }
    int flat = config.conv_channels.back() * config.conv_out_width();
    x = reshape(x, {flat});
    return dense(x, g.param(params.at("enc.fc.w")), g.param(params.at("enc.fc.b")));
}

std::pair<Var, Var> decode_step(Graph& g, ParamSet& params, const PredictorConfig& config,
                                int y_prev, Var m, Var h) {
    if (y_prev < 0 || y_prev >= config.vocab)
        throw ValidationError("decode_step: token " + std::to_string(y_prev) +
                              " outside vocabulary");
    Var emb = embed_row(g.param(params.at("dec.embed")), y_prev);
    Var fused = relu(dense(concat({emb, m}), g.param(params.at("dec.fuse.w")),
                           g.param(params.at("dec.fuse.b"))));
    nn::GruParamRefs gru{
        g.param(params.at("dec.gru.wi_r")), g.param(params.at("dec.gru.wi_z")),
        g.param(params.at("dec.gru.wi_n")), g.param(params.at("dec.gru.wh_r")),
        g.param(params.at("dec.gru.wh_z")), g.param(params.at("dec.gru.wh_n")),
        g.param(params.at("dec.gru.bi_r")), g.param(params.at("dec.gru.bi_z")),
        g.param(params.at("dec.gru.bi_n")), g.param(params.at("dec.gru.bh_r")),
        g.param(params.at("dec.gru.bh_z")), g.param(params.at("dec.gru.bh_n"))};
    Var h2 = gru_cell(fused, h, gru);
    Var logits = dense(h2, g.param(params.at("dec.out.w")), g.param(params.at("dec.out.b")));
    return {logits, h2};
}

DecodeResult decode_step_eval(ParamSet& params, const PredictorConfig& config, int y_prev,
                              const Tensor& m, const Tensor& h) {
    Graph g;
    auto [logits, h2] = decode_step(g, params, config, y_prev, g.input(m), g.input(h));
    return {nn::softmax(logits.val()), h2.val()};
}

// ---- checkpoint plumbing ----

namespace {

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

std::vector<int> split_ints(const std::string& s) {
    std::vector<int> out;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::atoi(item.c_str()));
    return out;
}

}  // namespace

nn::Checkpoint make_checkpoint(ParamSet params, const PredictorConfig& config,
                               const std::vector<int>& token_beats) {
    nn::Checkpoint ck;
    ck.params = std::move(params);
    ck.meta["kind"] = "cau-predictor";
    ck.meta["half_window"] = fmt_double(config.half_window);
    ck.meta["conv_channels"] = join_ints(config.conv_channels);
    ck.meta["conv_kernel"] = std::to_string(config.conv_kernel);
    ck.meta["conv_stride"] = std::to_string(config.conv_stride);
    ck.meta["music_dim"] = std::to_string(config.music_dim);
    ck.meta["embed_dim"] = std::to_string(config.embed_dim);
    ck.meta["hidden_dim"] = std::to_string(config.hidden_dim);
    ck.meta["vocab"] = std::to_string(config.vocab);
    ck.meta["token_beats"] = join_ints(token_beats);
    return ck;
}

PredictorConfig config_from_checkpoint(const nn::Checkpoint& ck) {
    if (ck.meta.count("kind") == 0 || ck.meta.at("kind") != "cau-predictor")
        throw ValidationError("checkpoint is not a cau-predictor checkpoint");
    PredictorConfig c;
    c.half_window = ck.meta_num("half_window");
    c.conv_channels = split_ints(ck.meta_at("conv_channels"));
    c.conv_kernel = static_cast<int>(ck.meta_num("conv_kernel"));
    c.conv_stride = static_cast<int>(ck.meta_num("conv_stride"));
    c.music_dim = static_cast<int>(ck.meta_num("music_dim"));
    c.embed_dim = static_cast<int>(ck.meta_num("embed_dim"));
    c.hidden_dim = static_cast<int>(ck.meta_num("hidden_dim"));
    c.vocab = static_cast<int>(ck.meta_num("vocab"));
    c.validate();
    return c;
}

std::vector<int> token_beats_from_checkpoint(const nn::Checkpoint& ck) {
    std::vector<int> beats = split_ints(ck.meta_at("token_beats"));
    if (static_cast<int>(beats.size()) != static_cast<int>(ck.meta_num("vocab")))
        throw ValidationError("checkpoint token_beats disagree with vocabulary size");
    return beats;
}

// ---- training ----

TrainResult train_predictor(const synth::Corpus& corpus, const PredictorConfig& config,
                            const PredictorHyper& hyper) {
    config.validate();
    if (corpus.songs.empty()) throw DataError("train_predictor: empty corpus");
    if (config.vocab != corpus.catalog.vocab_size())
        throw ValidationError("train_predictor: config vocab " + std::to_string(config.vocab) +
                              " vs catalog " + std::to_string(corpus.catalog.vocab_size()));

    // teacher-forced inputs are fixed across epochs: window tensors and beat
    // grids are precomputed once
    struct Step {
        Tensor window;
        int y_prev;
        int target;
    };
    std::vector<std::vector<Step>> songs;
    std::size_t total_steps = 0;
    for (const auto& song : corpus.songs) {
        music::BeatGrid grid = music::beat_times(song.pack);
        if (grid.empty()) throw DataError("train_predictor: song without beat grid");
        std::vector<Step> steps;
        int prev = cau::kSod;
        for (const auto& item : song.annotation.items) {
            double t = grid.time_of_beat(item.start_beat);
            steps.push_back({music::window(song.pack, t, config.half_window), prev, item.token});
            prev = item.token;
        }
        total_steps += steps.size();
        songs.push_back(std::move(steps));
    }

    ParamSet params = init_predictor_params(config, hyper.seed);
    nn::OptimizerState opt = nn::OptimizerState::rmsprop(hyper.lr);
    nn::PlateauScheduler sched(hyper.patience, hyper.plateau_factor, hyper.lr);

    TrainResult result;
    ParamSet best_params = params;
    double best_loss = 1e300;

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        double epoch_nll = 0.0;
        for (auto& steps : songs) {
            Graph g;
            Var h = g.input(Tensor({config.hidden_dim}));
            Var song_loss = g.constant(0.0);
            for (const Step& st : steps) {
                Var m = encode(g, params, st.window, config);
                auto [logits, h2] = decode_step(g, params, config, st.y_prev, m, h);
                song_loss = nn::add(song_loss, nn::softmax_nll(logits, st.target));
                h = h2;
            }
            epoch_nll += song_loss.val().values[0];
            params.zero_grads();
            g.backward(song_loss);
            optimizer_step(opt, params);
        }
        double mean_nll = epoch_nll / static_cast<double>(total_steps);
        opt.lr = sched.step(mean_nll);
        result.log.push_back({epoch, mean_nll, opt.lr});
        if (mean_nll < best_loss) {
            best_loss = mean_nll;
            best_params = params;
        }
        if (hyper.target_loss > 0.0 && mean_nll < hyper.target_loss) break;
    }

    result.best_loss = best_loss;
    result.checkpoint = make_checkpoint(std::move(best_params), config,
                                        corpus.catalog.beat_lengths());
    result.checkpoint.meta["trained"] = "1";
    result.checkpoint.meta["seed"] = std::to_string(hyper.seed);
    result.checkpoint.meta["best_loss"] = fmt_double(best_loss);
    result.checkpoint.meta["epochs_run"] = std::to_string(result.log.size());
    {
        std::string curve;
        for (std::size_t i = 0; i < result.log.size(); ++i) {
            if (i) curve += ",";
            curve += fmt_double(result.log[i].loss);
        }
        result.checkpoint.meta["loss_curve"] = curve;
    }
    return result;
}

// ---- generation (Algorithm: sliding-window CAU sequence decoding) ----

cau::CauSequence generate(const music::MusicFeaturePack& pack, const nn::Checkpoint& ck,
                          GenerateOptions opts) {
    PredictorConfig config = config_from_checkpoint(ck);
    std::vector<int> beats = token_beats_from_checkpoint(ck);
    music::BeatGrid grid = music::beat_times(pack);
    if (grid.empty()) throw DataError("generate: song has no detectable beats");
    // a trainable copy is needed because graph building binds parameters
    nn::Checkpoint work = ck;
    for (auto& [name, t] : work.params.tensors()) t.enable_grad();

    Rng rng(opts.seed ^ 0x5eaf00d5ull);
    cau::CauSequence seq;
    Tensor h({config.hidden_dim});
    int y_prev = cau::kSod;
    double beat_pos = 0.0;
    double t = 0.0;
    while (y_prev != cau::kEod && t < pack.duration) {
        Tensor win = music::window(pack, t, config.half_window);
        Graph g;
        Var m = encode(g, work.params, std::move(win), config);
        auto [logits, h2] = decode_step(g, work.params, config, y_prev, m, g.input(h));
        h = h2.val();
        std::vector<double> dist = nn::softmax(logits.val());
        dist[cau::kSod] = 0.0;  // len(SOD) = 0 would stall t
        int pick;
        if (opts.temperature > 0.0) {
            std::vector<double> scaled(dist.size());
            double sum = 0.0;
            for (std::size_t i = 0; i < dist.size(); ++i) {
                scaled[i] = dist[i] > 0.0 ? std::pow(dist[i], 1.0 / opts.temperature) : 0.0;
                sum += scaled[i];
            }
            double u = rng.uniform() * sum;
            pick = static_cast<int>(dist.size()) - 1;
            double acc = 0.0;
            for (std::size_t i = 0; i < scaled.size(); ++i) {
                acc += scaled[i];
                if (u <= acc) {
                    pick = static_cast<int>(i);
                    break;
                }
            }
        } else {
            pick = nn::argmax(dist);
        }
        if (pick == cau::kEod) {
            seq.items.push_back({cau::kEod, beat_pos, beat_pos});
            break;
        }
        int len = beats[static_cast<std::size_t>(pick)];
        if (len < 1) throw StateError("generate: non-EOD token with zero beat length");
        seq.items.push_back({pick, beat_pos, beat_pos + len});
        beat_pos += len;
        t = grid.time_of_beat(beat_pos);
        y_prev = pick;
    }
    return seq;
}

}  // namespace choreo::predictor
