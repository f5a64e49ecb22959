#pragma once

#include <cstdint>
#include <utility>

#include "choreo/checkpoint.hpp"
#include "choreo/graph.hpp"
#include "choreo/music.hpp"
#include "choreo/optim.hpp"
#include "choreo/synthetic.hpp"

namespace choreo::predictor {

// Stage one: local music encoder (5-layer temporal conv + MLP head) and a
// GRU decoder over the CAU history, fused through an MLP.
struct PredictorConfig {
    double half_window = 5.0;  // w; the sliding window covers [t-w, t+w]
    std::vector<int> conv_channels = {32, 32, 64, 64, 64};
    int conv_kernel = 5;
    int conv_stride = 2;
    int music_dim = 64;
    int embed_dim = 128;
    int hidden_dim = 64;
    int vocab = 0;  // V >= 4

    void validate() const;
    int window_frames() const;    // 2 w * 100
    int conv_out_width() const;   // after the five stride-2 layers
};

nn::ParamSet init_predictor_params(const PredictorConfig& config, std::uint64_t seed);

// m_t producer; `window` must be [14, window_frames()].
nn::Var encode(nn::Graph& g, nn::ParamSet& params, nn::Tensor window,
               const PredictorConfig& config);

// One decoder step: embed(y_prev) (+) m_t -> fusion MLP -> GRU -> logits.
// Returns (logits over V, new hidden state).
std::pair<nn::Var, nn::Var> decode_step(nn::Graph& g, nn::ParamSet& params,
                                        const PredictorConfig& config, int y_prev, nn::Var m,
                                        nn::Var h);

// Inference wrapper returning the V-simplex and the updated hidden state.
struct DecodeResult {
    std::vector<double> dist;
    nn::Tensor hidden;
};
DecodeResult decode_step_eval(nn::ParamSet& params, const PredictorConfig& config, int y_prev,
                              const nn::Tensor& m, const nn::Tensor& h);

struct PredictorHyper {
    int epochs = 1000;
    double lr = 1e-3;
    int patience = 8;
    double plateau_factor = 0.9;
    std::uint64_t seed = 1;
    double target_loss = 0.0;  // > 0: stop once mean NLL per token drops below
};

struct EpochRecord {
    int epoch;
    double loss;  // mean NLL per token
    double lr;
};

struct TrainResult {
    nn::Checkpoint checkpoint;  // best-loss parameters
    std::vector<EpochRecord> log;
    double best_loss = 0.0;
};

TrainResult train_predictor(const synth::Corpus& corpus, const PredictorConfig& config,
                            const PredictorHyper& hyper);

// Checkpoint plumbing: config and per-token beat lengths ride in the manifest
// so generation needs only (pack, checkpoint).
nn::Checkpoint make_checkpoint(nn::ParamSet params, const PredictorConfig& config,
                               const std::vector<int>& token_beats);
PredictorConfig config_from_checkpoint(const nn::Checkpoint& ck);
std::vector<int> token_beats_from_checkpoint(const nn::Checkpoint& ck);

struct GenerateOptions {
    double temperature = 0.0;  // 0 = argmax
    std::uint64_t seed = 0;
};

// Algorithm: t <- 0, y_p <- SOD; repeat encode/decode/append, advancing t by
// len(y) beats through the song's beat grid, until EOD or the music ends.
cau::CauSequence generate(const music::MusicFeaturePack& pack, const nn::Checkpoint& ck,
                          GenerateOptions opts = {});

}  // namespace choreo::predictor
