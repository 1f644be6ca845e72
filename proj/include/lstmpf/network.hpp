#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lstmpf/kernels.hpp"

namespace lstmpf {

// Numerically stable logistic function; exact for |x| well past 700.
double sigmoid(double x);

enum class LayerKind : std::uint8_t { lstm = 0, rnn = 1 };

// Which gate multiplies tanh(c) to form the hidden output. `input` is a
// study variant in which the input gate is reused and the output gate goes
// unused.
enum class HiddenGate : std::uint8_t { output = 0, input = 1 };

struct NetworkDims {
    std::size_t input = 0;
    std::vector<std::size_t> hidden;
    std::size_t output = 0;
};

// Gated recurrent layer with diagonal peephole connections.
struct LstmLayerParams {
    Matrix W_xi, W_xf, W_xc, W_xo; // [H x I]
    Matrix W_hi, W_hf, W_hc, W_ho; // [H x H]
    Vector p_ci, p_cf, p_co;       // [H] diagonal peepholes
    Vector b_i, b_f, b_c, b_o;     // [H]

    LstmLayerParams() = default;
    LstmLayerParams(std::size_t hidden, std::size_t input);
    std::size_t hidden_size() const { return b_i.size(); }
    std::size_t input_size() const { return W_xi.cols; }
};

struct RnnLayerParams {
    Matrix W_xh; // [H x I]
    Matrix W_hh; // [H x H]
    Vector b_h;  // [H]

    RnnLayerParams() = default;
    RnnLayerParams(std::size_t hidden, std::size_t input);
    std::size_t hidden_size() const { return b_h.size(); }
    std::size_t input_size() const { return W_xh.cols; }
};

struct OutputLayerParams {
    Matrix W_hy; // [O x H]
    Vector b_y;  // [O]

    OutputLayerParams() = default;
    OutputLayerParams(std::size_t output, std::size_t hidden);
};

using LayerParams = std::variant<LstmLayerParams, RnnLayerParams>;

struct NetworkParams {
    NetworkDims dims;
    std::vector<LayerParams> layers;
    OutputLayerParams output;
    HiddenGate hidden_gate = HiddenGate::output;
};

// Shape + kind description, the part of a network fixed before training.
struct NetworkSpec {
    NetworkDims dims;
    std::vector<LayerKind> kinds; // one per hidden layer
    HiddenGate hidden_gate = HiddenGate::output;
};

// Recurrent state of one layer; c is unused for rnn layers.
struct LayerState {
    Vector h;
    Vector c;
};

// Everything the backward pass needs from one lstm step.
struct LstmStepCache {
    Vector x, h_prev, c_prev;
    Vector i, f, g, o; // gate activations; g = tanh cell candidate
    Vector c, tanh_c;
};

struct RnnStepCache {
    Vector x, h_prev, h;
};

// i = sig(W_xi x + W_hi h_prev + p_ci.c_prev + b_i), f analogous with p_cf,
// c = f.c_prev + i.tanh(W_xc x + W_hc h_prev + b_c),
// o = sig(W_xo x + W_ho h_prev + p_co.c + b_o), h = o.tanh(c)
// (h = i.tanh(c) under HiddenGate::input).
std::pair<LayerState, LstmStepCache> lstm_step(const LstmLayerParams& p, std::span<const double> x,
                                               const LayerState& prev,
                                               HiddenGate gate = HiddenGate::output);

// h = sig(W_xh x + W_hh h_prev + b_h)
Vector rnn_step(const RnnLayerParams& p, std::span<const double> x, std::span<const double> prev_h);

struct LayerCache {
    std::vector<LstmStepCache> lstm;
    std::vector<RnnStepCache> rnn;
};

struct ForwardCache {
    std::vector<LayerCache> layers;        // one per hidden layer
    std::vector<Vector> last_hidden;       // h sequence of the top layer
};

struct ForwardResult {
    std::vector<Vector> ys;
    ForwardCache cache;
};

// Runs the stacked network over a sequence from zero initial states; each
// layer's h sequence feeds the next, outputs are linear: y = W_hy h + b_y.
ForwardResult forward(const NetworkParams& params, std::span<const Vector> xs);

// Gradient holder; same tensor shapes as the parameters.
struct Gradients {
    std::vector<LayerParams> layers;
    OutputLayerParams output;
};

Gradients zero_gradients(const NetworkParams& params);

// Exact backpropagation through time over the full sequence, including the
// peephole contributions through both c_prev (input/forget gates) and c
// (output gate). dys is dLoss/dy per frame.
Gradients backward(const NetworkParams& params, const ForwardCache& cache,
                   std::span<const Vector> dys);

// Deterministic initialization: weights uniform in [-0.08, 0.08] drawn in
// declaration order, forget-gate bias 1.0, all other biases and peepholes 0.
NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed);

// Visits every parameter tensor as (name, flat values) in declaration order:
// per layer W_xi, W_xf, W_xc, W_xo, W_hi, W_hf, W_hc, W_ho, p_ci, p_cf, p_co,
// b_i, b_f, b_c, b_o (lstm) or W_xh, W_hh, b_h (rnn), then W_hy, b_y.
void for_each_tensor(NetworkParams& p,
                     const std::function<void(const std::string&, std::vector<double>&)>& fn);
void for_each_tensor(const NetworkParams& p,
                     const std::function<void(const std::string&, const std::vector<double>&)>& fn);
void for_each_tensor(Gradients& g,
                     const std::function<void(const std::string&, std::vector<double>&)>& fn);
void for_each_tensor(const Gradients& g,
                     const std::function<void(const std::string&, const std::vector<double>&)>& fn);

// Per-coefficient affine feature maps stored with a trained model: inputs are
// z-scored with (in_mean, in_sd) and network outputs are mapped back through
// (out_mean, out_sd).
struct Normalization {
    Vector in_mean, in_sd;
    Vector out_mean, out_sd;

    static Normalization identity(std::size_t in_dim, std::size_t out_dim);
    bool operator==(const Normalization&) const = default;
};

struct Checkpoint {
    NetworkParams params;
    Normalization norm;
    std::string config_echo; // JSON-like text block describing the run
    std::uint64_t seed = 0;
};

// Binary checkpoint: magic "CKP1", version, dims, layer kinds, hidden-gate
// mode, normalization, then every tensor in declaration order as
// little-endian f64, the seed, and the config echo. Canonical: loading and
// re-saving is byte-identical.
std::string encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& context);
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace lstmpf
