#include "lstmpf/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include "lstmpf/errors.hpp"
#include "lstmpf/rng.hpp"

namespace lstmpf {

double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

LstmLayerParams::LstmLayerParams(std::size_t hidden, std::size_t input)
    : W_xi(hidden, input), W_xf(hidden, input), W_xc(hidden, input), W_xo(hidden, input),
      W_hi(hidden, hidden), W_hf(hidden, hidden), W_hc(hidden, hidden), W_ho(hidden, hidden),
      p_ci(hidden, 0.0), p_cf(hidden, 0.0), p_co(hidden, 0.0), b_i(hidden, 0.0),
      b_f(hidden, 0.0), b_c(hidden, 0.0), b_o(hidden, 0.0) {}

RnnLayerParams::RnnLayerParams(std::size_t hidden, std::size_t input)
    : W_xh(hidden, input), W_hh(hidden, hidden), b_h(hidden, 0.0) {}

OutputLayerParams::OutputLayerParams(std::size_t output, std::size_t hidden)
    : W_hy(output, hidden), b_y(output, 0.0) {}

namespace {

void check_finite(const Vector& v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw DataError(std::string("non-finite value in ") + what);
        }
    }
}

void require(bool ok, const std::string& msg) {
    if (!ok) {
        throw DataError(msg);
    }
}

std::size_t layer_input_size(const NetworkDims& dims, std::size_t layer) {
    return layer == 0 ? dims.input : dims.hidden[layer - 1];
}

void validate_dims(const NetworkDims& dims) {
    require(dims.input > 0 && dims.output > 0, "network input/output sizes must be positive");
    require(!dims.hidden.empty(), "network needs at least one hidden layer");
    for (std::size_t h : dims.hidden) {
        require(h > 0, "hidden sizes must be positive");
    }
}

} // namespace

std::pair<LayerState, LstmStepCache> lstm_step(const LstmLayerParams& p, std::span<const double> x,
                                               const LayerState& prev, HiddenGate gate) {
    const std::size_t h_size = p.hidden_size();
    require(x.size() == p.input_size(), "lstm_step: input size mismatch");
    require(prev.h.size() == h_size && prev.c.size() == h_size,
            "lstm_step: state size mismatch");

    LstmStepCache cache;
    cache.x.assign(x.begin(), x.end());
    cache.h_prev = prev.h;
    cache.c_prev = prev.c;

    Vector a_i = p.b_i;
    Vector a_f = p.b_f;
    Vector a_g = p.b_c;
    kern::matvec_add(p.W_xi, x, a_i);
    kern::matvec_add(p.W_hi, prev.h, a_i);
    kern::matvec_add(p.W_xf, x, a_f);
    kern::matvec_add(p.W_hf, prev.h, a_f);
    kern::matvec_add(p.W_xc, x, a_g);
    kern::matvec_add(p.W_hc, prev.h, a_g);

    cache.i.resize(h_size);
    cache.f.resize(h_size);
    cache.g.resize(h_size);
    cache.c.resize(h_size);
    for (std::size_t k = 0; k < h_size; ++k) {
        cache.i[k] = sigmoid(a_i[k] + p.p_ci[k] * prev.c[k]);
        cache.f[k] = sigmoid(a_f[k] + p.p_cf[k] * prev.c[k]);
        cache.g[k] = std::tanh(a_g[k]);
        cache.c[k] = cache.f[k] * prev.c[k] + cache.i[k] * cache.g[k];
    }
    check_finite(cache.i, "lstm input gate");
    check_finite(cache.f, "lstm forget gate");
    check_finite(cache.g, "lstm cell candidate");
    check_finite(cache.c, "lstm cell activation");

    Vector a_o = p.b_o;
    kern::matvec_add(p.W_xo, x, a_o);
    kern::matvec_add(p.W_ho, prev.h, a_o);
    cache.o.resize(h_size);
    cache.tanh_c.resize(h_size);
    LayerState state;
    state.h.resize(h_size);
    state.c = cache.c;
    for (std::size_t k = 0; k < h_size; ++k) {
        cache.o[k] = sigmoid(a_o[k] + p.p_co[k] * cache.c[k]);
        cache.tanh_c[k] = std::tanh(cache.c[k]);
        const double hg = gate == HiddenGate::output ? cache.o[k] : cache.i[k];
        state.h[k] = hg * cache.tanh_c[k];
    }
    check_finite(cache.o, "lstm output gate");
    check_finite(state.h, "lstm hidden activation");
    return {std::move(state), std::move(cache)};
}

Vector rnn_step(const RnnLayerParams& p, std::span<const double> x,
                std::span<const double> prev_h) {
    const std::size_t h_size = p.hidden_size();
    require(x.size() == p.input_size(), "rnn_step: input size mismatch");
    require(prev_h.size() == h_size, "rnn_step: state size mismatch");
    Vector a = p.b_h;
    kern::matvec_add(p.W_xh, x, a);
    kern::matvec_add(p.W_hh, prev_h, a);
    Vector h(h_size);
    for (std::size_t k = 0; k < h_size; ++k) {
        h[k] = sigmoid(a[k]);
    }
    check_finite(h, "rnn hidden activation");
    return h;
}

ForwardResult forward(const NetworkParams& params, std::span<const Vector> xs) {
    validate_dims(params.dims);
    require(!xs.empty(), "forward: empty input sequence");
    require(params.layers.size() == params.dims.hidden.size(),
            "forward: layer count disagrees with dims");

    const std::size_t seq_len = xs.size();
    ForwardResult result;
    result.cache.layers.resize(params.layers.size());

    std::vector<Vector> current(xs.begin(), xs.end());
    require(current.front().size() == params.dims.input, "forward: input dimension mismatch");

    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const std::size_t h_size = params.dims.hidden[l];
        std::vector<Vector> next(seq_len);
        if (const auto* lstm = std::get_if<LstmLayerParams>(&params.layers[l])) {
            LayerState state{Vector(h_size, 0.0), Vector(h_size, 0.0)};
            auto& caches = result.cache.layers[l].lstm;
            caches.reserve(seq_len);
            for (std::size_t t = 0; t < seq_len; ++t) {
                auto [new_state, cache] = lstm_step(*lstm, current[t], state, params.hidden_gate);
                state = std::move(new_state);
                next[t] = state.h;
                caches.push_back(std::move(cache));
            }
        } else {
            const auto& rnn = std::get<RnnLayerParams>(params.layers[l]);
            Vector h(h_size, 0.0);
            auto& caches = result.cache.layers[l].rnn;
            caches.reserve(seq_len);
            for (std::size_t t = 0; t < seq_len; ++t) {
                RnnStepCache cache;
                cache.x = current[t];
                cache.h_prev = h;
                h = rnn_step(rnn, current[t], h);
                cache.h = h;
                next[t] = h;
                caches.push_back(std::move(cache));
            }
        }
        current = std::move(next);
    }
    result.cache.last_hidden = current;

    result.ys.resize(seq_len);
    for (std::size_t t = 0; t < seq_len; ++t) {
        Vector y = params.output.b_y;
        kern::matvec_add(params.output.W_hy, result.cache.last_hidden[t], y);
        result.ys[t] = std::move(y);
    }
    return result;
}

Gradients zero_gradients(const NetworkParams& params) {
    Gradients g;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const std::size_t h_size = params.dims.hidden[l];
        const std::size_t in_size = layer_input_size(params.dims, l);
        if (std::holds_alternative<LstmLayerParams>(params.layers[l])) {
            g.layers.emplace_back(LstmLayerParams(h_size, in_size));
        } else {
            g.layers.emplace_back(RnnLayerParams(h_size, in_size));
        }
    }
    g.output = OutputLayerParams(params.dims.output, params.dims.hidden.back());
    return g;
}

namespace {

// elementwise helpers
void add_scaled_product(Vector& acc, const Vector& a, const Vector& b) {
    for (std::size_t k = 0; k < acc.size(); ++k) {
        acc[k] += a[k] * b[k];
    }
}

// One layer's BPTT. dh_ext holds the per-frame gradients arriving from
// above; returns the per-frame gradients for the layer below.
std::vector<Vector> lstm_bptt(const LstmLayerParams& p, LstmLayerParams& grad,
                              const std::vector<LstmStepCache>& caches,
                              const std::vector<Vector>& dh_ext, HiddenGate mode) {
    const std::size_t seq_len = caches.size();
    const std::size_t h_size = p.hidden_size();
    const std::size_t in_size = p.input_size();

    std::vector<Vector> dxs(seq_len, Vector(in_size, 0.0));
    Vector dh_next(h_size, 0.0);
    Vector dc_next(h_size, 0.0);
    Vector dh(h_size), dc(h_size), da_i(h_size), da_f(h_size), da_g(h_size), da_o(h_size);

    for (std::size_t tt = seq_len; tt-- > 0;) {
        const LstmStepCache& s = caches[tt];
        for (std::size_t k = 0; k < h_size; ++k) {
            dh[k] = dh_ext[tt][k] + dh_next[k];
            dc[k] = dc_next[k];
        }

        if (mode == HiddenGate::output) {
            for (std::size_t k = 0; k < h_size; ++k) {
                const double tc = s.tanh_c[k];
                const double do_k = dh[k] * tc;
                da_o[k] = do_k * s.o[k] * (1.0 - s.o[k]);
                // h and the o-gate peephole both expose c at this step
                dc[k] += dh[k] * s.o[k] * (1.0 - tc * tc) + p.p_co[k] * da_o[k];
            }
        } else {
            std::fill(da_o.begin(), da_o.end(), 0.0);
            for (std::size_t k = 0; k < h_size; ++k) {
                const double tc = s.tanh_c[k];
                dc[k] += dh[k] * s.i[k] * (1.0 - tc * tc);
            }
        }

        for (std::size_t k = 0; k < h_size; ++k) {
            const double df = dc[k] * s.c_prev[k];
            double di = dc[k] * s.g[k];
            if (mode == HiddenGate::input) {
                di += dh[k] * s.tanh_c[k]; // direct use of i in h
            }
            const double dg = dc[k] * s.i[k];
            da_i[k] = di * s.i[k] * (1.0 - s.i[k]);
            da_f[k] = df * s.f[k] * (1.0 - s.f[k]);
            da_g[k] = dg * (1.0 - s.g[k] * s.g[k]);
            dc_next[k] = dc[k] * s.f[k] + p.p_ci[k] * da_i[k] + p.p_cf[k] * da_f[k];
        }

        kern::outer_add(grad.W_xi, da_i, s.x);
        kern::outer_add(grad.W_xf, da_f, s.x);
        kern::outer_add(grad.W_xc, da_g, s.x);
        kern::outer_add(grad.W_hi, da_i, s.h_prev);
        kern::outer_add(grad.W_hf, da_f, s.h_prev);
        kern::outer_add(grad.W_hc, da_g, s.h_prev);
        add_scaled_product(grad.p_ci, da_i, s.c_prev);
        add_scaled_product(grad.p_cf, da_f, s.c_prev);
        for (std::size_t k = 0; k < h_size; ++k) {
            grad.b_i[k] += da_i[k];
            grad.b_f[k] += da_f[k];
            grad.b_c[k] += da_g[k];
        }
        if (mode == HiddenGate::output) {
            kern::outer_add(grad.W_xo, da_o, s.x);
            kern::outer_add(grad.W_ho, da_o, s.h_prev);
            add_scaled_product(grad.p_co, da_o, s.c);
            for (std::size_t k = 0; k < h_size; ++k) {
                grad.b_o[k] += da_o[k];
            }
        }

        Vector& dx = dxs[tt];
        kern::matvec_t_add(p.W_xi, da_i, dx);
        kern::matvec_t_add(p.W_xf, da_f, dx);
        kern::matvec_t_add(p.W_xc, da_g, dx);
        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        kern::matvec_t_add(p.W_hi, da_i, dh_next);
        kern::matvec_t_add(p.W_hf, da_f, dh_next);
        kern::matvec_t_add(p.W_hc, da_g, dh_next);
        if (mode == HiddenGate::output) {
            kern::matvec_t_add(p.W_xo, da_o, dx);
            kern::matvec_t_add(p.W_ho, da_o, dh_next);
        }
    }
    return dxs;
}

std::vector<Vector> rnn_bptt(const RnnLayerParams& p, RnnLayerParams& grad,
                             const std::vector<RnnStepCache>& caches,
                             const std::vector<Vector>& dh_ext) {
    const std::size_t seq_len = caches.size();
    const std::size_t h_size = p.hidden_size();
    const std::size_t in_size = p.input_size();

    std::vector<Vector> dxs(seq_len, Vector(in_size, 0.0));
    Vector dh_next(h_size, 0.0);
    Vector da(h_size);
    for (std::size_t tt = seq_len; tt-- > 0;) {
        const RnnStepCache& s = caches[tt];
        for (std::size_t k = 0; k < h_size; ++k) {
            const double dh = dh_ext[tt][k] + dh_next[k];
            da[k] = dh * s.h[k] * (1.0 - s.h[k]);
        }
        kern::outer_add(grad.W_xh, da, s.x);
        kern::outer_add(grad.W_hh, da, s.h_prev);
        for (std::size_t k = 0; k < h_size; ++k) {
            grad.b_h[k] += da[k];
        }
        kern::matvec_t_add(p.W_xh, da, dxs[tt]);
        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        kern::matvec_t_add(p.W_hh, da, dh_next);
    }
    return dxs;
}

} // namespace

Gradients backward(const NetworkParams& params, const ForwardCache& cache,
                   std::span<const Vector> dys) {
    require(cache.layers.size() == params.layers.size(), "backward: cache/network mismatch");
    const std::size_t seq_len = cache.last_hidden.size();
    require(dys.size() == seq_len, "backward: upstream gradient length mismatch");

    Gradients grads = zero_gradients(params);

    // Output layer, and the gradient it sends into the top hidden sequence.
    std::vector<Vector> dh(seq_len, Vector(params.dims.hidden.back(), 0.0));
    for (std::size_t t = 0; t < seq_len; ++t) {
        require(dys[t].size() == params.dims.output, "backward: dy dimension mismatch");
        kern::outer_add(grads.output.W_hy, dys[t], cache.last_hidden[t]);
        for (std::size_t k = 0; k < params.dims.output; ++k) {
            grads.output.b_y[k] += dys[t][k];
        }
        kern::matvec_t_add(params.output.W_hy, dys[t], dh[t]);
    }

    for (std::size_t l = params.layers.size(); l-- > 0;) {
        if (const auto* lstm = std::get_if<LstmLayerParams>(&params.layers[l])) {
            auto& grad = std::get<LstmLayerParams>(grads.layers[l]);
            require(cache.layers[l].lstm.size() == seq_len, "backward: cache length mismatch");
            dh = lstm_bptt(*lstm, grad, cache.layers[l].lstm, dh, params.hidden_gate);
        } else {
            const auto& rnn = std::get<RnnLayerParams>(params.layers[l]);
            auto& grad = std::get<RnnLayerParams>(grads.layers[l]);
            require(cache.layers[l].rnn.size() == seq_len, "backward: cache length mismatch");
            dh = rnn_bptt(rnn, grad, cache.layers[l].rnn, dh);
        }
    }
    return grads;
}

NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
    validate_dims(spec.dims);
    require(spec.kinds.size() == spec.dims.hidden.size(),
            "init_params: one layer kind per hidden layer required");

    Rng rng(seed);
    auto fill_uniform = [&rng](Matrix& m) {
        for (double& v : m.a) {
            v = rng.uniform(-0.08, 0.08);
        }
    };

    NetworkParams params;
    params.dims = spec.dims;
    params.hidden_gate = spec.hidden_gate;
    for (std::size_t l = 0; l < spec.kinds.size(); ++l) {
        const std::size_t h_size = spec.dims.hidden[l];
        const std::size_t in_size = layer_input_size(spec.dims, l);
        if (spec.kinds[l] == LayerKind::lstm) {
            LstmLayerParams p(h_size, in_size);
            fill_uniform(p.W_xi);
            fill_uniform(p.W_xf);
            fill_uniform(p.W_xc);
            fill_uniform(p.W_xo);
            fill_uniform(p.W_hi);
            fill_uniform(p.W_hf);
            fill_uniform(p.W_hc);
            fill_uniform(p.W_ho);
            std::fill(p.b_f.begin(), p.b_f.end(), 1.0); // open forget gates at start
            params.layers.emplace_back(std::move(p));
        } else {
            RnnLayerParams p(h_size, in_size);
            fill_uniform(p.W_xh);
            fill_uniform(p.W_hh);
            params.layers.emplace_back(std::move(p));
        }
    }
    params.output = OutputLayerParams(spec.dims.output, spec.dims.hidden.back());
    fill_uniform(params.output.W_hy);
    return params;
}

namespace {

template <class Layers, class Output, class Fn>
void visit_tensors(Layers& layers, Output& output, const Fn& fn) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string prefix = "layer" + std::to_string(l) + ".";
        std::visit(
            [&](auto& p) {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, LstmLayerParams>) {
                    fn(prefix + "W_xi", p.W_xi.a);
                    fn(prefix + "W_xf", p.W_xf.a);
                    fn(prefix + "W_xc", p.W_xc.a);
                    fn(prefix + "W_xo", p.W_xo.a);
                    fn(prefix + "W_hi", p.W_hi.a);
                    fn(prefix + "W_hf", p.W_hf.a);
                    fn(prefix + "W_hc", p.W_hc.a);
                    fn(prefix + "W_ho", p.W_ho.a);
                    fn(prefix + "p_ci", p.p_ci);
                    fn(prefix + "p_cf", p.p_cf);
                    fn(prefix + "p_co", p.p_co);
                    fn(prefix + "b_i", p.b_i);
                    fn(prefix + "b_f", p.b_f);
                    fn(prefix + "b_c", p.b_c);
                    fn(prefix + "b_o", p.b_o);
                } else {
                    fn(prefix + "W_xh", p.W_xh.a);
                    fn(prefix + "W_hh", p.W_hh.a);
                    fn(prefix + "b_h", p.b_h);
                }
            },
            layers[l]);
    }
    fn("output.W_hy", output.W_hy.a);
    fn("output.b_y", output.b_y);
}

} // namespace

void for_each_tensor(NetworkParams& p,
                     const std::function<void(const std::string&, std::vector<double>&)>& fn) {
    visit_tensors(p.layers, p.output, fn);
}
void for_each_tensor(
    const NetworkParams& p,
    const std::function<void(const std::string&, const std::vector<double>&)>& fn) {
    visit_tensors(p.layers, p.output, fn);
}
void for_each_tensor(Gradients& g,
                     const std::function<void(const std::string&, std::vector<double>&)>& fn) {
    visit_tensors(g.layers, g.output, fn);
}
void for_each_tensor(
    const Gradients& g,
    const std::function<void(const std::string&, const std::vector<double>&)>& fn) {
    visit_tensors(g.layers, g.output, fn);
}

Normalization Normalization::identity(std::size_t in_dim, std::size_t out_dim) {
    Normalization n;
    n.in_mean.assign(in_dim, 0.0);
    n.in_sd.assign(in_dim, 1.0);
    n.out_mean.assign(out_dim, 0.0);
    n.out_sd.assign(out_dim, 1.0);
    return n;
}

namespace {

constexpr char kCkptMagic[4] = {'C', 'K', 'P', '1'};
constexpr std::uint32_t kCkptVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) {
        out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
    }
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int k = 0; k < 8; ++k) {
        out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
    }
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

void put_f64_vec(std::string& out, const Vector& v) {
    for (double d : v) {
        put_f64(out, d);
    }
}

class CkptReader {
public:
    CkptReader(std::string_view bytes, const std::string& ctx) : bytes_(bytes), ctx_(ctx) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int k = 3; k >= 0; --k) {
            v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_ + static_cast<std::size_t>(k)]);
        }
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int k = 7; k >= 0; --k) {
            v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_ + static_cast<std::size_t>(k)]);
        }
        pos_ += 8;
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }

    void fill(Vector& v) {
        for (double& d : v) {
            d = f64();
        }
    }

    std::string_view raw(std::size_t n) {
        need(n);
        std::string_view v = bytes_.substr(pos_, n);
        pos_ += n;
        return v;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            throw CorruptionError(ctx_ + ": truncated checkpoint");
        }
    }

    std::string_view bytes_;
    std::string ctx_;
    std::size_t pos_ = 0;
};

} // namespace

std::string encode_checkpoint(const Checkpoint& c) {
    validate_dims(c.params.dims);
    require(c.norm.in_mean.size() == c.params.dims.input &&
                c.norm.in_sd.size() == c.params.dims.input &&
                c.norm.out_mean.size() == c.params.dims.output &&
                c.norm.out_sd.size() == c.params.dims.output,
            "checkpoint: normalization dims disagree with network dims");

    std::string out;
    out.append(kCkptMagic, 4);
    put_u32(out, kCkptVersion);
    put_u32(out, static_cast<std::uint32_t>(c.params.dims.input));
    put_u32(out, static_cast<std::uint32_t>(c.params.dims.hidden.size()));
    for (std::size_t h : c.params.dims.hidden) {
        put_u32(out, static_cast<std::uint32_t>(h));
    }
    put_u32(out, static_cast<std::uint32_t>(c.params.dims.output));
    for (const LayerParams& layer : c.params.layers) {
        out.push_back(std::holds_alternative<LstmLayerParams>(layer)
                          ? static_cast<char>(LayerKind::lstm)
                          : static_cast<char>(LayerKind::rnn));
    }
    out.push_back(static_cast<char>(c.params.hidden_gate));
    put_f64_vec(out, c.norm.in_mean);
    put_f64_vec(out, c.norm.in_sd);
    put_f64_vec(out, c.norm.out_mean);
    put_f64_vec(out, c.norm.out_sd);
    for_each_tensor(c.params, [&out](const std::string&, const std::vector<double>& v) {
        put_f64_vec(out, v);
    });
    put_u64(out, c.seed);
    put_u32(out, static_cast<std::uint32_t>(c.config_echo.size()));
    out.append(c.config_echo);
    return out;
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& context) {
    CkptReader r(bytes, context);
    const std::string_view magic = r.raw(4);
    if (!std::equal(magic.begin(), magic.end(), kCkptMagic)) {
        throw FormatError(context + ": bad magic, not a checkpoint");
    }
    const std::uint32_t version = r.u32();
    if (version != kCkptVersion) {
        throw FormatError(context + ": unsupported checkpoint version " + std::to_string(version));
    }

    constexpr std::uint32_t kMaxDim = 1u << 20;
    NetworkSpec spec;
    spec.dims.input = r.u32();
    const std::uint32_t n_hidden = r.u32();
    if (n_hidden == 0 || n_hidden > 64) {
        throw CorruptionError(context + ": implausible hidden layer count");
    }
    for (std::uint32_t l = 0; l < n_hidden; ++l) {
        spec.dims.hidden.push_back(r.u32());
    }
    spec.dims.output = r.u32();
    if (spec.dims.input == 0 || spec.dims.input > kMaxDim || spec.dims.output == 0 ||
        spec.dims.output > kMaxDim ||
        std::any_of(spec.dims.hidden.begin(), spec.dims.hidden.end(),
                    [](std::size_t h) { return h == 0 || h > kMaxDim; })) {
        throw CorruptionError(context + ": implausible layer sizes");
    }
    for (std::uint32_t l = 0; l < n_hidden; ++l) {
        const std::uint8_t kind = r.u8();
        if (kind > 1) {
            throw CorruptionError(context + ": unknown layer kind");
        }
        spec.kinds.push_back(static_cast<LayerKind>(kind));
    }
    const std::uint8_t gate = r.u8();
    if (gate > 1) {
        throw CorruptionError(context + ": unknown hidden-gate mode");
    }
    spec.hidden_gate = static_cast<HiddenGate>(gate);

    Checkpoint c;
    c.params = init_params(spec, 0); // shapes only; tensors overwritten below
    c.norm.in_mean.resize(spec.dims.input);
    c.norm.in_sd.resize(spec.dims.input);
    c.norm.out_mean.resize(spec.dims.output);
    c.norm.out_sd.resize(spec.dims.output);
    r.fill(c.norm.in_mean);
    r.fill(c.norm.in_sd);
    r.fill(c.norm.out_mean);
    r.fill(c.norm.out_sd);
    for_each_tensor(c.params,
                    [&r](const std::string&, std::vector<double>& v) { r.fill(v); });
    c.seed = r.u64();
    const std::uint32_t echo_len = r.u32();
    c.config_echo = std::string(r.raw(echo_len));
    if (r.remaining() != 0) {
        throw CorruptionError(context + ": trailing bytes after checkpoint payload");
    }
    for_each_tensor(c.params, [&context](const std::string& name, const std::vector<double>& v) {
        for (double d : v) {
            if (!std::isfinite(d)) {
                throw DataError(context + ": non-finite value in tensor " + name);
            }
        }
    });
    return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    const std::string bytes = encode_checkpoint(c);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
        throw FormatError("write failure on '" + path + "'");
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open checkpoint '" + path + "'");
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw FormatError("read failure on '" + path + "'");
    }
    return decode_checkpoint(bytes, "'" + path + "'");
}

} // namespace lstmpf
