// Timings of the serial reference kernels against the OpenMP variants, plus
// whole-network forward/backward and the corpus MCD fan-out. The parallel
// paths are bitwise-identical to the reference by construction; this binary
// reports whether they are also worth it on this machine.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <thread>
#include <vector>

#include "lstmpf/features_io.hpp"
#include "lstmpf/kernels.hpp"
#include "lstmpf/metrics.hpp"
#include "lstmpf/network.hpp"
#include "lstmpf/rng.hpp"
#include "lstmpf/synthdata.hpp"
#include "lstmpf/training.hpp"

using namespace lstmpf;

namespace {

template <class Fn>
double best_ms(int reps, Fn&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void fill(Rng& rng, std::vector<double>& v) {
    for (double& x : v) {
        x = rng.uniform(-1.0, 1.0);
    }
}

void bench_kernels(int par_threads) {
    std::printf("%-28s %10s %10s %8s %s\n", "kernel", "serial ms", "par ms", "speedup",
                "bitwise");
    Rng rng(42);
    for (const std::size_t n : {128UL, 256UL, 512UL, 1024UL}) {
        Matrix w(n, n);
        Vector x(n), g(n);
        fill(rng, w.a);
        fill(rng, x);
        fill(rng, g);
        const int reps = n <= 256 ? 200 : 50;

        Vector y_ref(n, 0.0), y_par(n, 0.0);
        kern::set_threads(1);
        const double t_mv_ref = best_ms(reps, [&] { kern::ref::matvec_add(w, x, y_ref); });
        kern::set_threads(par_threads);
        const double t_mv_par = best_ms(reps, [&] { kern::par::matvec_add(w, x, y_par); });
        std::printf("matvec_add      n=%-10zu %10.4f %10.4f %7.2fx %s\n", n, t_mv_ref, t_mv_par,
                    t_mv_ref / t_mv_par, y_ref == y_par ? "yes" : "NO");

        Vector xt_ref(n, 0.0), xt_par(n, 0.0);
        kern::set_threads(1);
        const double t_mt_ref = best_ms(reps, [&] { kern::ref::matvec_t_add(w, g, xt_ref); });
        kern::set_threads(par_threads);
        const double t_mt_par = best_ms(reps, [&] { kern::par::matvec_t_add(w, g, xt_par); });
        std::printf("matvec_t_add    n=%-10zu %10.4f %10.4f %7.2fx %s\n", n, t_mt_ref, t_mt_par,
                    t_mt_ref / t_mt_par, xt_ref == xt_par ? "yes" : "NO");

        Matrix acc_ref(n, n), acc_par(n, n);
        kern::set_threads(1);
        const double t_ou_ref = best_ms(reps, [&] { kern::ref::outer_add(acc_ref, g, x); });
        kern::set_threads(par_threads);
        const double t_ou_par = best_ms(reps, [&] { kern::par::outer_add(acc_par, g, x); });
        std::printf("outer_add       n=%-10zu %10.4f %10.4f %7.2fx %s\n", n, t_ou_ref, t_ou_par,
                    t_ou_ref / t_ou_par, acc_ref == acc_par ? "yes" : "NO");
    }
}

void bench_network(int par_threads) {
    NetworkSpec spec;
    spec.dims = {39, {200, 160, 200}, 39};
    spec.kinds = {LayerKind::lstm, LayerKind::lstm, LayerKind::lstm};
    const NetworkParams params = init_params(spec, 7);

    const std::size_t seq_len = 200;
    Rng rng(11);
    std::vector<Vector> xs(seq_len, Vector(39)), ts(seq_len, Vector(39));
    for (auto& v : xs) {
        fill(rng, v);
    }
    for (auto& v : ts) {
        fill(rng, v);
    }

    auto run = [&] {
        const ForwardResult fwd = forward(params, xs);
        const SequenceLoss sl = sequence_loss(fwd.ys, ts);
        backward(params, fwd.cache, sl.dys);
    };
    kern::set_threads(1);
    const double t_ser = best_ms(5, run);
    kern::set_threads(par_threads);
    const double t_par = best_ms(5, run);
    std::printf("\nforward+backward 39:200:160:200:39, T=%zu: serial %.2f ms, %d threads %.2f ms "
                "(%.2fx)\n",
                seq_len, t_ser, par_threads, t_par, t_ser / t_par);
}

void bench_corpus_mcd(int par_threads) {
    CorpusShape shape;
    shape.n_pairs = 64;
    shape.frames_lo = 150;
    shape.frames_hi = 300;
    shape.dim = 39;
    DistortionSpec spec;
    spec.noise_sd = 0.3;
    spec.smoothing_width = 5;
    const Corpus corpus = synth_corpus(shape, spec);

    std::vector<std::vector<Vector>> sources(corpus.pairs.size());
    std::vector<std::vector<Vector>> targets(corpus.pairs.size());
    std::vector<std::vector<bool>> masks(corpus.pairs.size());
    std::vector<McdTask> tasks(corpus.pairs.size());
    for (std::size_t u = 0; u < corpus.pairs.size(); ++u) {
        for (const FrameVector& fv : corpus.pairs[u].source.frames) {
            sources[u].push_back(fv.mfcc);
        }
        for (const FrameVector& fv : corpus.pairs[u].target.frames) {
            targets[u].push_back(fv.mfcc);
        }
        masks[u] = silence_mask(corpus.pairs[u].target, kDefaultSilencePercentile);
        tasks[u] = McdTask{corpus.pairs[u].source.id, sources[u], targets[u], &masks[u]};
    }

    kern::set_threads(1);
    McdReport rep_ser;
    const double t_ser = best_ms(20, [&] { rep_ser = corpus_mcd(tasks); });
    kern::set_threads(par_threads);
    McdReport rep_par;
    const double t_par = best_ms(20, [&] { rep_par = corpus_mcd(tasks); });
    std::printf("corpus MCD over %zu utterances: serial %.3f ms, %d threads %.3f ms (%.2fx), "
                "equal results %s\n",
                tasks.size(), t_ser, par_threads, t_par, t_ser / t_par,
                rep_ser.corpus_mcd == rep_par.corpus_mcd ? "yes" : "NO");
}

} // namespace

int main(int argc, char** argv) {
    int par_threads = static_cast<int>(std::thread::hardware_concurrency());
    if (argc > 1) {
        par_threads = std::atoi(argv[1]);
    }
    if (par_threads < 2) {
        par_threads = 2;
    }
    std::printf("parallel runs use %d threads\n\n", par_threads);
    bench_kernels(par_threads);
    bench_network(par_threads);
    bench_corpus_mcd(par_threads);
    return 0;
}
