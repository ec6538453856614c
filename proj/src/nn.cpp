#include "pole/nn.hpp"

#include <algorithm>
#include <cmath>

#include "pole/rng.hpp"

namespace pole::nn {

bool valid(const ModelSpec& spec) {
    if (spec.layer_sizes.size() < 2) return false;
    for (int s : spec.layer_sizes)
        if (s < 1) return false;
    return spec.required_accuracy >= 0.0 && spec.required_accuracy <= 1.0 && spec.batch_size >= 1;
}

Params init_model(const ModelSpec& spec, std::uint64_t seed) {
    if (!valid(spec)) throw std::invalid_argument("init_model: invalid spec");
    Rng rng(seed);
    Params p;
    p.sizes = spec.layer_sizes;
    for (std::size_t l = 0; l + 1 < p.sizes.size(); ++l) {
        int fan_in = p.sizes[l];
        int fan_out = p.sizes[l + 1];
        double a = std::sqrt(6.0 / (fan_in + fan_out));
        std::vector<double> w(static_cast<std::size_t>(fan_out) * fan_in);
        for (auto& v : w) v = (rng.real() * 2.0 - 1.0) * a;
        p.w.push_back(std::move(w));
        p.b.emplace_back(static_cast<std::size_t>(fan_out), 0.0);
    }
    return p;
}

Params zero_model(const ModelSpec& spec) {
    if (!valid(spec)) throw std::invalid_argument("zero_model: invalid spec");
    Params p;
    p.sizes = spec.layer_sizes;
    for (std::size_t l = 0; l + 1 < p.sizes.size(); ++l) {
        p.w.emplace_back(static_cast<std::size_t>(p.sizes[l + 1]) * p.sizes[l], 0.0);
        p.b.emplace_back(static_cast<std::size_t>(p.sizes[l + 1]), 0.0);
    }
    return p;
}

namespace {

// Activations for every layer; out[0] is the input, out.back() the softmax.
std::vector<std::vector<double>> forward_all(const Params& p, std::span<const double> x) {
    if (static_cast<int>(x.size()) != p.sizes.front())
        throw std::invalid_argument("forward: input dimension mismatch");
    std::vector<std::vector<double>> acts;
    acts.reserve(p.layers() + 1);
    acts.emplace_back(x.begin(), x.end());
    for (std::size_t l = 0; l < p.layers(); ++l) {
        int nin = p.sizes[l];
        int nout = p.sizes[l + 1];
        std::vector<double> z(static_cast<std::size_t>(nout));
        const auto& prev = acts.back();
        for (int o = 0; o < nout; ++o) {
            double acc = p.b[l][static_cast<std::size_t>(o)];
            const double* row = p.w[l].data() + static_cast<std::size_t>(o) * nin;
            for (int i = 0; i < nin; ++i) acc += row[i] * prev[static_cast<std::size_t>(i)];
            z[static_cast<std::size_t>(o)] = acc;
        }
        if (l + 1 < p.layers()) {
            for (auto& v : z) v = v > 0.0 ? v : 0.0;
        } else {
            double mx = *std::max_element(z.begin(), z.end());
            double sum = 0.0;
            for (auto& v : z) {
                v = std::exp(v - mx);
                sum += v;
            }
            for (auto& v : z) v /= sum;
        }
        acts.push_back(std::move(z));
    }
    return acts;
}

}  // namespace

std::vector<double> forward_probs(const Params& params, std::span<const double> x) {
    return forward_all(params, x).back();
}

int predict(const Params& params, std::span<const double> x) {
    auto probs = forward_probs(params, x);
    int best = 0;
    for (std::size_t c = 1; c < probs.size(); ++c)
        if (probs[c] > probs[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    return best;
}

double batch_loss(const Params& params, const std::vector<std::vector<double>>& xs,
                  const std::vector<int>& ys) {
    if (xs.empty() || xs.size() != ys.size()) throw std::invalid_argument("batch_loss: bad batch");
    double total = 0.0;
    for (std::size_t n = 0; n < xs.size(); ++n) {
        auto probs = forward_probs(params, xs[n]);
        total += -std::log(probs[static_cast<std::size_t>(ys[n])]);
    }
    return total / static_cast<double>(xs.size());
}

std::pair<double, Gradients> loss_and_gradients(const Params& params,
                                                const std::vector<std::vector<double>>& xs,
                                                const std::vector<int>& ys) {
    if (xs.empty() || xs.size() != ys.size()) throw std::invalid_argument("gradients: bad batch");
    Gradients g;
    g.sizes = params.sizes;
    for (std::size_t l = 0; l < params.layers(); ++l) {
        g.w.emplace_back(params.w[l].size(), 0.0);
        g.b.emplace_back(params.b[l].size(), 0.0);
    }
    double total_loss = 0.0;
    for (std::size_t n = 0; n < xs.size(); ++n) {
        auto acts = forward_all(params, xs[n]);
        const auto& probs = acts.back();
        total_loss += -std::log(probs[static_cast<std::size_t>(ys[n])]);
        // dL/dlogits = probs - onehot(y)
        std::vector<double> delta = probs;
        delta[static_cast<std::size_t>(ys[n])] -= 1.0;
        for (std::size_t l = params.layers(); l-- > 0;) {
            int nin = params.sizes[l];
            int nout = params.sizes[l + 1];
            const auto& prev = acts[l];
            for (int o = 0; o < nout; ++o) {
                double d = delta[static_cast<std::size_t>(o)];
                g.b[l][static_cast<std::size_t>(o)] += d;
                double* grow = g.w[l].data() + static_cast<std::size_t>(o) * nin;
                for (int i = 0; i < nin; ++i) grow[i] += d * prev[static_cast<std::size_t>(i)];
            }
            if (l > 0) {
                std::vector<double> next_delta(static_cast<std::size_t>(nin), 0.0);
                for (int i = 0; i < nin; ++i) {
                    if (acts[l][static_cast<std::size_t>(i)] <= 0.0) continue;  // ReLU gate
                    double acc = 0.0;
                    for (int o = 0; o < nout; ++o)
                        acc += params.w[l][static_cast<std::size_t>(o) * nin + i] *
                               delta[static_cast<std::size_t>(o)];
                    next_delta[static_cast<std::size_t>(i)] = acc;
                }
                delta = std::move(next_delta);
            }
        }
    }
    double inv_n = 1.0 / static_cast<double>(xs.size());
    for (std::size_t l = 0; l < g.layers(); ++l) {
        for (auto& v : g.w[l]) v *= inv_n;
        for (auto& v : g.b[l]) v *= inv_n;
    }
    return {total_loss * inv_n, std::move(g)};
}

double train_step(Params& params, const std::vector<std::vector<double>>& xs,
                  const std::vector<int>& ys, double lr) {
    auto [loss, grads] = loss_and_gradients(params, xs, ys);
    if (!std::isfinite(loss)) throw NumericalDivergence("train_step: non-finite loss");
    for (std::size_t l = 0; l < params.layers(); ++l) {
        for (std::size_t i = 0; i < params.w[l].size(); ++i) params.w[l][i] -= lr * grads.w[l][i];
        for (std::size_t i = 0; i < params.b[l].size(); ++i) params.b[l][i] -= lr * grads.b[l][i];
    }
    return loss;
}

double evaluate(const Params& params, const std::vector<std::vector<double>>& xs,
                const std::vector<int>& ys) {
    if (xs.empty() || xs.size() != ys.size()) throw std::invalid_argument("evaluate: bad dataset");
    std::size_t correct = 0;
    for (std::size_t n = 0; n < xs.size(); ++n)
        if (predict(params, xs[n]) == ys[n]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(xs.size());
}

void write_model_spec(ByteWriter& w, const ModelSpec& spec) {
    w.put_u32(static_cast<std::uint32_t>(spec.layer_sizes.size()));
    for (int s : spec.layer_sizes) w.put_uint(static_cast<std::uint64_t>(s));
    w.put_double(spec.required_accuracy);
    w.put_double(spec.time_limit);
    w.put_double(spec.lr);
    w.put_uint(static_cast<std::uint64_t>(spec.batch_size));
}

ModelSpec parse_model_spec(ByteReader& r) {
    ModelSpec spec;
    std::uint32_t n = r.get_u32();
    spec.layer_sizes.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) spec.layer_sizes.push_back(static_cast<int>(r.get_uint()));
    spec.required_accuracy = r.get_double();
    spec.time_limit = r.get_double();
    spec.lr = r.get_double();
    spec.batch_size = static_cast<int>(r.get_uint());
    return spec;
}

void write_params(ByteWriter& w, const Params& params) {
    w.put_u32(static_cast<std::uint32_t>(params.sizes.size()));
    for (int s : params.sizes) w.put_uint(static_cast<std::uint64_t>(s));
    for (std::size_t l = 0; l < params.layers(); ++l) {
        for (double v : params.w[l]) w.put_double(v);
        for (double v : params.b[l]) w.put_double(v);
    }
}

Params parse_params(ByteReader& r) {
    Params p;
    std::uint32_t n = r.get_u32();
    p.sizes.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) p.sizes.push_back(static_cast<int>(r.get_uint()));
    if (p.sizes.size() < 2) {
        if (!p.sizes.empty()) throw DecodeError("params: bad layer count");
        return p;  // empty genesis model
    }
    for (std::size_t l = 0; l + 1 < p.sizes.size(); ++l) {
        std::vector<double> w(static_cast<std::size_t>(p.sizes[l + 1]) * p.sizes[l]);
        for (auto& v : w) v = r.get_double();
        std::vector<double> b(static_cast<std::size_t>(p.sizes[l + 1]));
        for (auto& v : b) v = r.get_double();
        p.w.push_back(std::move(w));
        p.b.push_back(std::move(b));
    }
    return p;
}

}  // namespace pole::nn
