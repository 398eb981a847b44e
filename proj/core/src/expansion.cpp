#include "equss/expansion.hpp"

#include <cmath>

#include "binary_io.hpp"
#include "equss/errors.hpp"
#include "equss/rng.hpp"

namespace equss {

namespace {

constexpr char kMagic[4] = {'P', 'Q', 'E', 'H'};
constexpr std::uint32_t kVersion = 1;

void check_linear(const Linear& l, std::size_t in, std::size_t out, const char* name) {
    if (l.in != in || l.out != out || l.weight.size() != in * out || l.bias.size() != out)
        throw InvalidInput(std::string("expansion head layer '") + name +
                           "' has inconsistent shape");
    for (double v : l.weight)
        if (!std::isfinite(v)) throw NumericError("non-finite weight in expansion head");
    for (double v : l.bias)
        if (!std::isfinite(v)) throw NumericError("non-finite bias in expansion head");
}

Linear xavier_linear(std::size_t in, std::size_t out, Rng& rng) {
    Linear l;
    l.in = in;
    l.out = out;
    double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    l.weight.resize(in * out);
    for (double& v : l.weight) v = rng.uniform(-bound, bound);
    l.bias.assign(out, 0.0);
    return l;
}

// y = W f + b
void apply_linear(const Linear& l, std::span<const double> f, std::vector<double>& y) {
    y.assign(l.out, 0.0);
    for (std::size_t i = 0; i < l.out; ++i) {
        double acc = l.bias[i];
        const double* w = l.weight.data() + i * l.in;
        for (std::size_t j = 0; j < l.in; ++j) acc += w[j] * f[j];
        y[i] = acc;
    }
}

// Accumulates dW = g f^T, db = g and returns df += W^T g.
void linear_backward(const Linear& l, std::span<const double> f,
                     std::span<const double> g, Linear& grad, std::vector<double>& df) {
    for (std::size_t i = 0; i < l.out; ++i) {
        grad.bias[i] += g[i];
        double* gw = grad.weight.data() + i * l.in;
        const double* w = l.weight.data() + i * l.in;
        for (std::size_t j = 0; j < l.in; ++j) {
            gw[j] += g[i] * f[j];
            df[j] += w[j] * g[i];
        }
    }
}

Linear zeros_like(const Linear& l) {
    Linear g;
    g.in = l.in;
    g.out = l.out;
    g.weight.assign(l.weight.size(), 0.0);
    g.bias.assign(l.bias.size(), 0.0);
    return g;
}

}  // namespace

void ExpansionHead::validate() const {
    if (input_dim == 0 || expanded_dim == 0)
        throw InvalidInput("expansion head dimensions must be >= 1");
    check_linear(a1, input_dim, expanded_dim, "a1");
    check_linear(a2, expanded_dim, expanded_dim, "a2");
    check_linear(b, input_dim, expanded_dim, "b");
}

std::size_t ExpansionHead::param_count() const {
    return a1.weight.size() + a1.bias.size() + a2.weight.size() + a2.bias.size() +
           b.weight.size() + b.bias.size();
}

std::vector<double> ExpansionHead::flatten_params() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (const Linear* l : {&a1, &a2, &b}) {
        flat.insert(flat.end(), l->weight.begin(), l->weight.end());
        flat.insert(flat.end(), l->bias.begin(), l->bias.end());
    }
    return flat;
}

void ExpansionHead::unflatten_params(std::span<const double> flat) {
    if (flat.size() != param_count())
        throw InvalidInput("parameter vector size does not match head");
    std::size_t pos = 0;
    for (Linear* l : {&a1, &a2, &b}) {
        std::copy_n(flat.begin() + pos, l->weight.size(), l->weight.begin());
        pos += l->weight.size();
        std::copy_n(flat.begin() + pos, l->bias.size(), l->bias.begin());
        pos += l->bias.size();
    }
}

ExpansionHead init_head(std::size_t input_dim, std::size_t expanded_dim,
                        std::uint64_t seed) {
    if (input_dim == 0 || expanded_dim == 0)
        throw InvalidInput("init_head: dimensions must be >= 1");
    Rng rng(seed);
    ExpansionHead head;
    head.input_dim = input_dim;
    head.expanded_dim = expanded_dim;
    head.a1 = xavier_linear(input_dim, expanded_dim, rng);
    head.a2 = xavier_linear(expanded_dim, expanded_dim, rng);
    head.b = xavier_linear(input_dim, expanded_dim, rng);
    return head;
}

std::vector<double> forward(const ExpansionHead& head, std::span<const double> f,
                            ForwardTrace* trace) {
    if (f.size() != head.input_dim)
        throw InvalidInput("forward: input length " + std::to_string(f.size()) +
                           " != d_F " + std::to_string(head.input_dim));

    std::vector<double> pre_relu, hidden, branch_a, branch_b;
    apply_linear(head.a1, f, pre_relu);
    hidden.resize(pre_relu.size());
    for (std::size_t i = 0; i < pre_relu.size(); ++i)
        hidden[i] = pre_relu[i] > 0.0 ? pre_relu[i] : 0.0;
    apply_linear(head.a2, hidden, branch_a);
    apply_linear(head.b, f, branch_b);

    std::vector<double> x(head.expanded_dim);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = branch_a[i] + branch_b[i];

    if (trace) {
        trace->input.assign(f.begin(), f.end());
        trace->pre_relu = std::move(pre_relu);
        trace->hidden = std::move(hidden);
    }
    return x;
}

HeadGradients backward(const ExpansionHead& head, const ForwardTrace& trace,
                       std::span<const double> grad_x) {
    if (trace.input.size() != head.input_dim || trace.pre_relu.size() != head.expanded_dim ||
        trace.hidden.size() != head.expanded_dim)
        throw InvalidInput("backward: trace does not match head shapes");
    if (grad_x.size() != head.expanded_dim)
        throw InvalidInput("backward: grad_x length != d_E");

    HeadGradients g;
    g.params.input_dim = head.input_dim;
    g.params.expanded_dim = head.expanded_dim;
    g.params.a1 = zeros_like(head.a1);
    g.params.a2 = zeros_like(head.a2);
    g.params.b = zeros_like(head.b);
    g.input.assign(head.input_dim, 0.0);

    // Branch b: x += B f
    linear_backward(head.b, trace.input, grad_x, g.params.b, g.input);

    // Branch a: x += A2 relu(A1 f)
    std::vector<double> grad_hidden(head.expanded_dim, 0.0);
    linear_backward(head.a2, trace.hidden, grad_x, g.params.a2, grad_hidden);
    // relu': 1 for pre_relu > 0, else 0 (including exactly 0)
    for (std::size_t i = 0; i < grad_hidden.size(); ++i)
        if (trace.pre_relu[i] <= 0.0) grad_hidden[i] = 0.0;
    linear_backward(head.a1, trace.input, grad_hidden, g.params.a1, g.input);

    return g;
}

ExpansionHead read_head(const std::string& path) {
    detail::Reader r(path);
    r.expect_magic(kMagic);
    std::uint32_t version = r.u32("version");
    if (version != kVersion)
        throw FormatError("unsupported PQEH version " + std::to_string(version), 4);
    std::uint32_t d_f = r.u32("d_F");
    std::uint32_t d_e = r.u32("d_E");
    if (d_f == 0 || d_e == 0) throw FormatError("zero dimension in head file", 8);

    ExpansionHead head;
    head.input_dim = d_f;
    head.expanded_dim = d_e;
    auto read_linear = [&](std::size_t in, std::size_t out) {
        Linear l;
        l.in = in;
        l.out = out;
        std::vector<float> raw(in * out);
        r.raw(raw.data(), raw.size() * sizeof(float), "weights");
        l.weight.assign(raw.begin(), raw.end());
        raw.resize(out);
        r.raw(raw.data(), raw.size() * sizeof(float), "biases");
        l.bias.assign(raw.begin(), raw.end());
        return l;
    };
    head.a1 = read_linear(d_f, d_e);
    head.a2 = read_linear(d_e, d_e);
    head.b = read_linear(d_f, d_e);
    head.validate();
    return head;
}

void write_head(const ExpansionHead& head, const std::string& path) {
    head.validate();
    detail::Writer w(path);
    w.magic(kMagic);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(head.input_dim));
    w.u32(static_cast<std::uint32_t>(head.expanded_dim));
    for (const Linear* l : {&head.a1, &head.a2, &head.b}) {
        for (double v : l->weight) w.f32(static_cast<float>(v));
        for (double v : l->bias) w.f32(static_cast<float>(v));
    }
    w.close();
}

}  // namespace equss
