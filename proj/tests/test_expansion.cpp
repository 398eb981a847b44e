#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "equss/errors.hpp"
#include "equss/expansion.hpp"
#include "equss/rng.hpp"

using namespace equss;

namespace {

// Scalar objective for finite differences: <grad_x, forward(head, f)>.
double objective(const ExpansionHead& head, std::span<const double> f,
                 std::span<const double> grad_x) {
    auto x = forward(head, f);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += grad_x[i] * x[i];
    return s;
}

ExpansionHead random_head(std::size_t d_f, std::size_t d_e, std::uint64_t seed) {
    auto head = init_head(d_f, d_e, seed);
    // nonzero biases so bias gradients are exercised off the init point
    Rng rng(seed + 100);
    for (Linear* l : {&head.a1, &head.a2, &head.b})
        for (double& b : l->bias) b = rng.uniform(-0.5, 0.5);
    return head;
}

}  // namespace

TEST_CASE("init_head is deterministic and bounded") {
    auto a = init_head(384, 1024, 3);
    auto b = init_head(384, 1024, 3);
    CHECK(a.flatten_params() == b.flatten_params());
    CHECK(a.a1.in == 384);
    CHECK(a.a1.out == 1024);
    CHECK(a.a2.in == 1024);
    CHECK(a.b.in == 384);

    double bound_a1 = std::sqrt(6.0 / (384 + 1024));
    for (double v : a.a1.weight) CHECK(std::abs(v) <= bound_a1);
    for (double v : a.a1.bias) CHECK(v == 0.0);
}

TEST_CASE("zeroed head maps everything to zero") {
    auto head = init_head(3, 4, 0);
    std::vector<double> zeros(head.param_count(), 0.0);
    head.unflatten_params(zeros);
    auto x = forward(head, std::vector<double>{1.0, -2.0, 3.0});
    for (double v : x) CHECK(v == 0.0);
}

TEST_CASE("linear branch isolation embeds input") {
    auto head = init_head(2, 4, 0);
    std::vector<double> zeros(head.param_count(), 0.0);
    head.unflatten_params(zeros);
    // branch_b = identity padded to 4x2
    head.b.weight[0 * 2 + 0] = 1.0;
    head.b.weight[1 * 2 + 1] = 1.0;
    auto x = forward(head, std::vector<double>{7.0, -3.0});
    CHECK(x == std::vector<double>{7.0, -3.0, 0.0, 0.0});
}

TEST_CASE("forward equals independent straight-line evaluation") {
    auto head = random_head(3, 4, 21);
    std::vector<double> f = {0.4, -1.1, 2.2};

    // hand-rolled reference
    std::vector<double> h(4, 0.0);
    for (int i = 0; i < 4; ++i) {
        double acc = head.a1.bias[i];
        for (int j = 0; j < 3; ++j) acc += head.a1.weight[i * 3 + j] * f[j];
        h[i] = std::max(acc, 0.0);
    }
    std::vector<double> expected(4, 0.0);
    for (int i = 0; i < 4; ++i) {
        double acc = head.a2.bias[i];
        for (int j = 0; j < 4; ++j) acc += head.a2.weight[i * 4 + j] * h[j];
        double acc_b = head.b.bias[i];
        for (int j = 0; j < 3; ++j) acc_b += head.b.weight[i * 3 + j] * f[j];
        expected[i] = acc + acc_b;
    }

    auto x = forward(head, f);
    for (int i = 0; i < 4; ++i) CHECK(x[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("forward is additive over branches and deterministic") {
    auto head = random_head(4, 6, 5);
    std::vector<double> f = {1, 2, 3, 4};
    auto x1 = forward(head, f);
    auto x2 = forward(head, f);
    CHECK(x1 == x2);

    auto only_a = head;
    for (double& v : only_a.b.weight) v = 0.0;
    for (double& v : only_a.b.bias) v = 0.0;
    auto only_b = head;
    for (Linear* l : {&only_b.a1, &only_b.a2})
        for (double* p : {l->weight.data()}) (void)p;
    for (double& v : only_b.a2.weight) v = 0.0;
    for (double& v : only_b.a2.bias) v = 0.0;
    auto xa = forward(only_a, f);
    auto xb = forward(only_b, f);
    for (std::size_t i = 0; i < x1.size(); ++i)
        CHECK(x1[i] == doctest::Approx(xa[i] + xb[i]).epsilon(1e-12));
}

TEST_CASE("forward rejects wrong input length") {
    auto head = init_head(3, 4, 0);
    CHECK_THROWS_AS(forward(head, std::vector<double>{1.0, 2.0}), InvalidInput);
}

TEST_CASE("backward with zero upstream gradient is zero") {
    auto head = random_head(3, 5, 1);
    ForwardTrace trace;
    forward(head, std::vector<double>{1, 2, 3}, &trace);
    auto g = backward(head, trace, std::vector<double>(5, 0.0));
    for (double v : g.params.flatten_params()) CHECK(v == 0.0);
    for (double v : g.input) CHECK(v == 0.0);
}

TEST_CASE("single linear branch weight gradient is outer product") {
    auto head = init_head(2, 3, 0);
    std::vector<double> zeros(head.param_count(), 0.0);
    head.unflatten_params(zeros);
    head.b.weight = {1, 2, 3, 4, 5, 6};
    std::vector<double> f = {0.5, -1.5};
    ForwardTrace trace;
    forward(head, f, &trace);
    std::vector<double> grad_x = {1.0, -2.0, 0.5};
    auto g = backward(head, trace, grad_x);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(g.params.b.weight[i * 2 + j] == doctest::Approx(grad_x[i] * f[j]));
}

TEST_CASE("backward matches central finite differences") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        auto head = random_head(3, 5, 1000 + trial);
        std::vector<double> f(3), grad_x(5);
        for (double& v : f) v = rng.uniform(-1, 1);
        for (double& v : grad_x) v = rng.uniform(-1, 1);

        ForwardTrace trace;
        forward(head, f, &trace);
        auto analytic = backward(head, trace, grad_x);
        auto flat_analytic = analytic.params.flatten_params();

        auto flat = head.flatten_params();
        const double h = 1e-5;
        for (std::size_t p = 0; p < flat.size(); ++p) {
            auto plus = head, minus = head;
            auto fp = flat, fm = flat;
            fp[p] += h;
            fm[p] -= h;
            plus.unflatten_params(fp);
            minus.unflatten_params(fm);
            double fd = (objective(plus, f, grad_x) - objective(minus, f, grad_x)) / (2 * h);
            double diff = std::abs(fd - flat_analytic[p]);
            double scale = std::max({std::abs(fd), std::abs(flat_analytic[p]), 1e-8});
            CHECK(diff / scale < 1e-5);
        }

        for (std::size_t p = 0; p < f.size(); ++p) {
            auto fp = f, fm = f;
            fp[p] += h;
            fm[p] -= h;
            double fd = (objective(head, fp, grad_x) - objective(head, fm, grad_x)) / (2 * h);
            double diff = std::abs(fd - analytic.input[p]);
            double scale = std::max({std::abs(fd), std::abs(analytic.input[p]), 1e-8});
            CHECK(diff / scale < 1e-5);
        }
    }
}

TEST_CASE("head serialization round trip") {
    auto head = random_head(4, 6, 9);
    auto path = std::filesystem::temp_directory_path() / "equss_test_head.pqeh";
    write_head(head, path.string());
    auto loaded = read_head(path.string());
    CHECK(loaded.input_dim == 4);
    CHECK(loaded.expanded_dim == 6);
    auto orig = head.flatten_params();
    auto back = loaded.flatten_params();
    REQUIRE(orig.size() == back.size());
    for (std::size_t i = 0; i < orig.size(); ++i)
        CHECK(back[i] == static_cast<double>(static_cast<float>(orig[i])));
    std::filesystem::remove(path);
}
