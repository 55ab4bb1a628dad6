#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "drugsent/autograd.hpp"

using namespace drugsent;
using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

std::mt19937_64 rng(12345);

Var random_var(Shape shape, bool requires_grad = true, double scale = 1.0) {
    return Var(nn::uniform_init(shape, -scale, scale, rng), requires_grad);
}

// Central finite differences against the analytic gradient of a scalar.
double max_rel_error(std::vector<Var> params,
                     const std::function<Var()>& loss_fn, double h = 1e-6) {
    Var loss = loss_fn();
    nn::backward(loss);
    double worst = 0.0;
    for (Var& p : params) {
        const Tensor analytic = p.grad();
        for (std::size_t i = 0; i < p.value().numel(); ++i) {
            const double saved = p.value()[i];
            p.value()[i] = saved + h;
            const double up = loss_fn().value()[0];
            p.value()[i] = saved - h;
            const double down = loss_fn().value()[0];
            p.value()[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double denom =
                std::max(std::abs(analytic[i]), std::abs(numeric));
            if (denom < 1e-8) continue;
            worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
        }
    }
    return worst;
}

// Sum of squares as a smooth scalar head for op-level checks.
Var sum_squares(const Var& x) {
    Var squared = nn::mul(x, x);
    Var flat = nn::reshape(squared, {1, squared.value().numel()});
    Var ones(Tensor({squared.value().numel(), 1}, 1.0));
    return nn::reshape(nn::matmul(flat, ones), {1});
}

} // namespace

TEST_CASE("broadcast add and mul match manual expansion") {
    Var a(Tensor({2, 1, 3}, {1, 2, 3, 4, 5, 6}));
    Var b(Tensor({2, 3}, {10, 20, 30, 40, 50, 60}));
    Var sum = nn::add(a, b);
    REQUIRE(sum.value().shape() == Shape{2, 2, 3});
    CHECK(sum.value()[0] == 11);   // a[0,0,0] + b[0,0]
    CHECK(sum.value()[3] == 41);   // a[0,0,0] + b[1,0]
    CHECK(sum.value()[6] == 14);   // a[1,0,0] + b[0,0]
    CHECK(sum.value()[11] == 66);  // a[1,0,2] + b[1,2]

    Var product = nn::mul(a, b);
    CHECK(product.value()[0] == 10);
    CHECK(product.value()[11] == 360);
}

TEST_CASE("matmul agrees with a naive triple loop") {
    Var a = random_var({3, 4}, false);
    Var b = random_var({4, 5}, false);
    Var c = nn::matmul(a, b);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            double acc = 0;
            for (std::size_t k = 0; k < 4; ++k) {
                acc += a.value()[i * 4 + k] * b.value()[k * 5 + j];
            }
            CHECK(c.value()[i * 5 + j] == doctest::Approx(acc).epsilon(1e-12));
        }
    }
}

TEST_CASE("gradient checks per op") {
    SUBCASE("add with broadcasting") {
        Var a = random_var({2, 1, 3});
        Var b = random_var({4, 3});
        CHECK(max_rel_error({a, b}, [&] {
                  return sum_squares(nn::add(a, b));
              }) < 1e-6);
    }
    SUBCASE("mul with broadcasting") {
        Var a = random_var({2, 4, 3});
        Var b = random_var({3});
        CHECK(max_rel_error({a, b}, [&] {
                  return sum_squares(nn::mul(a, b));
              }) < 1e-6);
    }
    SUBCASE("matmul 2d") {
        Var a = random_var({3, 4});
        Var b = random_var({4, 2});
        CHECK(max_rel_error({a, b}, [&] {
                  return sum_squares(nn::matmul(a, b));
              }) < 1e-6);
    }
    SUBCASE("matmul with broadcast leading dims") {
        Var a = random_var({2, 2, 3, 4});
        Var b = random_var({4, 2});
        CHECK(max_rel_error({a, b}, [&] {
                  return sum_squares(nn::matmul(a, b));
              }) < 1e-6);
    }
    SUBCASE("batched matmul") {
        Var a = random_var({2, 3, 2, 4});
        Var b = random_var({2, 3, 4, 2});
        CHECK(max_rel_error({a, b}, [&] {
                  return sum_squares(nn::matmul(a, b));
              }) < 1e-6);
    }
    SUBCASE("gelu") {
        Var a = random_var({3, 5});
        CHECK(max_rel_error({a}, [&] { return sum_squares(nn::gelu(a)); }) <
              1e-5);
    }
    SUBCASE("softmax") {
        Var a = random_var({4, 6});
        CHECK(max_rel_error({a}, [&] {
                  return sum_squares(nn::softmax_lastdim(a));
              }) < 1e-5);
    }
    SUBCASE("layer norm") {
        Var x = random_var({4, 8});
        Var g = random_var({8});
        Var b = random_var({8});
        CHECK(max_rel_error({x, g, b}, [&] {
                  return sum_squares(nn::layer_norm(x, g, b, 1e-12));
              }) < 1e-5);
    }
    SUBCASE("embedding gather") {
        Var table = random_var({7, 4});
        const std::vector<int> ids = {0, 3, 6, 3, 1, 0};
        CHECK(max_rel_error({table}, [&] {
                  return sum_squares(nn::embedding_rows(table, ids, {2, 3}));
              }) < 1e-6);
    }
    SUBCASE("conv1d") {
        Var x = random_var({2, 6, 3});
        Var w = random_var({4, 2, 3});
        Var b = random_var({4});
        CHECK(max_rel_error({x, w, b}, [&] {
                  return sum_squares(nn::conv1d_valid(x, w, b));
              }) < 1e-6);
    }
    SUBCASE("max over time") {
        Var x = random_var({2, 5, 3});
        std::vector<std::uint8_t> mask = {1, 1, 1, 0, 0, 1, 1, 1, 1, 1};
        CHECK(max_rel_error({x}, [&] {
                  return sum_squares(nn::max_over_time(x, &mask));
              }) < 1e-6);
    }
    SUBCASE("concat + permute + reshape") {
        Var a = random_var({2, 3, 2});
        Var b = random_var({2, 3, 4});
        CHECK(max_rel_error({a, b}, [&] {
                  Var cat = nn::concat_lastdim({a, b});
                  Var swapped = nn::permute(cat, {1, 0, 2});
                  return sum_squares(nn::reshape(swapped, {6, 6}));
              }) < 1e-6);
    }
    SUBCASE("cross entropy") {
        Var logits = random_var({5, 3}, true, 2.0);
        const std::vector<int> labels = {0, 2, 1, 1, 0};
        CHECK(max_rel_error({logits}, [&] {
                  return nn::cross_entropy_mean(logits, labels);
              }) < 1e-6);
    }
}

TEST_CASE("relu backward only passes positive activations") {
    Var x(Tensor({4}, {-1.0, 2.0, -3.0, 4.0}), true);
    Var loss = sum_squares(nn::relu(x));
    nn::backward(loss);
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == doctest::Approx(2 * 2.0)); // d/dx x^2
    CHECK(x.grad()[2] == 0.0);
    CHECK(x.grad()[3] == doctest::Approx(2 * 4.0));
}

TEST_CASE("softmax rows sum to one") {
    Var a = random_var({6, 4}, false, 3.0);
    Var s = nn::softmax_lastdim(a);
    for (std::size_t r = 0; r < 6; ++r) {
        double sum = 0;
        for (std::size_t c = 0; c < 4; ++c) sum += s.value()[r * 4 + c];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("masked max ignores masked positions and falls back when empty") {
    Var x(Tensor({1, 3, 2}, {1, 10, 99, 20, 3, 30}));
    std::vector<std::uint8_t> mask = {1, 0, 1};
    Var m = nn::max_over_time(x, &mask);
    CHECK(m.value()[0] == 3.0);   // 99 at position 1 is masked out
    CHECK(m.value()[1] == 30.0);

    std::vector<std::uint8_t> none = {0, 0, 0};
    Var all = nn::max_over_time(x, &none);
    CHECK(all.value()[0] == 99.0); // all-zero mask keeps every position
}

TEST_CASE("cross entropy matches a hand computation") {
    Var logits(Tensor({1, 3}, {std::log(2.0), 0.0, 0.0}), false);
    Var loss = nn::cross_entropy_mean(logits, {0});
    CHECK(loss.value()[0] == doctest::Approx(-std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("no-grad mode builds no tape") {
    Var a = random_var({2, 2});
    {
        nn::NoGradGuard guard;
        Var b = nn::matmul(a, a);
        CHECK_FALSE(b.requires_grad());
    }
    Var c = nn::matmul(a, a);
    CHECK(c.requires_grad());
}

TEST_CASE("detach cuts gradient flow") {
    Var a = random_var({2, 2});
    Var b = nn::scale(a, 2.0).detach();
    Var loss = sum_squares(b);
    // b is a leaf without requires_grad; backward is legal but a gets none
    CHECK_FALSE(loss.requires_grad());
}

TEST_CASE("backward accumulates across shared subexpressions") {
    Var a(Tensor({1}, {3.0}), true);
    Var b = nn::mul(a, a);       // a^2
    Var c = nn::add(b, b);       // 2 a^2
    nn::backward(nn::reshape(c, {1}));
    CHECK(a.grad()[0] == doctest::Approx(12.0)); // d/da 2a^2 = 4a
}
