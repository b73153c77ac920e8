#include <doctest.h>

#include <cmath>
#include <vector>

#include "ecalab/kernels.hpp"
#include "ecalab/kernels_ref.hpp"
#include "ecalab/rng.hpp"

using namespace ecalab;
using kern::Backend;

namespace {

struct BackendGuard {
    Backend saved;
    explicit BackendGuard(Backend b) : saved(kern::active_backend()) { kern::set_backend(b); }
    ~BackendGuard() { kern::set_backend(saved); }
};

std::vector<float> random_vec(SplitMix64& rng, size_t n, float scale = 1.0f) {
    std::vector<float> v(n);
    for (float& x : v) x = static_cast<float>((rng.next_unit() * 2.0 - 1.0) * scale);
    return v;
}

void check_close(const std::vector<float>& got, const std::vector<float>& want, float rel,
                 float abs) {
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) {
        const float tol = abs + rel * std::max(std::fabs(got[i]), std::fabs(want[i]));
        CHECK(std::fabs(got[i] - want[i]) <= tol);
    }
}

std::vector<Backend> simd_backends() {
    std::vector<Backend> out;
    if (kern::backend_supported(Backend::avx2)) out.push_back(Backend::avx2);
    if (kern::backend_supported(Backend::avx512)) out.push_back(Backend::avx512);
    return out;
}

}  // namespace

TEST_CASE("gemm variants agree with the scalar reference") {
    SplitMix64 rng(1);
    struct Case {
        int m, n, k;
    };
    const Case cases[] = {{1, 1, 1},   {3, 5, 2},    {6, 16, 8},  {7, 17, 33},
                          {13, 40, 9}, {64, 192, 64}, {230, 16, 230}, {37, 230, 16}};
    for (Backend backend : simd_backends()) {
        BackendGuard guard(backend);
        for (const Case& c : cases) {
            for (bool ta : {false, true}) {
                for (bool tb : {false, true}) {
                    for (float beta : {0.0f, 1.0f, 0.5f}) {
                        const int lda = ta ? c.m : c.k;
                        const int ldb = tb ? c.k : c.n;
                        std::vector<float> a = random_vec(rng, static_cast<size_t>(c.m) * c.k);
                        std::vector<float> b = random_vec(rng, static_cast<size_t>(c.k) * c.n);
                        std::vector<float> c0 = random_vec(rng, static_cast<size_t>(c.m) * c.n);
                        std::vector<float> got = c0, want = c0;
                        kern::sgemm(ta, tb, c.m, c.n, c.k, 1.25f, a.data(), lda, b.data(), ldb,
                                    beta, got.data(), c.n);
                        kern::ref::gemm(ta, tb, c.m, c.n, c.k, 1.25f, a.data(), lda, b.data(), ldb,
                                        beta, want.data(), c.n);
                        check_close(got, want, 1e-4f, 1e-5f * static_cast<float>(c.k));
                    }
                }
            }
        }
    }
}

TEST_CASE("gemm with beta 0 ignores pre-existing NaNs in C") {
    for (Backend backend : simd_backends()) {
        BackendGuard guard(backend);
        SplitMix64 rng(5);
        std::vector<float> a = random_vec(rng, 6 * 4);
        std::vector<float> b = random_vec(rng, 4 * 10);
        std::vector<float> c(60, std::nanf(""));
        kern::sgemm(false, false, 6, 10, 4, 1.0f, a.data(), 4, b.data(), 10, 0.0f, c.data(), 10);
        for (float v : c) CHECK(std::isfinite(v));
    }
}

TEST_CASE("softmax rows are normalized and match the reference") {
    SplitMix64 rng(2);
    for (Backend backend : simd_backends()) {
        BackendGuard guard(backend);
        for (int cols : {1, 4, 8, 13, 64, 230}) {
            const int rows = 9;
            std::vector<float> x = random_vec(rng, static_cast<size_t>(rows) * cols, 8.0f);
            std::vector<float> want = x;
            kern::softmax_rows(x.data(), rows, cols);
            kern::ref::softmax_rows(want.data(), rows, cols);
            check_close(x, want, 2e-5f, 1e-7f);
            for (int r = 0; r < rows; ++r) {
                double sum = 0;
                for (int c = 0; c < cols; ++c) sum += x[static_cast<size_t>(r) * cols + c];
                CHECK(std::abs(sum - 1.0) < 1e-6);
            }
        }
    }
}

TEST_CASE("softmax backward matches the reference and tolerates aliasing") {
    SplitMix64 rng(3);
    const int rows = 7, cols = 33;
    std::vector<float> p(static_cast<size_t>(rows) * cols);
    {
        std::vector<float> logits = random_vec(rng, p.size(), 3.0f);
        kern::ref::softmax_rows(logits.data(), rows, cols);
        p = logits;
    }
    std::vector<float> dp = random_vec(rng, p.size());
    std::vector<float> want(p.size());
    kern::ref::softmax_backward_rows(p.data(), dp.data(), want.data(), rows, cols);
    for (Backend backend : simd_backends()) {
        BackendGuard guard(backend);
        std::vector<float> ds(p.size());
        kern::softmax_backward_rows(p.data(), dp.data(), ds.data(), rows, cols);
        check_close(ds, want, 1e-5f, 1e-7f);
        std::vector<float> aliased = dp;
        kern::softmax_backward_rows(p.data(), aliased.data(), aliased.data(), rows, cols);
        check_close(aliased, want, 1e-5f, 1e-7f);
    }
}

TEST_CASE("layernorm forward normalizes and matches the reference") {
    SplitMix64 rng(4);
    const int rows = 11, cols = 64;
    std::vector<float> x = random_vec(rng, static_cast<size_t>(rows) * cols, 2.0f);
    std::vector<float> gain(cols, 1.0f), bias(cols, 0.0f);

    std::vector<float> want_y(x.size()), want_mean(rows), want_rstd(rows);
    kern::ref::layernorm_forward(x.data(), gain.data(), bias.data(), rows, cols, 1e-5f,
                                 want_y.data(), want_mean.data(), want_rstd.data());
    for (int r = 0; r < rows; ++r) {
        double mu = 0, var = 0;
        for (int c = 0; c < cols; ++c) mu += want_y[static_cast<size_t>(r) * cols + c];
        mu /= cols;
        for (int c = 0; c < cols; ++c) {
            const double d = want_y[static_cast<size_t>(r) * cols + c] - mu;
            var += d * d;
        }
        var /= cols;
        CHECK(std::abs(mu) < 1e-4);
        CHECK(std::abs(var - 1.0) < 1e-4);
    }

    for (Backend backend : simd_backends()) {
        BackendGuard guard(backend);
        std::vector<float> y(x.size()), mean(rows), rstd(rows);
        kern::layernorm_forward(x.data(), gain.data(), bias.data(), rows, cols, 1e-5f, y.data(),
                                mean.data(), rstd.data());
        check_close(y, want_y, 1e-5f, 1e-6f);
        check_close(mean, want_mean, 1e-5f, 1e-7f);
        check_close(rstd, want_rstd, 1e-5f, 1e-6f);
    }
}

TEST_CASE("layernorm backward agrees with central differences") {
    // double-precision reference against numeric derivatives of the forward
    SplitMix64 rng(6);
    const int rows = 3, cols = 10;
    std::vector<double> x(rows * cols), gain(cols), bias(cols), dy(rows * cols);
    for (double& v : x) v = rng.next_unit() * 2 - 1;
    for (double& v : gain) v = 0.5 + rng.next_unit();
    for (double& v : bias) v = rng.next_unit() - 0.5;
    for (double& v : dy) v = rng.next_unit() * 2 - 1;

    auto objective = [&](const std::vector<double>& xv) {
        std::vector<double> y(rows * cols), mean(rows), rstd(rows);
        kern::ref::layernorm_forward(xv.data(), gain.data(), bias.data(), rows, cols, 1e-10,
                                     y.data(), mean.data(), rstd.data());
        double s = 0;
        for (int i = 0; i < rows * cols; ++i) s += y[i] * dy[i];
        return s;
    };

    std::vector<double> y(rows * cols), mean(rows), rstd(rows);
    kern::ref::layernorm_forward(x.data(), gain.data(), bias.data(), rows, cols, 1e-10, y.data(),
                                 mean.data(), rstd.data());
    std::vector<double> dx(rows * cols), dgain(cols, 0.0), dbias(cols, 0.0);
    kern::ref::layernorm_backward(x.data(), gain.data(), mean.data(), rstd.data(), dy.data(), rows,
                                  cols, dx.data(), dgain.data(), dbias.data());

    const double h = 1e-6;
    for (int i = 0; i < rows * cols; i += 7) {
        std::vector<double> xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (objective(xp) - objective(xm)) / (2 * h);
        CHECK(std::abs(fd - dx[i]) < 1e-6 * std::max(1.0, std::abs(fd)));
    }

    for (Backend backend : simd_backends()) {
        BackendGuard guard(backend);
        std::vector<float> xf(x.begin(), x.end()), gf(gain.begin(), gain.end()),
            bf(bias.begin(), bias.end()), dyf(dy.begin(), dy.end());
        std::vector<float> yf(rows * cols), meanf(rows), rstdf(rows);
        kern::layernorm_forward(xf.data(), gf.data(), bf.data(), rows, cols, 1e-10f, yf.data(),
                                meanf.data(), rstdf.data());
        std::vector<float> dxf(rows * cols), dgf(cols, 0.0f), dbf(cols, 0.0f);
        kern::layernorm_backward(xf.data(), gf.data(), meanf.data(), rstdf.data(), dyf.data(),
                                 rows, cols, dxf.data(), dgf.data(), dbf.data());
        std::vector<float> want_dx(dx.begin(), dx.end());
        check_close(dxf, want_dx, 1e-4f, 1e-5f);
    }
}

TEST_CASE("gelu matches the reference and its own derivative") {
    SplitMix64 rng(8);
    const int64_t n = 1003;
    std::vector<float> x = random_vec(rng, n, 4.0f);
    std::vector<float> dy = random_vec(rng, n);

    std::vector<float> want_y(n), want_dx(n);
    kern::ref::gelu_forward(x.data(), want_y.data(), n);
    kern::ref::gelu_backward(x.data(), dy.data(), want_dx.data(), n);

    for (Backend backend : simd_backends()) {
        BackendGuard guard(backend);
        std::vector<float> y(n), dx(n);
        kern::gelu_forward(x.data(), y.data(), n);
        kern::gelu_backward(x.data(), dy.data(), dx.data(), n);
        check_close(y, want_y, 1e-5f, 2e-6f);
        check_close(dx, want_dx, 1e-4f, 2e-5f);
    }

    // derivative of the scalar form against central differences, in double
    for (double v : {-3.0, -1.0, -0.1, 0.0, 0.3, 1.7, 4.0}) {
        const double h = 1e-6;
        const double fd = (kern::ref::gelu_one(v + h) - kern::ref::gelu_one(v - h)) / (2 * h);
        CHECK(std::abs(fd - kern::ref::gelu_grad_one(v)) < 1e-8);
    }
}

TEST_CASE("adam update matches the reference and honors degenerate inputs") {
    SplitMix64 rng(9);
    const int64_t n = 515;
    std::vector<float> p0 = random_vec(rng, n), g = random_vec(rng, n);
    std::vector<float> m0 = random_vec(rng, n, 0.01f), v0;
    v0.resize(n);
    for (auto& v : v0) v = static_cast<float>(rng.next_unit() * 0.01);

    std::vector<float> want_p = p0, want_m = m0, want_v = v0;
    kern::ref::adam_update(want_p.data(), g.data(), want_m.data(), want_v.data(), n, 1e-3f, 0.9f,
                           0.999f, 1e-8f, 2.0f, 1.5f);
    for (Backend backend : simd_backends()) {
        BackendGuard guard(backend);
        std::vector<float> p = p0, m = m0, v = v0;
        kern::adam_update(p.data(), g.data(), m.data(), v.data(), n, 1e-3f, 0.9f, 0.999f, 1e-8f,
                          2.0f, 1.5f);
        check_close(p, want_p, 1e-5f, 1e-7f);
        check_close(m, want_m, 1e-5f, 1e-8f);
        check_close(v, want_v, 1e-5f, 1e-9f);
    }

    // zero gradient with zero moments leaves parameters untouched
    std::vector<float> p = p0, zg(n, 0.0f), zm(n, 0.0f), zv(n, 0.0f);
    kern::adam_update(p.data(), zg.data(), zm.data(), zv.data(), n, 1e-3f, 0.9f, 0.999f, 1e-8f,
                      10.0f, 1000.0f);
    CHECK(p == p0);
    // learning rate zero likewise
    std::vector<float> q = p0, m = m0, v = v0;
    kern::adam_update(q.data(), g.data(), m.data(), v.data(), n, 0.0f, 0.9f, 0.999f, 1e-8f, 2.0f,
                      1.5f);
    CHECK(q == p0);
}

TEST_CASE("elementwise helpers match the reference") {
    SplitMix64 rng(10);
    const int rows = 13, cols = 37;
    std::vector<float> x = random_vec(rng, static_cast<size_t>(rows) * cols);
    std::vector<float> bias = random_vec(rng, cols);

    for (Backend backend : simd_backends()) {
        BackendGuard guard(backend);

        std::vector<float> got = x, want = x;
        kern::add_bias_rows(got.data(), bias.data(), rows, cols);
        kern::ref::add_bias_rows(want.data(), bias.data(), rows, cols);
        check_close(got, want, 1e-6f, 1e-7f);

        std::vector<float> sums(cols), want_sums(cols);
        kern::col_sums(x.data(), rows, cols, sums.data());
        kern::ref::col_sums(x.data(), rows, cols, want_sums.data());
        check_close(sums, want_sums, 1e-5f, 1e-6f);

        std::vector<float> acc = x;
        std::vector<float> want_acc = x;
        kern::vec_add(acc.data(), bias.data(), cols);
        kern::ref::vec_add(want_acc.data(), bias.data(), cols);
        check_close(acc, want_acc, 0.0f, 0.0f);
    }
}

TEST_CASE("backend selection is explicit and reversible") {
    const Backend before = kern::active_backend();
    {
        BackendGuard guard(Backend::scalar);
        CHECK(kern::active_backend() == Backend::scalar);
    }
    CHECK(kern::active_backend() == before);
    CHECK(kern::backend_supported(Backend::scalar));
    CHECK(std::string(kern::backend_name(Backend::avx2)) == "avx2");
}
