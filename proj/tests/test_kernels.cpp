/// Equivalence of the SIMD kernel table against the scalar reference.
/// FMA reassociation changes rounding, so comparisons are tolerance-based,
/// scaled by the reduction length.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "af/kernels.hpp"
#include "af/rng.hpp"

using af::RngStream;
using namespace af::kern;

namespace {

std::vector<float> random_vec(std::size_t n, RngStream& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
}

void check_close(const std::vector<float>& a, const std::vector<float>& b,
                 float tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(a[i] - b[i]) <= tol * (1.f + std::abs(b[i])));
}

}  // namespace

TEST_CASE("active table is well-formed") {
    const KernelTable& t = active_table();
    CHECK(t.name != nullptr);
    CHECK(t.axpy != nullptr);
    CHECK(t.matmul_nn != nullptr);
    MESSAGE("active kernel table: ", t.name);
}

#if defined(__x86_64__)

TEST_CASE("avx2 elementwise kernels match scalar") {
    if (!avx2_available()) return;
    const KernelTable& s = scalar_table();
    const KernelTable& v = avx2_table();
    RngStream rng(7, "kern");
    // odd lengths exercise the tail loops
    for (std::size_t n : {1u, 7u, 8u, 9u, 64u, 257u}) {
        auto x = random_vec(n, rng), y = random_vec(n, rng);
        auto ys = y, yv = y;
        s.axpy(n, 1.7f, x.data(), ys.data());
        v.axpy(n, 1.7f, x.data(), yv.data());
        check_close(yv, ys, 1e-6f);

        std::vector<float> zs(n), zv(n);
        s.add(n, x.data(), y.data(), zs.data());
        v.add(n, x.data(), y.data(), zv.data());
        check_close(zv, zs, 0.f);

        s.mul(n, x.data(), y.data(), zs.data());
        v.mul(n, x.data(), y.data(), zv.data());
        check_close(zv, zs, 0.f);

        s.scale(n, -0.3f, 0.9f, x.data(), zs.data());
        v.scale(n, -0.3f, 0.9f, x.data(), zv.data());
        check_close(zv, zs, 1e-6f);

        CHECK(std::abs(s.dot(n, x.data(), y.data()) -
                       v.dot(n, x.data(), y.data())) <= 1e-4f * (1.f + n));
        CHECK(std::abs(s.sum(n, x.data()) - v.sum(n, x.data())) <=
              1e-4f * (1.f + n));
    }
}

TEST_CASE("avx2 matmul kernels match scalar") {
    if (!avx2_available()) return;
    const KernelTable& s = scalar_table();
    const KernelTable& v = avx2_table();
    RngStream rng(11, "kern-mm");
    for (auto [m, k, n] : std::vector<std::array<std::size_t, 3>>{
             {1, 1, 1}, {3, 5, 7}, {8, 8, 8}, {13, 31, 17}, {32, 64, 9}}) {
        auto a = random_vec(m * k, rng);
        auto b_nn = random_vec(k * n, rng);
        auto b_nt = random_vec(n * k, rng);
        auto a_tn = random_vec(k * m, rng);

        std::vector<float> cs(m * n, 0.5f), cv(m * n, 0.5f);
        s.matmul_nn(m, k, n, a.data(), b_nn.data(), cs.data());
        v.matmul_nn(m, k, n, a.data(), b_nn.data(), cv.data());
        check_close(cv, cs, 1e-4f * static_cast<float>(k));

        std::fill(cs.begin(), cs.end(), 0.f);
        std::fill(cv.begin(), cv.end(), 0.f);
        s.matmul_nt(m, k, n, a.data(), b_nt.data(), cs.data());
        v.matmul_nt(m, k, n, a.data(), b_nt.data(), cv.data());
        check_close(cv, cs, 1e-4f * static_cast<float>(k));

        std::fill(cs.begin(), cs.end(), 0.f);
        std::fill(cv.begin(), cv.end(), 0.f);
        s.matmul_tn(m, k, n, a_tn.data(), b_nn.data(), cs.data());
        v.matmul_tn(m, k, n, a_tn.data(), b_nn.data(), cv.data());
        check_close(cv, cs, 1e-4f * static_cast<float>(k));
    }
}

TEST_CASE("avx2 adam kernel matches scalar") {
    if (!avx2_available()) return;
    const KernelTable& s = scalar_table();
    const KernelTable& v = avx2_table();
    RngStream rng(13, "kern-adam");
    const std::size_t n = 37;
    auto g = random_vec(n, rng);
    auto p0 = random_vec(n, rng);
    auto ps = p0, pv = p0;
    std::vector<float> ms(n, 0.f), vs(n, 0.f), mv(n, 0.f), vv(n, 0.f);
    for (int step = 1; step <= 3; ++step) {
        const float b1 = 1.f - std::pow(0.9f, static_cast<float>(step));
        const float b2 = 1.f - std::pow(0.999f, static_cast<float>(step));
        s.adam_update(n, ps.data(), g.data(), ms.data(), vs.data(), 1e-3f, 0.9f,
                      0.999f, 1e-8f, b1, b2);
        v.adam_update(n, pv.data(), g.data(), mv.data(), vv.data(), 1e-3f, 0.9f,
                      0.999f, 1e-8f, b1, b2);
    }
    check_close(pv, ps, 1e-6f);
    check_close(mv, ms, 1e-6f);
    check_close(vv, vs, 1e-6f);
}

#endif  // __x86_64__
