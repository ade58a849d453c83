/// @file env.cpp
/// @brief Pseudo-spectral vorticity solver, analytic toy fields, bilinear
/// observation, and the LTRJ trajectory file format.

#include "af/env.hpp"

#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numbers>
#include <stdexcept>

namespace af::env {
namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, in place. inverse => conjugate transform
// without the 1/n factor; callers scale.
void fft(std::vector<cd>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2 * kPi / static_cast<double>(len) * (inverse ? 1 : -1);
        const cd wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cd w(1);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cd u = a[i + j];
                const cd v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

// 2-D grid of complex values, row-major [y][x].
struct Spectral {
    int h, w;
    std::vector<cd> data;

    Spectral(int height, int width) : h(height), w(width), data(static_cast<std::size_t>(height) * width) {}

    cd& at(int j, int i) { return data[static_cast<std::size_t>(j) * w + i]; }
    const cd& at(int j, int i) const { return data[static_cast<std::size_t>(j) * w + i]; }

    void fft2(bool inverse) {
        std::vector<cd> col(h);
        for (int j = 0; j < h; ++j) {
            std::vector<cd> row(data.begin() + static_cast<std::size_t>(j) * w,
                                data.begin() + static_cast<std::size_t>(j + 1) * w);
            fft(row, inverse);
            std::copy(row.begin(), row.end(), data.begin() + static_cast<std::size_t>(j) * w);
        }
        for (int i = 0; i < w; ++i) {
            for (int j = 0; j < h; ++j) col[j] = at(j, i);
            fft(col, inverse);
            for (int j = 0; j < h; ++j) at(j, i) = col[j];
        }
        if (inverse) {
            const double scale = 1.0 / (static_cast<double>(h) * w);
            for (auto& v : data) v *= scale;
        }
    }
};

// Signed mode index for position n on an N-point grid.
int mode(int n, int size) { return n < size / 2 ? n : n - size; }

// Domain side length is 2, so wavenumber = pi * mode.
double wavenum(int n, int size) { return kPi * mode(n, size); }

struct SolverWorkspace {
    int h, w;
    double nu, dt;
    std::vector<double> kx, ky, ksq, efactor;
    std::vector<bool> dealias;  // 2/3 rule mask
    Spectral f_hat;

    SolverWorkspace(const DomainSpec& spec)
        : h(spec.height), w(spec.width), nu(spec.viscosity), dt(spec.dt),
          kx(w), ky(h), ksq(static_cast<std::size_t>(h) * w),
          efactor(static_cast<std::size_t>(h) * w),
          dealias(static_cast<std::size_t>(h) * w), f_hat(h, w) {
        for (int i = 0; i < w; ++i) kx[i] = wavenum(i, w);
        for (int j = 0; j < h; ++j) ky[j] = wavenum(j, h);
        for (int j = 0; j < h; ++j)
            for (int i = 0; i < w; ++i) {
                const std::size_t idx = static_cast<std::size_t>(j) * w + i;
                ksq[idx] = kx[i] * kx[i] + ky[j] * ky[j];
                efactor[idx] = std::exp(-nu * ksq[idx] * dt);
                dealias[idx] = std::abs(mode(i, w)) <= w / 3 &&
                               std::abs(mode(j, h)) <= h / 3;
            }
        if (spec.forcing) {
            for (int j = 0; j < h; ++j)
                for (int i = 0; i < w; ++i) {
                    const double x = -1.0 + 2.0 * i / w;
                    const double y = -1.0 + 2.0 * j / h;
                    f_hat.at(j, i) = spec.forcing(x, y);
                }
            f_hat.fft2(false);
            for (std::size_t idx = 0; idx < f_hat.data.size(); ++idx)
                if (!dealias[idx]) f_hat.data[idx] = 0;
        }
    }

    // N(w)_hat = -(u . grad w)_hat + f_hat, dealiased. Also reports max |u|.
    Spectral nonlinear(const Spectral& w_hat, double* max_vel) const {
        Spectral psi(h, w), u(h, w), v(h, w), wx(h, w), wy(h, w);
        for (int j = 0; j < h; ++j)
            for (int i = 0; i < w; ++i) {
                const std::size_t idx = static_cast<std::size_t>(j) * w + i;
                const cd wh = w_hat.at(j, i);
                const cd ph = ksq[idx] > 0 ? wh / ksq[idx] : cd(0);
                const cd I(0, 1);
                u.at(j, i) = I * ky[j] * ph;    // u = d psi / dy
                v.at(j, i) = -I * kx[i] * ph;   // v = -d psi / dx
                wx.at(j, i) = I * kx[i] * wh;
                wy.at(j, i) = I * ky[j] * wh;
            }
        u.fft2(true);
        v.fft2(true);
        wx.fft2(true);
        wy.fft2(true);
        Spectral adv(h, w);
        double mv = 0;
        for (std::size_t idx = 0; idx < adv.data.size(); ++idx) {
            const double ur = u.data[idx].real(), vr = v.data[idx].real();
            mv = std::max(mv, std::max(std::abs(ur), std::abs(vr)));
            adv.data[idx] = -(ur * wx.data[idx].real() + vr * wy.data[idx].real());
        }
        if (max_vel) *max_vel = mv;
        adv.fft2(false);
        for (std::size_t idx = 0; idx < adv.data.size(); ++idx) {
            if (!dealias[idx]) adv.data[idx] = 0;
            adv.data[idx] += f_hat.data[idx];
        }
        return adv;
    }
};

}  // namespace

void DomainSpec::validate() const {
    if (!is_pow2(height) || !is_pow2(width))
        throw std::invalid_argument("domain: grid extents must be powers of two");
    if (viscosity < 0) throw std::invalid_argument("domain: negative viscosity");
    if (dt <= 0) throw std::invalid_argument("domain: non-positive dt");
    if (channels < 1) throw std::invalid_argument("domain: channels < 1");
}

Forcing standard_forcing() {
    return [](double x, double y) {
        return 0.1 * (std::sin(2 * kPi * (x + y)) + std::cos(2 * kPi * (x + y)));
    };
}

Tensor FieldTrajectory::frame(int t) const {
    const int h = height(), w = width(), c = channels();
    Tensor out({h, w, c});
    const std::size_t frame_size = static_cast<std::size_t>(h) * w * c;
    const float* src = data.data() + static_cast<std::size_t>(t) * frame_size;
    std::copy(src, src + frame_size, out.data());
    return out;
}

FieldTrajectory simulate_vorticity(const TensorD& w0, const DomainSpec& spec,
                                   int steps, std::uint64_t seed) {
    spec.validate();
    if (steps < 2) throw std::invalid_argument("simulate: need at least 2 steps");
    const int h = spec.height, w = spec.width;
    if (w0.rows() != h || w0.cols() != w)
        throw std::invalid_argument("simulate: w0 shape does not match grid");

    SolverWorkspace ws(spec);
    Spectral w_hat(h, w);
    for (std::size_t i = 0; i < w_hat.data.size(); ++i) w_hat.data[i] = w0[i];
    w_hat.fft2(false);

    FieldTrajectory out;
    out.data = Tensor({steps, h, w, 1});
    out.dt = spec.dt;
    out.viscosity = spec.viscosity;
    out.seed = seed;
    const std::size_t frame_size = static_cast<std::size_t>(h) * w;

    bool cfl_warned = false;
    Spectral phys(h, w);
    for (int t = 0; t < steps; ++t) {
        phys = w_hat;
        phys.fft2(true);
        double wmax = 0;
        for (std::size_t i = 0; i < frame_size; ++i) {
            const double val = phys.data[i].real();
            wmax = std::max(wmax, std::abs(val));
            out.data[static_cast<std::size_t>(t) * frame_size + i] =
                static_cast<float>(val);
        }
        if (wmax > 1e6)
            throw std::runtime_error("simulate: blow-up at step " + std::to_string(t));
        if (t == steps - 1) break;

        // Heun step with exact diffusion integrating factor.
        double max_vel = 0;
        Spectral n0 = ws.nonlinear(w_hat, &max_vel);
        if (!cfl_warned && max_vel * spec.dt * w / 2.0 > 1.0) {
            std::cerr << "warning: CFL estimate exceeded (max|u| dt / dx = "
                      << max_vel * spec.dt * w / 2.0 << ") at step " << t << "\n";
            cfl_warned = true;
        }
        Spectral w1(h, w);
        for (std::size_t i = 0; i < frame_size; ++i)
            w1.data[i] = ws.efactor[i] * (w_hat.data[i] + spec.dt * n0.data[i]);
        Spectral n1 = ws.nonlinear(w1, nullptr);
        for (std::size_t i = 0; i < frame_size; ++i)
            w_hat.data[i] = ws.efactor[i] * w_hat.data[i] +
                            0.5 * spec.dt *
                                (ws.efactor[i] * n0.data[i] + n1.data[i]);
    }
    return out;
}

TensorD random_vorticity(const DomainSpec& spec, RngStream& rng) {
    spec.validate();
    const int h = spec.height, w = spec.width;
    Spectral noise(h, w);
    for (auto& v : noise.data) v = rng.normal();
    noise.fft2(false);
    const double tau = 3.0 * kPi;
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) {
            const double kx = wavenum(i, w), ky = wavenum(j, h);
            const double k2 = kx * kx + ky * ky;
            if (k2 == 0) {
                noise.at(j, i) = 0;  // zero-mean field
            } else {
                noise.at(j, i) *= std::pow(k2 + tau * tau, -1.25);
            }
        }
    noise.fft2(true);
    double var = 0;
    for (const auto& v : noise.data) var += v.real() * v.real();
    var /= static_cast<double>(noise.data.size());
    const double scale = var > 0 ? 1.0 / std::sqrt(var) : 1.0;
    TensorD out({h, w});
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = noise.data[i].real() * scale;
    return out;
}

FieldTrajectory hotspot_trajectory(const DomainSpec& spec, int steps,
                                   double sigma, double speed, RngStream& rng) {
    spec.validate();
    if (steps < 2) throw std::invalid_argument("hotspot: need at least 2 steps");
    const int h = spec.height, w = spec.width;
    double cx = rng.uniform(-1.0, 1.0);
    double cy = rng.uniform(-1.0, 1.0);
    const double angle = rng.uniform(0.0, 2 * kPi);
    const double vx = speed * std::cos(angle);
    const double vy = speed * std::sin(angle);

    FieldTrajectory out;
    out.data = Tensor({steps, h, w, 1});
    out.dt = 1.0;
    out.viscosity = 0.0;
    out.seed = rng.seed();
    const std::size_t frame_size = static_cast<std::size_t>(h) * w;
    for (int t = 0; t < steps; ++t) {
        for (int j = 0; j < h; ++j)
            for (int i = 0; i < w; ++i) {
                const double x = -1.0 + 2.0 * i / w;
                const double y = -1.0 + 2.0 * j / h;
                // periodic displacement, wrapped into [-1, 1)
                const double dx = std::remainder(x - cx, 2.0);
                const double dy = std::remainder(y - cy, 2.0);
                out.data[static_cast<std::size_t>(t) * frame_size +
                         static_cast<std::size_t>(j) * w + i] =
                    static_cast<float>(
                        std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)));
            }
        cx = std::remainder(cx + vx, 2.0);
        cy = std::remainder(cy + vy, 2.0);
    }
    return out;
}

double clip_coord(double v) {
    const double lim = 1.0 - 1e-6;
    return std::min(lim, std::max(-lim, v));
}

ObservationSet observe(const Tensor& frame, const SensorLayout& layout,
                       int timestep) {
    const int h = frame.extent(0), w = frame.extent(1), c = frame.extent(2);
    const int n = layout.count();
    if (n < 1) throw std::invalid_argument("observe: empty layout");
    Tensor values({n, c});
    for (int s = 0; s < n; ++s) {
        const double x = layout.x(s), y = layout.y(s);
        if (std::abs(x) > 1.0 || std::abs(y) > 1.0)
            throw std::invalid_argument("observe: coordinate outside domain");
        const double gx = (x + 1.0) * 0.5 * w;
        const double gy = (y + 1.0) * 0.5 * h;
        const int i0 = static_cast<int>(std::floor(gx));
        const int j0 = static_cast<int>(std::floor(gy));
        const double fx = gx - i0, fy = gy - j0;
        const int i0w = ((i0 % w) + w) % w, i1w = (i0w + 1) % w;
        const int j0w = ((j0 % h) + h) % h, j1w = (j0w + 1) % h;
        for (int ch = 0; ch < c; ++ch) {
            auto node = [&](int j, int i) {
                return static_cast<double>(
                    frame[(static_cast<std::size_t>(j) * w + i) * c + ch]);
            };
            const double v00 = node(j0w, i0w), v01 = node(j0w, i1w);
            const double v10 = node(j1w, i0w), v11 = node(j1w, i1w);
            values.at(s, ch) = static_cast<float>(
                (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                fy * ((1 - fx) * v10 + fx * v11));
        }
    }
    return ObservationSet{layout, std::move(values), timestep};
}

SensorLayout init_layout(int n, RngStream& rng) {
    if (n < 1) throw std::invalid_argument("init_layout: n < 1");
    SensorLayout layout;
    layout.xy.reserve(2 * static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double x = rng.uniform(-1.0, 1.0) + 0.1 * rng.normal();
        const double y = rng.uniform(-1.0, 1.0) + 0.1 * rng.normal();
        layout.xy.push_back(clip_coord(x));
        layout.xy.push_back(clip_coord(y));
    }
    return layout;
}

SensorLayout apply_displacement(const SensorLayout& layout,
                                const std::vector<double>& action) {
    if (action.size() != layout.xy.size())
        throw std::invalid_argument("apply_displacement: action rows mismatch");
    SensorLayout out;
    out.xy.resize(layout.xy.size());
    for (std::size_t i = 0; i < layout.xy.size(); ++i)
        out.xy[i] = clip_coord(layout.xy[i] + action[i]);
    return out;
}

namespace {

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("trajectory file: truncated");
    return v;
}

constexpr std::uint32_t kTrajVersion = 1;

}  // namespace

void save_trajectories(const std::vector<FieldTrajectory>& trajs,
                       const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("trajectory file: cannot open " + path);
    os.write("LTRJ", 4);
    put<std::uint32_t>(os, kTrajVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(trajs.size()));
    for (const auto& tr : trajs) {
        put<std::uint64_t>(os, tr.seed);
        put<std::uint32_t>(os, static_cast<std::uint32_t>(tr.steps()));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(tr.height()));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(tr.width()));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(tr.channels()));
        put<double>(os, tr.dt);
        put<double>(os, tr.viscosity);
        os.write(reinterpret_cast<const char*>(tr.data.data()),
                 static_cast<std::streamsize>(tr.data.size() * sizeof(float)));
    }
    if (!os) throw std::runtime_error("trajectory file: write failed");
}

std::vector<FieldTrajectory> load_trajectories(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("trajectory file: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "LTRJ", 4) != 0)
        throw std::runtime_error("trajectory file: bad magic in " + path);
    const auto version = take<std::uint32_t>(is);
    if (version != kTrajVersion)
        throw std::runtime_error("trajectory file: unsupported version " +
                                 std::to_string(version));
    const auto count = take<std::uint32_t>(is);
    std::vector<FieldTrajectory> out;
    out.reserve(count);
    for (std::uint32_t r = 0; r < count; ++r) {
        FieldTrajectory tr;
        tr.seed = take<std::uint64_t>(is);
        const int t = static_cast<int>(take<std::uint32_t>(is));
        const int h = static_cast<int>(take<std::uint32_t>(is));
        const int w = static_cast<int>(take<std::uint32_t>(is));
        const int c = static_cast<int>(take<std::uint32_t>(is));
        tr.dt = take<double>(is);
        tr.viscosity = take<double>(is);
        std::vector<float> payload(static_cast<std::size_t>(t) * h * w * c);
        is.read(reinterpret_cast<char*>(payload.data()),
                static_cast<std::streamsize>(payload.size() * sizeof(float)));
        if (!is) throw std::runtime_error("trajectory file: truncated payload");
        tr.data = Tensor({t, h, w, c}, std::move(payload));
        out.push_back(std::move(tr));
    }
    return out;
}

std::vector<double> grid_coords(int height, int width) {
    std::vector<double> out;
    out.reserve(2 * static_cast<std::size_t>(height) * width);
    for (int j = 0; j < height; ++j)
        for (int i = 0; i < width; ++i) {
            out.push_back(-1.0 + 2.0 * i / width);
            out.push_back(-1.0 + 2.0 * j / height);
        }
    return out;
}

}  // namespace af::env
