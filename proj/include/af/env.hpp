/// @file env.hpp
/// @brief Ground-truth field generation and sparse observation.
///
/// Frames live on a periodic H x W grid over the square (-1,1)^2; node (i,j)
/// sits at (-1 + 2i/W, -1 + 2j/H), i indexing x (columns) and j indexing y
/// (rows). Frame storage is row-major [y][x][channel].
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "af/rng.hpp"
#include "af/tensor.hpp"

namespace af::env {

/// Smooth periodic forcing evaluated at physical coordinates, or nullptr.
using Forcing = std::function<double(double x, double y)>;

struct DomainSpec {
    int height = 32;        // H, power of two
    int width = 32;         // W, power of two
    int channels = 1;       // C
    double dt = 0.02;       // simulation timestep
    double viscosity = 1e-2;
    Forcing forcing;        // zero when empty

    void validate() const;
};

/// Default body force 0.1 (sin(2 pi (x+y)) + cos(2 pi (x+y))); a stand-in,
/// see config key env.forcing.
Forcing standard_forcing();

struct FieldTrajectory {
    Tensor data;  // T x H x W x C
    double dt = 0.0;
    double viscosity = 0.0;
    std::uint64_t seed = 0;

    int steps() const { return data.extent(0); }
    int height() const { return data.extent(1); }
    int width() const { return data.extent(2); }
    int channels() const { return data.extent(3); }

    /// View of frame t as an H x W x C tensor (copy).
    Tensor frame(int t) const;
};

struct SensorLayout {
    std::vector<double> xy;  // N pairs (x, y), inside the domain

    int count() const { return static_cast<int>(xy.size()) / 2; }
    double x(int i) const { return xy[2 * static_cast<std::size_t>(i)]; }
    double y(int i) const { return xy[2 * static_cast<std::size_t>(i) + 1]; }
};

struct ObservationSet {
    SensorLayout layout;
    Tensor values;  // N x C
    int timestep = 0;
};

// ---- solver ----------------------------------------------------------------

/// Integrate the vorticity equation on the torus with a pseudo-spectral
/// scheme: exact integrating factor for diffusion, explicit second-order step
/// for advection + forcing, 2/3-rule dealiasing. Returns `steps` frames with
/// frame 0 = w0.
FieldTrajectory simulate_vorticity(const TensorD& w0, const DomainSpec& spec,
                                   int steps, std::uint64_t seed = 0);

/// Gaussian random initial vorticity with a smooth spectrum, zero mean.
TensorD random_vorticity(const DomainSpec& spec, RngStream& rng);

/// Analytic advected-Gaussian-bump trajectory ("translating hotspot"): a bump
/// of width `sigma` moving at constant velocity on the torus, direction drawn
/// from the seed. Speed is per timestep.
FieldTrajectory hotspot_trajectory(const DomainSpec& spec, int steps,
                                   double sigma, double speed, RngStream& rng);

// ---- observation -----------------------------------------------------------

/// Bilinear interpolation of frame (H x W x C) at the layout coordinates,
/// with periodic wrap at the domain edges.
ObservationSet observe(const Tensor& frame, const SensorLayout& layout,
                       int timestep = 0);

/// Uniform samples over the domain jittered by N(0, 0.1), clipped inside.
SensorLayout init_layout(int n, RngStream& rng);

/// Clip coordinates into the open domain.
double clip_coord(double v);

/// New layout at clip(old + action); action is N x 2 row-major.
SensorLayout apply_displacement(const SensorLayout& layout,
                                const std::vector<double>& action);

// ---- trajectory file (LTRJ) ------------------------------------------------

void save_trajectories(const std::vector<FieldTrajectory>& trajs,
                       const std::string& path);
std::vector<FieldTrajectory> load_trajectories(const std::string& path);

// ---- grid helpers ----------------------------------------------------------

/// Full-grid query coordinates (H*W x 2 doubles, row-major over [y][x]).
std::vector<double> grid_coords(int height, int width);

}  // namespace af::env
