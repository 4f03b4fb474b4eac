#pragma once

// Dressed states of the control-driven atom-cavity system and weak-probe
// excitation spectra.

#include "ceit/model.hpp"

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ceit {

enum class DressedLabel { Plus, Circ, Minus };

std::string to_string(DressedLabel label);

/// Eigenstate of the single-excitation block. `frequency` is measured on
/// the delta_PC axis: the probe is resonant with the state when
/// delta_PC == frequency. `vector` is over (|g1,0>, |g2,1>, |e,0>).
struct DressedState {
    DressedLabel label = DressedLabel::Plus;
    double frequency = 0.0;
    double linewidth = 0.0;
    Eigen::Vector3cd vector = Eigen::Vector3cd::Zero();
};

/// The three dressed states sorted by descending frequency. The label
/// `Circ` goes to the state with the largest |g1,0> weight; of the other
/// two the higher one is `Plus`.
struct DressedSet {
    std::array<DressedState, 3> states;
    bool exceptional = false;  ///< two eigenvectors (nearly) coalesce
    std::optional<std::pair<int, int>> coalesced;
    bool tracking_uncertain = false;  ///< sweep only: overlap with previous point < 0.9
    double trace_error = 0.0;  ///< |sum(lambda) - trace| / |trace|

    const DressedState& get(DressedLabel label) const;
};

DressedSet dressed_states(const SystemParams& p);

/// Dressed states along a 1-D sweep. Labels of the first point follow
/// dressed_states(); later points inherit labels by maximal eigenvector
/// overlap with the previous point, so branches stay continuous.
std::vector<DressedSet> track_dressed_states(std::span<const SystemParams> sweep);

struct SpectrumPoint {
    double delta_pa = 0.0;
    double p_e = 0.0;
    double n_cav = 0.0;
    double transmission = 0.0;  ///< n_cav / empty-cavity on-resonance n_cav
    bool divergent = false;
};

/// Weak-probe steady state for each probe-atom detuning in the grid
/// (rad/us); every other parameter is taken from `p`.
std::vector<SpectrumPoint> excitation_spectrum(const SystemParams& p,
                                               std::span<const double> delta_pa_grid);

struct SidebandResonance {
    DressedLabel label = DressedLabel::Plus;
    double red = 0.0;   ///< delta_PC = omega_j - omega
    double blue = 0.0;  ///< delta_PC = omega_j + omega
};

std::vector<SidebandResonance> sideband_resonance_frequencies(const SystemParams& p,
                                                              double omega);

}  // namespace ceit
