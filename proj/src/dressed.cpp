#include "ceit/dressed.hpp"

#include "ceit/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

namespace ceit {

namespace {

using cd = std::complex<double>;

constexpr double kCoalescenceOverlap = 1.0 - 1e-6;
constexpr double kTrackingOverlap = 0.9;

void flag_exceptional(DressedSet& set)
{
    for (int i = 0; i < 3; ++i) {
        for (int j = i + 1; j < 3; ++j) {
            const double ov =
                std::abs(set.states[i].vector.dot(set.states[j].vector));
            if (ov > kCoalescenceOverlap) {
                set.exceptional = true;
                set.coalesced = std::make_pair(i, j);
            }
        }
    }
}

DressedSet raw_eigenstates(const SystemParams& p)
{
    const Eigen::Matrix3cd m = probe_independent_block(p);
    Eigen::ComplexEigenSolver<Eigen::Matrix3cd> solver(m, true);
    if (solver.info() != Eigen::Success) {
        throw DivergenceError("dressed_states: eigensolver failed");
    }
    DressedSet set;
    const auto& values = solver.eigenvalues();
    const auto& vectors = solver.eigenvectors();
    for (int k = 0; k < 3; ++k) {
        auto& s = set.states[k];
        s.frequency = values(k).real();
        s.linewidth = -values(k).imag();
        s.vector = vectors.col(k).normalized();
        // Fix the global phase: largest component real and positive.
        int imax = 0;
        s.vector.cwiseAbs().maxCoeff(&imax);
        s.vector *= std::polar(1.0, -std::arg(s.vector(imax)));
    }
    std::sort(set.states.begin(), set.states.end(),
              [](const DressedState& a, const DressedState& b) {
                  return a.frequency > b.frequency;
              });
    const cd trace = m.trace();
    const cd sum = values.sum();
    set.trace_error = std::abs(sum - trace) / std::max(std::abs(trace), 1e-300);
    flag_exceptional(set);
    return set;
}

void label_by_character(DressedSet& set)
{
    int circ = 0;
    double best = -1.0;
    for (int k = 0; k < 3; ++k) {
        const double w = std::norm(set.states[k].vector(block::kG1));
        if (w > best) {
            best = w;
            circ = k;
        }
    }
    bool plus_taken = false;
    for (int k = 0; k < 3; ++k) {
        if (k == circ) {
            set.states[k].label = DressedLabel::Circ;
        } else if (!plus_taken) {
            set.states[k].label = DressedLabel::Plus;
            plus_taken = true;
        } else {
            set.states[k].label = DressedLabel::Minus;
        }
    }
}

}  // namespace

std::string to_string(DressedLabel label)
{
    switch (label) {
    case DressedLabel::Plus: return "plus";
    case DressedLabel::Circ: return "circ";
    case DressedLabel::Minus: return "minus";
    }
    return "?";
}

const DressedState& DressedSet::get(DressedLabel label) const
{
    for (const auto& s : states) {
        if (s.label == label) return s;
    }
    throw std::logic_error("dressed set is missing a label");
}

DressedSet dressed_states(const SystemParams& p)
{
    DressedSet set = raw_eigenstates(p);
    label_by_character(set);
    return set;
}

std::vector<DressedSet> track_dressed_states(std::span<const SystemParams> sweep)
{
    std::vector<DressedSet> out;
    out.reserve(sweep.size());
    for (std::size_t n = 0; n < sweep.size(); ++n) {
        if (n == 0) {
            out.push_back(dressed_states(sweep[0]));
            continue;
        }
        DressedSet cur = raw_eigenstates(sweep[n]);
        const DressedSet& prev = out.back();
        // Best of the 6 assignments of previous labels to current states.
        std::array<int, 3> perm{0, 1, 2};
        std::array<int, 3> best_perm = perm;
        double best_score = -1.0;
        double best_min = 0.0;
        do {
            double score = 0.0;
            double min_ov = 1.0;
            for (int k = 0; k < 3; ++k) {
                const double ov =
                    std::abs(prev.states[k].vector.dot(cur.states[perm[k]].vector));
                score += ov;
                min_ov = std::min(min_ov, ov);
            }
            if (score > best_score) {
                best_score = score;
                best_perm = perm;
                best_min = min_ov;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        for (int k = 0; k < 3; ++k) {
            cur.states[best_perm[k]].label = prev.states[k].label;
        }
        cur.tracking_uncertain = best_min < kTrackingOverlap || cur.exceptional;
        out.push_back(cur);
    }
    return out;
}

std::vector<SpectrumPoint> excitation_spectrum(const SystemParams& p,
                                               std::span<const double> delta_pa_grid)
{
    p.validate();
    const double drive = 0.5 * p.omega_p;
    const double empty_resonant = drive * drive / (p.kappa * p.kappa);
    Eigen::Vector3cd source = Eigen::Vector3cd::Zero();
    source(block::kCav) = drive;

    std::vector<SpectrumPoint> out;
    out.reserve(delta_pa_grid.size());
    for (double dpa : delta_pa_grid) {
        SystemParams q = p;
        q.delta_pa = dpa;
        SpectrumPoint pt;
        pt.delta_pa = dpa;
        const Eigen::Matrix3cd h = single_excitation_block(q);
        Eigen::PartialPivLU<Eigen::Matrix3cd> lu(-h);
        if (!(lu.rcond() > 1e-14)) {
            pt.divergent = true;
            pt.p_e = pt.n_cav = pt.transmission = std::numeric_limits<double>::infinity();
        } else {
            const Eigen::Vector3cd c = lu.solve(source);
            pt.p_e = std::norm(c(block::kE));
            pt.n_cav = std::norm(c(block::kCav));
            pt.transmission = empty_resonant > 0.0 ? pt.n_cav / empty_resonant : 0.0;
        }
        out.push_back(pt);
    }
    return out;
}

std::vector<SidebandResonance> sideband_resonance_frequencies(const SystemParams& p,
                                                              double omega)
{
    const DressedSet set = dressed_states(p);
    std::vector<SidebandResonance> out;
    for (const auto& s : set.states) {
        out.push_back({s.label, s.frequency - omega, s.frequency + omega});
    }
    return out;
}

}  // namespace ceit
