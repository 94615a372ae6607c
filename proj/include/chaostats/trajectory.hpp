#pragma once
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "chaostats/spectral.hpp"

namespace chaostats {

// Where a trajectory came from: fully resolved run, coarse-grid run (with or
// without closure), or a surrogate rollout.
enum class Provenance { frs, cgs, fno_rollout, other };

inline const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::frs: return "frs";
        case Provenance::cgs: return "cgs";
        case Provenance::fno_rollout: return "fno-rollout";
        default: return "other";
    }
}

inline Provenance provenance_from_name(std::string_view s) {
    if (s == "frs") return Provenance::frs;
    if (s == "cgs") return Provenance::cgs;
    if (s == "fno-rollout") return Provenance::fno_rollout;
    if (s == "other") return Provenance::other;
    throw std::invalid_argument("unknown provenance tag: " + std::string(s));
}

// Time-ordered sequence of states on one grid.
struct Trajectory {
    GridSpec grid;
    Provenance provenance = Provenance::other;
    std::vector<double> times;
    std::vector<RealField> states;

    size_t size() const { return states.size(); }
};

// Solver driver settings shared by the KS and NS integrators. KS uses a fixed
// step dt and records every record_every-th step. NS steps adaptively under
// the CFL rule and records at uniform physical times spaced dt*record_every
// apart, shortening the final sub-step to land exactly on each record time.
struct SolverConfig {
    GridSpec grid;
    double dt = 0;
    double cfl_number = 0.5;
    double t_end = 0;
    int record_every = 1;
};

} // namespace chaostats
