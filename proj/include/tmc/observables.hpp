#pragma once

#include <array>
#include <string>
#include <vector>

#include "tmc/jarzynski.hpp"
#include "tmc/lattice.hpp"
#include "tmc/rng.hpp"
#include "tmc/sampler.hpp"

namespace tmc {

struct AnyonResult {
  double value = 1.0;
  double error = 0.0;
  int n_samples = 0;
  AnyonPath path;
  RunMeta meta;
};

/// <T_l> = [ sqrt(Z(x_l) / Z(x)) ] over x ~ Z(x), by i.i.d. Nishimori draws.
AnyonResult measure_anyon(const LatticeGeometry& geometry, const AnyonPath& path, const NishimoriParams& params,
                          int n_samples, int chi, RngStream& rng,
                          ContractionEngine engine = ContractionEngine::automatic);

// Per-sample values of the estimator above; each is strictly positive.
std::vector<double> anyon_samples(const LatticeGeometry& geometry, const AnyonPath& path, const NishimoriParams& params,
                                  int n_samples, int chi, RngStream& rng,
                                  ContractionEngine engine = ContractionEngine::automatic);

/**
 * Levin-Wen combination of four Renyi-2 entropies.
 *
 * qcmi  = S2(AC) + S2(BC) - S2(C) - S2(ABC)
 * gamma = qcmi / 2, which is ln 2 for Z2 topological order; the four-term
 * combination itself counts the topological constant twice on an annulus.
 * Errors of the four independent campaigns add in quadrature.
 */
struct TeeResult {
  std::array<EntropyEstimate, 4> parts;  // AC, BC, C, ABC
  double qcmi = 0.0;
  double qcmi_error = 0.0;
  double gamma = 0.0;
  double gamma_error = 0.0;
  RunMeta meta;
};

TeeResult compute_tee(const EntropyEstimate& ac, const EntropyEstimate& bc, const EntropyEstimate& c,
                      const EntropyEstimate& abc);

}  // namespace tmc
