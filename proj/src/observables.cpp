#include "tmc/observables.hpp"

#include <cmath>

#include "tmc/error.hpp"
#include "tmc/stats.hpp"

namespace tmc {

std::vector<double> anyon_samples(const LatticeGeometry& geometry, const AnyonPath& path, const NishimoriParams& params,
                                  int n_samples, int chi, RngStream& rng, ContractionEngine engine) {
  if (n_samples < 1) throw Error(ErrorCode::insufficient_samples, "n_samples must be positive");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n_samples));
  if (path.bonds.empty() || params.beta == 0.0) {
    // Identity operator, or Z independent of the bonds: every sample is exactly 1.
    for (int i = 0; i < n_samples; ++i) {
      (void)sample_nishimori(geometry, params, rng);
      out.push_back(1.0);
    }
    return out;
  }
  const LogPartitionFunction log_z(geometry, params.beta, chi, engine);
  for (int i = 0; i < n_samples; ++i) {
    BondConfig x = sample_nishimori(geometry, params, rng);
    const double base = log_z(x);
    for (int b : path.bonds) x.flip(b);
    const double flipped = log_z(x);
    out.push_back(std::exp(0.5 * (flipped - base)));
  }
  return out;
}

AnyonResult measure_anyon(const LatticeGeometry& geometry, const AnyonPath& path, const NishimoriParams& params,
                          int n_samples, int chi, RngStream& rng, ContractionEngine engine) {
  if (n_samples < 2) throw Error(ErrorCode::insufficient_samples, "measure_anyon needs at least two samples");
  const std::vector<double> samples = anyon_samples(geometry, path, params, n_samples, chi, rng, engine);
  const MeanError me = mean_and_sem(samples);
  AnyonResult r;
  r.value = me.mean;
  r.error = me.error;
  r.n_samples = n_samples;
  r.path = path;
  r.meta = RunMeta{geometry.size(), params.p, params.temperature, 0, chi};
  return r;
}

TeeResult compute_tee(const EntropyEstimate& ac, const EntropyEstimate& bc, const EntropyEstimate& c,
                      const EntropyEstimate& abc) {
  const RunMeta& m = ac.meta;
  for (const EntropyEstimate* e : {&bc, &c, &abc})
    if (!(e->meta == m))
      throw Error(ErrorCode::inconsistent_runs, "entropy runs differ in (L, T, p, n_steps, chi)");
  TeeResult t;
  t.parts = {ac, bc, c, abc};
  t.meta = m;
  t.qcmi = ac.s2 + bc.s2 - c.s2 - abc.s2;
  t.qcmi_error = std::sqrt(ac.error * ac.error + bc.error * bc.error + c.error * c.error + abc.error * abc.error);
  t.gamma = 0.5 * t.qcmi;
  t.gamma_error = 0.5 * t.qcmi_error;
  return t;
}

}  // namespace tmc
