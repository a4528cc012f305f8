"""LatentSearch against projected gradient descent, EM and NMF on one 5x5 joint."""
import numpy as np

from latentsearch import BaselineConfig, SearchConfig, em_plsa, gradient_descent_search, latent_search
from latentsearch.baselines import latent_search_converged, nmf_factorize, nmf_latent_diagnostics
from latentsearch.search import restart_init

p = np.random.default_rng(5).dirichlet(np.ones(25)).reshape(5, 5)
beta = 0.1
init = restart_init(5, 5, 5, 0, 0)

q, tr = latent_search(p, 5, SearchConfig(beta=beta), init=init)
print(f"LatentSearch: {tr.iterations_run} iters, residual {latent_search_converged(p, q, beta):.2e}, "
      f"cmi {tr.cmi[-1]:.4f}, H(Z) {tr.entropy_z[-1]:.4f}")

for step in (1e-3, 0.1):
    qg, g = gradient_descent_search(p, 5, beta, BaselineConfig(step_size=step, max_iters=10_000), init=init)
    print(f"GD step {step:g}: {g.iterations_run} iters, diverged={g.diverged}, "
          f"residual {latent_search_converged(p, qg, beta):.2e}")

_, em = em_plsa(p, 5, q, iters=300)
print(f"EM from LatentSearch output: cmi {em.cmi[0]:.4f} -> {em.cmi[-1]:.4f}, "
      f"H(Z) {em.entropy_z[0]:.4f} -> {em.entropy_z[-1]:.4f}")

for k in range(1, 6):
    U, V, res = nmf_factorize(p, k, rng=np.random.default_rng(k))
    hz, cmi = nmf_latent_diagnostics(p, U, V)
    print(f"NMF k={k}: l1 residual {res:.4f}, implied cmi {cmi:.4f}, H(Z) {hz:.4f}")
