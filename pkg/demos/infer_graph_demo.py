"""Tell a latent graph from a triangle graph at m = n = 20, k = 10."""
import numpy as np

from latentsearch import InferGraphConfig, infer_graph, sample_latent_model, sample_triangle_model

rng = np.random.default_rng(3)
cfg = InferGraphConfig(k=10, theta=np.log2(10), restarts=8)

for name, sampler in (("latent", sample_latent_model), ("triangle", sample_triangle_model)):
    _, joint, h_true = sampler(20, 20, 10, 1.0, rng)
    v = infer_graph(joint, cfg)
    print(f"{name:>8}: true H(Z) {h_true:.3f}  h_min {v.h_min:.3f}  "
          f"qualifying runs {v.qualifying_restarts:3d}  -> {v.graph.value}")
