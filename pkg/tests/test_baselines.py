import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentsearch.baselines import (
    BaselineConfig,
    PlsaFactors,
    em_plsa,
    gradient_descent_search,
    latent_search_converged,
    loss_gradient,
    nmf_factorize,
    nmf_latent_diagnostics,
    nmf_posterior,
    plsa_log_likelihood,
    project_simplex,
)
from latentsearch.prob import check_posterior, conditional_mutual_information, entropy, random_posterior
from latentsearch.search import SearchConfig, latent_search, loss
from latentsearch.synth import sample_latent_model


def rand_joint(rng, m, n):
    return rng.dirichlet(np.ones(m * n)).reshape(m, n)


# --- gradient ----------------------------------------------------------------

def test_gradient_matches_finite_differences():
    """Directional derivatives along in-simplex directions, h = 1e-6."""
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(10):
        p = rand_joint(rng, 3, 3)
        q = random_posterior(2, 3, 3, rng)
        q = 0.8 * q + 0.1  # keep away from the boundary
        for beta in (0.0, 0.5, 1.0):
            g = loss_gradient(p, q, beta)
            for x in range(3):
                for y in range(3):
                    d = np.zeros_like(q)
                    d[0, x, y], d[1, x, y] = 1.0, -1.0
                    fd = (loss(p, q + h * d, beta) - loss(p, q - h * d, beta)) / (2 * h)
                    an = float((g * d).sum())
                    assert abs(fd - an) <= 1e-5 * max(abs(an), 1e-3)


def test_gradient_zero_where_p_zero():
    rng = np.random.default_rng(1)
    p = rand_joint(rng, 3, 3)
    p[1, 1] = 0
    p /= p.sum()
    g = loss_gradient(p, random_posterior(3, 3, 3, rng), 0.3)
    np.testing.assert_array_equal(g[:, 1, 1], 0.0)


# --- projection --------------------------------------------------------------

def brute_projection(v):
    """Minimise |w - v|^2 over the simplex through the KKT threshold, by bisection."""
    lo, hi = v.min() - 1.0, v.max()
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        if np.maximum(v - tau, 0).sum() > 1:
            lo = tau
        else:
            hi = tau
    return np.maximum(v - 0.5 * (lo + hi), 0)


@settings(max_examples=50)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6))
def test_projection_onto_simplex(vals):
    v = np.array(vals)
    w = project_simplex(v[:, None], axis=0)[:, 0]
    assert np.all(w >= 0)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(w, brute_projection(v), atol=1e-9)


def test_projection_is_identity_on_simplex():
    q = random_posterior(4, 3, 2, np.random.default_rng(2))
    np.testing.assert_allclose(project_simplex(q, axis=0), q, atol=1e-15)


# --- gradient descent --------------------------------------------------------

def test_gd_iterates_stay_on_simplex():
    rng = np.random.default_rng(3)
    p = rand_joint(rng, 3, 3)
    q = random_posterior(2, 3, 3, rng)
    for _ in range(20):
        q, tr = gradient_descent_search(p, 2, 0.2, BaselineConfig(step_size=0.01, max_iters=5), init=q)
        check_posterior(q, p.shape)
    assert not tr.diverged
    np.testing.assert_allclose(tr.loss, tr.cmi + 0.2 * tr.entropy_z, atol=1e-12)


def test_gd_stalls_at_latent_search_fixed_point():
    p = rand_joint(np.random.default_rng(4), 3, 3)
    q, tr = latent_search(p, 2, SearchConfig(beta=0.0, fixed_point_tol=1e-14, max_iters=10_000),
                          rng=np.random.default_rng(0))
    assert tr.converged
    q1, gtr = gradient_descent_search(p, 2, 0.0, BaselineConfig(step_size=1e-3, max_iters=1), init=q)
    assert np.abs(q1 - q).max() < 1e-8


def test_gd_large_step_diverges():
    p = rand_joint(np.random.default_rng(5), 5, 5)
    _, tr = gradient_descent_search(p, 5, 0.1, BaselineConfig(step_size=0.1, max_iters=2000),
                                    rng=np.random.default_rng(0))
    assert tr.diverged
    assert np.all(np.isfinite(tr.loss))


# --- EM ----------------------------------------------------------------------

def test_em_log_likelihood_monotone():
    rng = np.random.default_rng(6)
    for _ in range(50):
        m, n, k = rng.integers(2, 6, size=3)
        p = rand_joint(rng, m, n)
        _, tr = em_plsa(p, k, random_posterior(k, m, n, rng), iters=60)
        assert np.all(np.diff(tr.log_likelihood) >= -1e-10)


def test_em_fixed_point_at_true_factors():
    model, joint, _ = sample_latent_model(5, 4, 3, 1.0, np.random.default_rng(7))
    f0 = PlsaFactors(model.z_prior, model.x_given_z, model.y_given)
    f, tr = em_plsa(joint, 3, f0, iters=300)
    np.testing.assert_allclose(f.z_prior, f0.z_prior, atol=1e-9)
    np.testing.assert_allclose(f.x_given_z, f0.x_given_z, atol=1e-9)
    np.testing.assert_allclose(f.y_given_z, f0.y_given_z, atol=1e-9)
    np.testing.assert_allclose(f.model_joint(), joint.probs, atol=1e-12)
    assert tr.cmi[-1] <= 1e-10


def test_plsa_conversions_and_likelihood():
    rng = np.random.default_rng(8)
    p = rand_joint(rng, 3, 4)
    q = random_posterior(2, 3, 4, rng)
    f = PlsaFactors.from_posterior(p, q)
    j3 = q * p
    np.testing.assert_allclose(f.z_prior, j3.sum(axis=(1, 2)), atol=1e-15)
    np.testing.assert_allclose(f.x_given_z, j3.sum(axis=2) / j3.sum(axis=(1, 2))[:, None], atol=1e-15)
    r = f.responsibilities()
    check_posterior(r, p.shape)
    oracle = sum(p[x, y] * np.log2(f.model_joint()[x, y]) for x in range(3) for y in range(4))
    assert plsa_log_likelihood(p, f) == pytest.approx(oracle, abs=1e-12)
    # responsibilities of a CI tensor explain it exactly
    assert conditional_mutual_information(r * f.model_joint()) <= 1e-10
    with pytest.raises(ValueError):
        em_plsa(p, 3, f)


# --- NMF ---------------------------------------------------------------------

def test_nmf_rank_one():
    rng = np.random.default_rng(9)
    p = np.outer(rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(5)))
    U, V, res = nmf_factorize(p, 1, rng=rng)
    assert res <= 1e-6
    assert U.min() >= 0 and V.min() >= 0


def test_nmf_exact_latent_model():
    _, joint, _ = sample_latent_model(4, 4, 2, 1.0, np.random.default_rng(10))
    best = min(nmf_factorize(joint, 2, rng=np.random.default_rng([0, r]))[2] for r in range(40))
    assert best <= 1e-3


def test_nmf_residual_non_increasing():
    rng = np.random.default_rng(11)
    p = rand_joint(rng, 6, 6)
    for rule in ("polyak", "diminishing"):
        *_, hist = nmf_factorize(p, 3, BaselineConfig(max_iters=40, nmf_step=rule), rng=rng, return_history=True)
        assert np.all(np.diff(hist) <= 1e-9)
        assert hist[-1] < hist[0]


def test_nmf_implied_latent_diagnostics():
    model, joint, hz_true = sample_latent_model(4, 4, 3, 1.0, np.random.default_rng(12))
    U = (model.x_given_z * model.z_prior[:, None]).T
    V = model.y_given
    check_posterior(nmf_posterior(U, V), (4, 4))
    hz, cmi = nmf_latent_diagnostics(joint, U, V)
    assert hz == pytest.approx(entropy(model.z_prior), abs=1e-12)
    assert hz == pytest.approx(hz_true, abs=1e-12)
    assert cmi <= 1e-10
    # rescaling columns of U against rows of V leaves the diagnostics unchanged
    s = np.array([2.0, 0.5, 3.0])
    hz2, cmi2 = nmf_latent_diagnostics(joint, U * s, V / s[:, None])
    assert hz2 == pytest.approx(hz, abs=1e-12) and cmi2 == pytest.approx(cmi, abs=1e-12)


def test_latent_search_residual_helper():
    p = rand_joint(np.random.default_rng(13), 3, 3)
    q = np.full((2, 3, 3), 0.5)
    assert latent_search_converged(p, q, 0.3) <= 1e-15


def test_config_validation():
    with pytest.raises(ValueError):
        BaselineConfig(step_size=0.0)
    with pytest.raises(ValueError):
        BaselineConfig(nmf_step="newton")
    with pytest.raises(ValueError):
        nmf_factorize(np.full((2, 2), 0.25), 0)
