"""Smoke tests for the python module: a thin pass over the main operations."""

import json
import math

import numpy as np
import pytest

try:
    from adkrr import _adkrr as ad
except ImportError:
    import _adkrr as ad


def test_kernel_eval_and_gram():
    gauss = ad.KernelSpec.gaussian(1.0)
    assert ad.eval_kernel(gauss, [0.3], [0.3]) == pytest.approx(1.0)

    mercer = ad.KernelSpec.truncated_mercer(0.5, 1)
    assert ad.eval_kernel(mercer, [0.0], [0.0]) == pytest.approx(2.0)

    x = np.linspace(0.05, 0.95, 8).reshape(-1, 1)
    g = ad.gram_matrix(gauss, x, x)
    assert g.shape == (8, 8)
    assert np.max(np.abs(g - g.T)) == 0.0
    assert np.min(np.linalg.eigvalsh(g)) >= -1e-8 * 8


def test_solve_and_effective_dimension():
    gram = np.array([[1.0, 0.5], [0.5, 1.0]])
    a = ad.solve_krr(gram, np.array([1.0, 1.0]), 0.25)
    assert a == pytest.approx([0.5, 0.5])
    assert ad.empirical_effective_dimension(gram, 0.25) == pytest.approx(1.25)
    assert ad.w_quantity(4, 0.25, 1.0) == pytest.approx(1.5)


def test_constants_and_ladder():
    assert ad.lambda_at(1.0, 4) == pytest.approx(0.25)
    assert ad.c1_star(1.0) == pytest.approx(2.0 * math.sqrt(2.0))
    assert ad.ladder_cap(10000, 1.0, 1.0, "theoretical") == 0
    assert ad.ladder_cap(10000, 1.0, 1.0, "practical", 50) == 50
    assert ad.halton_radical_inverse(2, 3) == pytest.approx(0.75)


def test_selection_rule():
    seminorms = {2: 0.1, 3: 0.5, 4: 0.05, 5: 0.02}
    thresholds = {k: 0.2 for k in range(2, 6)}
    assert ad.select_k(seminorms, thresholds, 5) == 3


def test_datagen_and_errors():
    reg = ad.RegressionSpec.make(0.5, 0.5, 200, 3)
    noise = ad.NoiseSpec.uniform_bounded(0.0)
    data = ad.sample_dataset(reg, noise, 32, 7)
    assert data.n == 32
    clean = reg.f_rho(data.X)
    assert np.max(np.abs(data.y - clean)) == 0.0

    kernel = ad.KernelSpec.truncated_mercer(0.5, 200)
    rho_sq, k_sq = ad.true_errors(np.empty((0, 1)), np.empty(0), kernel, reg)
    assert rho_sq == pytest.approx(reg.rho_norm_sq())
    assert k_sq == pytest.approx(reg.rkhs_norm_sq())

    sizes, warning = ad.partition(10, 3)
    assert sizes == [4, 3, 3]
    assert warning  # agents below the |D|^{1/(2r+s)} qualification

    sizes, warning = ad.partition(4096, 8)
    assert sizes == [512] * 8
    assert not warning


def test_end_to_end_run_is_deterministic():
    cfg = {
        "kernel": {"variant": "truncated_mercer", "s_param": 0.5, "truncation": 200},
        "regression": {"r": 0.5, "s_param": 0.5, "truncation": 200, "seed": 3},
        "noise": {"distribution": "uniform_bounded", "m_prime": 0.25},
        "n_total": 96,
        "m": 2,
        "ladder_cap": {"mode": "practical", "k_min": 12},
        "mu": {"mode": "scaled", "factor": 1e-8},
        "c_lp": {"mode": "fixed", "value": 1.0},
        "eval_grid": 8,
        "seed": 11,
        "workers": 1,
    }
    a = ad.run_experiment(json.dumps(cfg))
    b = ad.run_experiment(json.dumps(cfg))
    assert a.audit_passed
    assert a.rho_err == b.rho_err
    assert a.k_star == b.k_star
    assert a.oracle_err > 0.0
    assert all(2 <= k <= a.k_cap for k in a.k_star)

    row = ad.results_csv_row(a)
    assert row.startswith("96,2,11,")
