import math

import numpy as np
import pytest

import htbench


def test_isotropic_sampler_shape_and_gaussian_case():
    x = htbench.sample_isotropic_stable(2.0, 3, 20000, seed=1)
    assert x.shape == (20000, 3)
    # alpha = 2 is N(0, 2 I) at unit scale.
    assert np.allclose(x.var(axis=0), 2.0, rtol=0.05)


def test_sampler_is_deterministic():
    a = htbench.sample_isotropic_stable(1.7, 5, 100, seed=3)
    b = htbench.sample_isotropic_stable(1.7, 5, 100, seed=3)
    assert np.array_equal(a, b)


def test_mmd_hand_example():
    x = np.array([[0.0], [1.0]])
    r = htbench.mmd_rbf(x, x, 1.0)
    assert r.value == pytest.approx(math.exp(-0.5) - 1.0, abs=1e-14)


def test_tce_self_is_zero():
    ref = htbench.sample_isotropic_stable(1.7, 4, 409, seed=2)
    assert htbench.tce_all(ref, ref) == [0.0, 0.0, 0.0]


def test_bound_exponents():
    a, b, c = htbench.ddpm_exponents(1.0, 2.0, 1.0)
    assert (a, b, c) == pytest.approx((1 / 3, 3 / 16, 3 / 8))
    assert htbench.ddpm_optimized_rate(1.0, 2.0, 1.0) == pytest.approx(0.24)
    assert htbench.dlpm_optimal_m(1e6, 1.0, 2.0) == 1000


def test_alpha2_schedule_matches_gaussian_chain():
    a, b = htbench.dlpm_schedule(64, 2.0)
    ab = np.array(htbench.ddpm_alpha_bar(64))
    assert np.allclose(a, np.sqrt(ab), atol=1e-12)
    assert np.allclose(b, np.sqrt(1 - ab), atol=1e-12)


def test_invalid_argument_maps_to_value_error():
    with pytest.raises(ValueError):
        htbench.ddpm_exponents(3.0, 2.0, 1.0)


def test_dataset_splits():
    d = htbench.gen_alpha_stable_iso(4096, dim=30, alpha=1.7, seed=0)
    assert d.train.shape == (3277, 30)
    assert d.val.shape[0] + d.test.shape[0] == 819


def test_format_cell():
    assert htbench.format_cell(1.11e-3, 5.02e-4) == "1.11·10⁻³ ± 5.02·10⁻⁴"


def test_selfcheck_passes():
    assert all(ok for _, ok, _ in htbench.selfcheck())
