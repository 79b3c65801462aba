import math

import numpy as np
import pytest

import nhomog


def test_presets_resolve_and_round_trip():
    assert {"test1", "desk-test1", "desk-test3"} <= set(nhomog.preset_names())
    text = nhomog.preset("desk-test1")
    assert "fine = 128" in text
    assert nhomog.resolve_config(text) == text
    with pytest.raises(nhomog.ParameterError):
        nhomog.resolve_config("[grid]\nbogus = 1\n")


def test_constant_patch_is_exact():
    k = nhomog.effective_permeability(np.full((9, 9), 2.5))
    np.testing.assert_allclose(k, 2.5 * np.eye(2), atol=1e-10)
    c = nhomog.effective_elasticity(np.ones((9, 9)), 0.25)
    np.testing.assert_allclose(c, [[1.2, 0.4, 0.0], [0.4, 1.2, 0.0], [0.0, 0.0, 0.8]], atol=1e-8)


def test_random_patch_within_bounds():
    y = nhomog.random_field(2, 16, 2.0, [0.2, 0.2], seed=3)
    assert y.shape == (17, 17)
    k = np.exp(y)
    kstar = nhomog.effective_permeability(k)
    assert np.allclose(kstar, kstar.T)
    ev = np.linalg.eigvalsh(kstar)
    assert ev.min() > 0
    assert ev.max() <= k.max() and ev.min() >= k.min()


def test_metrics():
    m = nhomog.compute_metrics([2.0, 0.0], [1.0, 1.0])
    assert m["mse"] == pytest.approx(2.0, abs=1e-12)
    assert m["mae"] == pytest.approx(100.0, abs=1e-12)
    assert m["rmse"] == pytest.approx(100.0 / math.sqrt(2.0), abs=1e-12)


def test_tiny_pipeline(tmp_path):
    nhomog.set_log_level("warn")
    cfg = "\n".join([
        "[pipeline]", "name = tiny",
        "[grid]", "fine = 16", "coarse = 4",
        "[field]", "max_modes = 16",
        "[dataset]", "realizations = 2",
        "[train]", "epochs = 1",
        "[solve]", "realizations = 1",
    ])
    with pytest.raises(nhomog.MissingInputError, match="generate-fields"):
        nhomog.run_pipeline(cfg, tmp_path, ["homogenize"])
    nhomog.run_pipeline(cfg, tmp_path)
    p = nhomog.read_array(tmp_path / "solutions" / "fine_p_0000.nhar")
    assert p.shape == (17, 17)
    assert np.isfinite(p).all()
    assert (tmp_path / "reports" / "errors.csv").exists()
