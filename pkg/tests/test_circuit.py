import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from buckvrft.circuit import (BilinearModel, CircuitParameters,
                              ParameterError, SingularModelError, build_model,
                              equilibrium, load_parameters, parallel)

resistances = st.floats(min_value=1e-3, max_value=1e4,
                        allow_nan=False, allow_infinity=False)


def test_parallel_examples():
    # arithmetic oracle: 1/(1/ra + 1/rb)
    assert parallel(0.1, 0.1) == pytest.approx(1.0 / (1 / 0.1 + 1 / 0.1))
    assert parallel(0.1, 0.1) == pytest.approx(0.05)
    assert parallel(1.0, 0.4) == pytest.approx(1.0 / (1 / 1.0 + 1 / 0.4))
    assert parallel(1.0, 0.4) == pytest.approx(0.2857, abs=1e-4)
    r = 3.7
    assert parallel(r, r) == pytest.approx(r / 2)


@pytest.mark.parametrize("ra,rb", [(0.0, 1.0), (1.0, 0.0), (-1.0, 2.0), (2.0, -0.5)])
def test_parallel_domain(ra, rb):
    with pytest.raises(ParameterError):
        parallel(ra, rb)


@given(resistances, resistances)
@settings(max_examples=100)
def test_parallel_properties(ra, rb):
    assert parallel(ra, rb) == parallel(rb, ra)
    assert 1.0 / parallel(ra, rb) == pytest.approx(1.0 / ra + 1.0 / rb, rel=1e-12)
    assert parallel(ra, rb) < min(ra, rb)


def test_default_parameters_match_reference_values(params):
    assert params.r_var_nominal == 2.8
    assert params.l1 == params.l2 == 33e-6
    assert params.c1 == params.c2 == 47e-6
    assert params.r1 == params.r2 == 1.0
    assert params.v_in_nominal == 40.0
    assert params.c_in == 120e-6
    assert params.r_c == 0.1
    assert params.c_out == 240e-6
    assert params.r_in == 0.1
    assert params.r_l1 == params.r_l2 == 0.02
    assert params.r_c1 == params.r_c2 == 0.4
    assert params.r_mos_on == 0.02
    assert params.tau_meas == 0.2e-6
    assert params.tau_comm == 2.5e-6
    assert params.t_s == 5e-6
    assert params.t_pwm == 100e-6
    assert params.dt_pwm == 0.1e-6
    assert params.t_samp == 100e-6


@pytest.mark.parametrize("field,value", [
    ("l1", 0.0), ("c_out", -1e-6), ("r_var_nominal", 0.0),
    ("tau_meas", -1e-9), ("t_s", 2e-4),   # t_s > t_samp
    ("dt_pwm", 1e-5),                     # dt_pwm > t_s
])
def test_parameter_invariants(field, value):
    with pytest.raises(ParameterError):
        CircuitParameters(**{field: value})


def test_model_structure(model):
    assert np.array_equal(np.diag(model.k_mat),
                          [33e-6, 33e-6, 47e-6, 47e-6, 120e-6, 240e-6])
    assert np.all(model.k_mat == np.diag(np.diag(model.k_mat)))
    # rows 3, 4, 6 of A1 carry no duty dependence
    assert np.all(model.a1[[2, 3, 5], :] == 0.0)
    assert np.array_equal(model.c_row, [[0, 0, 0, 0, 0, 1.0]])
    assert model.b0[5, 1] == 1.0
    # B1 couples the supply voltage into the two inductor rows only
    mask = np.zeros((6, 2), dtype=bool)
    mask[0, 0] = mask[1, 0] = True
    assert np.all((model.b1 != 0.0) == mask)
    assert model.state_labels == ("I_L1", "I_L2", "V_C1", "V_C2",
                                  "V_C_IN", "V_C_out")


def test_model_matrices_are_read_only(model):
    with pytest.raises(ValueError):
        model.a0[0, 0] = 1.0


def test_equilibrium_half_duty(model, params):
    w = np.array([params.v_in_nominal, 0.0])
    x = equilibrium(model, 0.5, w)
    # substituting back into the bilinear dynamics must leave ~no residual
    residual = model.system_matrix(0.5) @ x + model.input_matrix(0.5) @ w
    scale = np.linalg.norm(model.input_matrix(0.5) @ w)
    assert np.linalg.norm(residual) <= 1e-9 * scale
    # resistive drops keep the bus strictly below the ideal d * V_IN
    assert 0.0 < x[5] < 0.5 * params.v_in_nominal
    # identical legs carry identical currents
    assert x[0] == pytest.approx(x[1], rel=1e-12)
    assert x[2] == pytest.approx(x[3], rel=1e-12)


def test_equilibrium_zero_input(model):
    x = equilibrium(model, 0.37, [0.0, 0.0])
    assert np.allclose(x, 0.0, atol=1e-18)


@given(st.floats(min_value=0.05, max_value=0.95),
       st.floats(min_value=-20, max_value=60),
       st.floats(min_value=-2, max_value=2))
@settings(max_examples=50)
def test_equilibrium_linear_in_w_and_symmetric(model, d, vin, dr):
    w = np.array([vin, dr])
    x = equilibrium(model, d, w)
    x2 = equilibrium(model, d, 2.5 * w)
    assert np.allclose(x2, 2.5 * x, rtol=1e-9, atol=1e-12)
    assert x[0] == pytest.approx(x[1], rel=1e-9, abs=1e-12)
    assert x[2] == pytest.approx(x[3], rel=1e-9, abs=1e-12)


def test_equilibrium_singular(model, params):
    degenerate = BilinearModel(
        k_mat=model.k_mat.copy(), a0=np.zeros((6, 6)), a1=np.zeros((6, 6)),
        b0=model.b0.copy(), b1=model.b1.copy(), c_row=model.c_row.copy(),
        params=params)
    with pytest.raises(SingularModelError, match="condition"):
        equilibrium(degenerate, 0.5, [40.0, 0.0])


def test_build_model_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        CircuitParameters(r_c1=-0.4)


def test_load_parameters_defaults(tmp_path):
    cfg = tmp_path / "empty.cfg"
    cfg.write_text("# nothing but comments\n\n")
    assert load_parameters(cfg) == CircuitParameters()


def test_load_parameters_overrides(tmp_path):
    cfg = tmp_path / "p.cfg"
    cfg.write_text(
        "r_var_nominal = 3.2   # heavier load\n"
        "v_in_nominal=48\n"
        "c_out = 470e-6\n"
    )
    p = load_parameters(cfg)
    assert p.r_var_nominal == 3.2
    assert p.v_in_nominal == 48.0
    assert p.c_out == 470e-6
    assert p.l1 == 33e-6  # untouched default


@pytest.mark.parametrize("line", [
    "no_such_parameter = 1.0",
    "l1 = not-a-number",
    "just a line without equals",
    "l1 = 1e-5\nl1 = 2e-5",
])
def test_load_parameters_rejects(tmp_path, line):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(line + "\n")
    with pytest.raises(ParameterError):
        load_parameters(cfg)
