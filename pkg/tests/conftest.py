import numpy as np
import pytest

from stratfront import diffuse, harness, sharp
from stratfront.model import (CrossSection, cosine_forcing, product_forcing,
                              quartic_double_well)


@pytest.fixture(scope="session")
def well():
    return quartic_double_well()


@pytest.fixture(scope="session")
def sec41():
    return CrossSection(1.0, 41)


@pytest.fixture(scope="session")
def sec201():
    return CrossSection(1.0, 201)


@pytest.fixture(scope="session")
def flat_forcing41(sec41):
    return product_forcing(sec41, 0.1)


@pytest.fixture(scope="session")
def flat_forcing201(sec201):
    return product_forcing(sec201, 0.1)


@pytest.fixture(scope="session")
def cosine_forcing201(sec201):
    return cosine_forcing(sec201, 0.1, 0.5)


@pytest.fixture(scope="session")
def sharp_flat(well, sec201, flat_forcing201):
    """Sharp critical speed and profile for the homogeneous catalog entry."""
    params = sharp.SharpRunParams()
    c, psi, res = harness.sharp_reference(well, flat_forcing201, params)
    return {"c": c, "psi": psi, "result": res}


@pytest.fixture(scope="session")
def wave_eps005(well):
    """Converged diffuse wave at eps = 0.05 on the homogeneous catalog entry."""
    eps = 0.05
    params = diffuse.DiffuseRunParams(eps=eps)
    grid = params.build_grid(1.0)
    forcing = product_forcing(grid.section, 0.1)
    res = diffuse.find_critical_speed(eps, params, well, forcing)
    return {"eps": eps, "params": params, "forcing": forcing, "result": res,
            "wave": res.diagnostics["wave"], "v_limit": res.diagnostics["v_limit"]}


@pytest.fixture(scope="session")
def sweep_result(well, sec201, flat_forcing201):
    """The acceptance eps sweep {0.1, 0.05, 0.025}; shared across criteria."""
    import time
    t0 = time.perf_counter()
    result = harness.run_eps_sweep([0.1, 0.05, 0.025], well, flat_forcing201)
    result.extras["elapsed"] = time.perf_counter() - t0
    return result


def acceptance_line(number: int, passed: bool, detail: str):
    status = "PASS" if passed else "FAIL"
    print(f"\nACCEPTANCE {number}: {status} - {detail}")
