import numpy as np
import pytest

from mhekit.core import CostSpec
from mhekit.models import batch_reactor, scalar_integrator
from mhekit.simulate import InputProfile, NoiseSpec, Overlay, simulate
from mhekit.estimators import infinite_horizon_benchmark


@pytest.fixture(scope="session")
def unit_cost():
    return CostSpec(Q=[[1.0]], R=[[1.0]], G=[[1.0]])


@pytest.fixture(scope="session")
def scalar_model():
    return scalar_integrator()


@pytest.fixture(scope="session")
def scalar_batch(scalar_model):
    """The constant-drift study batch: x0=1, w=v=1, T=30, so y_t = t+2."""
    noise = NoiseSpec(w_bounds=[0.0], v_bounds=[0.0],
                      w_overlay=Overlay.constant([1.0]), v_overlay=Overlay.constant([1.0]))
    return simulate(scalar_model, [1.0], InputProfile("zero"), noise, T=30, seed=0)


@pytest.fixture(scope="session")
def scalar_benchmark(scalar_model, scalar_batch, unit_cost):
    noise = NoiseSpec(w_bounds=[0.0], v_bounds=[0.0],
                      w_overlay=Overlay.constant([1.0]), v_overlay=Overlay.constant([1.0]))

    def extender(Te):
        return simulate(scalar_model, [1.0 - Te], InputProfile("zero"), noise,
                        T=30 + 2 * Te, seed=0, t0=-Te)

    return infinite_horizon_benchmark(scalar_batch, unit_cost, method="extended_window",
                                      extender=extender)


@pytest.fixture(scope="session")
def reactor_model():
    return batch_reactor()


@pytest.fixture(scope="session")
def reactor_cost():
    return CostSpec(Q=np.eye(2), R=[[1.0]], G=[[1.0]])


@pytest.fixture(scope="session")
def reactor_batch(reactor_model):
    profile = InputProfile("periodic_refill", {"period": 50, "target": [3.0, 0.0]})
    noise = NoiseSpec(w_bounds=[0.05, 0.05], v_bounds=[0.5])
    return simulate(reactor_model, [3.0, 0.0], profile, noise, T=120, seed=7)
