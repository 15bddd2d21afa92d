import numpy as np
import pytest

from echomem.ensemble import Ensemble, EnsembleSpec, WaveVectorSet, sample_ensemble


@pytest.fixture
def wv():
    return WaveVectorSet.counter_propagating()


@pytest.fixture
def small_ensemble():
    gen = np.random.default_rng(11)
    return Ensemble(gen.random((6, 3)) * 10.0, gen.standard_normal(6))


@pytest.fixture
def ensemble_1000():
    return sample_ensemble(EnsembleSpec(1000, width=1.0, seed=5))
