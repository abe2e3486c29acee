import numpy as np
import pytest
from hypothesis import settings

from stnsync.pipeline import PipelineConfig, prepare
from stnsync.signal_io import SynthConfig, synth_recording

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

SMALL = SynthConfig(n_trials_per_class=4, seed=3)


@pytest.fixture(scope="session")
def small_recording():
    return synth_recording(SMALL)


@pytest.fixture(scope="session")
def small_prepared(small_recording):
    return prepare(small_recording, PipelineConfig())


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory, small_recording):
    from stnsync.signal_io import save_recording
    path = tmp_path_factory.mktemp("data") / "small"
    save_recording(small_recording, path)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
