import numpy as np
import pytest

from repbench.corpus import SynthSpec, synthesize_corpus


@pytest.fixture(scope="session")
def asr_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("asr_corpus")
    spec = SynthSpec(kind="ASR", seed=11,
                     counts={"train": 6, "dev": 2, "test": 2},
                     vocab_size=3, tokens_range=(2, 3))
    manifests = synthesize_corpus(spec, out)
    return spec, manifests, out


@pytest.fixture(scope="session")
def ss_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("ss_corpus")
    spec = SynthSpec(kind="SS", seed=5,
                     counts={"train": 6, "dev": 2, "test": 2},
                     num_speakers=3, utt_len_range=(4000, 6000))
    manifests = synthesize_corpus(spec, out)
    return spec, manifests, out


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
