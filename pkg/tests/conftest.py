import numpy as np
import pytest

from bncl.label_graph import balanced_neighborhoods, similarity_matrix, threshold_graph
from bncl.synth import SynthConfig, generate, write_dataset
from util import DEFAULT_PAIR


@pytest.fixture(scope="session")
def default_bundle():
    """The default synthetic dataset, generated once for the whole run."""
    return generate(SynthConfig())


@pytest.fixture(scope="session")
def default_neighborhoods(default_bundle):
    graph = threshold_graph(similarity_matrix(default_bundle.embeddings), DEFAULT_PAIR)
    return balanced_neighborhoods(graph, depth=2)


@pytest.fixture(scope="session")
def small_bundle():
    """A small, fast dataset for trainer and CLI tests."""
    config = SynthConfig(
        n_labels=12,
        n_train=200,
        n_test=60,
        cluster_count=3,
        annotated_count=12,
        seed=11,
    )
    return generate(config)


@pytest.fixture(scope="session")
def small_dataset_dir(small_bundle, tmp_path_factory):
    out = tmp_path_factory.mktemp("small_dataset")
    write_dataset(small_bundle, out)
    return out


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
