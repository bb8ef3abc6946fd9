import pytest
from hypothesis import settings

from xcorrsim.harness import WorkloadSpec, generate_workload

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture(scope="session")
def standard_workload():
    """The 200-spectrum, 20k-peptide desk workload."""
    return generate_workload(WorkloadSpec())


@pytest.fixture(scope="session")
def small_workload():
    return generate_workload(WorkloadSpec(num_spectra=12, num_peptides=2000, seed=7))
