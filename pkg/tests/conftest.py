import csv
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pcsibench.cohort import RECORDS_HEADER, STATIC_HEADER, VACCINATION_HEADER, build_dataset, filter_eligible
from pcsibench.pcsi import compute_all
from pcsibench.synth import SynthConfig, generate

settings.register_profile(
    "repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


def write_table(path: Path, header, rows):
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


@pytest.fixture
def cohort_files(tmp_path):
    """Factory writing the three cohort CSVs and returning their paths."""

    def make(static_rows, record_rows, vacc_rows, static_header=STATIC_HEADER):
        return (
            write_table(tmp_path / "static.csv", static_header, static_rows),
            write_table(tmp_path / "records.csv", RECORDS_HEADER, record_rows),
            write_table(tmp_path / "vaccination.csv", VACCINATION_HEADER, vacc_rows),
        )

    return make


@pytest.fixture(scope="session")
def synth_small():
    cohort, truth = generate(SynthConfig(n_participants=400, seed=11))
    return cohort, truth


@pytest.fixture(scope="session")
def dataset_small(synth_small):
    cohort, _ = synth_small
    eligible, _ = filter_eligible(cohort)
    return build_dataset(eligible, compute_all(eligible))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
