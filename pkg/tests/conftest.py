import numpy as np
import pytest

from shipfuel.config import DEFAULT_REDUNDANT
from shipfuel.grids import daily_mean
from shipfuel.pipeline import build_pipeline, to_design_matrix
from shipfuel.reports import RawReportRow, parse_report_table, timezone_policy
from shipfuel.synth import REPORT_SCHEMA, DefectSpec, FuelLaw, generate_voyage, inject_defects


@pytest.fixture(scope="session")
def corpus296():
    """The canonical 296-day corpus with paper-style defect rates injected."""
    law = FuelLaw(seed=11)
    corpus = generate_voyage(law, n_days=296)
    spec = DefectSpec(state_rows=30, startup_rows=4, outlier_rows=5,
                      missing_cell_rate=0.01, seed=11)
    rows, book = inject_defects(corpus.raw_rows, spec)
    return corpus, rows, book


@pytest.fixture(scope="session")
def parsed296(corpus296):
    _, rows, _ = corpus296
    raw = [RawReportRow(cells=r) for r in rows]
    return parse_report_table(raw, REPORT_SCHEMA, timezone_policy("utc"))


@pytest.fixture(scope="session")
def fused_dataset(corpus296, parsed296):
    corpus, _, _ = corpus296
    grids = [daily_mean(corpus.grids["atmo"]), corpus.grids["ocean"]]
    pipe = build_pipeline(grids=grids, redundant=DEFAULT_REDUNDANT)
    dataset = pipe.fit_transform(parsed296.records)
    return dataset, pipe


@pytest.fixture(scope="session")
def design_matrix(fused_dataset):
    dataset, _ = fused_dataset
    return to_design_matrix(dataset)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
