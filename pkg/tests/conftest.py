import numpy as np
import pytest

from grouplinear.dataio import BattingRecord

# criterion number -> (passed or None for skipped, detail); filled by test_acceptance
ACCEPTANCE_LOG: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LOG):
        passed, detail = ACCEPTANCE_LOG[key]
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        terminalreporter.write_line(f"criterion {key}: {status}  {detail}")


def synthetic_batting(n_players=300, seed=7, pitcher_share=0.2):
    """Binomial half-season counts around player-specific true rates."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_players):
        pitcher = bool(rng.random() < pitcher_share)
        p = rng.beta(6, 40) if pitcher else rng.beta(40, 110)
        n1 = int(rng.integers(5, 320))
        n2 = int(rng.integers(0, 320))
        records.append(BattingRecord(f"p{i:04d}", int(rng.binomial(n1, p)), n1,
                                     int(rng.binomial(n2, p)), n2, pitcher))
    return records


@pytest.fixture
def batting_records():
    return synthetic_batting()


@pytest.fixture
def batting_csv(tmp_path, batting_records):
    from grouplinear.dataio import write_batting_csv

    path = tmp_path / "batting.csv"
    with open(path, "w", newline="") as fh:
        write_batting_csv(batting_records, fh)
    return path
