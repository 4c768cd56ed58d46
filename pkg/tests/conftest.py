import csv
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


@pytest.fixture
def fixtures_dir():
    return FIXTURES
