"""Bundled demo fixtures: 12 cartridges and a 200-row synthetic extract.

The cartridges cover five disease responses, two cohorts, three
risk-factor groups, and two workflows. The extract is generated by
``python -m riskd.fixtures.build`` from the generator document frozen next
to it, so the files in this package are reproducible artifacts, not
hand-edited data.
"""

from __future__ import annotations

import shutil
from pathlib import Path

from ..cartridges import parse_cartridge

_ROOT = Path(__file__).parent
CARTRIDGE_DIR = _ROOT / "cartridges"
DATA_DIR = _ROOT / "data"

RESPONSE_IDS = ("resp-t2d", "resp-breast-cancer", "resp-heart-disease",
                "resp-thyroid", "resp-hypertension")
COHORT_IDS = ("coh-adults", "coh-women")
RISK_FACTOR_IDS = ("rf-heavy-metals", "rf-urinary-pahs", "rf-lifestyle")
WORKFLOW_IDS = ("wf-ewas", "wf-scm")
CARTRIDGE_IDS = RESPONSE_IDS + COHORT_IDS + RISK_FACTOR_IDS + WORKFLOW_IDS


def cartridge_path(fixture_id: str) -> Path:
    return CARTRIDGE_DIR / f"{fixture_id}.json"


def load(fixture_id: str):
    return parse_cartridge(cartridge_path(fixture_id))


def all_cartridges() -> dict:
    return {fixture_id: load(fixture_id) for fixture_id in CARTRIDGE_IDS}


def extract_paths() -> tuple:
    return DATA_DIR / "extract.csv", DATA_DIR / "extract.dict.json"


def extract_spec_path() -> Path:
    return DATA_DIR / "extract-spec.json"


def export_all(dest: Path) -> list:
    """Copy every fixture file into dest; returns the written paths."""
    dest = Path(dest)
    written = []
    cartridge_dest = dest / "cartridges"
    cartridge_dest.mkdir(parents=True, exist_ok=True)
    for fixture_id in CARTRIDGE_IDS:
        target = cartridge_dest / f"{fixture_id}.json"
        shutil.copyfile(cartridge_path(fixture_id), target)
        written.append(target)
    data_dest = dest / "data"
    data_dest.mkdir(parents=True, exist_ok=True)
    for source in (*extract_paths(), extract_spec_path()):
        target = data_dest / source.name
        shutil.copyfile(source, target)
        written.append(target)
    return written
