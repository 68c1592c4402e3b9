"""
Run Journal
-----------
Writes the outputs of one run into its output directory: versioned CSV
tables, JSON summaries and the manifest (config, versions, seed, outputs).
Everything is written deterministically so identical configs give
identical files.
"""
import json
import math
import platform
from pathlib import Path
from typing import Any, Dict, List, Union

import networkx
import numpy
import pandas as pd
import pydantic
import scipy
import structlog

from . import __version__
from .config import RunConfig

logger = structlog.get_logger(__name__)

SIGNIFICANT_DIGITS = 12
FLOAT_FORMAT = "%.12g"
CSV_VERSION = 1
MANIFEST_NAME = "manifest.json"


def round_floats(obj: Any) -> Any:
    """Round every float to 12 significant digits; non-finite floats become None."""
    if isinstance(obj, (float, numpy.floating)):
        value = float(obj)
        if not math.isfinite(value):
            return None
        return float(f"{value:.{SIGNIFICANT_DIGITS}g}")
    if isinstance(obj, (bool, numpy.bool_)):
        return bool(obj)
    if isinstance(obj, (int, numpy.integer)):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": round_floats(obj.real), "im": round_floats(obj.imag)}
    if isinstance(obj, dict):
        return {str(k): round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    if isinstance(obj, numpy.ndarray):
        return round_floats(obj.tolist())
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(round_floats(obj), indent=2, sort_keys=True) + "\n"


def library_versions() -> Dict[str, str]:
    return {
        "bilqctrl": __version__,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "networkx": networkx.__version__,
        "pydantic": pydantic.VERSION,
    }


def read_table(path: Union[str, Path]) -> pd.DataFrame:
    """Read a CSV written by RunJournal.write_csv (skips the version line)."""
    return pd.read_csv(path, skiprows=1)


class RunJournal:
    """Collects the files of one run and writes its manifest."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.output_dir = Path(config.output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.outputs: List[str] = []

    def _record(self, name: str) -> Path:
        if name not in self.outputs:
            self.outputs.append(name)
        return self.output_dir / name

    def write_csv(self, frame: pd.DataFrame, name: str, kind: str) -> Path:
        """CSV with a '# bilqctrl <kind> v1' first line and %.12g floats."""
        path = self._record(name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(f"# bilqctrl {kind} v{CSV_VERSION}\n")
            frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        logger.info("table_written", path=str(path), rows=len(frame))
        return path

    def write_json(self, payload: Any, name: str) -> Path:
        path = self._record(name)
        path.write_text(dumps(payload), encoding="utf-8")
        logger.info("json_written", path=str(path))
        return path

    def mark(self, name: str) -> Path:
        """Register a file written by another writer (e.g. save_system)."""
        return self._record(name)

    def manifest(self) -> Dict[str, Any]:
        return {
            "config": self.config.model_dump(mode="json"),
            "canonical": self.config.to_canonical(),
            "seed": self.config.seed,
            "versions": library_versions(),
            "outputs": sorted(self.outputs),
        }

    def write_manifest(self) -> Path:
        path = self.output_dir / MANIFEST_NAME
        path.write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        logger.info("manifest_written", path=str(path), outputs=len(self.outputs))
        return path
