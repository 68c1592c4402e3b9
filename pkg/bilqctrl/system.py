"""
Galerkin System Model
---------------------
A truncated pair (A, B) in the eigenbasis of A: the spectrum lambda_1..lambda_N
and the skew-Hermitian coupling matrix b_jk = <phi_j, B phi_k>. Includes the
planar-molecule builder and the JSON system file reader/writer.
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, PositiveInt
from pydantic import ValidationError as PydanticValidationError

from .exceptions import SystemFileError, ValidationError
from .linalg import SKEW_TOL, ComplexMatrix, as_matrix, skew_hermitian_defect

logger = structlog.get_logger(__name__)

MOLECULE_PREFIX = "molecule:"


class GalerkinSystem:
    """Truncated bilinear system of order N, immutable after construction."""

    def __init__(self, spectrum, coupling, label: str = "custom",
                 allow_zero_eigenvalue: bool = False):
        """
        Initialize and validate the system.

        Args:
            spectrum: N reals lambda_1..lambda_N, non-decreasing
            coupling: N x N skew-Hermitian matrix of B in the eigenbasis
            label: Free-form name used in reports
            allow_zero_eigenvalue: Accept lambda_k = 0 (non-negative spectrum)
                instead of the default strictly positive one
        """
        spectrum = np.array(spectrum, dtype=np.float64)
        if spectrum.ndim != 1 or spectrum.size == 0:
            raise ValidationError("spectrum must be a non-empty list of reals")
        if not np.all(np.isfinite(spectrum)):
            raise ValidationError("spectrum has non-finite values")
        if np.any(np.diff(spectrum) < 0):
            raise ValidationError("spectrum must be non-decreasing")
        if allow_zero_eigenvalue:
            if np.any(spectrum < 0):
                raise ValidationError("spectrum must be non-negative")
        elif np.any(spectrum <= 0):
            raise ValidationError(
                "spectrum must be positive; "
                "set allow_zero_eigenvalue to accept zero eigenvalues"
            )

        coupling = as_matrix(coupling, "coupling")
        if coupling.shape[0] != spectrum.size:
            raise ValidationError(
                f"coupling is {coupling.shape[0]}x{coupling.shape[0]} but spectrum has "
                f"{spectrum.size} levels"
            )
        defect = skew_hermitian_defect(coupling)
        if defect > SKEW_TOL:
            raise ValidationError(
                "coupling must be skew-Hermitian: "
                f"|B + B^dagger| = {defect:.3e} > tol {SKEW_TOL:.0e}"
            )

        spectrum.setflags(write=False)
        coupling.setflags(write=False)
        self._spectrum = spectrum
        self._coupling = coupling
        self.label = label
        self.allow_zero_eigenvalue = allow_zero_eigenvalue

    @property
    def n_levels(self) -> int:
        return int(self._spectrum.size)

    @property
    def spectrum(self) -> np.ndarray:
        return self._spectrum

    @property
    def coupling(self) -> ComplexMatrix:
        return self._coupling

    def a_matrix(self) -> ComplexMatrix:
        """A^(N) = diag(-i lambda_1, ..., -i lambda_N)."""
        return np.diag(-1j * self._spectrum)

    def generator(self, u: float) -> ComplexMatrix:
        """A + u B for a constant control value u."""
        return self.a_matrix() + u * self._coupling

    def coupling_column_norm(self, j: int) -> float:
        """||B phi_j||, the norm of column j (1-based) of the coupling."""
        self._check_level(j)
        return float(np.linalg.norm(self._coupling[:, j - 1]))

    def truncate(self, n_levels: int) -> "GalerkinSystem":
        """Leading principal N x N block of the system."""
        if not 1 <= n_levels <= self.n_levels:
            raise ValidationError(f"cannot truncate {self.n_levels} levels to {n_levels}")
        return GalerkinSystem(
            self._spectrum[:n_levels],
            self._coupling[:n_levels, :n_levels],
            label=f"{self.label}[:{n_levels}]",
            allow_zero_eigenvalue=self.allow_zero_eigenvalue,
        )

    def is_truncation_of(self, other: "GalerkinSystem") -> bool:
        """True if this system is exactly the leading block of other."""
        n = self.n_levels
        if n > other.n_levels:
            return False
        return bool(
            np.array_equal(self._spectrum, other.spectrum[:n])
            and np.array_equal(self._coupling, other.coupling[:n, :n])
        )

    def _check_level(self, k: int) -> None:
        if not 1 <= k <= self.n_levels:
            raise ValidationError(f"level {k} outside 1..{self.n_levels}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GalerkinSystem):
            return NotImplemented
        return (
            self.label == other.label
            and self.allow_zero_eigenvalue == other.allow_zero_eigenvalue
            and np.array_equal(self._spectrum, other.spectrum)
            and np.array_equal(self._coupling, other.coupling)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"GalerkinSystem(label={self.label!r}, n_levels={self.n_levels})"


def a_matrix(system: GalerkinSystem) -> ComplexMatrix:
    """diag(-i lambda_1, ..., -i lambda_N)."""
    return system.a_matrix()


def build_molecule(n_levels: int) -> GalerkinSystem:
    """
    Planar rotating molecule restricted to the odd subspace.

    Args:
        n_levels: Truncation order N (>= 2)

    Returns:
        GalerkinSystem: lambda_k = k^2, b_{k,k+1} = b_{k+1,k} = -i/2
    """
    if int(n_levels) != n_levels or n_levels < 2:
        raise ValidationError(f"molecule needs n_levels >= 2, got {n_levels}")
    n_levels = int(n_levels)
    spectrum = np.arange(1, n_levels + 1, dtype=np.float64) ** 2
    coupling = np.zeros((n_levels, n_levels), dtype=np.complex128)
    idx = np.arange(n_levels - 1)
    coupling[idx, idx + 1] = -0.5j
    coupling[idx + 1, idx] = -0.5j
    return GalerkinSystem(spectrum, coupling, label=f"molecule:{n_levels}")


# --- System files ---

class SystemFileModel(BaseModel):
    """Schema of the JSON system file."""
    model_config = ConfigDict(extra="forbid")

    n_levels: PositiveInt
    spectrum: List[float]
    coupling_entries: List[Tuple[int, int, float, float]] = Field(default_factory=list)
    label: str = "custom"
    allow_zero_eigenvalue: bool = False


def _locate(text: str, key: str) -> Optional[int]:
    """Line number (1-based) of the first occurrence of a JSON key."""
    needle = f'"{key}"'
    for lineno, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return lineno
    return None


def _coupling_from_entries(n_levels: int, entries: List[Tuple[int, int, float, float]],
                           path: str, text: str) -> ComplexMatrix:
    coupling = np.zeros((n_levels, n_levels), dtype=np.complex128)
    given = set()
    for j, k, re, im in entries:
        if not (1 <= j <= n_levels and 1 <= k <= n_levels):
            raise SystemFileError(f"coupling entry ({j}, {k}) outside 1..{n_levels}",
                                  path=path, line=_locate(text, "coupling_entries"))
        if (j, k) in given:
            raise SystemFileError(f"duplicate coupling entry ({j}, {k})",
                                  path=path, line=_locate(text, "coupling_entries"))
        given.add((j, k))
        coupling[j - 1, k - 1] = complex(re, im)

    # Complete the missing triangle by skew-Hermitian symmetry
    for j, k in given:
        if j != k and (k, j) not in given:
            coupling[k - 1, j - 1] = -np.conj(coupling[j - 1, k - 1])
    return coupling


def parse_system(text: str, path: str = "<string>") -> GalerkinSystem:
    """
    Parse the JSON text of a system file.

    Raises:
        SystemFileError: Malformed JSON or schema (with line number)
        ValidationError: Well-formed file describing an invalid system
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise SystemFileError(e.msg, path=path, line=e.lineno, column=e.colno) from e

    try:
        model = SystemFileModel.model_validate(raw)
    except PydanticValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        top = str(first["loc"][0]) if first["loc"] else ""
        raise SystemFileError(f"{field}: {first['msg']}", path=path,
                              line=_locate(text, top) if top else None) from e

    if len(model.spectrum) != model.n_levels:
        raise SystemFileError(
            f"spectrum has {len(model.spectrum)} values but n_levels is {model.n_levels}",
            path=path, line=_locate(text, "spectrum"),
        )

    coupling = _coupling_from_entries(model.n_levels, model.coupling_entries, path, text)
    return GalerkinSystem(model.spectrum, coupling, label=model.label,
                          allow_zero_eigenvalue=model.allow_zero_eigenvalue)


def load_system(path: Union[str, Path]) -> GalerkinSystem:
    """Read a system file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    system = parse_system(text, path=str(path))
    logger.debug("system_loaded", path=str(path), n_levels=system.n_levels, label=system.label)
    return system


def system_to_dict(system: GalerkinSystem) -> Dict[str, Any]:
    """File representation: upper triangle (diagonal included) of nonzero entries."""
    entries = []
    n = system.n_levels
    for j in range(n):
        for k in range(j, n):
            b = system.coupling[j, k]
            if b != 0:
                entries.append([j + 1, k + 1, float(b.real), float(b.imag)])
    return {
        "label": system.label,
        "n_levels": n,
        "spectrum": [float(x) for x in system.spectrum],
        "coupling_entries": entries,
        "allow_zero_eigenvalue": system.allow_zero_eigenvalue,
    }


def save_system(system: GalerkinSystem, path: Union[str, Path]) -> Path:
    """Write a system file; floats keep their exact repr so load(save(s)) == s."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = system_to_dict(system)
    # One entry per line keeps parse errors line-addressable
    lines = [
        "{",
        f'  "label": {json.dumps(payload["label"])},',
        f'  "n_levels": {payload["n_levels"]},',
        f'  "allow_zero_eigenvalue": {json.dumps(payload["allow_zero_eigenvalue"])},',
        f'  "spectrum": {json.dumps(payload["spectrum"])},',
        '  "coupling_entries": [',
    ]
    entry_lines = [f"    {json.dumps(e)}" for e in payload["coupling_entries"]]
    if entry_lines:
        lines.append(",\n".join(entry_lines))
    lines.extend(["  ]", "}"])
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def resolve_system(source: str) -> GalerkinSystem:
    """
    Build a system from a CLI source string.

    Args:
        source: 'molecule:N' for the built-in model, otherwise a file path
    """
    if source.startswith(MOLECULE_PREFIX):
        count = source[len(MOLECULE_PREFIX):]
        try:
            n_levels = int(count)
        except ValueError as e:
            raise ValidationError(f"bad molecule size '{count}' in '{source}'") from e
        return build_molecule(n_levels)
    return load_system(source)
