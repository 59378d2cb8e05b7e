"""Low-level span programs over Boolean variables.

A program holds a target vector, free vectors that are always available, and
labeled vectors that become available when their variable takes their value.
The program accepts an input exactly when the target lies in the span of the
available vectors.  Input variables are numbered from 1, matching the JSON
wire format; bit strings are indexed ``x[var - 1]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NoNegativeWitness, NoPositiveWitness
from .linalg import (
    DEFAULT_TOL,
    as_vector,
    min_norm_solve,
    min_quadratic_on_hyperplane,
    nullspace_basis,
    project_complement,
)


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def normalize_bits(x, num_vars: int) -> tuple[int, ...]:
    """Accept '101', b'101', or an int sequence; validate length and values."""
    if isinstance(x, (bytes, bytearray)):
        x = x.decode("ascii")
    if isinstance(x, str):
        bits = tuple(int(ch) for ch in x)
    else:
        bits = tuple(int(v) for v in x)
    if len(bits) != num_vars:
        raise ValueError(f"input has {len(bits)} bits but the program has {num_vars} variables")
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"input bits must be 0/1, got {bits}")
    return bits


@dataclass(frozen=True)
class LabeledVector:
    """Input vector available when variable ``var`` (1-based) equals ``val``."""

    vec: np.ndarray
    var: int
    val: int

    def __post_init__(self):
        object.__setattr__(self, "vec", _frozen(as_vector(self.vec)))


@dataclass(frozen=True)
class AvailableColumns:
    """Available vectors for one input, with per-column provenance.

    ``provenance[k]`` is ("free", i) or ("labeled", i) giving the index of
    column k in the program's free / labeled lists.
    """

    matrix: np.ndarray
    provenance: tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class WitnessReport:
    decision: int
    size: float
    witness: np.ndarray
    columns: AvailableColumns | None = None


@dataclass(frozen=True)
class LowLevelProgram:
    dim: int
    num_vars: int
    target: np.ndarray
    free: tuple[np.ndarray, ...] = ()
    labeled: tuple[LabeledVector, ...] = ()
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "target", _frozen(as_vector(self.target)))
        object.__setattr__(self, "free", tuple(_frozen(as_vector(v)) for v in self.free))
        object.__setattr__(
            self,
            "labeled",
            tuple(v if isinstance(v, LabeledVector) else LabeledVector(*v) for v in self.labeled),
        )
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.num_vars < 0:
            raise ValueError(f"num_vars must be >= 0, got {self.num_vars}")
        if self.target.shape[0] != self.dim:
            raise ValueError(f"target has {self.target.shape[0]} entries, expected dim={self.dim}")
        if not np.linalg.norm(self.target) > 0.0:
            raise ValueError("target vector must be nonzero")
        for i, v in enumerate(self.free):
            if v.shape[0] != self.dim:
                raise ValueError(f"free[{i}] has {v.shape[0]} entries, expected dim={self.dim}")
        for i, lv in enumerate(self.labeled):
            if lv.vec.shape[0] != self.dim:
                raise ValueError(f"labeled[{i}].vec has {lv.vec.shape[0]} entries, expected dim={self.dim}")
            if not 1 <= lv.var <= self.num_vars:
                raise ValueError(f"labeled[{i}].var={lv.var} outside 1..{self.num_vars}")
            if lv.val not in (0, 1):
                raise ValueError(f"labeled[{i}].val={lv.val} must be 0 or 1")

    # -- queries ---------------------------------------------------------

    def available_vectors(self, x) -> AvailableColumns:
        bits = normalize_bits(x, self.num_vars)
        cols: list[np.ndarray] = []
        prov: list[tuple[str, int]] = []
        for i, v in enumerate(self.free):
            cols.append(v)
            prov.append(("free", i))
        for i, lv in enumerate(self.labeled):
            if bits[lv.var - 1] == lv.val:
                cols.append(lv.vec)
                prov.append(("labeled", i))
        matrix = np.column_stack(cols) if cols else np.zeros((self.dim, 0))
        return AvailableColumns(matrix=_frozen(matrix), provenance=tuple(prov))

    def all_vectors(self) -> np.ndarray:
        """All input vectors (free then labeled) as columns; negative sizes
        are squared norms of this matrix transposed times the witness."""
        cols = list(self.free) + [lv.vec for lv in self.labeled]
        return np.column_stack(cols) if cols else np.zeros((self.dim, 0))

    def evaluate(self, x, tol: float | None = None) -> int:
        tol = self.tol if tol is None else tol
        avail = self.available_vectors(x)
        resid = project_complement(avail.matrix, self.target, tol)
        return int(np.linalg.norm(resid) <= tol * np.linalg.norm(self.target))

    def positive_witness(self, x, tol: float | None = None) -> WitnessReport:
        tol = self.tol if tol is None else tol
        if not self.evaluate(x, tol):
            raise NoPositiveWitness(f"program rejects input {x!r}; no positive witness")
        avail = self.available_vectors(x)
        w = min_norm_solve(avail.matrix, self.target, tol)
        return WitnessReport(decision=1, size=float(w @ w), witness=w, columns=avail)

    def negative_witness(self, x, tol: float | None = None) -> WitnessReport:
        tol = self.tol if tol is None else tol
        if self.evaluate(x, tol):
            raise NoNegativeWitness(f"program accepts input {x!r}; no negative witness")
        avail = self.available_vectors(x)
        # Restrict to the orthogonal complement of the available span, then
        # minimize the quadratic over the hyperplane <w', t> = 1.
        nbasis = nullspace_basis(avail.matrix.T, tol)
        c = nbasis.T @ self.target
        b = self.all_vectors().T @ nbasis
        size, y = min_quadratic_on_hyperplane(b, c, tol)
        wprime = nbasis @ y
        return WitnessReport(decision=0, size=float(size), witness=wprime)

    def witness(self, x, tol: float | None = None) -> WitnessReport:
        if self.evaluate(x, tol):
            return self.positive_witness(x, tol)
        return self.negative_witness(x, tol)

    # -- serialization ---------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "dim": self.dim,
            "num_vars": self.num_vars,
            "target": self.target.tolist(),
            "free": [v.tolist() for v in self.free],
            "labeled": [
                {"vec": lv.vec.tolist(), "var": lv.var, "val": lv.val} for lv in self.labeled
            ],
            "tol": self.tol,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    @classmethod
    def from_json_dict(cls, data: dict) -> "LowLevelProgram":
        if not isinstance(data, dict):
            raise ValueError("program JSON must be an object")
        for key in ("dim", "num_vars", "target"):
            if key not in data:
                raise ValueError(f"program JSON is missing field '{key}'")
        labeled = []
        for i, entry in enumerate(data.get("labeled", [])):
            for key in ("vec", "var", "val"):
                if key not in entry:
                    raise ValueError(f"labeled[{i}] is missing field '{key}'")
            labeled.append(LabeledVector(vec=entry["vec"], var=int(entry["var"]), val=int(entry["val"])))
        return cls(
            dim=int(data["dim"]),
            num_vars=int(data["num_vars"]),
            target=data["target"],
            free=tuple(np.asarray(v, dtype=float) for v in data.get("free", [])),
            labeled=tuple(labeled),
            tol=float(data.get("tol", DEFAULT_TOL)),
        )

    @classmethod
    def from_json(cls, text: str) -> "LowLevelProgram":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class DomainWitnessSizes:
    """Worst-case witness sizes over a finite input family."""

    wsize_0: float
    wsize_1: float
    combined: float
    per_input: tuple[tuple[str, int, float], ...] = field(repr=False, default=())


def wsize_over_domain(program: LowLevelProgram, domain, tol: float | None = None) -> DomainWitnessSizes:
    """Max positive / max negative witness sizes and their geometric mean.

    ``domain`` is an iterable of bit strings; an empty side contributes 0.
    """
    w0 = 0.0
    w1 = 0.0
    rows = []
    for x in domain:
        bits = normalize_bits(x, program.num_vars)
        key = "".join(str(b) for b in bits)
        rep = program.witness(bits, tol)
        if rep.decision:
            w1 = max(w1, rep.size)
        else:
            w0 = max(w0, rep.size)
        rows.append((key, rep.decision, rep.size))
    return DomainWitnessSizes(wsize_0=w0, wsize_1=w1, combined=float(np.sqrt(w0 * w1)), per_input=tuple(rows))
