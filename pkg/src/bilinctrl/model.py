"""System definitions: matrix families, smooth field families, builtins, I/O.

A system is either bilinear (a finite list of square matrices, each acting as
the linear field x -> Mx) or smooth (a finite list of evaluable vector
fields).  Smooth fields must accept arrays of shape (..., n) and return the
same shape; all builtins follow that convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

UNIT_NORM_SLACK = 1e-9

BUILTIN_NAMES = ("so3", "planar_jd", "expanding_pair", "identity_only", "example1")


def _freeze(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MatrixFamily:
    """Finite control set of n x n matrices, optionally labelled."""

    matrices: tuple
    labels: tuple | None = None

    def __post_init__(self):
        mats = tuple(_freeze(m) for m in self.matrices)
        if not mats:
            raise ValueError("matrix family must be nonempty")
        n = mats[0].shape[0] if mats[0].ndim == 2 else -1
        for i, m in enumerate(mats):
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError(f"matrices[{i}] is not square: shape {m.shape}")
            if m.shape[0] != n:
                raise ValueError(f"matrices[{i}] has dimension {m.shape[0]}, expected {n}")
            if not np.all(np.isfinite(m)):
                raise ValueError(f"matrices[{i}] has non-finite entries")
        object.__setattr__(self, "matrices", mats)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != len(mats):
                raise ValueError("labels must match the number of matrices")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.matrices[0].shape[0]

    def __len__(self) -> int:
        return len(self.matrices)


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """A bilinear or smooth control system on R^n minus the origin."""

    n: int
    name: str = ""
    family: MatrixFamily | None = None
    fields: tuple | None = None
    homogeneous: bool = False
    field_labels: tuple | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("state dimension must be >= 1")
        if (self.family is None) == (self.fields is None):
            raise ValueError("exactly one of family or fields must be given")
        if self.family is not None and self.family.n != self.n:
            raise ValueError(f"family dimension {self.family.n} != n = {self.n}")
        if self.fields is not None:
            fields = tuple(self.fields)
            if not fields:
                raise ValueError("smooth system needs at least one field")
            for i, f in enumerate(fields):
                if not callable(f):
                    raise ValueError(f"fields[{i}] is not callable")
            object.__setattr__(self, "fields", fields)

    @property
    def is_bilinear(self) -> bool:
        return self.family is not None

    @property
    def num_fields(self) -> int:
        return len(self.family) if self.is_bilinear else len(self.fields)

    def field_value(self, index: int, x) -> np.ndarray:
        """Evaluate field ``index`` at a point (or array of points)."""
        if not 0 <= index < self.num_fields:
            raise ValueError(f"field index {index} out of range [0, {self.num_fields})")
        x = np.asarray(x, dtype=float)
        if self.is_bilinear:
            return x @ self.family.matrices[index].T
        return np.asarray(self.fields[index](x), dtype=float)


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant control plan: (field index, duration) segments.

    In attainable mode all durations must be nonnegative; orbit mode also
    allows negative durations (time-reversed flows).
    """

    segments: tuple
    attainable_mode: bool = True

    def __post_init__(self):
        segs = []
        for k, seg in enumerate(self.segments):
            idx, dur = seg
            idx = int(idx)
            dur = float(dur)
            if idx < 0:
                raise ValueError(f"segment {k}: negative field index")
            if not np.isfinite(dur):
                raise ValueError(f"segment {k}: non-finite duration")
            if self.attainable_mode and dur < 0:
                raise ValueError(f"segment {k}: negative duration in attainable mode")
            segs.append((idx, dur))
        object.__setattr__(self, "segments", tuple(segs))

    @property
    def total_time(self) -> float:
        return sum(abs(d) for _, d in self.segments)

    @property
    def max_index(self) -> int:
        return max((i for i, _ in self.segments), default=-1)


def bilinear_system(matrices, name: str = "", labels=None) -> SystemSpec:
    """Build a bilinear system from a list of square matrices."""
    family = MatrixFamily(tuple(matrices), None if labels is None else tuple(labels))
    return SystemSpec(n=family.n, name=name, family=family)


def smooth_system(n: int, fields, name: str = "", homogeneous: bool = False,
                  labels=None) -> SystemSpec:
    """Build a smooth system from evaluable vector fields.

    Fields must be vectorized: they take arrays of shape (..., n) and return
    arrays of the same shape, finite on finite nonzero inputs.
    """
    return SystemSpec(n=n, name=name, fields=tuple(fields), homogeneous=homogeneous,
                      field_labels=None if labels is None else tuple(labels))


def project_sphere(m, x) -> np.ndarray:
    """Push the linear field x -> Mx through the radial projection.

    For unit x returns Mx - <x, Mx> x, the component of Mx tangent to the
    unit sphere at x.
    """
    m = np.asarray(m, dtype=float)
    x = np.asarray(x, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != x.shape[0]:
        raise ValueError(f"incompatible shapes: matrix {m.shape}, vector {x.shape}")
    if abs(np.linalg.norm(x) - 1.0) > UNIT_NORM_SLACK:
        raise ValueError("x must be a unit vector")
    v = m @ x
    return v - np.dot(x, v) * x


# --- built-in corpus -------------------------------------------------------

def _rotation_generators_3d():
    lx = [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]
    ly = [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]
    lz = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
    return lx, ly, lz


PLANAR_ROTATION = _freeze([[0.0, -1.0], [1.0, 0.0]])
PLANAR_HYPERBOLIC = _freeze([[1.0, 0.0], [0.0, -1.0]])


def example1_gate(points) -> np.ndarray:
    """Smooth nonnegative factor vanishing exactly on {x = 0, y <= 0}.

    gate(x, y) = x^2 + exp(-1/y) for y > 0, and x^2 otherwise.
    """
    pts = np.asarray(points, dtype=float)
    x = pts[..., 0]
    y = pts[..., 1]
    bump = np.zeros_like(y)
    pos = y > 0
    bump[pos] = np.exp(-1.0 / y[pos])
    return x * x + bump


def _f_unit_up(pts):
    pts = np.asarray(pts, dtype=float)
    out = np.zeros_like(pts)
    out[..., 1] = 1.0
    return out


def _f_gated_down(pts):
    pts = np.asarray(pts, dtype=float)
    out = np.zeros_like(pts)
    out[..., 1] = -example1_gate(pts)
    return out


def _f_gated_right(pts):
    pts = np.asarray(pts, dtype=float)
    out = np.zeros_like(pts)
    out[..., 0] = example1_gate(pts)
    return out


def _f_gated_left(pts):
    pts = np.asarray(pts, dtype=float)
    out = np.zeros_like(pts)
    out[..., 0] = -example1_gate(pts)
    return out


def builtin_corpus(name: str) -> SystemSpec:
    """Return one of the built-in systems by name (see BUILTIN_NAMES)."""
    if name == "so3":
        return bilinear_system(_rotation_generators_3d(), name="so3",
                               labels=("Lx", "Ly", "Lz"))
    if name == "planar_jd":
        return bilinear_system((PLANAR_ROTATION, PLANAR_HYPERBOLIC), name="planar_jd",
                               labels=("rotation", "hyperbolic"))
    if name == "expanding_pair":
        eye = np.eye(2)
        return bilinear_system((eye + PLANAR_ROTATION, eye + PLANAR_HYPERBOLIC),
                               name="expanding_pair",
                               labels=("spiral_out", "shear_out"))
    if name == "identity_only":
        return bilinear_system((np.eye(2),), name="identity_only", labels=("radial",))
    if name == "example1":
        return smooth_system(
            2,
            (_f_unit_up, _f_gated_down, _f_gated_right, _f_gated_left),
            name="example1",
            homogeneous=False,
            labels=("unit_up", "gated_down", "gated_right", "gated_left"),
        )
    raise ValueError(f"unknown builtin system: {name!r} (choose from {BUILTIN_NAMES})")


def random_system(n: int, m: int, seed: int) -> SystemSpec:
    """m random n x n matrices with standard-normal entries, deterministic in seed."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    rng = np.random.default_rng(seed)
    mats = rng.standard_normal((m, n, n))
    return bilinear_system(tuple(mats), name=f"random(n={n},m={m},seed={seed})")


# --- structured spec documents --------------------------------------------

def parse_system(text: str) -> SystemSpec:
    """Parse a JSON system document into a validated SystemSpec.

    Schema: n (integer), kind ("bilinear" default, or "builtin"), matrices
    (array of n x n row-major real arrays), labels (optional strings),
    builtin_name (required when kind is "builtin"), name (optional).
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid system document: {exc}") from None
    if not isinstance(doc, dict):
        raise ValueError("system document must be a JSON object")
    kind = doc.get("kind", "bilinear")
    if kind == "builtin":
        name = doc.get("builtin_name")
        if not isinstance(name, str):
            raise ValueError("builtin document needs a builtin_name string")
        return builtin_corpus(name)
    if kind != "bilinear":
        raise ValueError(f"unknown kind: {kind!r}")

    n = doc.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ValueError("field n must be a positive integer")
    raw = doc.get("matrices")
    if not isinstance(raw, list) or not raw:
        raise ValueError("field matrices must be a nonempty array")
    mats = []
    for k, rows in enumerate(raw):
        if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
            raise ValueError(f"matrices[{k}] must be an array of rows")
        ncols = {len(r) for r in rows}
        if len(ncols) != 1:
            raise ValueError(f"matrices[{k}] has ragged rows")
        if len(rows) != ncols.pop():
            raise ValueError(f"matrices[{k}] is not square")
        arr = np.array(rows, dtype=float)
        if arr.shape[0] != n:
            raise ValueError(f"matrices[{k}] has dimension {arr.shape[0]}, expected n = {n}")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"matrices[{k}] has non-finite entries")
        mats.append(arr)
    labels = doc.get("labels")
    if labels is not None:
        if not isinstance(labels, list) or len(labels) != len(mats):
            raise ValueError("labels must be an array matching the number of matrices")
    return bilinear_system(mats, name=str(doc.get("name", "")), labels=labels)


def serialize_system(spec: SystemSpec) -> str:
    """Serialize a spec to its JSON document; inverse of parse_system."""
    if not spec.is_bilinear:
        if spec.name in BUILTIN_NAMES:
            doc = {"kind": "builtin", "builtin_name": spec.name}
            return json.dumps(doc, sort_keys=True, indent=2)
        raise ValueError("smooth systems are only serializable as builtins")
    doc = {
        "kind": "bilinear",
        "n": spec.n,
        "name": spec.name,
        "matrices": [m.tolist() for m in spec.family.matrices],
    }
    if spec.family.labels is not None:
        doc["labels"] = list(spec.family.labels)
    return json.dumps(doc, sort_keys=True, indent=2)
