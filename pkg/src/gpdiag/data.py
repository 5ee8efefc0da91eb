"""Dataset representation, CSV ingestion/export, and standardization.

A Dataset holds observation locations (1-D or 2-D), the outcome vector,
and named covariate columns.  Datasets whose locations form a regular
rectangular lattice (up to an affine rescale per axis) are tagged with
grid metadata; the spectral machinery only accepts grid-tagged data.
Datasets are immutable after construction and safe to share across
concurrent fits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import (
    DegenerateColumnError,
    DimensionError,
    ParseError,
    RankError,
    SchemaError,
    ValidationError,
)

GRID_ATOL = 1e-9  # lattice membership tolerance after rescaling
RANK_TOL = 1e-8   # singular-value tolerance for design-matrix rank


@dataclass(frozen=True)
class GridInfo:
    """Lattice tag: dims, the row permutation into lattice order, and the
    per-axis affine rescale (offset, spacing) from lattice units back to
    the original coordinates."""

    dims: tuple[int, ...]              # (M,) or (M1, M2)
    lattice_perm: np.ndarray           # locations[lattice_perm] is lattice-ordered
    offsets: tuple[float, ...]
    spacings: tuple[float, ...]

    @property
    def n_points(self) -> int:
        return int(np.prod(self.dims))


@dataclass(frozen=True)
class Dataset:
    locations: np.ndarray              # (M, dim) float
    y: np.ndarray                      # (M,) float
    covariates: dict[str, np.ndarray] = field(default_factory=dict)
    grid: GridInfo | None = None
    loc_names: tuple[str, ...] = ("s1",)
    outcome_name: str = "y"

    def __post_init__(self):
        loc = np.array(self.locations, dtype=float, copy=True)
        if loc.ndim == 1:
            loc = loc[:, None]
        if loc.ndim != 2 or loc.shape[1] not in (1, 2):
            raise DimensionError("locations must be an (M, 1) or (M, 2) array")
        y = np.array(self.y, dtype=float, copy=True).ravel()
        if len(y) != loc.shape[0]:
            raise DimensionError(
                f"outcome length {len(y)} != number of locations {loc.shape[0]}"
            )
        if not np.all(np.isfinite(loc)):
            raise ValidationError("non-finite location coordinate")
        if not np.all(np.isfinite(y)):
            raise ValidationError("non-finite outcome value")
        covs = {}
        for name, col in self.covariates.items():
            col = np.array(col, dtype=float, copy=True).ravel()
            if len(col) != len(y):
                raise DimensionError(f"covariate {name!r} length {len(col)} != {len(y)}")
            if not np.all(np.isfinite(col)):
                raise ValidationError(f"non-finite value in covariate {name!r}")
            covs[name] = col
            covs[name].flags.writeable = False
        # reject duplicate locations: the model assumes distinct sites and
        # IDW gridding is the sanctioned aggregation path
        if loc.shape[0] > 1:
            key = np.ascontiguousarray(loc).view([("", loc.dtype)] * loc.shape[1])
            if len(np.unique(key)) != loc.shape[0]:
                raise ValidationError("duplicate locations")
        loc.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "covariates", covs)
        if len(self.loc_names) != loc.shape[1]:
            object.__setattr__(
                self, "loc_names", tuple(f"s{d + 1}" for d in range(loc.shape[1]))
            )
        grid = self.grid if self.grid is not None else detect_grid(loc)
        object.__setattr__(self, "grid", grid)

    @property
    def n(self) -> int:
        return self.locations.shape[0]

    @property
    def dim(self) -> int:
        return self.locations.shape[1]

    @property
    def is_grid(self) -> bool:
        return self.grid is not None

    @cached_property
    def pairwise_distances(self) -> np.ndarray:
        return squareform(pdist(self.locations))

    @cached_property
    def extent(self) -> float:
        """Largest pairwise distance (used for range-parameter bounds)."""
        if self.n < 2:
            return 1.0
        return float(pdist(self.locations).max())

    def to_lattice_order(self) -> "Dataset":
        """Reorder rows into canonical lattice order (second coordinate
        varying fastest).  Identity for non-grid data."""
        if self.grid is None:
            return self
        p = self.grid.lattice_perm
        if np.array_equal(p, np.arange(self.n)):
            return self
        grid = replace(self.grid, lattice_perm=np.arange(self.n))
        return Dataset(
            locations=self.locations[p],
            y=self.y[p],
            covariates={k: v[p] for k, v in self.covariates.items()},
            grid=grid,
            loc_names=self.loc_names,
            outcome_name=self.outcome_name,
        )

    def lattice_coordinates(self) -> np.ndarray:
        """Locations relabeled to the integer lattice {1..M1}x{1..M2}."""
        if self.grid is None:
            raise ValidationError("dataset is not grid-tagged")
        off = np.asarray(self.grid.offsets)
        sp = np.asarray(self.grid.spacings)
        return np.rint((self.locations - off) / sp) + 1.0

    def with_covariate(self, name: str, col: np.ndarray) -> "Dataset":
        covs = dict(self.covariates)
        covs[name] = np.asarray(col, dtype=float)
        return Dataset(self.locations, self.y, covs, self.grid,
                       self.loc_names, self.outcome_name)


def detect_grid(locations: np.ndarray) -> GridInfo | None:
    """Tag locations forming a full regular lattice, in any row order.

    Each axis must carry equally spaced distinct values and every
    combination must appear exactly once; comparison tolerance is
    GRID_ATOL in rescaled (lattice) units.
    """
    loc = np.atleast_2d(locations)
    m, dim = loc.shape
    if m < 2:
        return None
    axes = []
    for d in range(dim):
        vals = np.unique(loc[:, d])
        n_d = len(vals)
        if n_d < 2:
            return None
        lo, hi = vals[0], vals[-1]
        spacing = (hi - lo) / (n_d - 1)
        if spacing <= 0:
            return None
        idx = (vals - lo) / spacing
        if np.max(np.abs(idx - np.arange(n_d))) > GRID_ATOL * max(1.0, n_d):
            return None
        axes.append((n_d, lo, spacing))
    dims = tuple(a[0] for a in axes)
    if int(np.prod(dims)) != m:
        return None
    # map every row to its lattice index and demand a full permutation
    codes = np.zeros(m, dtype=np.int64)
    for d, (n_d, lo, spacing) in enumerate(axes):
        idx = (loc[:, d] - lo) / spacing
        ridx = np.rint(idx)
        if np.max(np.abs(idx - ridx)) > GRID_ATOL * max(1.0, n_d):
            return None
        if np.any(ridx < 0) or np.any(ridx >= n_d):
            return None
        codes = codes * n_d + ridx.astype(np.int64)
    order = np.argsort(codes, kind="stable")
    if not np.array_equal(codes[order], np.arange(m)):
        return None
    return GridInfo(
        dims=dims,
        lattice_perm=order,
        offsets=tuple(a[1] for a in axes),
        spacings=tuple(a[2] for a in axes),
    )


@dataclass(frozen=True)
class DesignMatrix:
    """Fixed-effect design with a leading intercept column of ones."""

    names: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.matrix, dtype=float)
        if x.ndim != 2:
            raise DimensionError("design matrix must be 2-D")
        if len(self.names) != x.shape[1]:
            raise DimensionError("design names/columns mismatch")
        if not np.allclose(x[:, 0], 1.0):
            raise ValidationError("first design column must be the intercept (all ones)")
        sv = np.linalg.svd(x, compute_uv=False)
        if sv.size == 0 or sv[-1] <= RANK_TOL * sv[0]:
            raise RankError("design matrix columns are linearly dependent")
        x.flags.writeable = False
        object.__setattr__(self, "matrix", x)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def rank(self) -> int:
        return self.matrix.shape[1]

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def design_matrix(dataset: Dataset, covariate_names=(), standardize_covariates=True) -> DesignMatrix:
    """Intercept plus the named covariates, standardized by default so AVP
    slopes and GLS coefficients are comparable across covariates."""
    cols = [np.ones(dataset.n)]
    names = ["intercept"]
    for name in covariate_names:
        if name not in dataset.covariates:
            raise SchemaError(f"unknown covariate {name!r}")
        col = dataset.covariates[name]
        if standardize_covariates:
            col, _, _ = standardize(col)
        cols.append(col)
        names.append(name)
    return DesignMatrix(tuple(names), np.column_stack(cols))


def standardize(column: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Center to mean 0 and scale to sample sd 1 (denominator n-1).

    Returns (standardized, mean, sd); raises on a constant column.
    """
    col = np.asarray(column, dtype=float).ravel()
    if len(col) < 2:
        raise DegenerateColumnError("need at least two values to standardize")
    mean = float(np.mean(col))
    sd = float(np.std(col, ddof=1))
    if sd == 0.0 or not np.isfinite(sd):
        raise DegenerateColumnError("constant column cannot be standardized")
    return (col - mean) / sd, mean, sd


def destandardize(column: np.ndarray, mean: float, sd: float) -> np.ndarray:
    return np.asarray(column, dtype=float) * sd + mean


def ingest_csv(path, schema: dict) -> Dataset:
    """Read a UTF-8, comma-separated, header-rowed CSV into a Dataset.

    schema maps roles to column names: {"loc": [name] or [n1, n2],
    "outcome": name, "covariates": [names...]}.  Unlisted columns are
    ignored.  Regular grids are detected and tagged automatically.
    """
    loc_names = schema.get("loc")
    if isinstance(loc_names, str):
        loc_names = [loc_names]
    outcome = schema.get("outcome")
    cov_names = list(schema.get("covariates", []))
    if not loc_names or len(loc_names) not in (1, 2) or not outcome:
        raise SchemaError("schema must name one or two location columns and one outcome column")

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", row=0) from None
        header = [h.strip() for h in header]
        missing = [c for c in [*loc_names, outcome, *cov_names] if c not in header]
        if missing:
            raise SchemaError(f"columns not found in header: {missing}")
        col_idx = {c: header.index(c) for c in header}

        wanted = [*loc_names, outcome, *cov_names]
        rows = []
        for i, raw in enumerate(reader, start=1):
            if not raw or all(not c.strip() for c in raw):
                continue
            vals = []
            for c in wanted:
                cell = raw[col_idx[c]].strip()
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"non-numeric value {cell!r} in column {c!r} at data row {i}",
                        row=i,
                    ) from None
            rows.append(vals)

    if not rows:
        raise ParseError("no data rows", row=0)
    arr = np.asarray(rows, dtype=float)
    n_loc = len(loc_names)
    return Dataset(
        locations=arr[:, :n_loc],
        y=arr[:, n_loc],
        covariates={c: arr[:, n_loc + 1 + k] for k, c in enumerate(cov_names)},
        loc_names=tuple(loc_names),
        outcome_name=outcome,
    )


def export_csv(dataset: Dataset, path) -> None:
    """Write a Dataset back to CSV; mirror of ingest_csv (floats use
    shortest round-trip formatting, so ingest(export(d)) == d exactly)."""
    header = [*dataset.loc_names, dataset.outcome_name, *dataset.covariates.keys()]
    cols = [dataset.locations[:, d] for d in range(dataset.dim)]
    cols.append(dataset.y)
    cols.extend(dataset.covariates.values())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.n):
            writer.writerow([repr(float(c[i])) for c in cols])
