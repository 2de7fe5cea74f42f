"""Core domain types: observation tables, nuisance bundles, partition labels.

All types are immutable after construction and safe to share across
concurrent readers.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

logger = logging.getLogger("strata_bounds")

XPLUS = 1
XZERO = 0
XMINUS = -1

DEFAULT_OVERLAP_FLOOR = 0.01
#: Floor used for oracle / externally supplied probabilities, where the
#: generating process already guarantees strict overlap pointwise.
ORACLE_OVERLAP_FLOOR = 1e-12
#: Tolerance for classifying a row as selection-indifferent when the
#: probabilities are estimated rather than exact.
DEFAULT_EPS0_ESTIMATED = 1e-12


class Stratum(enum.Enum):
    """Latent subgroup defined by the potential selection pair."""

    AT = "at"     # selected under both arms
    C = "c"       # selected under treatment only
    DEF = "def"   # selected under control only
    NT = "nt"     # never selected
    EM = "em"     # extensive margin: C and DEF combined

    @classmethod
    def parse(cls, value) -> "Stratum":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


class Side(enum.Enum):
    L = "l"
    U = "u"

    @classmethod
    def parse(cls, value) -> "Side":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class StratumSpec:
    """Which estimand: stratum, bound side, and the mean-dominance refinement."""

    stratum: Stratum
    side: Side
    dominance: bool = False

    def __post_init__(self):
        object.__setattr__(self, "stratum", Stratum.parse(self.stratum))
        object.__setattr__(self, "side", Side.parse(self.side))


@dataclass(frozen=True)
class ObservationTable:
    """Estimation sample: outcome, selection, treatment, covariates, weights.

    ``y`` is only defined on rows with ``s == 1``; unselected rows carry a
    quiet-NaN sentinel which downstream formulas never read (every outcome
    term is multiplied by ``s``).
    """

    y: np.ndarray
    s: np.ndarray
    d: np.ndarray
    x: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        s = np.asarray(self.s, dtype=np.int8)
        d = np.asarray(self.d, dtype=np.int8)
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if x.shape[0] != y.shape[0] and x.shape[1] == y.shape[0]:
            x = x.T
        w = np.ones_like(y) if self.weight is None else np.asarray(self.weight, dtype=float)
        for name, arr in (("y", y), ("s", s), ("d", d), ("x", x), ("weight", w)):
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)
        if not (len(y) == len(s) == len(d) == len(w) == x.shape[0]):
            raise ValueError("column lengths differ")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def y_filled(self) -> np.ndarray:
        """Outcome with the unselected sentinel replaced by 0.

        Safe because every formula multiplies outcome terms by ``s``; the
        sentinel value itself is provably never read.
        """
        return np.where(self.s == 1, np.where(np.isnan(self.y), 0.0, self.y), 0.0)

    def select(self, idx) -> "ObservationTable":
        return ObservationTable(self.y[idx], self.s[idx], self.d[idx],
                                self.x[idx], self.weight[idx])

    def with_negated_outcome(self) -> "ObservationTable":
        return ObservationTable(-self.y, self.s, self.d, self.x, self.weight)

    def with_swapped_arms(self) -> "ObservationTable":
        return ObservationTable(self.y, self.s, 1 - self.d, self.x, self.weight)

    # -- CSV interface -----------------------------------------------------
    # Header: y,s,d,weight,x1..xp. Missing y is an empty field or "NA".

    @classmethod
    def from_csv(cls, path_or_buffer, weights_col: str = "weight") -> "ObservationTable":
        close = False
        if isinstance(path_or_buffer, (str, bytes)):
            fh = open(path_or_buffer, "r", encoding="utf-8", newline="")
            close = True
        else:
            fh = path_or_buffer
        try:
            reader = csv.reader(fh)
            header = next(reader)
            cols = {name: j for j, name in enumerate(header)}
            for required in ("y", "s", "d"):
                if required not in cols:
                    raise ValueError(f"missing required column {required!r}")
            xcols = sorted((c for c in cols if c.startswith("x") and c[1:].isdigit()),
                           key=lambda c: int(c[1:]))
            rows = list(reader)
        finally:
            if close:
                fh.close()
        n = len(rows)
        y = np.full(n, np.nan)
        s = np.zeros(n, dtype=np.int8)
        d = np.zeros(n, dtype=np.int8)
        w = np.ones(n)
        x = np.zeros((n, len(xcols)))
        for i, row in enumerate(rows):
            raw_y = row[cols["y"]].strip()
            if raw_y not in ("", "NA"):
                y[i] = float(raw_y)
            s[i] = int(row[cols["s"]])
            d[i] = int(row[cols["d"]])
            if weights_col in cols and row[cols[weights_col]].strip() != "":
                w[i] = float(row[cols[weights_col]])
            for j, c in enumerate(xcols):
                x[i, j] = float(row[cols[c]])
        return cls(y, s, d, x, w)

    def to_csv(self, path_or_buffer) -> None:
        close = False
        if isinstance(path_or_buffer, (str, bytes)):
            fh = open(path_or_buffer, "w", encoding="utf-8", newline="")
            close = True
        else:
            fh = path_or_buffer
        try:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["y", "s", "d", "weight"] + [f"x{j + 1}" for j in range(self.p)])
            for i in range(self.n):
                y_str = "" if self.s[i] == 0 or math.isnan(self.y[i]) else repr(float(self.y[i]))
                writer.writerow([y_str, int(self.s[i]), int(self.d[i]),
                                 repr(float(self.weight[i]))]
                                + [repr(float(v)) for v in self.x[i]])
        finally:
            if close:
                fh.close()


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    failures: tuple
    messages: tuple

    def __bool__(self):
        return self.ok


def validate(table: ObservationTable) -> ValidationReport:
    """Check an observation table against the input contract.

    Returns a report object; rule violations are collected rather than
    raised so callers can surface all problems at once.
    """
    failures = []
    msgs = []

    def fail(rule, msg):
        failures.append(rule)
        msgs.append(f"{rule}: {msg}")

    if not np.isin(table.s, (0, 1)).all():
        fail("selection binary", "s contains values outside {0,1}")
    if not np.isin(table.d, (0, 1)).all():
        fail("treatment binary", "d contains values outside {0,1}")
    selected = table.s == 1
    if np.isnan(table.y[selected]).any():
        fail("outcome missing under selection",
             f"{int(np.isnan(table.y[selected]).sum())} selected rows have missing y")
    if np.isinf(table.y[selected]).any():
        fail("outcome finite under selection", "selected rows have non-finite y")
    if (table.weight < 0).any():
        fail("nonnegative weights", "negative weights present")
    if not table.weight.sum() > 0:
        fail("positive total weight", "weights sum to zero")
    if np.isnan(table.x).any():
        fail("finite covariates", "NaN covariates present")
    return ValidationReport(ok=not failures, failures=tuple(failures), messages=tuple(msgs))


@dataclass(frozen=True)
class PartitionLabel:
    """Classification of a covariate point by the sign of s1 - s0."""

    label: int
    p0: float
    eps0: float


def classify_partition(s0: float, s1: float, eps0: float = 0.0) -> PartitionLabel:
    """Classify one point: indifferent when ``|s1 - s0| <= eps0``.

    The label depends only on the sign of ``s1 - s0`` relative to ``eps0``,
    never on magnitudes beyond that.
    """
    if not (0.0 < s0 < 1.0 and 0.0 < s1 < 1.0):
        raise ValueError("selection probabilities must lie strictly in (0, 1)")
    if eps0 < 0:
        raise ValueError("eps0 must be nonnegative")
    diff = s1 - s0
    if abs(diff) <= eps0:
        label = XZERO
    elif diff > 0:
        label = XPLUS
    else:
        label = XMINUS
    return PartitionLabel(label=label, p0=s0 / s1, eps0=eps0)


def partition_labels(s0: np.ndarray, s1: np.ndarray, eps0: float = 0.0) -> np.ndarray:
    """Vectorized partition classification; returns int8 labels in {-1, 0, +1}."""
    diff = np.asarray(s1, dtype=float) - np.asarray(s0, dtype=float)
    labels = np.where(np.abs(diff) <= eps0, XZERO, np.where(diff > 0, XPLUS, XMINUS))
    return labels.astype(np.int8)


@dataclass(frozen=True)
class SmoothingConfig:
    """Smoothing parameter and family selection for the outer bounds."""

    h: float
    family: str = "log_sum_exp"
    derivative_cap_check: bool = True

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.family != "log_sum_exp":
            raise ValueError(f"unknown smoothing family {self.family!r}")


class NuisanceBundle:
    """Per-row nuisance evaluations packaged together.

    Holds the treatment propensity ``m``, the conditional selection
    probabilities ``s0``/``s1`` (clamped once at assembly to the overlap
    floors), plus evaluators for the conditional quantile and truncated-mean
    surfaces. ``quantile(d, u)`` and ``trunc_mean(j, d, u)`` accept a row
    index array and per-row ``u`` values; ``j=1`` means the mean of the
    outcome below its ``u``-quantile, ``j=0`` the mean above it.
    """

    def __init__(self, m, s0, s1, quantile_fn: Callable, trunc_mean_fn: Callable,
                 provenance: str = "oracle", m_floor: Optional[float] = None,
                 s_floor: Optional[float] = None):
        is_oracle = provenance in ("oracle", "external_oracle")
        if m_floor is None:
            m_floor = ORACLE_OVERLAP_FLOOR if is_oracle else DEFAULT_OVERLAP_FLOOR
        if s_floor is None:
            s_floor = ORACLE_OVERLAP_FLOOR if is_oracle else DEFAULT_OVERLAP_FLOOR
        if not (0.0 < m_floor < 0.5 and 0.0 < s_floor < 0.5):
            raise ValueError("overlap floors must lie in (0, 1/2)")
        m = np.asarray(m, dtype=float)
        s0 = np.asarray(s0, dtype=float)
        s1 = np.asarray(s1, dtype=float)
        clamped = int(((m < m_floor) | (m > 1 - m_floor)).sum()
                      + ((s0 < s_floor) | (s0 > 1 - s_floor)).sum()
                      + ((s1 < s_floor) | (s1 > 1 - s_floor)).sum())
        if clamped:
            logger.info("clamped %d nuisance values to the overlap floors", clamped)
        self.m = np.clip(m, m_floor, 1 - m_floor)
        self.s0 = np.clip(s0, s_floor, 1 - s_floor)
        self.s1 = np.clip(s1, s_floor, 1 - s_floor)
        for arr in (self.m, self.s0, self.s1):
            arr.setflags(write=False)
        self._quantile_fn = quantile_fn
        self._trunc_mean_fn = trunc_mean_fn
        self.provenance = provenance
        self.m_floor = m_floor
        self.s_floor = s_floor
        self.n_clamped = clamped

    @property
    def n(self) -> int:
        return self.m.shape[0]

    @property
    def p0(self) -> np.ndarray:
        return self.s0 / self.s1

    def default_eps0(self) -> float:
        if self.provenance in ("oracle", "external_oracle"):
            return 0.0
        return DEFAULT_EPS0_ESTIMATED

    def labels(self, eps0: Optional[float] = None) -> np.ndarray:
        if eps0 is None:
            eps0 = self.default_eps0()
        return partition_labels(self.s0, self.s1, eps0)

    def quantile(self, rows: np.ndarray, d: int, u: np.ndarray) -> np.ndarray:
        """q_d(u_i, x_i) for each row index i, with u clipped to [0, 1]."""
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        return np.asarray(self._quantile_fn(np.asarray(rows), int(d), u), dtype=float)

    def trunc_mean(self, rows: np.ndarray, j: int, d: int, u: np.ndarray) -> np.ndarray:
        """beta_{j,d}(u_i, x_i) for each row index i, with u clipped to [0, 1]."""
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        return np.asarray(self._trunc_mean_fn(np.asarray(rows), int(j), int(d), u), dtype=float)

    def all_rows(self) -> np.ndarray:
        return np.arange(self.n)

    # -- transforms used to derive mirrored strata moments ------------------

    def with_negated_outcome(self) -> "NuisanceBundle":
        """Bundle for the sign-flipped outcome -Y.

        Quantiles satisfy q_{-Y}(u) = -q_Y(1-u) and the two truncated-mean
        surfaces swap roles (exact under a continuous outcome distribution).
        """
        parent = self

        def qfn(rows, d, u):
            return -parent.quantile(rows, d, 1.0 - u)

        def bfn(rows, j, d, u):
            return -parent.trunc_mean(rows, 1 - j, d, 1.0 - u)

        out = NuisanceBundle.__new__(NuisanceBundle)
        out.m, out.s0, out.s1 = parent.m, parent.s0, parent.s1
        out._quantile_fn = lambda rows, d, u: qfn(rows, d, u)
        out._trunc_mean_fn = lambda rows, j, d, u: bfn(rows, j, d, u)
        out.provenance = parent.provenance
        out.m_floor, out.s_floor = parent.m_floor, parent.s_floor
        out.n_clamped = parent.n_clamped
        return out

    def with_swapped_arms(self) -> "NuisanceBundle":
        """Bundle for the relabeled treatment 1-D: swaps m and the two arms."""
        parent = self
        out = NuisanceBundle.__new__(NuisanceBundle)
        out.m = np.asarray(1.0 - parent.m)
        out.m.setflags(write=False)
        out.s0, out.s1 = parent.s1, parent.s0
        out._quantile_fn = lambda rows, d, u: parent.quantile(rows, 1 - d, u)
        out._trunc_mean_fn = lambda rows, j, d, u: parent.trunc_mean(rows, j, 1 - d, u)
        out.provenance = parent.provenance
        out.m_floor, out.s_floor = parent.m_floor, parent.s_floor
        out.n_clamped = parent.n_clamped
        return out

    def select(self, idx: np.ndarray) -> "NuisanceBundle":
        """View of the bundle restricted to a row subset."""
        parent = self
        idx = np.asarray(idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        out = NuisanceBundle.__new__(NuisanceBundle)
        out.m, out.s0, out.s1 = parent.m[idx], parent.s0[idx], parent.s1[idx]
        out._quantile_fn = lambda rows, d, u: parent.quantile(idx[np.asarray(rows)], d, u)
        out._trunc_mean_fn = lambda rows, j, d, u: parent.trunc_mean(idx[np.asarray(rows)], j, d, u)
        out.provenance = parent.provenance
        out.m_floor, out.s_floor = parent.m_floor, parent.s_floor
        out.n_clamped = parent.n_clamped
        return out


@dataclass(frozen=True)
class BoundsEstimate:
    """Point estimates, standard errors, and confidence intervals for a bound pair."""

    lower: float
    upper: float
    se_lower: float
    se_upper: float
    ci_set: tuple
    ci_effect: tuple
    method: str
    n_effective: int
    alpha: float = 0.05
    h: Optional[float] = None
    stratum: str = "at"
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "stratum": self.stratum,
            "estimate_lower": self.lower,
            "estimate_upper": self.upper,
            "se_lower": self.se_lower,
            "se_upper": self.se_upper,
            "ci_set": list(self.ci_set),
            "ci_effect": list(self.ci_effect),
            "h": self.h,
            "alpha": self.alpha,
            "n": self.n_effective,
            "diagnostics": self.diagnostics,
        }
