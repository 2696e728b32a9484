"""Latency models for the two investor-to-exchange paths.

Times are milliseconds (floats).  Distribution objects are immutable and
can be shared between threads; random generators never are.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from scipy import special

from .errors import InvalidStats, ParseError

PHYSICAL = "physical"
ALLOW_NEGATIVE = "allow_negative"
SAMPLING_MODES = (PHYSICAL, ALLOW_NEGATIVE)

# resampling negative gaussian draws; each pass keeps ~Phi(mu/sigma) of them
_MAX_RESAMPLE_PASSES = 10_000


def norm_cdf(x):
    """Standard normal CDF (erf based, accurate in both tails)."""
    return special.ndtr(x)


def norm_sf(x):
    return special.ndtr(-np.asarray(x, dtype=float))


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


def norm_logcdf(x):
    return special.log_ndtr(x)


@dataclass(frozen=True)
class GaussianLatency:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise InvalidStats(f"sigma must be positive, got {self.sigma!r}")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise InvalidStats(f"mu must be positive, got {self.mu!r}")

    kind = "gaussian"

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def std(self) -> float:
        return self.sigma

    def cdf(self, t):
        return norm_cdf((np.asarray(t, dtype=float) - self.mu) / self.sigma)

    def sf(self, t):
        return norm_sf((np.asarray(t, dtype=float) - self.mu) / self.sigma)

    def cdf_strict(self, t):
        return self.cdf(t)

    def pdf(self, t):
        return norm_pdf((np.asarray(t, dtype=float) - self.mu) / self.sigma) / self.sigma

    def max_support(self) -> float:
        return math.inf

    def sample(self, rng: np.random.Generator, size=None, mode: str = PHYSICAL):
        """Draw latencies; in physical mode negative draws are redrawn."""
        if mode not in SAMPLING_MODES:
            raise ValueError(f"unknown sampling mode {mode!r}")
        scalar = size is None
        n = 1 if scalar else int(size)
        out = self.mu + self.sigma * rng.standard_normal(n)
        if mode == PHYSICAL:
            for _ in range(_MAX_RESAMPLE_PASSES):
                bad = np.flatnonzero(out <= 0)
                if bad.size == 0:
                    break
                out[bad] = self.mu + self.sigma * rng.standard_normal(bad.size)
            else:
                raise RuntimeError("could not draw positive latencies")
        return float(out[0]) if scalar else out


@dataclass(frozen=True)
class EmpiricalLatency:
    samples: np.ndarray = field(repr=False)
    source: str | None = None

    def __post_init__(self):
        arr = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if arr.size == 0:
            raise InvalidStats("empirical latency needs at least one sample")
        if not np.all(np.isfinite(arr)) or arr[0] < 0:
            raise InvalidStats("empirical latency samples must be finite and nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    kind = "empirical"

    def __eq__(self, other):
        return (isinstance(other, EmpiricalLatency)
                and np.array_equal(self.samples, other.samples))

    def __hash__(self):
        return hash(self.samples.tobytes())

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @property
    def std(self) -> float:
        return float(self.samples.std())

    def cdf(self, t):
        """Fraction of samples <= t."""
        return np.searchsorted(self.samples, t, side="right") / self.samples.size

    def cdf_strict(self, t):
        """Fraction of samples < t."""
        return np.searchsorted(self.samples, t, side="left") / self.samples.size

    def sf(self, t):
        return 1.0 - self.cdf(t)

    def max_support(self) -> float:
        return float(self.samples[-1])

    def sample(self, rng: np.random.Generator, size=None, mode: str = PHYSICAL):
        if mode not in SAMPLING_MODES:
            raise ValueError(f"unknown sampling mode {mode!r}")
        idx = rng.integers(0, self.samples.size, size=size)
        return float(self.samples[idx]) if size is None else self.samples[idx]


LatencyModel = Union[GaussianLatency, EmpiricalLatency]


@dataclass(frozen=True)
class LatencyPair:
    """Investor-to-S and investor-to-L latencies plus the HFT's link latency.

    The two legs are treated as independent.
    """

    dist_s: LatencyModel
    dist_l: LatencyModel
    h: float

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise InvalidStats(f"HFT latency h must be positive, got {self.h!r}")

    @property
    def gaussian(self) -> bool:
        return isinstance(self.dist_s, GaussianLatency) and isinstance(self.dist_l, GaussianLatency)

    @property
    def compact(self) -> bool:
        return math.isfinite(self.dist_s.max_support()) and math.isfinite(self.dist_l.max_support())


def sample(dist: LatencyModel, rng: np.random.Generator, size=None, mode: str = PHYSICAL):
    return dist.sample(rng, size=size, mode=mode)


def cdf(dist: LatencyModel, t):
    return dist.cdf(t)


def max_support(dist: LatencyModel) -> float:
    return dist.max_support()


def load_samples(path) -> np.ndarray:
    """Read a one-column CSV of latencies; '#' lines and a text header are skipped."""
    path = Path(path)
    values = []
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read sample file: {exc}", path=path) from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cell = line.split(",")[0].strip()
        try:
            values.append(float(cell))
        except ValueError:
            if not values and lineno == _first_data_line(text):
                continue  # header
            raise ParseError(f"not a number: {cell!r}", path=path, line=lineno) from None
    if not values:
        raise ParseError("no samples found", path=path)
    return np.asarray(values)


def _first_data_line(text: str) -> int:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            return lineno
    return 0


CATALOG_HEADER = ["name", "kind", "p1", "p2"]


def load_latency_csv(path) -> dict[str, LatencyModel]:
    """Load a latency catalog: ``name,kind,p1,p2`` per row.

    gaussian rows give mu and sigma in ms; empirical rows give the path of a
    sample file (relative to the catalog) in p1 and leave p2 empty.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read catalog: {exc}", path=path) from exc

    catalog: dict[str, LatencyModel] = {}
    rows = csv.reader(text.splitlines())
    saw_header = False
    for lineno, row in enumerate(rows, start=1):
        cells = [c.strip() for c in row]
        if not cells or not any(cells) or cells[0].startswith("#"):
            continue
        if not saw_header and [c.lower() for c in cells] == CATALOG_HEADER:
            saw_header = True
            continue
        saw_header = True
        if len(cells) not in (3, 4):
            raise ParseError(f"expected 4 columns, got {len(cells)}", path=path, line=lineno)
        name, kind, p1 = cells[0], cells[1].lower(), cells[2]
        p2 = cells[3] if len(cells) == 4 else ""
        if not name:
            raise ParseError("empty name", path=path, line=lineno)
        if name in catalog:
            raise ParseError(f"duplicate name {name!r}", path=path, line=lineno)
        if kind == "gaussian":
            try:
                mu, sigma = float(p1), float(p2)
            except ValueError:
                raise ParseError(f"gaussian row needs numeric mu,sigma: {p1!r},{p2!r}",
                                 path=path, line=lineno) from None
            try:
                catalog[name] = GaussianLatency(mu, sigma)
            except InvalidStats as exc:
                raise InvalidStats(f"{path}:{lineno}: {exc}") from None
        elif kind == "empirical":
            if not p1:
                raise ParseError("empirical row needs a sample file in p1", path=path, line=lineno)
            sample_path = Path(p1)
            if not sample_path.is_absolute():
                sample_path = path.parent / sample_path
            try:
                catalog[name] = EmpiricalLatency(load_samples(sample_path), source=p1)
            except InvalidStats as exc:
                raise InvalidStats(f"{path}:{lineno}: {exc}") from None
        else:
            raise ParseError(f"unknown kind {kind!r}", path=path, line=lineno)
    return catalog
