"""One-dimensional parameter search for the enhancement filters.

Each enhanceable aspect pairs a single-parameter filter with its scorer, so
optimizing it reduces to scoring the filtered image at every grid value and
committing the argmax.  Grids are small, ordered and always include the
neutral parameter, which keeps "no change" reachable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .filters import FilterId, apply_filter, parameter_domain
from .raster import RasterImage

# Which aspect may drive which filter; the overall scorer may drive any.
_ASPECT_FILTERS = {"saturation": FilterId.SATURATION, "hdr": FilterId.HDR}


@dataclass(frozen=True)
class SearchGrid:
    filter: FilterId
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if not values:
            raise ValueError("search grid must be nonempty")
        if any(values[i] >= values[i + 1] for i in range(len(values) - 1)):
            raise ValueError("grid values must be strictly ascending")
        domain = parameter_domain(self.filter)
        if domain.dim != 1:
            raise ValueError(f"{self.filter.value} is not a 1-d filter")
        lo, hi = domain.bounds[0]
        if values[0] < lo or values[-1] > hi:
            raise ValueError(f"grid values fall outside the {self.filter.value} domain")


def saturation_search_grid() -> SearchGrid:
    """40% to 90% of the saturation range in 10% steps."""
    return SearchGrid(FilterId.SATURATION, tuple(round(0.4 + 0.1 * i, 10) for i in range(6)))


def hdr_search_grid() -> SearchGrid:
    """0% to 70% of maximum strength in 10% steps."""
    return SearchGrid(FilterId.HDR, tuple(round(0.1 * i, 10) for i in range(8)))


@dataclass(frozen=True)
class OneDSearchResult:
    best_value: float
    best_image: RasterImage
    best_score: float
    trace: tuple[tuple[float, float], ...]  # (parameter, score) at every grid point


def _check_pairing(grid: SearchGrid, scorer) -> None:
    aspect = getattr(scorer, "aspect", None)
    if aspect is None or aspect == "overall":
        return
    if _ASPECT_FILTERS.get(aspect) is not grid.filter:
        raise ValueError(
            f"a {aspect!r} scorer cannot drive the {grid.filter.value} filter"
        )


def optimize_filter_1d(img: RasterImage, grid: SearchGrid, scorer) -> OneDSearchResult:
    """Score the filter at every grid value and commit the argmax.

    Ties resolve to the lowest parameter value.  The returned score is
    exactly the scorer's value on the returned image.
    """
    _check_pairing(grid, scorer)
    best = None
    trace = []
    for value in grid.values:
        candidate = apply_filter(img, grid.filter, (value,))
        score = scorer.score(candidate)
        trace.append((value, score))
        if best is None or score > best[2]:
            best = (value, candidate, score)
    return OneDSearchResult(best[0], best[1], best[2], tuple(trace))


def sweep_filter(img: RasterImage, filter_id: FilterId, n_points: int, scorers: dict) -> list[dict]:
    """Dense parameter sweep scored by every given scorer, for diagnostics."""
    if n_points < 2:
        raise ValueError("a sweep needs at least two points")
    domain = parameter_domain(filter_id)
    if domain.dim != 1:
        raise ValueError(f"{filter_id.value} is not a 1-d filter")
    lo, hi = domain.bounds[0]
    rows = []
    for value in np.linspace(lo, hi, n_points):
        candidate = apply_filter(img, filter_id, (float(value),))
        row = {"param": float(value)}
        for name, scorer in scorers.items():
            row[name] = scorer.score(candidate)
        rows.append(row)
    return rows


def sweep_at_values(img: RasterImage, filter_id: FilterId, values, scorers: dict) -> list[dict]:
    """Like sweep_filter but at explicit parameter values (e.g. a search grid)."""
    rows = []
    for value in values:
        candidate = apply_filter(img, filter_id, (float(value),))
        row = {"param": float(value)}
        for name, scorer in scorers.items():
            row[name] = scorer.score(candidate)
        rows.append(row)
    return rows


def write_sweep_csv(rows, path) -> None:
    """`param,score_<name>,...` rows for plotting score curves."""
    if not rows:
        raise ValueError("no sweep rows to write")
    names = [k for k in rows[0] if k != "param"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param"] + [f"score_{n}" for n in names])
        for row in rows:
            writer.writerow([repr(row["param"])] + [repr(row[n]) for n in names])
