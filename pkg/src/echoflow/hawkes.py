"""Discrete-time multivariate Hawkes processes.

Time runs in one-minute bins.  With ``s[t, k]`` events on process ``k`` in
bin ``t``, the rate of process ``k`` is::

    rate[t, k] = background[k] + sum_j sum_{d=1..dt_max} s[t - d, j] * W[j, k] * G[j, k, d]

``W[j, k]`` is the expected number of events on ``k`` triggered by one event
on ``j`` (row = source, column = target) and ``G[j, k]`` is the lag pmf on
``1..dt_max``.  Counts are Poisson given the rate.  Fitting is EM over the
latent parent of each event (background or an earlier event).
"""

from __future__ import annotations

import csv
import logging
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.signal import fftconvolve
from scipy.special import gammaln

log = logging.getLogger(__name__)

MINUTE = 60.0
DEFAULT_WINDOWS = (720, 1440, 2880)


class UnstableModelError(ValueError):
    pass


@dataclass
class EventSeries:
    counts: np.ndarray  # (T, K) non-negative integers
    t0: int = 0  # UTC minute of the first bin
    platform_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] < 1:
            raise ValueError("counts must be a (T >= 1, K) matrix")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")
        if not self.platform_names:
            self.platform_names = tuple(f"p{k}" for k in range(self.K))

    @property
    def T(self) -> int:
        return self.counts.shape[0]

    @property
    def K(self) -> int:
        return self.counts.shape[1]


def build_event_series(
    events: Iterable[tuple[float, int | str]],
    platforms: Sequence[str] | None = None,
    unit: str = "minute",
) -> EventSeries:
    """Bin ``(time, platform)`` events into per-minute counts.

    ``unit="minute"`` means the times are already UTC minutes, ``"second"``
    that they are epoch seconds.  Platforms may be given by index or by name;
    names are looked up in ``platforms``.  Bin 0 is the minute of the earliest
    event and the last bin holds the latest event.
    """
    events = list(events)
    if not events:
        raise ValueError("no events")
    scale = {"minute": 1.0, "second": MINUTE}[unit]
    names = list(platforms) if platforms is not None else None
    minutes, procs = [], []
    for t, p in events:
        minutes.append(int(np.floor(t / scale)))
        if isinstance(p, str):
            if names is None:
                raise ValueError("platform names need an explicit platforms list")
            procs.append(names.index(p))
        else:
            procs.append(int(p))
    K = len(names) if names is not None else max(procs) + 1
    first = min(minutes)
    T = max(minutes) - first + 1
    counts = np.zeros((T, K), dtype=np.int64)
    np.add.at(counts, (np.asarray(minutes) - first, np.asarray(procs)), 1)
    return EventSeries(counts, t0=first, platform_names=tuple(names) if names else ())


# --- lag pmfs ---------------------------------------------------------------

def geometric_pmf(p: float, dt_max: int) -> np.ndarray:
    """Geometric pmf ``p (1-p)^(d-1)`` on ``d = 1..dt_max``, renormalized."""
    d = np.arange(1, dt_max + 1)
    w = p * (1.0 - p) ** (d - 1)
    return w / w.sum()


def geometric_p_for_mean(mean_lag: float, dt_max: int) -> float:
    """Success probability whose truncated geometric pmf has the given mean."""
    if dt_max < 1:
        raise ValueError("dt_max must be >= 1")
    if mean_lag <= 1.0 or dt_max == 1:
        return 1.0
    hi_mean = (dt_max + 1) / 2.0  # p -> 0 gives the uniform pmf
    if mean_lag >= hi_mean:
        raise ValueError(f"mean lag {mean_lag} unattainable with dt_max={dt_max}")
    d = np.arange(1, dt_max + 1)

    def excess(p):
        return float(d @ geometric_pmf(p, dt_max)) - mean_lag

    return brentq(excess, 1e-12, 1.0 - 1e-12, xtol=1e-14)


def default_lag_pmf(dt_max: int, K: int) -> np.ndarray:
    """Geometric lag pmf with mean ``dt_max / 4`` for every (source, target)."""
    g = geometric_pmf(geometric_p_for_mean(dt_max / 4.0, dt_max), dt_max)
    return np.broadcast_to(g, (K, K, dt_max)).copy()


@dataclass
class HawkesModel:
    background: np.ndarray  # (K,) events per minute
    weights: np.ndarray  # (K, K), row = source, column = target
    lag_pmf: np.ndarray  # (K, K, dt_max); lag_pmf[j, k, d-1] = G[j -> k][d]
    log_likelihood: float = float("nan")
    converged: bool = True
    n_iter: int = 0
    ll_trace: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.background = np.asarray(self.background, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.lag_pmf = np.asarray(self.lag_pmf, dtype=float)
        K = self.background.shape[0]
        if self.weights.shape != (K, K) or self.lag_pmf.shape[:2] != (K, K):
            raise ValueError("inconsistent shapes for background / weights / lag_pmf")
        if (self.background < 0).any() or (self.weights < 0).any():
            raise ValueError("background rates and weights must be non-negative")
        sums = self.lag_pmf.sum(axis=2)
        if not np.allclose(sums, 1.0, atol=1e-9):
            raise ValueError("each lag pmf must sum to 1")

    @property
    def K(self) -> int:
        return self.background.shape[0]

    @property
    def dt_max(self) -> int:
        return self.lag_pmf.shape[2]

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.weights))))

    def impulse_response(self) -> np.ndarray:
        """``h[j, k, d-1] = W[j, k] * G[j, k, d]``."""
        return self.weights[:, :, None] * self.lag_pmf


def _excitation(counts: np.ndarray, lag_pmf: np.ndarray) -> np.ndarray:
    """``X[t, j, k] = sum_d counts[t - d, j] * G[j, k, d]`` for every bin."""
    T, K = counts.shape
    X = np.zeros((T, K, K))
    if T < 2:
        return X
    for j in range(K):
        if not counts[:, j].any():
            continue
        for k in range(K):
            kern = np.concatenate(([0.0], lag_pmf[j, k]))  # zero at lag 0
            conv = fftconvolve(counts[:, j].astype(float), kern)[:T]
            X[:, j, k] = np.clip(conv, 0.0, None)
    return X


def intensity(model: HawkesModel, series: EventSeries, t: int, k: int) -> float:
    """Rate of process ``k`` in bin ``t`` given the events before ``t``."""
    if not 0 <= t < series.T:
        raise IndexError(f"bin {t} outside 0..{series.T - 1}")
    rate = model.background[k]
    h = model.impulse_response()
    for d in range(1, min(model.dt_max, t) + 1):
        past = series.counts[t - d]
        rate += float(past @ h[:, k, d - 1])
    return float(rate)


def intensities(model: HawkesModel, series: EventSeries) -> np.ndarray:
    """Rates for every bin, shape (T, K)."""
    X = _excitation(series.counts, model.lag_pmf)
    return model.background[None, :] + np.einsum("tjk,jk->tk", X, model.weights)


def log_likelihood(model: HawkesModel, series: EventSeries) -> float:
    return _poisson_ll(series.counts, intensities(model, series))


def _poisson_ll(counts: np.ndarray, rate: np.ndarray) -> float:
    pos = counts > 0
    if (rate[pos] <= 0).any():
        return float("-inf")
    return float((counts[pos] * np.log(rate[pos])).sum() - rate.sum() - gammaln(counts[pos] + 1).sum())


def simulate(
    model: HawkesModel,
    T: int,
    seed: int | np.random.Generator | None = None,
    return_parents: bool = False,
):
    """Draw a (T, K) series bin by bin from the model.

    The count in each bin is Poisson with the rate implied by the earlier
    bins.  With ``return_parents=True`` each count is also split between its
    possible parents and the second return value is ``children[j, k]``, the
    number of events on ``k`` triggered by events on ``j``.
    """
    rho = model.spectral_radius()
    if rho >= 1.0:
        raise UnstableModelError(f"spectral radius of W is {rho:.3f} >= 1")
    rng = np.random.default_rng(seed)
    K, D = model.K, model.dt_max
    h = model.impulse_response()  # (K, K, D)
    # pending[t, j, k]: excitation of k in bin t carried by events on j
    pending = np.zeros((T + D + 1, K, K))
    counts = np.zeros((T, K), dtype=np.int64)
    children = np.zeros((K, K), dtype=np.int64)
    bg = model.background
    for t in range(T):
        exc = pending[t]
        rate = bg + exc.sum(axis=0)
        n = rng.poisson(rate)
        if not n.any():
            continue
        counts[t] = n
        if return_parents:
            for k in np.flatnonzero(n):
                probs = np.concatenate(([bg[k]], exc[:, k])) / rate[k]
                split = rng.multinomial(n[k], probs / probs.sum())
                children[:, k] += split[1:]
        for j in np.flatnonzero(n):
            pending[t + 1:t + 1 + D, j, :] += n[j] * h[j].T
    series = EventSeries(counts)
    if return_parents:
        return series, children
    return series


def fit(
    series: EventSeries,
    dt_max: int,
    lag_pmf: np.ndarray | None = None,
    learn_lag_pmf: bool = False,
    seed: int | None = 0,
    max_iter: int = 500,
    tol: float = 1e-8,
) -> HawkesModel:
    """Maximum-likelihood fit of background rates and weights by EM.

    ``lag_pmf`` (K, K, dt_max) stays fixed unless ``learn_lag_pmf`` is set,
    in which case the M-step also re-estimates it as a normalized lag
    histogram.  The default pmf is :func:`default_lag_pmf`.  Iteration stops
    once the relative change in log-likelihood drops below ``tol`` or after
    ``max_iter`` steps; the model's ``converged`` flag records which.
    """
    s = series.counts.astype(float)
    T, K = s.shape
    G = default_lag_pmf(dt_max, K) if lag_pmf is None else np.array(lag_pmf, dtype=float)
    if G.shape != (K, K, dt_max):
        raise ValueError(f"lag_pmf must have shape {(K, K, dt_max)}")
    n_k = s.sum(axis=0)
    active = n_k > 0
    rng = np.random.default_rng(seed)

    bg = np.where(active, 0.5 * n_k / T, 0.0)
    W = rng.uniform(0.05, 0.3, size=(K, K)) * np.outer(active, active)

    # parent slots: c[j, d-1] = events on j whose lag-d child bin lies inside the window
    c = np.zeros((K, dt_max))
    cum = np.cumsum(s, axis=0)
    for d in range(1, dt_max + 1):
        c[:, d - 1] = cum[T - 1 - d] if T - 1 - d >= 0 else 0.0

    pos = s > 0
    ll_const = gammaln(s[pos] + 1).sum()
    trace: list[float] = []
    converged = False
    X = _excitation(series.counts, G)

    def loglik(rate):
        if (rate[pos] <= 0).any():
            return float("-inf")
        return float((s[pos] * np.log(rate[pos])).sum() - rate.sum() - ll_const)

    rate = bg[None, :] + np.einsum("tjk,jk->tk", X, W)
    ll = loglik(rate)
    trace.append(ll)
    it = 0
    for it in range(1, max_iter + 1):
        ratio = np.divide(s, rate, out=np.zeros_like(s), where=rate > 0)  # s / rate
        bg = bg * ratio.sum(axis=0) / T
        if learn_lag_pmf:
            G, W = _mstep_lags(s, ratio, G, W, c)
            X = _excitation(series.counts, G)
        else:
            resp = np.einsum("tjk,tk->jk", X, ratio) * W  # expected children j -> k
            slots = X.sum(axis=0)
            W = np.divide(resp, slots, out=np.zeros_like(W), where=slots > 0)
        rate = bg[None, :] + np.einsum("tjk,jk->tk", X, W)
        new_ll = loglik(rate)
        trace.append(new_ll)
        if abs(new_ll - ll) <= tol * abs(ll):
            ll = new_ll
            converged = True
            break
        ll = new_ll
    if not converged:
        warnings.warn(f"Hawkes EM did not converge in {max_iter} iterations", RuntimeWarning, stacklevel=2)
    return HawkesModel(bg, W, G, log_likelihood=ll, converged=converged, n_iter=it, ll_trace=trace)


def _mstep_lags(s, ratio, G, W, c):
    """Joint M-step for ``a[j, k, d] = W[j, k] G[j, k, d]``: a = expected children at lag d / parent slots."""
    T, K = s.shape
    D = G.shape[2]
    newW = np.zeros_like(W)
    newG = G.copy()
    for j in range(K):
        if not s[:, j].any():
            continue
        for k in range(K):
            # corr[d] = sum_t ratio[t, k] * s[t - d, j]
            full = fftconvolve(ratio[::-1, k], s[:, j])
            corr = np.clip(full[T - 1 - np.arange(1, D + 1)], 0.0, None)
            kids = W[j, k] * G[j, k] * corr
            a = np.divide(kids, c[j], out=np.zeros(D), where=c[j] > 0)
            total = a.sum()
            if total > 0:
                newW[j, k] = total
                newG[j, k] = a / total
    return newG, newW


@dataclass
class InfluenceSummary:
    mean_weights: np.ndarray
    image_count: int
    dt_max: int
    platform_names: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        names = list(self.platform_names) or [f"p{k}" for k in range(self.mean_weights.shape[0])]
        return {
            "dt_max_minutes": self.dt_max,
            "image_count": self.image_count,
            "orientation": "rows are source platforms, columns are target platforms",
            "platforms": names,
            "mean_weights": [[round(float(x), 8) for x in row] for row in self.mean_weights],
        }


def mean_weight_matrix(models: Sequence[HawkesModel], platform_names: Sequence[str] = ()) -> InfluenceSummary:
    """Entry-wise mean of the fitted weight matrices of many series."""
    if not models:
        raise ValueError("no models to average")
    K, D = models[0].K, models[0].dt_max
    if any(m.K != K or m.dt_max != D for m in models):
        raise ValueError("models differ in K or dt_max")
    total = np.zeros((K, K))
    for m in models:
        total += m.weights
    return InfluenceSummary(total / len(models), len(models), D, tuple(platform_names))


# --- per-image event logs ------------------------------------------------------

def read_events_csv(path: str | Path) -> dict[str, list[tuple[int, str]]]:
    """``image_hash_hex,platform,utc_minute`` rows grouped by image hash."""
    out: dict[str, list[tuple[int, str]]] = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out[row["image_hash_hex"]].append((int(row["utc_minute"]), row["platform"]))
    return dict(out)


def write_events_csv(path: str | Path, events: dict[str, list[tuple[int, str]]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image_hash_hex", "platform", "utc_minute"])
        for h in sorted(events):
            for minute, plat in sorted(events[h]):
                w.writerow([h, plat, minute])


def shared_images(events: dict[str, list[tuple[int, str]]], platforms: Sequence[str]) -> list[str]:
    """Image hashes posted on every one of ``platforms``."""
    need = set(platforms)
    return sorted(h for h, ev in events.items() if need <= {p for _, p in ev})


def fit_influence(
    events: dict[str, list[tuple[int, str]]],
    platforms: Sequence[str],
    windows: Sequence[int] = DEFAULT_WINDOWS,
    seed: int = 0,
    learn_lag_pmf: bool = False,
) -> tuple[dict[int, InfluenceSummary], dict[int, dict[str, HawkesModel]]]:
    """Fit one model per shared image and window; average the weights per window."""
    images = shared_images(events, platforms)
    if not images:
        raise ValueError("no image was posted on all platforms")
    summaries, per_image = {}, {}
    for dt in windows:
        fits = {}
        for h in images:
            series = build_event_series(events[h], platforms)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                fits[h] = fit(series, dt, learn_lag_pmf=learn_lag_pmf, seed=seed)
            if not fits[h].converged:
                log.info("image %s, window %d: EM hit the iteration cap", h, dt)
        per_image[dt] = fits
        summaries[dt] = mean_weight_matrix(list(fits.values()), platforms)
    return summaries, per_image
