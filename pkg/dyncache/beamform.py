import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Optional, Sequence, TypeVar

import numpy as np
from numpy.random import default_rng

from .errors import InfeasibleZero, NonConvergenceError, RankDeficiency
from .model import Association, NetworkConfig
from .placement import Placement
from .scheduler import Schedule, Transmission, uc_schedule

logger = logging.getLogger(__name__)

THREADS_ENV = "DYNCACHE_THREADS"

T = TypeVar("T")


@dataclass(frozen=True)
class ChannelSet:
    """Per-user flat-fading MISO channels h_k ~ CN(0, I_L)."""

    h: dict[int, np.ndarray]
    rng_seed: Optional[int] = None

    def matrix(self, users: Sequence[int]) -> np.ndarray:
        return np.stack([self.h[k] for k in users])


def draw_channels(users: Iterable[int], L: int, seed: int = None, rng: np.random.Generator = None) -> ChannelSet:
    """
    i.i.d. circularly-symmetric complex normal entries with unit variance
    (real and imaginary parts each 1/2). Users are drawn in ascending id
    order so a seed always maps to the same channels.
    """
    rng = rng if rng is not None else default_rng(seed)
    users = sorted(users)
    H = (rng.standard_normal((len(users), L)) + 1j * rng.standard_normal((len(users), L))) / math.sqrt(2.0)
    return ChannelSet(h={k: H[i] for i, k in enumerate(users)}, rng_seed=seed)


@dataclass
class BeamSolution:
    """
    Beamformers of one transmission, one row of `w` per stream in
    transmission order. `target_rate` is the weighted target R_e, so each
    user is driven to log2(1 + SINR) = R_e / mu_k.
    """

    users: tuple[int, ...]
    w: np.ndarray
    powers: np.ndarray
    target_rate: float
    duals: np.ndarray
    omegas: np.ndarray
    mu: np.ndarray
    sinrs: np.ndarray = None
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def rates(self) -> np.ndarray:
        return np.log2(1.0 + self.sinrs)

    @property
    def min_rate(self) -> float:
        return float(self.rates.min())

    @property
    def min_weighted_rate(self) -> float:
        return float((self.mu * self.rates).min())

    @property
    def total_power(self) -> float:
        return float(np.sum(np.abs(self.w) ** 2))

    def by_user(self) -> dict[int, np.ndarray]:
        return {k: self.w[i] for i, k in enumerate(self.users)}


def visibility(tx: Transmission) -> np.ndarray:
    """
    vis[k, j] is True when stream j reaches user k as interference, i.e.
    j != k and the profile of user k does not cache mini-file lam_j.
    """
    streams = tx.streams
    n = len(streams)
    vis = np.zeros((n, n), dtype=bool)
    for a, sa in enumerate(streams):
        for b, sb in enumerate(streams):
            if a != b and sa.profile not in sb.lam:
                vis[a, b] = True
    return vis


def _gains(H: np.ndarray, W: np.ndarray) -> np.ndarray:
    # G[k, j] = |h_k^H w_j|^2
    return np.abs(H.conj() @ W.T) ** 2


def sinr_all(H: np.ndarray, W: np.ndarray, vis: np.ndarray, N0: float) -> np.ndarray:
    G = _gains(H, W)
    interference = np.sum(np.where(vis, G, 0.0), axis=1)
    return np.diag(G) / (interference + N0)


def sinr(k: int, solution: BeamSolution, channels: ChannelSet, transmission: Transmission, N0: float) -> float:
    """SINR at user k: own beam over visible co-scheduled beams plus noise."""
    users = [s.user for s in transmission.streams]
    H = channels.matrix(users)
    vis = visibility(transmission)
    i = users.index(k)
    return float(sinr_all(H, solution.w, vis, N0)[i])


class FixedPoint(NamedTuple):
    lam: np.ndarray
    status: str
    trace: list[float]

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def dual_fixed_point(G: np.ndarray,
                     couple: np.ndarray,
                     omegas: np.ndarray,
                     lam0: np.ndarray,
                     tol: float = 1e-6,
                     max_iter: int = 500,
                     budget: float = None,
                     ceiling: float = 1e12) -> FixedPoint:
    """
    Iterates the dual (virtual uplink) powers

        lam_k <- omega_k / ((1 + omega_k) * g_k^H Sigma_k^{-1} g_k)
        Sigma_k = I + sum_{j : couple[k, j]} lam_j g_j g_j^H

    on noise-normalised channels G. `trace` records max |lam[i+1] - lam[i]|.

    status is one of "converged", "over_budget" (only when `budget` is
    given: started below the fixed point the sequence increases, so once
    sum(lam) passes the budget the target needs more power), "diverged"
    (sum(lam) past `ceiling` or not finite) and "max_iter".
    """
    n, L = G.shape
    outer = np.einsum("jl,jm->jlm", G, G.conj())
    eye = np.eye(L, dtype=complex)
    weights = couple.astype(float)
    lam = lam0.astype(float).copy()
    trace: list[float] = []
    ratio = omegas / (1.0 + omegas)
    for _ in range(max_iter):
        sigma = eye + np.einsum("kj,j,jlm->klm", weights, lam, outer)
        x = np.linalg.solve(sigma, G[..., None])[..., 0]
        quad = np.real(np.sum(G.conj() * x, axis=1))
        new = ratio / quad
        diff = float(np.max(np.abs(new - lam)))
        trace.append(diff)
        lam = new
        if not np.all(np.isfinite(lam)) or lam.sum() > ceiling:
            return FixedPoint(lam, "diverged", trace)
        if budget is not None and lam.sum() > budget:
            return FixedPoint(lam, "over_budget", trace)
        if diff <= tol * max(1.0, float(lam.max())):
            return FixedPoint(lam, "converged", trace)
    return FixedPoint(lam, "max_iter", trace)


def _directions(G: np.ndarray, couple: np.ndarray, lam: np.ndarray) -> np.ndarray:
    n, L = G.shape
    outer = np.einsum("jl,jm->jlm", G, G.conj())
    sigma = np.eye(L, dtype=complex) + np.einsum("kj,j,jlm->klm", couple.astype(float), lam, outer)
    x = np.linalg.solve(sigma, G[..., None])[..., 0]
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _downlink_powers(G: np.ndarray, Wt: np.ndarray, vis: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    """Solves (I - D F) p = D 1 for SINR = omega at unit noise."""
    gains = _gains(G, Wt)
    D = np.diag(omegas / np.diag(gains))
    F = np.where(vis, gains, 0.0)
    n = len(omegas)
    try:
        return np.linalg.solve(np.eye(n) - D @ F, D @ np.ones(n))
    except np.linalg.LinAlgError:
        return np.full(n, np.inf)


def _single_user(tx: Transmission, H: np.ndarray, P_T: float, N0: float, mu: np.ndarray) -> BeamSolution:
    h = H[0]
    w = math.sqrt(P_T) * h / np.linalg.norm(h)
    snr = P_T * float(np.linalg.norm(h) ** 2) / N0
    rate = math.log2(1.0 + snr)
    return BeamSolution(users=(tx.streams[0].user,), w=w[None, :], powers=np.array([P_T]),
                        target_rate=float(mu[0] * rate), duals=np.array([P_T]),
                        omegas=np.array([snr]), mu=mu, sinrs=np.array([snr]))


def maxmin_solve(transmission: Transmission,
                 channels: ChannelSet,
                 P_T: float,
                 N0: float,
                 tol: float = 1e-4,
                 max_iter: int = 500,
                 mu: float | Sequence[float] = 1.0,
                 max_steps: int = 200) -> BeamSolution:
    """
    Max-min weighted rate beamformers for one transmission under a total
    power budget.

    Bisection on the target R_e. For each candidate the dual powers come
    from `dual_fixed_point`, the beam directions are the normalised
    Sigma_k^{-1} h_k and the downlink powers equalise every SINR at
    omega_k = 2^(R_e/mu_k) - 1. A candidate is feasible when those powers
    are nonnegative and sum to at most P_T. Bisection stops once the
    bracket is below `tol` and the spent power is within tol*P_T of the
    budget.
    """
    users = tuple(s.user for s in transmission.streams)
    n = len(users)
    H = channels.matrix(users)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (n,)).copy()
    if n == 1:
        return _single_user(transmission, H, P_T, N0, mu)

    G = H / math.sqrt(N0)
    vis = visibility(transmission)
    couple = vis.T | np.eye(n, dtype=bool)
    L = H.shape[1]

    lo, hi = 0.0, float(mu.min() * math.log2(1.0 + P_T * np.max(np.sum(np.abs(H) ** 2, axis=1)) / N0))
    lam_init = np.full(n, P_T / (n * L))
    best = None
    unconverged = 0
    steps = 0
    while steps < max_steps:
        steps += 1
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        omegas = np.exp2(mid / mu) - 1.0
        warm = best is not None
        fp = dual_fixed_point(G, couple, omegas, best["lam"] if warm else lam_init,
                              tol=min(tol, 1e-6), max_iter=max_iter,
                              budget=P_T if warm else None, ceiling=1e6 * P_T)
        feasible = False
        if fp.converged:
            Wt = _directions(G, couple, fp.lam)
            p = _downlink_powers(G, Wt, vis, omegas)
            feasible = bool(np.all(np.isfinite(p)) and np.all(p >= -1e-12) and p.sum() <= P_T)
        elif fp.status == "max_iter":
            unconverged += 1
            logger.debug("fixed point did not settle at R_e=%.6f after %d iterations", mid, len(fp.trace))

        if feasible:
            lo = mid
            best = {"lam": fp.lam, "Wt": Wt, "p": np.clip(p, 0.0, None), "omegas": omegas,
                    "R_e": mid, "iterations": len(fp.trace)}
        else:
            hi = mid
        if best is not None and hi - lo < tol and P_T - best["p"].sum() <= tol * P_T:
            break

    if best is None:
        diagnostics = {"users": users, "steps": steps, "unconverged": unconverged, "upper": hi}
        if unconverged:
            raise NonConvergenceError("dual fixed point never converged to a feasible target", diagnostics)
        raise InfeasibleZero("no positive target rate is feasible for users {}".format(users))

    W = np.sqrt(best["p"])[:, None] * best["Wt"]
    solution = BeamSolution(users=users, w=W, powers=best["p"], target_rate=best["R_e"],
                            duals=best["lam"], omegas=best["omegas"], mu=mu,
                            iterations=best["iterations"],
                            diagnostics={"steps": steps, "unconverged": unconverged, "bracket": hi - lo})
    solution.sinrs = sinr_all(H, W, vis, N0)
    return solution


def zf_precoders(transmission: Transmission, channels: ChannelSet, P_T: float, N0: float = 1.0) -> BeamSolution:
    """
    Zero-forcing baseline: h_k projected onto the null space of its nulling
    set's channels, normalised, with P_T split equally over the streams.
    """
    users = tuple(s.user for s in transmission.streams)
    n = len(users)
    H = channels.matrix(users)
    L = H.shape[1]
    W = np.zeros_like(H)
    for i, s in enumerate(transmission.streams):
        h = H[i]
        if s.nulling_set:
            if len(s.nulling_set) > L - 1:
                raise RankDeficiency("user {} must null {} users with L={}".format(s.user, len(s.nulling_set), L))
            A = channels.matrix(sorted(s.nulling_set)).conj()
            h = h - np.linalg.pinv(A) @ (A @ h)
        norm = np.linalg.norm(h)
        if norm < 1e-12 * max(1.0, np.linalg.norm(H[i])):
            raise RankDeficiency("no direction for user {} orthogonal to its nulling set".format(s.user))
        W[i] = math.sqrt(P_T / n) * h / norm
    solution = BeamSolution(users=users, w=W, powers=np.full(n, P_T / n), target_rate=0.0,
                            duals=np.zeros(n), omegas=np.zeros(n), mu=np.ones(n))
    solution.sinrs = sinr_all(H, W, visibility(transmission), N0)
    return solution


@dataclass
class RateReport:
    """Symmetric rate over Monte Carlo trials for one scheme at one SNR."""

    scheme: str
    snr_db: float
    per_trial: list[float]
    degenerate: int = 0

    @property
    def trials(self) -> int:
        return len(self.per_trial)

    @property
    def mean_rate(self) -> float:
        return float(np.mean(self.per_trial))

    @property
    def stderr(self) -> float:
        if self.trials < 2:
            return 0.0
        return float(np.std(self.per_trial, ddof=1) / math.sqrt(self.trials))

    def row(self) -> dict:
        return {"snr_db": self.snr_db, "scheme": self.scheme, "mean_rate": self.mean_rate,
                "stderr": self.stderr, "trials": self.trials}


def aggregate_rate(rates: Sequence[float], mu: float) -> float:
    """
    R_sym = ( sum_n 1 / (mu * R_n) )^-1, each transmission carrying 1/mu of
    a file to each of its users. A zero-rate transmission gives 0.
    """
    rates = np.asarray(rates, dtype=float)
    if rates.size == 0 or np.any(rates <= 0):
        return 0.0
    return float(1.0 / np.sum(1.0 / (mu * rates)))


def thread_count() -> int:
    value = os.environ.get(THREADS_ENV)
    if not value:
        return 1
    return max(1, int(value))


def map_trials(fn: Callable[[int], T], trials: int) -> list[T]:
    """Runs fn(0..trials-1) on up to DYNCACHE_THREADS threads, results in trial order."""
    workers = min(thread_count(), max(1, trials))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, range(trials)))
    return [fn(i) for i in range(trials)]


def _transmission_rate(tx: Transmission, channels: ChannelSet, cfg: NetworkConfig, precoder: str,
                       mu: float, tol: float) -> float:
    if precoder == "zf":
        solution = zf_precoders(tx, channels, cfg.tx_power, cfg.noise_power)
    else:
        solution = maxmin_solve(tx, channels, cfg.tx_power, cfg.noise_power, tol=tol, mu=mu)
    return solution.min_rate


def trial_rate(schedule: Schedule,
               cfg: NetworkConfig,
               seed: int,
               trial: int,
               precoder: str = "maxmin",
               tol: float = 1e-4) -> tuple[float, int]:
    """R_sym of one channel realisation and the number of zero-rate transmissions."""
    rng = default_rng([seed, trial])
    mu = schedule.per_file
    rates = []
    for tx in schedule.transmissions:
        channels = draw_channels(tx.served_users, cfg.num_antennas, rng=rng)
        rates.append(_transmission_rate(tx, channels, cfg, precoder, mu, tol))
    degenerate = sum(1 for r in rates if r <= 0)
    return aggregate_rate(rates, mu), degenerate


def symmetric_rate(schedule: Schedule,
                   cfg: NetworkConfig,
                   trials: int,
                   seed: int,
                   precoder: str = "maxmin",
                   scheme: str = None,
                   tol: float = 1e-4) -> RateReport:
    """
    Monte Carlo symmetric rate of a schedule. Every transmission of every
    trial sees fresh channels from a generator seeded by (seed, trial), so
    results do not depend on the worker count.
    """
    results = map_trials(lambda i: trial_rate(schedule, cfg, seed, i, precoder, tol), trials)
    degenerate = sum(d for _, d in results)
    if degenerate:
        logger.warning("%d transmissions had zero rate", degenerate)
    report = RateReport(scheme=scheme or "{}-{}".format(cfg.strategy.value, precoder),
                        snr_db=cfg.snr_db, per_trial=[r for r, _ in results], degenerate=degenerate)
    logger.info("%s at %.1f dB: mean %.4f (stderr %.4f, %d trials)",
                report.scheme, report.snr_db, report.mean_rate, report.stderr, report.trials)
    return report


def nocc_schedule(cfg: NetworkConfig, assoc: Association) -> Schedule:
    """
    Unicast-only delivery: every user fetches its uncached (1 - gamma)
    share at the CC step's subpacketization, min(alpha, remaining) users
    per transmission. Streams carry no profile so no interference is
    cancelled by cache content.
    """
    placement = Placement(cfg, assoc)
    uc = uc_schedule(placement.demanded(), cfg.alpha)
    return Schedule(transmissions=tuple(uc), S=placement.S, per_file=placement.per_file)


def nocc_rate(cfg: NetworkConfig, assoc: Association, trials: int, seed: int, tol: float = 1e-4) -> RateReport:
    """
    Symmetric rate without coded caching. Demands come from the placement of
    (cfg, assoc) and channels are drawn per trial from seed, the same way as
    for symmetric_rate, instead of being passed in.
    """
    return symmetric_rate(nocc_schedule(cfg, assoc), cfg, trials, seed, scheme="nocc", tol=tol)
