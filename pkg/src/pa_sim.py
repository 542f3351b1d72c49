"""Affine preferential attachment simulator with random initial degrees.

Network PA_1 is two vertices v_0, v_1 joined by m_1 parallel edges. At time t the
vertex v_t sends m_t edges one at a time into V_{t-1}; each draw picks v_j with
probability (deg(v_j) + delta) / S_{t,i-1}, S_{t,i-1} = t*delta + 2M_{t-1} + (i-1),
seeing the degree updates made by the earlier draws of the same step.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from models import EvolutionStats, InitialDegreeModel, SimConfig, ValidationError, check_delta

logger = logging.getLogger(__name__)


# ============================================================================
# Kernel
# ============================================================================


@njit
def _draw_target(endpoints, filled, degrees, t, delta, rng):
    """One attachment draw over V_{t-1} = {0, ..., t-1}.

    endpoints[:filled] lists every endpoint that belongs to V_{t-1}, so a uniform
    entry is a degree-proportional vertex.
    """
    if delta >= 0.0:
        total = t * delta + filled
        u = rng.random() * total
        if u < filled:
            idx = int(u)
            if idx >= filled:
                idx = filled - 1
            return endpoints[idx]
        j = int((u - filled) / delta)
        if j >= t:
            j = t - 1
        return j

    # delta < 0: propose by degree, accept with (deg + delta) / deg >= 1 + delta
    while True:
        idx = int(rng.random() * filled)
        if idx >= filled:
            idx = filled - 1
        j = endpoints[idx]
        d = degrees[j]
        if rng.random() * d < d + delta:
            return j


@njit
def _draw_many(endpoints, filled, degrees, t, delta, rng, size):
    out = np.empty(size, np.int64)
    for s in range(size):
        out[s] = _draw_target(endpoints, filled, degrees, t, delta, rng)
    return out


@njit
def _grow(m_seq, delta, rng, record_history, checkpoints, probe):
    n = m_seq.shape[0]
    total_endpoints = 2 * np.sum(m_seq)
    endpoints = np.empty(total_endpoints, np.int64)
    degrees = np.zeros(n + 1, np.int64)

    m1 = m_seq[0]
    for e in range(m1):
        endpoints[2 * e] = 0
        endpoints[2 * e + 1] = 1
    degrees[0] = m1
    degrees[1] = m1
    filled = 2 * m1

    n_hist = total_endpoints // 2 - m1 if record_history else 0
    history = np.empty((n_hist, 3), np.int64)
    h = 0

    c = 0
    n_cp = checkpoints.shape[0]
    while c < n_cp and checkpoints[c] == 1:
        probe[c, 0] = degrees[0]
        probe[c, 1] = degrees[1]
        c += 1

    for t in range(2, n + 1):
        mt = m_seq[t - 1]
        for i in range(mt):
            j = _draw_target(endpoints, filled, degrees, t, delta, rng)
            if record_history:
                history[h, 0] = t
                history[h, 1] = i + 1
                history[h, 2] = degrees[j]
                h += 1
            degrees[j] += 1
            endpoints[filled] = j
            filled += 1
        # v_t's own endpoints join only after its step
        for i in range(mt):
            endpoints[filled] = t
            filled += 1
        degrees[t] = mt

        while c < n_cp and checkpoints[c] == t:
            probe[c, : t + 1] = degrees[: t + 1]
            c += 1

    return degrees, history


# ============================================================================
# Random streams
# ============================================================================


def make_streams(seed: int, replicate: int = 0) -> tuple[np.random.Generator, np.random.Generator]:
    """Counter-based streams keyed by (seed, replicate): initial degrees, attachments."""
    degree_seq, attach_seq = np.random.SeedSequence([seed, replicate]).spawn(2)
    return (
        np.random.Generator(np.random.Philox(degree_seq)),
        np.random.Generator(np.random.Philox(attach_seq)),
    )


# ============================================================================
# Attachment state (sampler access outside a full simulation)
# ============================================================================


@dataclass(frozen=True)
class AttachmentState:
    """Frozen view of V_{t-1} between two draws."""

    endpoints: np.ndarray
    degrees: np.ndarray
    t: int

    @property
    def filled(self) -> int:
        return len(self.endpoints)

    def total_preference(self, delta: float) -> float:
        return self.t * delta + self.filled

    @classmethod
    def from_degrees(cls, degrees) -> "AttachmentState":
        degrees = np.asarray(degrees, dtype=np.int64)
        if degrees.ndim != 1 or len(degrees) < 2 or (degrees < 1).any():
            raise ValidationError("State needs at least two vertices of positive degree")
        endpoints = np.repeat(np.arange(len(degrees), dtype=np.int64), degrees)
        return cls(endpoints=endpoints, degrees=degrees, t=len(degrees))


def sample_target(state: AttachmentState, delta: float, rng: np.random.Generator) -> int:
    """Draw v_j with probability (deg(v_j) + delta) / S."""
    delta = check_delta(delta)
    return int(_draw_target(state.endpoints, state.filled, state.degrees, state.t, delta, rng))


def sample_targets(
    state: AttachmentState, delta: float, rng: np.random.Generator, size: int
) -> np.ndarray:
    """`size` independent draws from the same frozen state."""
    delta = check_delta(delta)
    return _draw_many(state.endpoints, state.filled, state.degrees, state.t, delta, rng, size)


# ============================================================================
# Statistics
# ============================================================================


def _reverse_tail(counts: np.ndarray) -> np.ndarray:
    """tail[k] = sum_{j>k} counts[j]."""
    return np.concatenate([np.cumsum(counts[::-1])[::-1][1:], [0]]).astype(counts.dtype)


def _frozen(array: np.ndarray | None) -> np.ndarray | None:
    if array is not None:
        array.setflags(write=False)
    return array


def build_stats(
    degrees,
    m_seq,
    history: np.ndarray | None = None,
    delta: float | None = None,
    seed: int | None = None,
    replicate: int | None = None,
    model: InitialDegreeModel | None = None,
) -> EvolutionStats:
    """Evolution statistics from final vertex degrees and the edge-count sequence."""
    degrees = np.asarray(degrees, dtype=np.int64)
    m_seq = np.asarray(m_seq, dtype=np.int64)
    n = len(m_seq)
    if len(degrees) != n + 1:
        raise ValidationError(f"Expected {n + 1} vertex degrees for n={n}, got {len(degrees)}")

    degree_hist = np.bincount(degrees)
    max_degree = len(degree_hist) - 1
    cum_edges = np.cumsum(m_seq)

    # R_{>k} = 2*1{m_1>k} + sum_{t>=2} 1{m_t>k}
    m_counts = np.bincount(m_seq, minlength=max_degree + 1)
    m_counts[m_seq[0]] += 1
    r_tail = _reverse_tail(m_counts)[: max_degree + 1]

    if 2 * int(cum_edges[-1]) != int(degrees.sum()):
        raise ValidationError("Degrees violate the handshake identity for the given m_seq")

    return EvolutionStats(
        n=n,
        degree_hist=_frozen(degree_hist),
        tail_counts=_frozen(_reverse_tail(degree_hist)),
        total_edges=int(cum_edges[-1]),
        r_tail_counts=_frozen(r_tail),
        m_seq=_frozen(m_seq),
        cum_edges=_frozen(cum_edges),
        history=_frozen(history),
        delta=delta,
        seed=seed,
        replicate=replicate,
        model=model,
    )


def snapshot_from_histogram(degree_hist, n: int | None = None, **metadata) -> EvolutionStats:
    """Snapshot statistics from a degree histogram alone (index k -> N_k(n))."""
    degree_hist = np.asarray(degree_hist)
    vertices = degree_hist.sum()
    n = int(round(vertices)) - 1 if n is None else n
    if n < 1:
        raise ValidationError("A snapshot needs at least two vertices")
    total_degree = float(np.dot(np.arange(len(degree_hist)), degree_hist))
    return EvolutionStats(
        n=n,
        degree_hist=_frozen(degree_hist.copy()),
        tail_counts=_frozen(_reverse_tail(degree_hist)),
        total_edges=int(round(total_degree / 2)),
        **metadata,
    )


def snapshot_stats(stats: EvolutionStats) -> EvolutionStats:
    """What the final network shows: histogram and edge count, no history."""
    return replace(stats, r_tail_counts=None, m_seq=None, cum_edges=None, history=None)


def empirical_law(stats: EvolutionStats) -> tuple[np.ndarray, np.ndarray]:
    """Empirical p_k(n) = N_k(n)/(n+1) and p_{>k}(n), indexed from k = 0."""
    vertices = stats.n + 1
    return stats.degree_hist / vertices, stats.tail_counts / vertices


# ============================================================================
# Simulation
# ============================================================================


def _grow_from_config(config: SimConfig, checkpoints: np.ndarray, probe: np.ndarray):
    degree_rng, attach_rng = make_streams(config.seed, config.replicate)
    m_seq = config.model.draw(degree_rng, config.n).astype(np.int64)
    degrees, history = _grow(
        m_seq, float(config.delta), attach_rng, bool(config.record_history), checkpoints, probe
    )
    return m_seq, degrees, history


def simulate(config: SimConfig) -> EvolutionStats:
    """Grow PA_n(delta) and return its evolution statistics."""
    logger.debug(
        f"[Sim] n={config.n} delta={config.delta} mu={config.model.mu:.4f} "
        f"seed={config.seed} replicate={config.replicate}"
    )
    no_checkpoints = np.zeros(0, dtype=np.int64)
    m_seq, degrees, history = _grow_from_config(
        config, no_checkpoints, np.zeros((0, 1), dtype=np.int64)
    )
    stats = build_stats(
        degrees,
        m_seq,
        history=history if config.record_history else None,
        delta=config.delta,
        seed=config.seed,
        replicate=config.replicate,
        model=config.model,
    )
    logger.debug(f"[Sim] done: M_n={stats.total_edges} max_degree={stats.max_degree}")
    return stats


def degree_histories(config: SimConfig, checkpoints) -> list[np.ndarray]:
    """Degree histograms N_k(t) of one run at each checkpoint t (1 <= t <= n)."""
    checkpoints = np.asarray(sorted(int(t) for t in checkpoints), dtype=np.int64)
    if len(checkpoints) and (checkpoints[0] < 1 or checkpoints[-1] > config.n):
        raise ValidationError(f"checkpoints must lie in [1, {config.n}]")
    probe = np.zeros((len(checkpoints), config.n + 1), dtype=np.int64)
    _grow_from_config(replace(config, record_history=False), checkpoints, probe)
    return [np.bincount(row[: t + 1]) for row, t in zip(probe, checkpoints, strict=True)]
