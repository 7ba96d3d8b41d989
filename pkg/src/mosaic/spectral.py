"""Layered network state, weighted Laplacians and algebraic connectivity."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

GRADIENT_EIGENGAP_FLOOR = 1e-6


class DegenerateNetworkError(ValueError):
    pass


class DegenerateEigenvalueError(ValueError):
    """Raised when lambda2 is (nearly) repeated and its gradient is unreliable."""


class Status(str, enum.Enum):
    ACTIVE = "active"
    QUARANTINED = "quarantined"
    SPOOFED = "spoofed"


@dataclass(frozen=True)
class Agent:
    id: int
    layer: int
    position: tuple[float, float]
    max_step: float = 1.0
    status: Status = Status.ACTIVE

    def __post_init__(self):
        pos = tuple(float(p) for p in self.position)
        if len(pos) != 2 or not all(np.isfinite(pos)):
            raise ValueError(f"agent {self.id}: position must be a finite 2-vector")
        if self.max_step < 0:
            raise ValueError(f"agent {self.id}: max_step must be >= 0")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "status", Status(self.status))

    def moved(self, displacement) -> "Agent":
        x, y = self.position
        return replace(self, position=(x + float(displacement[0]), y + float(displacement[1])))


@dataclass(frozen=True)
class LayeredNetwork:
    agents: tuple[Agent, ...]
    layer_count: int
    comm_radius: float
    decay: float
    step_index: int = 0

    def __post_init__(self):
        agents = tuple(sorted(self.agents, key=lambda a: a.id))
        object.__setattr__(self, "agents", agents)
        ids = [a.id for a in agents]
        if len(set(ids)) != len(ids):
            raise ValueError("agent ids must be unique")
        if self.layer_count < 1:
            raise ValueError("layer_count must be >= 1")
        if self.comm_radius <= 0:
            raise ValueError("comm_radius must be > 0")
        if self.decay < 0:
            raise ValueError("decay must be >= 0")
        for a in agents:
            if not 0 <= a.layer < self.layer_count:
                raise ValueError(f"agent {a.id}: layer {a.layer} out of range")

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(a.id for a in self.agents)

    def index_of(self, agent_id: int) -> int:
        for i, a in enumerate(self.agents):
            if a.id == agent_id:
                return i
        raise KeyError(f"no agent with id {agent_id}")

    def agent(self, agent_id: int) -> Agent:
        return self.agents[self.index_of(agent_id)]

    def positions(self) -> np.ndarray:
        return np.array([a.position for a in self.agents], dtype=float).reshape(-1, 2)

    def mask(self, perceived: bool = False) -> np.ndarray:
        """Agents that carry link weight.

        Active ones always; with ``perceived`` also the spoofed agents that
        neighbor discovery picks up, i.e. those within comm_radius of an
        active agent.
        """
        active = np.array([a.status is Status.ACTIVE for a in self.agents], dtype=bool)
        if not perceived:
            return active
        spoofed = np.array([a.status is Status.SPOOFED for a in self.agents], dtype=bool)
        if not spoofed.any() or not active.any():
            return active
        d = distances(self.positions())
        heard = (d[:, active] <= self.comm_radius).any(axis=1)
        return active | (spoofed & heard)

    def with_agents(self, agents: Iterable[Agent]) -> "LayeredNetwork":
        return replace(self, agents=tuple(agents))

    def with_positions(self, positions: np.ndarray) -> "LayeredNetwork":
        return self.with_agents(
            replace(a, position=(float(p[0]), float(p[1]))) for a, p in zip(self.agents, positions)
        )

    def with_status(self, ids: Iterable[int], status: Status) -> "LayeredNetwork":
        ids = set(ids)
        return self.with_agents(replace(a, status=status) if a.id in ids else a for a in self.agents)


@dataclass(frozen=True)
class SpectralResult:
    lambda2: float
    fiedler: np.ndarray = field(repr=False)
    eigengap: float
    # agent ids labelling the entries of ``fiedler`` (None for bare matrices)
    ids: Optional[tuple[int, ...]] = None


def distances(positions: np.ndarray) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt((diff**2).sum(-1))


def build_weights(net: LayeredNetwork, perceived: bool = False) -> np.ndarray:
    """w_ij = exp(-decay * d_ij) for linked pairs within comm_radius, else 0.

    Inactive agents keep their row/column with all-zero weights. With
    ``perceived=True`` spoofed agents are treated as active.
    """
    n = net.n
    if n == 0:
        return np.zeros((0, 0))
    d = distances(net.positions())
    live = net.mask(perceived)
    linked = (d <= net.comm_radius) & live[:, None] & live[None, :]
    np.fill_diagonal(linked, False)
    return np.where(linked, np.exp(-net.decay * d), 0.0)


def laplacian(W: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("weight matrix must be square")
    if np.any(W < 0):
        raise ValueError("weight matrix must be nonnegative")
    scale = max(1.0, float(np.abs(W).max(initial=0.0)))
    if not np.allclose(W, W.T, rtol=0.0, atol=1e-12 * scale):
        raise ValueError("weight matrix must be symmetric")
    W = W.copy()
    np.fill_diagonal(W, 0.0)
    return np.diag(W.sum(axis=1)) - W


def _complement_basis(n: int) -> np.ndarray:
    """Orthonormal basis (n x n-1) of the subspace orthogonal to the all-ones vector.

    Columns 2..n of the Householder reflector sending e1 to 1/sqrt(n).
    """
    u = -np.full(n, 1.0 / np.sqrt(n))
    u[0] += 1.0
    norm = np.linalg.norm(u)
    H = np.eye(n)
    if norm > 0:
        u /= norm
        H -= 2.0 * np.outer(u, u)
    return H[:, 1:]


def _sign_normalize(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def is_connected(W: np.ndarray) -> bool:
    if W.shape[0] <= 1:
        return True
    count, _ = connected_components(W > 0, directed=False)
    return count == 1


def algebraic_connectivity(L: np.ndarray) -> SpectralResult:
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if n < 2:
        raise DegenerateNetworkError("degenerate network")
    # Solve on the complement of the all-ones vector so the Fiedler vector is
    # orthogonal to 1 even when lambda2 = 0 is repeated.
    Q = _complement_basis(n)
    M = Q.T @ L @ Q
    vals, vecs = np.linalg.eigh((M + M.T) / 2)
    lam = float(vals[0])
    eigengap = float(vals[1] - vals[0]) if n > 2 else float("inf")

    tie = 1e-9 * max(1.0, abs(float(vals[-1])))
    block = np.flatnonzero(vals - vals[0] <= tie)
    candidates = [_sign_normalize(Q @ vecs[:, k]) for k in block]
    best = max(range(len(candidates)), key=lambda c: (candidates[c][0], -c))
    fiedler = candidates[best]
    fiedler = fiedler / np.linalg.norm(fiedler)

    W = np.maximum(-L, 0.0)
    np.fill_diagonal(W, 0.0)
    if not is_connected(W):
        lam = 0.0
    return SpectralResult(lambda2=max(lam, 0.0), fiedler=fiedler, eigengap=max(eigengap, 0.0))


def lambda2_values(laplacians: np.ndarray) -> np.ndarray:
    """lambda2 for a stack of Laplacians, one batched dense eigensolve.

    Values below a relative noise floor are reported as exactly 0.
    """
    L = np.asarray(laplacians, dtype=float)
    if L.shape[-1] < 2:
        return np.zeros(L.shape[:-2])
    vals = np.linalg.eigvalsh(L)
    lam = vals[..., 1]
    floor = 1e-10 * np.maximum(1.0, np.abs(vals[..., -1]))
    return np.where(lam <= floor, 0.0, lam)


def active_ids(net: LayeredNetwork, perceived: bool = False) -> tuple[int, ...]:
    return tuple(a.id for a, m in zip(net.agents, net.mask(perceived)) if m)


def _active_weights(net: LayeredNetwork, perceived: bool) -> tuple[np.ndarray, tuple[int, ...]]:
    W = build_weights(net, perceived)
    m = net.mask(perceived)
    return W[np.ix_(m, m)], active_ids(net, perceived)


def network_spectrum(net: LayeredNetwork, perceived: bool = False) -> SpectralResult:
    """Spectral summary over the active (or perceived) agents of ``net``."""
    W, ids = _active_weights(net, perceived)
    res = algebraic_connectivity(laplacian(W))
    return replace(res, ids=ids)


def network_lambda2(net: LayeredNetwork, perceived: bool = False) -> float:
    """lambda2 of the active (or perceived) subgraph; 0 with fewer than two agents."""
    W, ids = _active_weights(net, perceived)
    if len(ids) < 2:
        return 0.0
    return float(lambda2_values(laplacian(W)))


def _check_gap(res: SpectralResult, floor: float):
    if not res.eigengap > floor:
        raise DegenerateEigenvalueError("degenerate eigenvalue; gradient unreliable")


def lambda2_edge_gradient(
    res: SpectralResult, i: int, j: int, floor: float = GRADIENT_EIGENGAP_FLOOR
) -> float:
    """d(lambda2)/d(w_ij) = (v_i - v_j)^2 for a simple lambda2."""
    if i == j:
        return 0.0
    _check_gap(res, floor)
    v = res.fiedler
    return float((v[i] - v[j]) ** 2)


def lambda2_position_gradient(
    net: LayeredNetwork,
    res: SpectralResult,
    agent_id: int,
    perceived: bool = False,
    floor: float = GRADIENT_EIGENGAP_FLOOR,
) -> np.ndarray:
    """Gradient of lambda2 w.r.t. one agent's position (per meter).

    ``res`` must come from :func:`network_spectrum` on the same network.
    """
    ids = res.ids if res.ids is not None else active_ids(net, perceived)
    if agent_id not in ids:
        return np.zeros(2)
    _check_gap(res, floor)
    k = ids.index(agent_id)
    v = res.fiedler
    sub = [net.index_of(a) for a in ids]
    pos = net.positions()[sub]
    diff = pos[k] - pos
    d = np.sqrt((diff**2).sum(-1))
    live = (d > 0) & (d <= net.comm_radius)
    live[k] = False
    w = np.exp(-net.decay * d[live])
    dw = -net.decay * w[:, None] * diff[live] / d[live][:, None]
    sens = (v[k] - v[live]) ** 2
    return (sens[:, None] * dw).sum(axis=0)


def relabel(net: LayeredNetwork, mapping: dict[int, int]) -> LayeredNetwork:
    """Rename agent ids; positions, layers and statuses are kept."""
    return net.with_agents(replace(a, id=mapping.get(a.id, a.id)) for a in net.agents)


def make_network(
    positions: Sequence[Sequence[float]],
    layers: Optional[Sequence[int]] = None,
    comm_radius: float = 10.0,
    decay: float = 0.5,
    max_step: float = 1.0,
) -> LayeredNetwork:
    """Convenience constructor with ids 0..n-1."""
    layers = list(layers) if layers is not None else [0] * len(positions)
    agents = tuple(
        Agent(id=i, layer=l, position=tuple(p), max_step=max_step)
        for i, (p, l) in enumerate(zip(positions, layers))
    )
    return LayeredNetwork(
        agents=agents,
        layer_count=max(layers, default=0) + 1,
        comm_radius=comm_radius,
        decay=decay,
    )
