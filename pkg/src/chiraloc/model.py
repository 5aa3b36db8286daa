"""System parameters, disorder sampling and the single-excitation coupling matrix.

Sites are labelled 1..N in the public API (ordered positions along the
waveguide); arrays are indexed 0..N-1 internally.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import asdict, dataclass, field

import numpy as np


class DisorderMode(str, enum.Enum):
    PHASE_FACTOR = "phase"
    ONSITE_POTENTIAL = "onsite"


@dataclass(frozen=True)
class SystemParams:
    """One physical configuration of the chiral emitter array.

    ``gamma`` fixes the time unit; every time in the package is ``gamma * t``.
    ``initial_site`` is 1-based and defaults to the central site ceil(N/2).
    """

    n_sites: int = 51
    gamma: float = 1.0
    directionality: float = 0.0
    xi: float = 0.0
    disorder_strength: float = 0.0
    disorder_mode: DisorderMode = DisorderMode.PHASE_FACTOR
    gamma_nr: float = 0.0
    initial_site: int | None = None

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise ValueError(f"n_sites must be a positive integer, got {self.n_sites!r}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma!r}")
        if not -1.0 <= self.directionality <= 1.0:
            raise ValueError(f"directionality must lie in [-1, 1], got {self.directionality!r}")
        if not 0.0 <= self.xi <= math.pi:
            raise ValueError(f"xi must lie in [0, pi], got {self.xi!r}")
        if not 0.0 <= self.disorder_strength <= 1.0:
            raise ValueError(f"disorder_strength must lie in [0, 1], got {self.disorder_strength!r}")
        if not self.gamma_nr >= 0:
            raise ValueError(f"gamma_nr must be >= 0, got {self.gamma_nr!r}")
        object.__setattr__(self, "n_sites", int(self.n_sites))
        object.__setattr__(self, "disorder_mode", DisorderMode(self.disorder_mode))
        if self.initial_site is None:
            object.__setattr__(self, "initial_site", (self.n_sites + 1) // 2)
        if not 1 <= self.initial_site <= self.n_sites:
            raise ValueError(
                f"initial_site must lie in [1, {self.n_sites}], got {self.initial_site!r}"
            )

    @property
    def center_index(self) -> int:
        """0-based array index of the initially excited site."""
        return self.initial_site - 1

    @property
    def beta_factor(self) -> float:
        """Fraction of emission into the guided modes, gamma / (gamma + gamma_nr)."""
        return self.gamma / (self.gamma + self.gamma_nr)

    def replace(self, **changes) -> "SystemParams":
        values = asdict(self)
        if "n_sites" in changes and "initial_site" not in changes:
            values["initial_site"] = None
        values.update(changes)
        return SystemParams(**values)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["disorder_mode"] = self.disorder_mode.value
        return d


def gamma_nr_for_beta(gamma: float, beta: float) -> float:
    """Nonradiative rate giving a guided-mode fraction ``beta``."""
    if not 0 < beta <= 1:
        raise ValueError(f"beta must lie in (0, 1], got {beta!r}")
    return gamma * (1.0 - beta) / beta


def derive_rates(params: SystemParams) -> tuple[float, float]:
    """Right- and left-going decay rates for the given directionality."""
    gamma_r = params.gamma * (1.0 + params.directionality) / 2.0
    gamma_l = params.gamma * (1.0 - params.directionality) / 2.0
    return gamma_r, gamma_l


@dataclass(frozen=True)
class DisorderRealization:
    phases: np.ndarray
    seed: int

    def __post_init__(self):
        phases = np.array(self.phases, dtype=float)
        phases.flags.writeable = False
        object.__setattr__(self, "phases", phases)

    def reflected(self) -> "DisorderRealization":
        """The same draw with every phase negated (pairs xi with pi - xi)."""
        return DisorderRealization(-self.phases, self.seed)


def rng_for_seed(seed: int) -> np.random.Generator:
    # Philox is counter based: the k-th draw is the k-th site of this realization.
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def realization_seed(base_seed: int, index: int) -> int:
    """64-bit seed of realization ``index``, a hash of (base_seed, index)."""
    ss = np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_disorder(params: SystemParams, seed: int) -> DisorderRealization:
    """N independent phases uniform on pi*[-w, w] for disorder strength w."""
    w = params.disorder_strength
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"disorder strength must lie in [0, 1], got {w!r}")
    if w == 0.0:
        return DisorderRealization(np.zeros(params.n_sites), int(seed))
    half_width = math.pi * w
    phases = rng_for_seed(seed).uniform(-half_width, half_width, params.n_sites)
    return DisorderRealization(np.clip(phases, -half_width, half_width), int(seed))


def no_disorder(params: SystemParams) -> DisorderRealization:
    return DisorderRealization(np.zeros(params.n_sites), 0)


@dataclass(frozen=True)
class CouplingMatrix:
    entries: np.ndarray
    params_fingerprint: str = field(default="")

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"coupling matrix must be square, got shape {entries.shape}")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @property
    def n_sites(self) -> int:
        return self.entries.shape[0]


def fingerprint(params: SystemParams, disorder: DisorderRealization) -> str:
    h = hashlib.sha256()
    h.update(repr(sorted(params.to_dict().items())).encode())
    h.update(np.ascontiguousarray(disorder.phases, dtype="<f8").tobytes())
    h.update(str(disorder.seed).encode())
    return h.hexdigest()


def coupling_entries(params: SystemParams, phases: np.ndarray) -> np.ndarray:
    """Dense generator M of da/dt = M a for one phase vector (array only)."""
    n = params.n_sites
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (n,):
        raise ValueError(f"expected {n} disorder phases, got shape {phases.shape}")
    gamma_r, gamma_l = derive_rates(params)
    onsite = params.disorder_mode is DisorderMode.ONSITE_POTENTIAL
    w = np.zeros(n) if onsite else phases

    idx = np.arange(n)
    sep = idx[:, None] - idx[None, :]  # mu - nu
    # Below the diagonal (nu < mu) light travels right; above it (nu > mu) left.
    # Both branches share the phase |mu - nu| xi + sign(mu - nu) (W_mu - W_nu).
    phase = np.abs(sep) * params.xi + np.sign(sep) * (w[:, None] - w[None, :])
    kernel = np.exp(-1j * phase)
    m = np.where(sep > 0, -gamma_r * kernel, -gamma_l * kernel)
    diag = -(params.gamma + params.gamma_nr) / 2.0 + np.zeros(n, dtype=complex)
    if onsite:
        diag = diag - 1j * phases
    m[idx, idx] = diag
    return m


def build_coupling_matrix(params: SystemParams, disorder: DisorderRealization) -> CouplingMatrix:
    return CouplingMatrix(
        coupling_entries(params, disorder.phases), fingerprint(params, disorder)
    )
