"""
Safety Filters Module

Turns a nominal control and the perceived pairwise info into a safe control.
QP-family filters (SSA, SSS, CBF and their robust variants) build linear
constraints and share the projection solver; PFM and SMA are closed-form.
"""

import enum
import logging
from dataclasses import asdict, dataclass, replace
from typing import Dict, List, Tuple

import numpy as np

from .errors import ContractViolation
from .qp_solver import ActiveSetSolver, LinearConstraint
from .utils import clamp_vector
from .world_model import PairwiseInfo

logger = logging.getLogger(__name__)

# PFM clearances at or below this are evaluated at this value.
PFM_SATURATION = 1e-4


class FilterKind(str, enum.Enum):
    """Filter tags as they appear in configs, flags and reports."""

    NONE = "none"
    PFM = "pfm"
    SSA = "ssa"
    RSSA = "rssa"
    SSS = "sss"
    RSSS = "rsss"
    CBF = "cbf"
    SMA = "sma"

    @classmethod
    def parse(cls, name: str) -> "FilterKind":
        """Look up a kind by name, case-insensitively."""
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ContractViolation(f"unknown filter {name!r}; valid kinds: {valid}") from None


QP_KINDS = frozenset({FilterKind.SSA, FilterKind.RSSA, FilterKind.SSS, FilterKind.RSSS, FilterKind.CBF})
ROBUST_KINDS = frozenset({FilterKind.RSSA, FilterKind.RSSS})


class FilterStatus(enum.IntEnum):
    """Per-step filter outcome; integer codes are what the logs store."""

    INACTIVE = 0
    ACTIVE = 1
    NO_SOLUTION = 2


@dataclass(frozen=True)
class FilterParams:
    """
    Tunable filter parameters.

    Attributes:
        d_margin: Activation / safety margin (m)
        alpha: CBF class-K gain (1/s)
        eta: SSA decay rate (m/s)
        lambda_sss: SSS decay gain (1/s)
        k_rep: PFM repulsion gain
        rho0: PFM influence radius (m)
        k_slide: SMA sliding gain (m/s)
        eps_robust: Constraint tightening for robust variants (m)
        u_max: Per-component control bound
    """

    d_margin: float = 0.05
    alpha: float = 5.0
    eta: float = 0.1
    lambda_sss: float = 5.0
    k_rep: float = 0.5
    rho0: float = 0.3
    k_slide: float = 0.5
    eps_robust: float = 0.05
    u_max: float = 1.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (np.isfinite(value) and value > 0):
                raise ContractViolation(f"filter parameter {name} must be positive, got {value}")

    def with_u_max(self, u_max: float) -> "FilterParams":
        return replace(self, u_max=float(u_max))

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class FilterSpec:
    """Filter kind plus its parameters, as handed to run_episode."""

    kind: FilterKind
    params: FilterParams = FilterParams()


@dataclass(frozen=True)
class FilterOutput:
    """
    Result of filtering one control.

    Attributes:
        u_safe: Control sent to the robot
        status: Inactive, Active or NoSolution
        active_pairs: Constraints (or repulsive terms) imposed this step
    """

    u_safe: np.ndarray
    status: FilterStatus
    active_pairs: int = 0


def _effective_clearance(kind: FilterKind, params: FilterParams, info: PairwiseInfo) -> np.ndarray:
    d = info.d.reshape(-1)
    if kind in ROBUST_KINDS:
        return d - params.eps_robust
    return d


def constraint_rows(
    kind: FilterKind, params: FilterParams, info: PairwiseInfo
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Constraint matrix and bounds for a QP-family filter, rows in row-major pair order.

    Args:
        kind: One of the QP-family kinds
        params: Filter parameters
        info: Perceived pairwise info

    Returns:
        (A, b) with A u >= b
    """
    if kind not in QP_KINDS:
        raise ContractViolation(f"{kind.value} does not build linear constraints")

    d_eff = _effective_clearance(kind, params, info)
    grads = info.grad.reshape(d_eff.size, info.grad.shape[-1])

    if kind == FilterKind.CBF:
        selected = np.ones(d_eff.size, dtype=bool)
        bounds = -params.alpha * (d_eff - params.d_margin)
    elif kind in (FilterKind.SSA, FilterKind.RSSA):
        selected = d_eff <= params.d_margin
        bounds = np.full(d_eff.size, params.eta)
    else:
        selected = d_eff <= 2.0 * params.d_margin
        bounds = -params.lambda_sss * d_eff

    degenerate = selected & ~np.any(grads != 0.0, axis=1)
    if np.any(degenerate):
        logger.debug("skipping %d degenerate pairs with zero gradient", int(degenerate.sum()))
        selected &= ~degenerate
    return grads[selected], bounds[selected]


def build_constraints(
    kind: FilterKind, params: FilterParams, info: PairwiseInfo
) -> List[LinearConstraint]:
    """
    Linear constraints a . u >= b imposed by a QP-family filter.

    Args:
        kind: SSA, RSSA, SSS, RSSS or CBF
        params: Filter parameters
        info: Perceived pairwise info

    Returns:
        One constraint per selected pair, in row-major pair order
    """
    A, b = constraint_rows(kind, params, info)
    return [LinearConstraint(a, bound) for a, bound in zip(A, b)]


def sliding_mode_control(
    params: FilterParams, u_nom: np.ndarray, info: PairwiseInfo
) -> Tuple[np.ndarray, int]:
    """
    Unclamped SMA control at the most critical pair.

    Returns:
        (u, pair index); u is the zero vector when that pair has no gradient
    """
    d = info.d.reshape(-1)
    grads = info.grad.reshape(d.size, info.grad.shape[-1])
    k = int(np.argmin(d))
    g = grads[k]
    gg = float(g @ g)
    if gg == 0.0:
        return np.zeros_like(u_nom), k
    approach = min(0.0, float(g @ u_nom))
    return u_nom - approach / gg * g + params.k_slide * g / np.sqrt(gg), k


def potential_field_terms(params: FilterParams, info: PairwiseInfo) -> Tuple[np.ndarray, int]:
    """
    Summed Khatib repulsion over pairs inside the influence radius.

    Returns:
        (repulsion vector, number of contributing pairs)
    """
    d = info.d.reshape(-1)
    grads = info.grad.reshape(d.size, info.grad.shape[-1])
    near = d < params.rho0
    if not np.any(near):
        return np.zeros(grads.shape[1]), 0
    dn = np.maximum(d[near], PFM_SATURATION)
    magnitude = params.k_rep * (1.0 / dn - 1.0 / params.rho0) / dn**2
    return magnitude @ grads[near], int(near.sum())


class SafetyFilter:
    """
    A configured filter; the episode loop calls it once per step.

    Attributes:
        kind: Filter tag
        params: Filter parameters (u_max included)
    """

    def __init__(self, kind: FilterKind, params: FilterParams = FilterParams()):
        self.kind = FilterKind(kind)
        self.params = params
        self._solver = ActiveSetSolver()

    def __call__(self, u_nom: np.ndarray, info: PairwiseInfo) -> FilterOutput:
        return self.apply(u_nom, info)

    def apply(self, u_nom: np.ndarray, info: PairwiseInfo) -> FilterOutput:
        """
        Filter one nominal control against perceived pairwise info.

        Args:
            u_nom: Nominal control
            info: Perceived (post-attack) pairwise info

        Returns:
            FilterOutput
        """
        u_nom = np.asarray(u_nom, dtype=np.float64)
        if not (np.all(np.isfinite(info.d)) and np.all(np.isfinite(info.grad))):
            raise ContractViolation(f"non-finite pairwise info at step {info.t}")
        if info.d.size and info.grad.shape[2] != u_nom.size:
            raise ContractViolation("gradient length does not match control length")

        params = self.params
        if self.kind == FilterKind.NONE:
            return FilterOutput(u_nom.copy(), FilterStatus.INACTIVE, 0)

        if self.kind in QP_KINDS:
            A, b = constraint_rows(self.kind, params, info)
            if A.shape[0] == 0:
                return FilterOutput(u_nom.copy(), FilterStatus.INACTIVE, 0)
            result = self._solver.solve(u_nom, A, b, params.u_max)
            if not result.feasible:
                return FilterOutput(np.zeros_like(u_nom), FilterStatus.NO_SOLUTION, A.shape[0])
            u = clamp_vector(result.u, params.u_max)
            status = FilterStatus.INACTIVE if np.array_equal(u, u_nom) else FilterStatus.ACTIVE
            return FilterOutput(u, status, A.shape[0])

        if info.d.size == 0:
            return FilterOutput(u_nom.copy(), FilterStatus.INACTIVE, 0)

        if self.kind == FilterKind.PFM:
            repulsion, n_terms = potential_field_terms(params, info)
            if n_terms == 0:
                return FilterOutput(u_nom.copy(), FilterStatus.INACTIVE, 0)
            return FilterOutput(
                clamp_vector(u_nom + repulsion, params.u_max), FilterStatus.ACTIVE, n_terms
            )

        if float(np.min(info.d)) >= params.d_margin:
            return FilterOutput(u_nom.copy(), FilterStatus.INACTIVE, 0)
        u, _ = sliding_mode_control(params, u_nom, info)
        return FilterOutput(clamp_vector(u, params.u_max), FilterStatus.ACTIVE, 1)


def apply_filter(
    kind: FilterKind, params: FilterParams, u_nom: np.ndarray, info: PairwiseInfo
) -> FilterOutput:
    """
    One-shot form of SafetyFilter.apply.

    Args:
        kind: Filter tag
        params: Filter parameters
        u_nom: Nominal control
        info: Perceived pairwise info

    Returns:
        FilterOutput
    """
    return SafetyFilter(kind, params).apply(u_nom, info)
