"""Scalar equilibrium classification, 4-D lifting, Picard integration and
finite-time comparison utilities.

The central object is a scalar field g on [0,1] whose zeros describe the
limit proportions of a two-type process.  Zeros are located by a dense
sign-scan plus bisection, classified by one-sided signs, and lifted to
equilibria of the 4-dimensional ratio ODE through a map h(beta).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma

EULER_GAMMA = float(np.euler_gamma)

ATTRACTOR = "attractor"
REPELLER = "repeller"
SADDLE = "saddle"
Q_ATTRACTOR = "q-attractor"


class DegenerateFieldError(ValueError):
    """Raised when g vanishes on a whole subinterval (continuum of equilibria)."""


@dataclass
class ScalarField:
    """Right-hand side of a scalar ODE on [0,1] with known kink abscissas.

    ``g`` must be evaluable at every non-kink point; kinks (jumps of g or of
    its slope, e.g. min{.,1} crossovers or indicator boundaries) are inserted
    as mandatory scan points so one-sided signs are read on the correct side.
    """

    g: callable
    kinks: list = field(default_factory=list)

    def check_invariance(self):
        """[0,1] is positive invariant iff g(0) >= 0 and g(1) <= 0."""
        return self.g(0.0) >= 0.0 and self.g(1.0) <= 0.0


@dataclass
class Equilibrium:
    beta: float
    kind: str           # attractor | repeller | saddle
    basin: tuple        # (lo, hi) interval attracted to this point
    g_residual: float = 0.0


@dataclass
class LiftedPoint:
    beta: float         # nan for the origin saddle
    h: tuple            # 4-vector
    kind: str           # attractor | q-attractor


@dataclass
class EquilibriumReport:
    equilibria: list
    lifted: list = field(default_factory=list)
    includes_zero_saddle: bool = False

    @property
    def attractors(self):
        return [e for e in self.equilibria if e.kind == ATTRACTOR]

    @property
    def repellers(self):
        return [e for e in self.equilibria if e.kind == REPELLER]

    @property
    def saddles(self):
        return [e for e in self.equilibria if e.kind == SADDLE]

    def to_dict(self):
        return {
            "equilibria": [
                {"beta": e.beta, "kind": e.kind, "basin": [e.basin[0], e.basin[1]]}
                for e in self.equilibria
            ],
            "lifted": [
                {
                    "beta": None if math.isnan(p.beta) else p.beta,
                    "h": list(p.h),
                    "kind": p.kind,
                }
                for p in self.lifted
            ],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _bisect_root(g, lo, hi, f_lo, tol):
    """Refine a bracketed sign change of g to width <= tol."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = g(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def classify_scalar(field_: ScalarField, grid_points: int = 10_000,
                    refine_tol: float = 1e-12) -> EquilibriumReport:
    """Locate and classify all zeros of g on [0,1].

    Every sign change between adjacent scan points is bracketed and refined
    by bisection; points where g evaluates to exactly zero (boundaries under
    an indicator, registered kinks) are kept as equilibria in their own
    right.  One-sided signs then decide attractor / repeller / saddle;
    boundary zeros are classified from their single inner neighbourhood.
    """
    if grid_points < 100:
        raise ValueError("grid_points must be >= 100")
    g = field_.g
    xs = np.linspace(0.0, 1.0, grid_points)
    if field_.kinks:
        kk = [k for k in field_.kinks if 0.0 <= k <= 1.0]
        xs = np.unique(np.concatenate([xs, np.asarray(kk, dtype=float)]))
    vals = np.array([g(float(x)) for x in xs])
    if not np.all(np.isfinite(vals)):
        bad = xs[~np.isfinite(vals)][0]
        raise ValueError(f"scalar field not finite at beta={bad}")

    zero = vals == 0.0
    # a run of >= 3 consecutive exact zeros cannot be an isolated root
    run = 0
    for z in zero:
        run = run + 1 if z else 0
        if run >= 3:
            raise DegenerateFieldError("degenerate field: g vanishes on a subinterval")
    if run == 2 and np.count_nonzero(zero) == len(zero):
        raise DegenerateFieldError("degenerate field: g vanishes on a subinterval")

    roots = [float(xs[i]) for i in range(len(xs)) if zero[i]]
    # collapse exact-zero pairs straddling one cell (double grid hit of one root)
    merged = []
    for r in roots:
        if merged and r - merged[-1] <= 1.5 * (xs[1] - xs[0]):
            merged[-1] = 0.5 * (merged[-1] + r)
        else:
            merged.append(r)
    roots = merged

    for i in range(len(xs) - 1):
        lo, hi = float(xs[i]), float(xs[i + 1])
        f_lo, f_hi = float(vals[i]), float(vals[i + 1])
        # an exact zero at a cell end can hide an interior sign change right
        # next to it; probe just inside the cell instead
        h = 1e-7 * (hi - lo)
        if zero[i] and zero[i + 1]:
            continue
        if zero[i]:
            lo = lo + h
            f_lo = g(lo)
        if zero[i + 1]:
            hi = hi - h
            f_hi = g(hi)
        if f_lo == 0.0 or f_hi == 0.0:
            continue
        if (f_lo > 0) != (f_hi > 0):
            roots.append(_bisect_root(g, lo, hi, f_lo, refine_tol))
    roots = sorted(roots)

    # de-duplicate refined roots that collapsed onto the same point
    dedup = []
    for r in roots:
        if not dedup or r - dedup[-1] > max(10 * refine_tol, 1e-9):
            dedup.append(r)
    roots = dedup
    if not roots:
        return EquilibriumReport(equilibria=[])

    def side_sign(lo, hi):
        """Dominant sign of g strictly inside (lo, hi); 0 if unresolvable."""
        if hi - lo <= 0:
            return 0
        inside = (xs > lo + 1e-15) & (xs < hi - 1e-15) & ~zero
        cand = vals[inside]
        probe_lo = lo + 0.01 * (hi - lo)
        probe_hi = lo + 0.99 * (hi - lo)
        probes = np.array([g(probe_lo), g(0.5 * (lo + hi)), g(probe_hi)])
        cand = np.concatenate([cand, probes[probes != 0.0]])
        if cand.size == 0:
            return 0
        return 1 if cand[np.argmax(np.abs(cand))] > 0 else -1

    bounds = [0.0] + roots + [1.0]
    eqs = []
    for i, r in enumerate(roots):
        s_left = side_sign(bounds[i], r)
        s_right = side_sign(r, bounds[i + 2])
        if r <= refine_tol:                   # left boundary root
            kind = ATTRACTOR if s_right < 0 else (REPELLER if s_right > 0 else SADDLE)
        elif r >= 1.0 - refine_tol:           # right boundary root
            kind = ATTRACTOR if s_left > 0 else (REPELLER if s_left < 0 else SADDLE)
        elif s_left > 0 and s_right < 0:
            kind = ATTRACTOR
        elif s_left < 0 and s_right > 0:
            kind = REPELLER
        else:
            kind = SADDLE
        eqs.append(Equilibrium(beta=r, kind=kind, basin=(r, r),
                               g_residual=abs(g(r))))

    # basins: an attractor owns the open interval up to its neighbouring
    # equilibria (closed at the domain boundary); a saddle owns the side(s)
    # whose flow points at it; a repeller only owns itself.
    for i, e in enumerate(eqs):
        lo = eqs[i - 1].beta if i > 0 else 0.0
        hi = eqs[i + 1].beta if i + 1 < len(eqs) else 1.0
        s_left = side_sign(lo, e.beta)
        s_right = side_sign(e.beta, hi)
        if e.kind == ATTRACTOR:
            e.basin = (lo if i > 0 else 0.0, hi if i + 1 < len(eqs) else 1.0)
        elif e.kind == SADDLE:
            if s_left > 0 and s_right > 0:
                e.basin = (lo, e.beta)
            elif s_left < 0 and s_right < 0:
                e.basin = (e.beta, hi)
            else:
                e.basin = (e.beta, e.beta)
        else:
            e.basin = (e.beta, e.beta)
    return EquilibriumReport(equilibria=eqs)


def lift_limits(report: EquilibriumReport, h) -> EquilibriumReport:
    """Map scalar equilibria to 4-D limit points via h(beta).

    Scalar attractors become attractors of the ratio ODE; repellers and
    saddles become q-attractor saddle points; the origin (extinction) is
    always appended to the saddle set.  h is evaluated at the equilibrium
    itself -- models encode their own indicator conventions there.
    """
    lifted = []
    for e in report.equilibria:
        vec = tuple(float(v) for v in np.asarray(h(e.beta), dtype=float))
        kind = ATTRACTOR if e.kind == ATTRACTOR else Q_ATTRACTOR
        lifted.append(LiftedPoint(beta=e.beta, h=vec, kind=kind))
    lifted.append(LiftedPoint(beta=float("nan"), h=(0.0, 0.0, 0.0, 0.0),
                              kind=Q_ATTRACTOR))
    report.lifted = lifted
    report.includes_zero_saddle = True
    return report


@dataclass
class OdeTrajectory:
    times: np.ndarray
    values: np.ndarray        # shape (len(times), dim)
    sweeps_used: int = 0
    mesh: int = 0

    def at(self, t):
        """Linear interpolation of the trajectory at time t (vector)."""
        t = float(t)
        if t <= self.times[0]:
            return self.values[0]
        if t >= self.times[-1]:
            return self.values[-1]
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        w = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return (1.0 - w) * self.values[i] + w * self.values[i + 1]


def picard_solve(rhs, y0, T, sweeps: int = 60, mesh: int | None = None) -> OdeTrajectory:
    """Successive-approximation solution of y' = rhs(y, t) on [0, T].

    Starting from the constant function y0, applies `sweeps` Picard
    iterations; the integral is evaluated with the trapezoid rule on a
    uniform mesh (default 5000 points per unit time).  Stops early only if
    two consecutive sweeps agree to machine precision.
    """
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    dim = y0.size
    if mesh is None:
        mesh = max(200, int(math.ceil(5000 * T)))
    ts = np.linspace(0.0, T, mesh + 1)
    dt = ts[1] - ts[0] if mesh > 0 else 0.0
    Y = np.tile(y0, (mesh + 1, 1))
    used = 0
    for sweep in range(sweeps):
        F = np.empty_like(Y)
        for j, t in enumerate(ts):
            f = np.asarray(rhs(Y[j], float(t)), dtype=float)
            if not np.all(np.isfinite(f)):
                raise ValueError(f"non-finite right-hand side at t={t}")
            F[j] = f
        incr = 0.5 * dt * (F[1:] + F[:-1])
        Ynew = np.empty_like(Y)
        Ynew[0] = y0
        Ynew[1:] = y0 + np.cumsum(incr, axis=0)
        delta = float(np.max(np.abs(Ynew - Y))) if mesh > 0 else 0.0
        Y = Ynew
        used = sweep + 1
        if delta < 1e-15:
            break
    return OdeTrajectory(times=ts, values=Y if dim > 1 else Y,
                         sweeps_used=used, mesh=mesh)


def picard_chain(rhs, y0, T, window: float = 4.0, sweeps: int = 60,
                 mesh_per_unit: int = 200) -> OdeTrajectory:
    """Long-horizon integration by restarting Picard on fixed windows.

    Successive approximation contracts only while L*window stays well below
    the sweep count, so horizons beyond ~20 Lipschitz times are integrated
    window by window, restarting from the previous endpoint.
    """
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    t_all = [np.array([0.0])]
    y_all = [y0[None, :]]
    t0 = 0.0
    y = y0
    while t0 < T - 1e-12:
        span = min(window, T - t0)
        local = picard_solve(lambda v, s, off=t0: rhs(v, s + off), y, span,
                             sweeps=sweeps,
                             mesh=max(20, int(mesh_per_unit * span)))
        t_all.append(t0 + local.times[1:])
        y_all.append(local.values[1:])
        y = local.values[-1]
        t0 += span
    return OdeTrajectory(times=np.concatenate(t_all),
                         values=np.vstack(y_all), sweeps_used=sweeps)


# -- epoch/time bookkeeping for the 1/n step-size scheme ---------------------

def harmonic_number(n: int) -> float:
    """Exact partial sum 1 + 1/2 + ... + 1/n (digamma identity)."""
    if n <= 0:
        return 0.0
    return float(digamma(n + 1)) + EULER_GAMMA


def harmonic_times(n: int) -> np.ndarray:
    """Array [t_0..t_n] with t_k = sum_{j<=k} 1/j, computed by direct summation."""
    t = np.zeros(n + 1)
    t[1:] = np.cumsum(1.0 / np.arange(1, n + 1))
    return t


def epochs_before(t: float) -> int:
    """eta(t) = max{n : t_n <= t} for the harmonic time scale."""
    if t < 1.0:
        return 0
    n = max(1, int(math.exp(t - EULER_GAMMA)))
    while harmonic_number(n + 1) <= t:
        n += 1
    while n >= 1 and harmonic_number(n) > t:
        n -= 1
    return n


def nonauto_rhs(upsilon, t, model) -> np.ndarray:
    """Drift of the non-autonomous ratio ODE built from the transient means.

    The population vector is reconstructed from the ratios and the epoch
    count eta(t); the drift uses the exact, population-dependent mean matrix
    and collapses to the autonomous drift when the means equal their limits.
    """
    psi_c, theta_c, psi_a, theta_a = (float(v) for v in upsilon)
    n_eta = epochs_before(float(t))
    phi = (theta_c * n_eta, (psi_c - theta_c) * n_eta,
           theta_a * n_eta, (psi_a - theta_a) * n_eta)
    beta = theta_c / psi_c if psi_c > 0 else 0.0
    m = np.asarray(model.mean_matrix(phi), dtype=float)
    ind = 1.0 if psi_c > 0 else 0.0
    mxx, mxy = m[0, 0], m[0, 1]
    myx, myy = m[1, 0], m[1, 1]
    return np.array([
        (beta * (mxx + mxy) + (1 - beta) * (myy + myx) - 1.0) * ind - psi_c,
        (beta * (mxx - 1.0) + (1 - beta) * myx) * ind - theta_c,
        (beta * (mxx + mxy) + (1 - beta) * (myy + myx)) * ind - psi_a,
        (beta * mxx + (1 - beta) * myx) * ind - theta_a,
    ])


def make_h(m_inf, f_beta_inf=None):
    """Limit drift map h(beta) -> 4-vector for the autonomous ratio ODE.

    ``m_inf(beta)`` is the 2x2 limit mean matrix.  With multiple death
    kinds the x-death weight is f_beta_inf(beta) instead of beta itself.
    """
    def h(beta):
        f = beta if f_beta_inf is None else f_beta_inf(beta)
        m = np.asarray(m_inf(beta), dtype=float)
        mxx, mxy = m[0, 0], m[0, 1]
        myx, myy = m[1, 0], m[1, 1]
        return np.array([
            f * (mxx + mxy) + (1 - f) * (myy + myx) - 1.0,
            f * (mxx - 1.0) + (1 - f) * myx,
            f * (mxx + mxy) + (1 - f) * (myy + myx),
            f * mxx + (1 - f) * myx,
        ])
    return h


def make_autonomous_rhs(m_inf, f_beta_inf=None):
    """Autonomous drift g(upsilon) = h(beta) 1_{psi_c>0} - upsilon."""
    h = make_h(m_inf, f_beta_inf)

    def g(upsilon, t=0.0):
        upsilon = np.asarray(upsilon, dtype=float)
        psi_c, theta_c = upsilon[0], upsilon[1]
        if psi_c > 0:
            beta = theta_c / psi_c
            return h(beta) - upsilon
        return -upsilon
    return g


def finite_time_gap(sa_traj, ode: OdeTrajectory, n_start: int, T: float) -> float:
    """Sup distance between SA iterates and an ODE run over a time window.

    ``sa_traj`` holds the ratio iterates indexed from epoch 1; the ODE is
    assumed initialised at the epoch-``n_start`` iterate.  Returns
    sup { |Y_k - y(t_k - t_{n_start})|_inf : t_k in [t_n, t_n + T] } with
    t_n the exact harmonic partial sums.
    """
    sa = np.asarray(sa_traj, dtype=float)
    n_total = sa.shape[0]
    if n_start < 1 or n_start > n_total:
        raise ValueError("n_start outside trajectory")
    t_start = harmonic_number(n_start)
    k_end = epochs_before(t_start + T)
    if k_end > n_total:
        raise ValueError(
            f"trajectory too short: need {k_end} epochs to cover the window, "
            f"have {n_total}")
    gap = 0.0
    t_k = t_start
    for k in range(n_start, k_end + 1):
        if k > n_start:
            t_k += 1.0 / k
        ref = ode.at(t_k - t_start)
        gap = max(gap, float(np.max(np.abs(sa[k - 1] - np.atleast_1d(ref)))))
    return gap


CONVERGED_ATTRACTOR = "converged_attractor"
CONVERGED_SADDLE = "converged_saddle"
HOVERING = "hovering"
UNDECIDED = "undecided"


def hover_classify(betas, targets, delta: float = 0.01, delta1: float = 0.05,
                   tail_fraction: float = 0.5) -> str:
    """Finite-sample verdict on the tail behaviour of a scalar trajectory.

    ``targets`` is either a set of target values (treated as attractors) or
    a mapping value -> 'attractor'|'saddle'.  Over the trailing
    ``tail_fraction`` of the sequence: converged if every point stays within
    ``delta`` of one single target; hovering if the tail both enters the
    delta-neighbourhood and exits the delta1-neighbourhood of the target set
    at least twice each; undecided otherwise.  Heuristic only: the
    asymptotic notion has no finite-sample test.
    """
    if not 0 < delta < delta1:
        raise ValueError("need 0 < delta < delta1")
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction in (0, 1]")
    betas = np.asarray(betas, dtype=float)
    if betas.size == 0:
        raise ValueError("empty sequence")
    if isinstance(targets, dict):
        kinds = {float(k): v for k, v in targets.items()}
    else:
        kinds = {float(k): ATTRACTOR for k in targets}
    pts = np.array(sorted(kinds))
    tail = betas[-max(1, int(math.ceil(tail_fraction * betas.size))):]

    dists = np.abs(tail[:, None] - pts[None, :])
    dmin = dists.min(axis=1)
    for j, p in enumerate(pts):
        if np.all(dists[:, j] <= delta):
            kind = kinds[float(p)]
            return CONVERGED_SADDLE if kind == SADDLE else CONVERGED_ATTRACTOR

    enters = exits = 0
    inside = dmin[0] <= delta
    beyond = dmin[0] > delta1
    for d in dmin[1:]:
        if d <= delta and not inside:
            enters += 1
            inside = True
        elif d > delta:
            inside = False
        if d > delta1 and not beyond:
            exits += 1
            beyond = True
        elif d <= delta1:
            beyond = False
    if enters >= 2 and exits >= 2:
        return HOVERING
    return UNDECIDED
