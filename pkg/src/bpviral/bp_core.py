"""Embedded-chain simulator for two-type, total-current population-dependent
continuous-time Markov branching processes.

State is the tuple (cx, cy, ax, ay): living counts and ever-born totals per
type.  Death events arrive at the minimum of per-individual exponential
clocks (possibly several death kinds per type); on each death the dying
type's current count drops by one and offspring of both types are added.
The scaled ratios (S_n/n, Cx_n/n, Sa_n/n, Ax_n/n) follow a 1/n
stochastic-approximation recursion analysed elsewhere in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def make_rng(seed: int, replication: int = 0) -> np.random.Generator:
    """Counter-based generator; replication r gets seed XOR r so parallel
    runs reproduce independently of scheduling."""
    return np.random.Generator(np.random.Philox(key=(int(seed) ^ int(replication)) & (2**64 - 1)))


@dataclass(frozen=True)
class PopulationState:
    cx: int
    cy: int
    ax: int
    ay: int
    n: int = 0

    @property
    def extinct(self) -> bool:
        return self.cx + self.cy == 0

    @property
    def s_current(self) -> int:
        return self.cx + self.cy

    @property
    def s_total(self) -> int:
        return self.ax + self.ay

    @property
    def beta(self) -> float:
        s = self.cx + self.cy
        return self.cx / s if s > 0 else 0.0

    def validate(self):
        if min(self.cx, self.cy) < 0 or self.ax < self.cx or self.ay < self.cy:
            raise ValueError(f"invalid population state {self}")
        return self


@dataclass(frozen=True)
class RatioVector:
    """Per-epoch scaled counts (S/n, Cx/n, Sa/n, Ax/n) and the proportion.

    beta is defined as 0 when psi_c = 0: the ratio ODE there is pure decay
    and the proportion is immaterial.
    """
    psi_c: float
    theta_c: float
    psi_a: float
    theta_a: float

    @property
    def beta(self) -> float:
        return self.theta_c / self.psi_c if self.psi_c > 0 else 0.0

    def validate(self):
        ok = (-1e-12 <= self.theta_c <= self.psi_c + 1e-12
              and self.psi_c <= self.psi_a + 1e-12
              and self.theta_a <= self.psi_a + 1e-12)
        if not ok:
            raise ValueError(f"ratio vector outside the invariant set: {self}")
        return self

    def as_array(self) -> np.ndarray:
        return np.array([self.psi_c, self.theta_c, self.psi_a, self.theta_a])


@dataclass(frozen=True)
class OffspringSample:
    parent_type: str          # 'x' or 'y'
    death_kind: int = 0
    own: int = 0              # own-type offspring, always >= 0
    cross: int = 0            # other-type offspring; < 0 models an attack


@dataclass
class DeathModel:
    """Death kinds and their (possibly population-dependent) rates.

    ``rate(ptype, kind, state)`` must return a strictly positive value; a
    configured lower bound ``lambda_floor`` is asserted, the thesis never
    fixes one numerically.
    """
    kinds_x: tuple = (0,)
    kinds_y: tuple = (0,)
    rate: callable = None
    lambda_floor: float = 1e-12

    def __post_init__(self):
        if self.rate is None:
            self.rate = lambda ptype, kind, state: 1.0

    def rate_checked(self, ptype, kind, state):
        lam = float(self.rate(ptype, kind, state))
        if not lam > 0 or lam < self.lambda_floor:
            raise ValueError(f"death rate {lam} below floor for ({ptype},{kind})")
        return lam


def death_probabilities(state: PopulationState, deaths: DeathModel) -> dict:
    """P(next death is of type i by kind d | state), memoryless-minimum rule."""
    if state.extinct:
        raise ValueError("absorbing state has no death event")
    beta = state.beta
    probs = {}
    denom = 0.0
    for d in deaths.kinds_x:
        w = deaths.rate_checked("x", d, state) * beta
        probs[("x", d)] = w
        denom += w
    for d in deaths.kinds_y:
        w = deaths.rate_checked("y", d, state) * (1.0 - beta)
        probs[("y", d)] = w
        denom += w
    return {k: v / denom for k, v in probs.items()}


def step_embedded(state: PopulationState, sample: OffspringSample) -> PopulationState:
    """Apply one death event; extinction is absorbing.

    Deaths never decrease totals (the -1 hits the current count only), but a
    negative cross term removes the attacked individuals from the other
    type's current AND total count: acquisition changes their type.
    """
    if state.extinct:
        raise ValueError("absorbing state has no death event")
    if sample.own < 0:
        raise ValueError("invalid offspring sample: own-type offspring negative")
    if sample.parent_type == "x":
        cx = state.cx - 1 + sample.own
        ax = state.ax + sample.own
        cy = state.cy + sample.cross
        ay = state.ay + sample.cross
    else:
        cy = state.cy - 1 + sample.own
        ay = state.ay + sample.own
        cx = state.cx + sample.cross
        ax = state.ax + sample.cross
    if cx < 0 or cy < 0:
        raise ValueError("invalid offspring sample: cross term drives a count negative")
    return PopulationState(cx=cx, cy=cy, ax=ax, ay=ay, n=state.n + 1)


@dataclass
class MeanModel:
    """Mean structure of the offspring law plus a concrete sampler.

    ``mean_matrix(phi)`` maps a population tuple (cx, cy, ax, ay) to the 2x2
    conditional mean matrix [[m_xx, m_xy], [m_yx, m_yy]]; ``limit_mean_matrix``
    is its proportion-dependent limit.  ``sampler(ptype, kind, state, rng)``
    draws an OffspringSample consistent with those means.
    """
    mean_matrix: callable
    limit_mean_matrix: callable
    sampler: callable
    offspring_low_mean: float = 0.0    # E[lower offspring bound], dichotomy threshold


def make_poisson_sampler(mean_matrix, cap: int | None = None):
    """Independent Poisson offspring with population-dependent means.

    Means are clamped at zero; a cap (if given) truncates draws so the
    square-integrable upper bound of the model assumptions holds.
    """
    def sampler(ptype, kind, state, rng):
        m = np.asarray(mean_matrix((state.cx, state.cy, state.ax, state.ay)), dtype=float)
        if ptype == "x":
            own_mean, cross_mean = m[0, 0], m[0, 1]
        else:
            own_mean, cross_mean = m[1, 1], m[1, 0]
        own = int(rng.poisson(max(own_mean, 0.0)))
        cross = int(rng.poisson(max(cross_mean, 0.0)))
        if cap is not None:
            own = min(own, cap)
            cross = min(cross, cap)
        return OffspringSample(parent_type=ptype, death_kind=kind, own=own, cross=cross)
    return sampler


def constant_matrix_model(m: np.ndarray, cap: int | None = None) -> MeanModel:
    """Population-independent two-type model with mean matrix m."""
    m = np.asarray(m, dtype=float)
    return MeanModel(
        mean_matrix=lambda phi: m,
        limit_mean_matrix=lambda beta: m,
        sampler=make_poisson_sampler(lambda phi: m, cap=cap),
    )


def single_type_ramp_model(m0: float = 3.0, slope: float = 0.002,
                           floor: float = 1.2, a_break: float = 400.0,
                           cap: int | None = None) -> MeanModel:
    """Single-type model whose mean offspring decays linearly in the total
    population until a breakpoint, then stays at a super-critical floor."""
    def mean_matrix(phi):
        ax = phi[2]
        mxx = m0 - slope * ax if ax <= a_break else floor
        return np.array([[mxx, 0.0], [0.0, 0.0]])

    def limit_mean_matrix(beta):
        return np.array([[floor, 0.0], [0.0, 0.0]])

    return MeanModel(
        mean_matrix=mean_matrix,
        limit_mean_matrix=limit_mean_matrix,
        sampler=make_poisson_sampler(mean_matrix, cap=cap),
        offspring_low_mean=floor,
    )


@dataclass
class Trajectory:
    """Recorded embedded-chain path.  ``epoch`` holds the recorded epoch
    indices (1-based; possibly thinned), parallel to the count arrays.
    Per-event increments (parent/own/cross) are kept only for unthinned runs.
    """
    epoch: np.ndarray
    tau: np.ndarray
    cx: np.ndarray
    cy: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    s0: tuple = (0, 0, 0, 0)          # initial (cx, cy, ax, ay)
    extinct: bool = False
    parent: np.ndarray | None = None  # 1 for x-death, 0 for y-death
    own: np.ndarray | None = None
    cross: np.ndarray | None = None

    def __len__(self):
        return len(self.epoch)

    def ratios(self) -> np.ndarray:
        """Upsilon_n = (S_n/n, Cx_n/n, Sa_n/n, Ax_n/n) at the recorded epochs."""
        n = self.epoch.astype(float)
        return np.column_stack([
            (self.cx + self.cy) / n,
            self.cx / n,
            (self.ax + self.ay) / n,
            self.ax / n,
        ])

    def ratio_vectors(self):
        """Recorded epochs as RatioVector objects."""
        return [RatioVector(*row) for row in self.ratios()]

    def betas(self) -> np.ndarray:
        s = self.cx + self.cy
        with np.errstate(invalid="ignore", divide="ignore"):
            b = np.where(s > 0, self.cx / np.maximum(s, 1), 0.0)
        return b

    def rows(self):
        """Per recorded epoch: epoch,tau,cx,cy,ax,ay,psi_c,theta_c,psi_a,theta_a,beta."""
        ups = self.ratios()
        betas = self.betas()
        for i in range(len(self.epoch)):
            yield (int(self.epoch[i]), float(self.tau[i]), int(self.cx[i]),
                   int(self.cy[i]), int(self.ax[i]), int(self.ay[i]),
                   float(ups[i, 0]), float(ups[i, 1]), float(ups[i, 2]),
                   float(ups[i, 3]), float(betas[i]))


CSV_HEADER = "epoch,tau,cx,cy,ax,ay,psi_c,theta_c,psi_a,theta_a,beta"


def simulate(model: MeanModel, deaths: DeathModel, init: PopulationState,
             max_events: int = 1_000_000, seed: int = 0,
             record_every: int = 1, rng: np.random.Generator | None = None) -> Trajectory:
    """Run the embedded chain until extinction or the event cap.

    Inter-death times are exponential with the total rate summed over living
    individuals and death kinds; the trajectory is reproducible under a
    fixed seed.  ``record_every=k`` keeps every k-th epoch (and the last).
    """
    if max_events < 1:
        raise ValueError("max_events must be >= 1")
    init.validate()
    if rng is None:
        rng = make_rng(seed)
    state = init
    keep_events = record_every == 1
    rec_epoch, rec_tau = [], []
    rec_cx, rec_cy, rec_ax, rec_ay = [], [], [], []
    ev_parent, ev_own, ev_cross = [], [], []
    t = 0.0
    kinds_x, kinds_y = deaths.kinds_x, deaths.kinds_y
    ratefn = deaths.rate_checked
    sample_offspring = model.sampler
    extinct = state.extinct
    for n in range(1, max_events + 1):
        if state.extinct:
            extinct = True
            break
        wx = [ratefn("x", d, state) for d in kinds_x] if state.cx else []
        wy = [ratefn("y", d, state) for d in kinds_y] if state.cy else []
        total_rate = state.cx * sum(wx) + state.cy * sum(wy)
        t += rng.exponential(1.0 / total_rate)
        # categorical draw over (type, kind) with weights count * rate
        u = rng.random() * total_rate
        acc = 0.0
        ptype, kind = "y", kinds_y[-1] if kinds_y else 0
        done = False
        for d, w in zip(kinds_x, wx):
            acc += state.cx * w
            if u <= acc:
                ptype, kind = "x", d
                done = True
                break
        if not done:
            for d, w in zip(kinds_y, wy):
                acc += state.cy * w
                if u <= acc:
                    ptype, kind = "y", d
                    break
        sample = sample_offspring(ptype, kind, state, rng)
        state = step_embedded(state, sample)
        if keep_events:
            ev_parent.append(1 if ptype == "x" else 0)
            ev_own.append(sample.own)
            ev_cross.append(sample.cross)
        if n % record_every == 0 or state.extinct or n == max_events:
            rec_epoch.append(n)
            rec_tau.append(t)
            rec_cx.append(state.cx)
            rec_cy.append(state.cy)
            rec_ax.append(state.ax)
            rec_ay.append(state.ay)
        if state.extinct:
            extinct = True
            break
    return Trajectory(
        epoch=np.asarray(rec_epoch, dtype=np.int64),
        tau=np.asarray(rec_tau, dtype=float),
        cx=np.asarray(rec_cx, dtype=np.int64),
        cy=np.asarray(rec_cy, dtype=np.int64),
        ax=np.asarray(rec_ax, dtype=np.int64),
        ay=np.asarray(rec_ay, dtype=np.int64),
        s0=(init.cx, init.cy, init.ax, init.ay),
        extinct=extinct,
        parent=np.asarray(ev_parent, dtype=np.int64) if keep_events else None,
        own=np.asarray(ev_own, dtype=np.int64) if keep_events else None,
        cross=np.asarray(ev_cross, dtype=np.int64) if keep_events else None,
    )


def sa_recursion_ratios(traj: Trajectory) -> np.ndarray:
    """Recompute the ratio sequence through the incremental 1/n recursion.

    Equals the direct ratio computation to machine precision; used as a
    cross-check of the stochastic-approximation form of the dynamics.
    The first epoch absorbs the initial population (the 1/n recursion is
    an exact identity only from the second death on).  Requires an
    unthinned trajectory.
    """
    if traj.parent is None:
        raise ValueError("per-event records required (record_every=1)")
    cx0, cy0, ax0, ay0 = traj.s0
    ups = np.empty((len(traj.parent), 4))
    psi_c = float(cx0 + cy0)
    theta_c = float(cx0)
    psi_a = float(ax0 + ay0)
    theta_a = float(ax0)
    for i in range(len(traj.parent)):
        n = i + 1
        alive = 1.0 if psi_c > 0 else 0.0
        hx = float(traj.parent[i])
        own = float(traj.own[i])
        cross = float(traj.cross[i])
        total = own + cross
        l_psi_c = (total - 1.0) * alive
        l_theta_c = (hx * (own - 1.0) + (1.0 - hx) * cross) * alive
        l_psi_a = total * alive
        l_theta_a = (hx * own + (1.0 - hx) * cross) * alive
        if n == 1:
            psi_c += l_psi_c
            theta_c += l_theta_c
            psi_a += l_psi_a
            theta_a += l_theta_a
        else:
            psi_c += (l_psi_c - psi_c) / n
            theta_c += (l_theta_c - theta_c) / n
            psi_a += (l_psi_a - psi_a) / n
            theta_a += (l_theta_a - theta_a) / n
        ups[i] = (psi_c, theta_c, psi_a, theta_a)
    return ups


@dataclass
class DichotomyStats:
    replications: int
    extinct_fraction: float
    survivor_rates: np.ndarray          # fitted growth rate of S_n vs tau_n per survivor
    rate_threshold: float               # lambda_floor * (E[lower offspring] - 1)
    all_grew_or_died: bool              # every survivor had S_cap >= S_{cap/2}

    @property
    def mean_rate(self):
        return float(np.mean(self.survivor_rates)) if len(self.survivor_rates) else float("nan")

    @property
    def rate_se(self):
        k = len(self.survivor_rates)
        return float(np.std(self.survivor_rates, ddof=1) / math.sqrt(k)) if k > 1 else float("inf")


def fit_growth_rate(s: np.ndarray, tau: np.ndarray, tail: float = 0.5) -> float:
    """Least-squares slope of ln S_n against tau_n.

    Only the trailing ``tail`` fraction of the path enters the fit so the
    small-population transient does not bias the exponent.
    """
    mask = s > 0
    y = np.log(s[mask])
    x = tau[mask]
    start = int((1.0 - tail) * len(x))
    x, y = x[start:], y[start:]
    x = x - x.mean()
    denom = float(np.dot(x, x))
    if denom == 0.0:
        return 0.0
    return float(np.dot(x, y - y.mean()) / denom)


def ratios_and_dichotomy(traj: Trajectory, lam: float = 1.0,
                         offspring_low_mean: float | None = None):
    """Ratio sequence plus the single-path dichotomy summary.

    Returns (ratios array, dict) where the dict reports extinction, the
    fitted exponential growth rate of the sum current population against
    wall-clock time, and whether the path kept growing (S at the cap at
    least its mid-path value).
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    ups = traj.ratios()
    s = (traj.cx + traj.cy).astype(float)
    mid = s[len(s) // 2] if len(s) > 1 else s[0]
    info = {
        "extinct": bool(traj.extinct),
        "growth_rate": 0.0 if traj.extinct else fit_growth_rate(s, traj.tau),
        "grew": bool(traj.extinct) or bool(s[-1] >= mid),
    }
    if offspring_low_mean is not None:
        info["rate_threshold"] = lam * (offspring_low_mean - 1.0)
    return ups, info


def dichotomy_study(offspring_mean: float, s0: int, replications: int,
                    cap: int, seed: int, lam: float = 1.0,
                    chunk: int = 200) -> DichotomyStats:
    """Monte-Carlo dichotomy statistics for the population-independent case.

    When both types share one death kind with a common rate and the total
    offspring per death is an i.i.d. Poisson draw, the sum current
    population is a random walk S_n = S_{n-1} - 1 + Gamma_n, which this
    routine simulates in vectorised blocks (the event loop gives the same
    law; see the regression tests).  Each replication is classified extinct
    or still-growing at the cap, and survivors get a fitted growth rate of
    S_n against tau_n.
    """
    rng = make_rng(seed)
    n_extinct = 0
    rates = []
    all_grew = True
    done = 0
    while done < replications:
        b = min(chunk, replications - done)
        incr = rng.poisson(offspring_mean, size=(b, cap)).astype(np.int64) - 1
        s = s0 + np.cumsum(incr, axis=1)
        hit = s <= 0
        ext_idx = np.where(hit.any(axis=1), hit.argmax(axis=1), cap)
        exp_draws = rng.exponential(size=(b, cap))
        s_prev = np.empty_like(s)
        s_prev[:, 0] = s0
        s_prev[:, 1:] = s[:, :-1]
        for i in range(b):
            k = int(ext_idx[i])
            if k < cap:
                n_extinct += 1
                continue
            path = s[i].astype(float)
            tau = np.cumsum(exp_draws[i] / (lam * s_prev[i]))
            if path[-1] < path[cap // 2]:
                all_grew = False
            rates.append(fit_growth_rate(path, tau))
        done += b
    return DichotomyStats(
        replications=replications,
        extinct_fraction=n_extinct / replications,
        survivor_rates=np.asarray(rates),
        rate_threshold=lam * (offspring_mean - 1.0),
        all_grew_or_died=all_grew,
    )
