"""Fake-post warning mechanisms: user-behaviour model, limit-proportion
fields, and the four mechanism designs.

A post propagates with fake/real tags; a warning shown to warning-seeking
users depends on the running fraction of fake tags.  For each mechanism the
scalar field g(beta) built from the limit mean matrix determines the
limiting tag proportions; designs pick the control parameters so that the
real post stays under a target while fake-post identification is maximised.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ode_engine import ScalarField, classify_scalar

FAKE, REAL = "F", "R"

EO, EA, EH, EH2, LEARNED = "eo", "ea", "eh", "eh2", "learned"


@dataclass(frozen=True)
class UserMix:
    """Proportions of non-participating, warning-ignoring, warning-seeking
    and adversarial users; must sum to one with mu2 > 0 (crowd signal)."""
    mu0: float
    mu1: float
    mu2: float
    mua: float

    def __post_init__(self):
        vals = (self.mu0, self.mu1, self.mu2, self.mua)
        if min(vals) < 0 or abs(sum(vals) - 1.0) > 1e-9:
            raise ValueError(f"user proportions must be nonnegative and sum to 1: {vals}")

    def require_crowd_signal(self):
        if self.mu2 <= 0:
            raise ValueError("crowd signal requires mu2 > 0")
        return self

    def without_adversaries(self) -> "UserMix":
        """Same wi/ws shares, adversaries folded into the non-participants."""
        return UserMix(mu0=self.mu0 + self.mua, mu1=self.mu1, mu2=self.mu2, mua=0.0)


@dataclass(frozen=True)
class PostModel:
    """Tagging/sharing parameters for both actualities of a post."""
    m_f: float                       # mean friend count
    eta_f: float                     # share prob., fake post
    eta_r: float                     # share prob., real post
    eta_a: float                     # adversary share prob.
    gamma: float                     # prior-knowledge warning offset
    rho: float                       # un-aided/aided linkage
    alpha_x_f: float                 # warning sensitivity, fake post, fake-tagged copy
    alpha_y_f: float
    alpha_x_r: float
    alpha_y_r: float
    share_bonus_k: float = 0.0       # transient k/Z^2 boost of the share prob.

    def __post_init__(self):
        if not (self.alpha_x_f > self.alpha_y_f > 0 and self.alpha_x_r > self.alpha_y_r > 0):
            raise ValueError("need alpha_x > alpha_y > 0 for each actuality")
        if not (self.alpha_x_f > self.alpha_x_r and self.alpha_y_f > self.alpha_y_r):
            raise ValueError("fake-post sensitivities must dominate real-post ones")
        if not (self.eta_a > self.eta_f > self.eta_r > 0):
            raise ValueError("need eta_a > eta_F > eta_R > 0")
        if not (0 < self.rho < 1) or self.gamma <= 0:
            raise ValueError("need rho in (0,1) and gamma > 0")

    def alpha_x(self, u: str) -> float:
        return self.alpha_x_f if u == FAKE else self.alpha_x_r

    def alpha_y(self, u: str) -> float:
        return self.alpha_y_f if u == FAKE else self.alpha_y_r

    def eta(self, u: str) -> float:
        return self.eta_f if u == FAKE else self.eta_r

    @property
    def w_bar(self) -> float:
        """Largest w keeping the warning response linear for every post."""
        return 1.0 / self.alpha_x_f - self.gamma

    @property
    def w_h2(self) -> float:
        """Enhanced-2 scale: linear response guaranteed for the real post only."""
        return 1.0 / self.alpha_x_r - self.gamma


@dataclass
class MechanismDesign:
    kind: str
    w: float
    b: float
    zeta: float = 1.0
    delta_target: float = float("nan")   # constraint actually enforced (delta or delta_a)
    iqos_mode: bool = True
    predicted_limits: dict = field(default_factory=dict)   # u -> sorted roots
    bounds: dict = field(default_factory=dict)             # u -> (lower, upper)
    qos: float = float("nan")
    iqos: float = float("nan")
    constraint_ok: bool = True
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "kind": self.kind, "w": self.w, "b": self.b, "zeta": self.zeta,
            "delta_target": self.delta_target, "iqos_mode": self.iqos_mode,
            "predicted_limits": {u: list(v) for u, v in self.predicted_limits.items()},
            "bounds": {u: list(v) for u, v in self.bounds.items()},
            "qos": self.qos, "iqos": self.iqos,
            "constraint_ok": self.constraint_ok, "extras": self.extras,
        }


def delta_a_value(delta: float, post: PostModel, mix: UserMix) -> float:
    """Real-post target rescaled to count only non-adversarial tags."""
    non_adv = (mix.mu1 + mix.mu2) * post.eta_r
    return delta * non_adv / (non_adv + mix.mua * post.eta_a)


def iqos_scale(post: PostModel, mix: UserMix) -> float:
    """Multiplier relating the overall and the non-adversarial fake-tag
    fractions for the fake post."""
    non_adv = (mix.mu1 + mix.mu2) * post.eta_f
    return (non_adv + mix.mua * post.eta_a) / non_adv


def eo_warning(beta: float, w: float, b: float, gamma: float) -> float:
    """w*beta/(beta + b(1-beta)) + gamma; at beta=b=0 the ratio limit is 0."""
    if beta <= 0.0:
        return gamma if b > 0 else gamma
    denom = beta + b * (1.0 - beta)
    return w * beta / denom + gamma


def warning_value(kind: str, beta: float, design: MechanismDesign,
                  post: PostModel, mix: UserMix) -> float:
    """Warning level shown at fake-tag fraction beta under a mechanism."""
    base = eo_warning(beta, design.w, design.b, post.gamma)
    if kind in (EO, EH2, LEARNED):
        return base
    boost = (beta * mix.mua * post.eta_a
             / (mix.mu2 * post.eta_f
                * (beta * post.alpha_x_f + (1.0 - beta) * post.alpha_y_f)))
    if kind == EA:
        return base + boost
    if kind == EH:
        return design.zeta * (base + boost)
    raise ValueError(f"unknown mechanism kind {kind!r}")


def gbeta_wm(beta: float, kind: str, design: MechanismDesign,
             post: PostModel, mix: UserMix, u: str) -> float:
    """Drift of the tag-proportion ODE for a u-post under the mechanism."""
    omega = warning_value(kind, beta, design, post, mix)
    ax, ay = post.alpha_x(u), post.alpha_y(u)
    eta_u, mf = post.eta(u), post.m_f
    mu1, mu2, mua = mix.mu1, mix.mu2, mix.mua
    rho = post.rho
    core = (-beta * mu2
            - beta * mu1 * (1.0 - ax * rho)
            + (1.0 - beta) * mu1 * rho * ay
            + mu2 * (beta * min(omega * ax, 1.0)
                     + (1.0 - beta) * min(omega * ay, 1.0)))
    return core * mf * eta_u - beta * mua * mf * post.eta_a


def _warning_kinks(kind, design, post, mix, u) -> list:
    """Abscissas where min(omega*alpha, 1) switches; omega is increasing in
    beta for every mechanism here, so each threshold has at most one root."""
    kinks = [0.0, 1.0]
    for alpha in (post.alpha_x(u), post.alpha_y(u)):
        lo, hi = 0.0, 1.0
        f = lambda b: warning_value(kind, b, design, post, mix) * alpha - 1.0
        f_lo, f_hi = f(1e-12), f(1.0)
        if f_lo < 0 < f_hi:
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if f(mid) < 0:
                    lo = mid
                else:
                    hi = mid
            kinks.append(0.5 * (lo + hi))
    return sorted(set(kinks))


def gbeta_field(kind, design, post, mix, u) -> ScalarField:
    return ScalarField(
        g=lambda b: gbeta_wm(b, kind, design, post, mix, u),
        kinks=_warning_kinks(kind, design, post, mix, u),
    )


def beta_bounds(post: PostModel, mix: UserMix, u: str) -> tuple:
    """A-priori range (lower, upper] containing every limit proportion."""
    ax, ay = post.alpha_x(u), post.alpha_y(u)
    eta_u = post.eta(u)
    q = (mix.mu2 + mix.mu1 * (1.0 - (ax - ay) * post.rho)) * eta_u + mix.mua * post.eta_a
    lower = mix.mu1 * post.rho * ay * eta_u / q
    upper = (mix.mu2 + mix.mu1 * post.rho * ay) * eta_u / q
    return lower, upper


def limit_proportions(kind, design: MechanismDesign, post: PostModel,
                      mix: UserMix, grid_points: int = 4000,
                      refine_tol: float = 1e-12) -> MechanismDesign:
    """Solve the limit proportions for both actualities and fill in the
    design's predicted limits, bounds, QoS and i-QoS."""
    mix.require_crowd_signal()
    roots, bounds = {}, {}
    for u in (FAKE, REAL):
        rep = classify_scalar(gbeta_field(kind, design, post, mix, u),
                              grid_points=grid_points, refine_tol=refine_tol)
        rs = sorted(e.beta for e in rep.equilibria)
        if not rs:
            raise RuntimeError(f"no limit proportion found for {u}-post (internal error)")
        roots[u] = rs
        bounds[u] = beta_bounds(post, mix, u)
    design.predicted_limits = roots
    design.bounds = bounds
    design.qos = roots[FAKE][0]
    design.iqos = design.qos * iqos_scale(post, mix)
    return design


def _b_formula(w: float, target: float, post: PostModel, mix: UserMix) -> float:
    """Closed-form b making the real-post limit equal the target, given w."""
    d = target
    mixterm = d * post.alpha_x_r + (1.0 - d) * post.alpha_y_r
    denom = (d * ((mix.mu1 + mix.mu2) * post.eta_r + mix.mua * post.eta_a)
             - post.eta_r * (mix.mu1 * post.rho + mix.mu2 * post.gamma) * mixterm)
    if denom <= 0:
        raise ValueError("constraint unattainable: real-post target below reachable range")
    p = post.eta_r * mix.mu2 * mixterm / denom
    b = (d / (1.0 - d)) * (w * p - 1.0)
    if b < 0:
        raise ValueError("constraint unattainable: negative control (target too large for w)")
    return b


def _single_root(kind, design, post, mix, u) -> float:
    rep = classify_scalar(gbeta_field(kind, design, post, mix, u),
                          grid_points=4000)
    return sorted(e.beta for e in rep.equilibria)[0]


def optimize_eo(post: PostModel, mix: UserMix, delta: float,
                iqos: bool = True) -> MechanismDesign:
    """Optimal extended-original mechanism: w at its cap; b either zero or
    the value that pins the real-post limit exactly at the target."""
    if not 0 < delta < 1:
        raise ValueError("delta in (0,1)")
    target = delta_a_value(delta, post, mix) if iqos else delta
    w_star = post.w_bar
    probe = MechanismDesign(kind=EO, w=w_star, b=0.0, delta_target=target, iqos_mode=iqos)
    root_r0 = _single_root(EO, probe, post, mix, REAL)
    if root_r0 > target:
        b_star = _b_formula(w_star, target, post, mix)
    else:
        b_star = 0.0
    design = MechanismDesign(kind=EO, w=w_star, b=b_star,
                             delta_target=target, iqos_mode=iqos)
    limit_proportions(EO, design, post, mix)
    design.constraint_ok = design.predicted_limits[REAL][-1] <= target + 1e-7
    return design


def design_ea(post: PostModel, mix: UserMix, delta: float,
              iqos: bool = True) -> tuple:
    """Adversary-effect-eliminating mechanism plus its small-mua threshold.

    The warning gets an additive boost that makes the fake-post field match
    the no-adversary optimum; (w, b) are the no-adversary optimal pair.
    Returns (design, Delta_a threshold on mua for full elimination).
    """
    target = delta_a_value(delta, post, mix) if iqos else delta
    mix_na = mix.without_adversaries()
    eo_na = optimize_eo(post, mix_na, delta, iqos=iqos)
    beta_o_na = eo_na.qos
    w = post.w_bar
    probe = MechanismDesign(kind=EA, w=w, b=0.0, delta_target=target, iqos_mode=iqos)
    root_r0 = _single_root(EA, probe, post, mix, REAL)
    b = eo_na.b if root_r0 > target else 0.0
    design = MechanismDesign(kind=EA, w=w, b=b, delta_target=target, iqos_mode=iqos)
    limit_proportions(EA, design, post, mix)
    omega_na = eo_warning(beta_o_na, w, eo_na.b, post.gamma)
    delta_a_thresh = (mix.mu2 * post.eta_f * (1.0 / post.alpha_x_f - omega_na)
                      * ((beta_o_na * post.alpha_x_f + (1 - beta_o_na) * post.alpha_y_f)
                         / (beta_o_na * post.eta_a)))
    design.constraint_ok = design.predicted_limits[REAL][-1] <= target + 1e-7
    design.extras = {"beta_o_na": beta_o_na, "delta_a_threshold": delta_a_thresh,
                     "b_na": eo_na.b}
    return design, delta_a_thresh


def design_eh(post: PostModel, mix: UserMix, delta: float,
              iqos: bool = True) -> MechanismDesign:
    """Enhanced mechanism: the adversary-eliminating warning scaled by the
    largest factor that keeps the real post under the target."""
    target = delta_a_value(delta, post, mix) if iqos else delta
    ea, _ = design_ea(post, mix, delta, iqos=iqos)
    omega_a_delta = warning_value(EA, target, ea, post, mix)
    d = target
    eta_r = post.eta_r
    num = (d * (mix.mu2 * eta_r + mix.mu1 * (1.0 - post.alpha_x_r * post.rho) * eta_r
                + mix.mua * post.eta_a)
           - (1.0 - d) * mix.mu1 * post.rho * post.alpha_y_r * eta_r)
    den = mix.mu2 * omega_a_delta * (d * post.alpha_x_r + (1.0 - d) * post.alpha_y_r) * eta_r
    zeta_bar = num / den
    beta_low_f = beta_bounds(post, mix, FAKE)[0]
    if zeta_bar < 1.0 / (post.alpha_y_r * omega_a_delta) or (beta_low_f == 0.0 and ea.b == 0.0):
        zeta = zeta_bar
    else:
        omega_a_low = warning_value(EA, beta_low_f, ea, post, mix)
        zeta = 1.0 / (omega_a_low * post.alpha_y_f)
    design = MechanismDesign(kind=EH, w=ea.w, b=ea.b, zeta=zeta,
                             delta_target=target, iqos_mode=iqos)
    limit_proportions(EH, design, post, mix)
    design.constraint_ok = (design.predicted_limits[REAL][-1] <= target + 1e-7
                            and zeta > 1.0)
    design.extras = {"zeta_bar": zeta_bar, "ea_qos": ea.qos, "ea_iqos": ea.iqos}
    return design


def design_eh2(post: PostModel, mix: UserMix, delta: float,
               iqos: bool = True) -> MechanismDesign:
    """Enhanced-2 mechanism: the original warning with the larger scale
    1/alpha_x^R - gamma, keeping a unique real-post limit at the target."""
    target = delta_a_value(delta, post, mix) if iqos else delta
    w = post.w_h2
    probe = MechanismDesign(kind=EH2, w=w, b=0.0, delta_target=target, iqos_mode=iqos)
    root_r0 = _single_root(EH2, probe, post, mix, REAL)
    b = _b_formula(w, target, post, mix) if root_r0 > target else 0.0
    design = MechanismDesign(kind=EH2, w=w, b=b, delta_target=target, iqos_mode=iqos)
    limit_proportions(EH2, design, post, mix)
    design.constraint_ok = design.predicted_limits[REAL][-1] <= target + 1e-7
    return design


def design_for_kind(kind: str, post: PostModel, mix: UserMix, delta: float,
                    iqos: bool = True) -> MechanismDesign:
    if kind == EO:
        return optimize_eo(post, mix, delta, iqos)
    if kind == EA:
        return design_ea(post, mix, delta, iqos)[0]
    if kind == EH:
        return design_eh(post, mix, delta, iqos)
    if kind == EH2:
        return design_eh2(post, mix, delta, iqos)
    raise ValueError(f"unknown mechanism kind {kind!r}")


def learned_design(w: float, b: float, post: PostModel, mix: UserMix,
                   delta: float, iqos: bool = True) -> MechanismDesign:
    """Wrap learned (w, b) as an eo-type mechanism and solve its limits."""
    target = delta_a_value(delta, post, mix) if iqos else delta
    design = MechanismDesign(kind=LEARNED, w=w, b=b, delta_target=target,
                             iqos_mode=iqos)
    limit_proportions(LEARNED, design, post, mix)
    return design
