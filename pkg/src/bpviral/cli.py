"""Command-line interface: reproducible experiments over all model families.

Subcommands: ``bp simulate|ratios``, ``attack analyze|simulate``,
``wm optimize|design|learn|simulate``, ``market
fit|simulate|closed-form|metrics|propagate``, ``game
design|verify|simulate|study``.  Parameters resolve as defaults < JSON
config (--config) < explicit flags; every run echoes its fully resolved
parameters (seed included) into a sidecar JSON next to the output so the
artifact can be regenerated byte-identically.
"""

from __future__ import annotations

import argparse
import json
import math
import secrets
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import bp_attack, bp_core, game, market, market_graph, wm, wm_dynamics
from .market_graph import parse_graph

FMT = "{:.12g}"


def _fmt(v):
    if isinstance(v, float):
        return FMT.format(v)
    return str(v)


def write_csv(path, header, rows):
    """Stable column order, floats at 12 significant digits."""
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def emit_plotdata(path, header, rows):
    write_csv(path, header, rows)


def _write_sidecar(out, command, params):
    if out is None:
        return
    sidecar = Path(str(out) + ".config.json")
    with open(sidecar, "w") as fh:
        json.dump({"command": command, "params": params}, fh, indent=2, sort_keys=True)


def _emit_json(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, float) and math.isnan(v):
        return None
    raise TypeError(f"not JSON serialisable: {type(v)}")


# ---------------------------------------------------------------------------
# parameter resolution

class ParamError(ValueError):
    pass


def resolve(args, config_section, spec):
    """Merge defaults, config file values and explicit flags (flags win).

    ``spec`` maps parameter name -> (type, default); a default of
    ``REQUIRED`` makes the parameter mandatory.  Unknown config keys are
    rejected.
    """
    out = {}
    cfg = dict(config_section or {})
    unknown = set(cfg) - set(spec)
    if unknown:
        raise ParamError(f"unknown config keys: {sorted(unknown)}")
    for name, (typ, default) in spec.items():
        flag_val = getattr(args, name.replace("-", "_"), None)
        if flag_val is not None:
            out[name] = flag_val
        elif name in cfg:
            out[name] = typ(cfg[name]) if cfg[name] is not None else None
        elif default is REQUIRED:
            raise ParamError(f"missing required parameter: {name}")
        else:
            out[name] = default
    return out


REQUIRED = object()


def _load_config(args):
    path = getattr(args, "config", None)
    if not path:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    return data.get("params", data)


def _seed_of(params):
    if params.get("seed") is None:
        params["seed"] = secrets.randbits(32)
    return int(params["seed"])


# ---------------------------------------------------------------------------
# bp

BP_SIM_SPEC = {
    "model": (str, "ramp"),
    "m0": (float, 3.0), "slope": (float, 0.002), "floor": (float, 1.2),
    "a-break": (float, 400.0),
    "m-xx": (float, 1.5), "m-xy": (float, 0.5), "m-yx": (float, 0.5), "m-yy": (float, 1.5),
    "cx0": (int, 2), "cy0": (int, 0),
    "max-events": (int, 10_000), "record-every": (int, 1),
    "seed": (int, None), "replications": (int, 1), "jobs": (int, 1),
    "out": (str, None),
}


def _bp_model(p):
    if p["model"] == "ramp":
        return bp_core.single_type_ramp_model(p["m0"], p["slope"], p["floor"], p["a-break"])
    if p["model"] == "constant":
        m = np.array([[p["m-xx"], p["m-xy"]], [p["m-yx"], p["m-yy"]]])
        return bp_core.constant_matrix_model(m)
    raise ParamError(f"unknown bp model {p['model']!r}")


def _run_bp_replication(argpack):
    p, rep = argpack
    model = _bp_model(p)
    deaths = bp_core.DeathModel()
    init = bp_core.PopulationState(cx=p["cx0"], cy=p["cy0"], ax=p["cx0"], ay=p["cy0"])
    traj = bp_core.simulate(model, deaths, init, max_events=p["max-events"],
                            seed=p["seed"] ^ rep, record_every=p["record-every"])
    return rep, list(traj.rows())


def cmd_bp_simulate(args):
    p = resolve(args, _load_config(args), BP_SIM_SPEC)
    _seed_of(p)
    packs = [(p, r) for r in range(p["replications"])]
    if p["jobs"] > 1 and len(packs) > 1:
        with ProcessPoolExecutor(max_workers=p["jobs"]) as ex:
            results = list(ex.map(_run_bp_replication, packs))
    else:
        results = [_run_bp_replication(a) for a in packs]
    results.sort()
    out = p["out"]
    for rep, rows in results:
        path = _rep_path(out, rep, p["replications"])
        if path is None:
            for row in rows[:10]:
                print(",".join(_fmt(v) for v in row))
        else:
            write_csv(path, bp_core.CSV_HEADER, rows)
    _write_sidecar(out, "bp simulate", p)
    return 0


def _rep_path(out, rep, total):
    if out is None:
        return None
    if total == 1:
        return out
    stem = Path(out)
    return stem.with_name(f"{stem.stem}_rep{rep:03d}{stem.suffix}")


BP_RATIOS_SPEC = {
    "in": (str, REQUIRED), "lam": (float, 1.0),
    "offspring-low-mean": (float, None), "out": (str, None),
}


def cmd_bp_ratios(args):
    p = resolve(args, _load_config(args), BP_RATIOS_SPEC)
    data = np.genfromtxt(p["in"], delimiter=",", names=True)
    data = np.atleast_1d(data)
    traj = bp_core.Trajectory(
        epoch=data["epoch"].astype(np.int64), tau=data["tau"],
        cx=data["cx"].astype(np.int64), cy=data["cy"].astype(np.int64),
        ax=data["ax"].astype(np.int64), ay=data["ay"].astype(np.int64),
        extinct=bool(data["cx"][-1] + data["cy"][-1] == 0),
    )
    ups, info = bp_core.ratios_and_dichotomy(traj, lam=p["lam"],
                                             offspring_low_mean=p["offspring-low-mean"])
    _emit_json(info, p["out"])
    _write_sidecar(p["out"], "bp ratios", p)
    return 0


# ---------------------------------------------------------------------------
# attack

ATTACK_SPEC = {
    "e-xx": (float, REQUIRED), "e-xy": (float, REQUIRED),
    "e-yy": (float, REQUIRED), "e-yx": (float, REQUIRED),
    "out": (str, None),
}


def cmd_attack_analyze(args):
    p = resolve(args, _load_config(args), ATTACK_SPEC)
    limits = bp_attack.AttackLimits(e_xx=p["e-xx"], e_xy=p["e-xy"],
                                    e_yy=p["e-yy"], e_yx=p["e-yx"])
    in_e, report = bp_attack.classify_regime_and_limits(limits)
    payload = {"in_regime_e": in_e}
    payload.update(report.to_dict())
    if in_e:
        payload["beta_r"] = bp_attack.interior_repeller(limits)
    _emit_json(payload, p["out"])
    _write_sidecar(p["out"], "attack analyze", p)
    return 0


ATTACK_SIM_SPEC = dict(ATTACK_SPEC)
ATTACK_SIM_SPEC.update({
    "cx0": (int, 5), "cy0": (int, 5), "max-events": (int, 100_000),
    "record-every": (int, 100), "seed": (int, None),
    "replications": (int, 1), "jobs": (int, 1),
})


def _run_attack_replication(argpack):
    p, rep = argpack
    limits = bp_attack.AttackLimits(e_xx=p["e-xx"], e_xy=p["e-xy"],
                                    e_yy=p["e-yy"], e_yx=p["e-yx"])
    model = bp_attack.attack_model(limits)
    deaths = bp_core.DeathModel()
    init = bp_core.PopulationState(cx=p["cx0"], cy=p["cy0"], ax=p["cx0"], ay=p["cy0"])
    traj = bp_core.simulate(model, deaths, init, max_events=p["max-events"],
                            seed=p["seed"] ^ rep, record_every=p["record-every"])
    return rep, list(traj.rows())


def cmd_attack_simulate(args):
    p = resolve(args, _load_config(args), ATTACK_SIM_SPEC)
    _seed_of(p)
    packs = [(p, r) for r in range(p["replications"])]
    if p["jobs"] > 1 and len(packs) > 1:
        with ProcessPoolExecutor(max_workers=p["jobs"]) as ex:
            results = list(ex.map(_run_attack_replication, packs))
    else:
        results = [_run_attack_replication(a) for a in packs]
    results.sort()
    for rep, rows in results:
        path = _rep_path(p["out"], rep, p["replications"])
        if path:
            write_csv(path, bp_core.CSV_HEADER, rows)
    _write_sidecar(p["out"], "attack simulate", p)
    return 0


# ---------------------------------------------------------------------------
# wm

def _post_mix_from(params_file):
    with open(params_file) as fh:
        blob = json.load(fh)
    post = wm.PostModel(**blob["post"])
    mix = wm.UserMix(**blob["mix"])
    delta = float(blob["delta"])
    return post, mix, delta


WM_DESIGN_SPEC = {
    "kind": (str, "eo"), "params": (str, REQUIRED),
    "iqos": (bool, True), "out": (str, None),
}


def cmd_wm_design(args):
    p = resolve(args, _load_config(args), WM_DESIGN_SPEC)
    post, mix, delta = _post_mix_from(p["params"])
    design = wm.design_for_kind(p["kind"], post, mix, delta, iqos=p["iqos"])
    _emit_json(design.to_dict(), p["out"])
    _write_sidecar(p["out"], "wm design", p)
    return 0


WM_LEARN_SPEC = {
    "params": (str, REQUIRED), "budget": (int, 100_000), "seed": (int, None),
    "kappa-margin": (float, 1e-3), "w0": (float, 6.0), "b0": (float, 1e-4),
    "eta0": (float, 0.008), "eps-scale": (float, 2.2), "eps-power": (float, 0.7),
    "eta-scale": (float, 1.5), "eta-power": (float, 0.8),
    "seed-users": (int, 20), "record-every": (int, 1000),
    "target-beta": (float, None), "out": (str, None),
}


def cmd_wm_learn(args):
    p = resolve(args, _load_config(args), WM_LEARN_SPEC)
    _seed_of(p)
    post, mix, delta = _post_mix_from(p["params"])
    target = p["target-beta"] if p["target-beta"] is not None else delta
    cfg = wm_dynamics.LearnConfig(
        budget=p["budget"],
        kappa=1.0 - post.alpha_y_r / post.alpha_x_r + p["kappa-margin"],
        w0=p["w0"], b0=p["b0"], eta0=p["eta0"],
        eps_scale=p["eps-scale"], eps_power=p["eps-power"],
        eta_scale=p["eta-scale"], eta_power=p["eta-power"],
        seed_users=p["seed-users"], record_every=p["record-every"])
    res = wm_dynamics.learn_wm(cfg, post, mix, target, seed=p["seed"])
    if p["out"]:
        write_csv(p["out"], "k,w,b,beta",
                  [(int(k), w_, b_, beta) for k, w_, b_, beta in res.trace])
    print(json.dumps({"w": res.w, "b": res.b, "extinct": res.extinct}))
    _write_sidecar(p["out"], "wm learn", p)
    return 0


WM_SIM_SPEC = {
    "kind": (str, "eo"), "params": (str, REQUIRED), "actuality": (str, "F"),
    "init-fake": (int, 1), "init-real": (int, 1),
    "max-events": (int, 100_000), "record-every": (int, 100),
    "seed": (int, None), "iqos": (bool, True), "out": (str, None),
}


def cmd_wm_simulate(args):
    p = resolve(args, _load_config(args), WM_SIM_SPEC)
    _seed_of(p)
    post, mix, delta = _post_mix_from(p["params"])
    design = wm.design_for_kind(p["kind"], post, mix, delta, iqos=p["iqos"])
    path = wm_dynamics.simulate_tagging(
        p["kind"], design, post, mix, p["actuality"],
        p["init-fake"], p["init-real"], p["max-events"], p["seed"],
        record_every=p["record-every"])
    if p["out"]:
        write_csv(p["out"], "k,beta",
                  [(int(k), b) for k, b in zip(path.epoch, path.beta)])
    _write_sidecar(p["out"], "wm simulate", p)
    return 0


# ---------------------------------------------------------------------------
# market

MARKET_TEF_SPEC = {
    "m-bar": (float, 21.321042), "kappa1": (float, 532e-6),
    "kappa2": (float, 83e-6), "a-break": (float, 35000.0), "rho": (float, 0.6),
    "a0": (int, 2), "out": (str, None),
}


def _tef_params(p):
    return market.TefParams(m_bar=p["m-bar"], kappa1=p["kappa1"],
                            kappa2=p["kappa2"], a_break=p["a-break"], rho=p["rho"])


def cmd_market_metrics(args):
    p = resolve(args, _load_config(args), MARKET_TEF_SPEC)
    params = _tef_params(p)
    m = market.metrics(params, a0=p["a0"])
    m["common_fit_ok"] = params.common_fit_ok
    _emit_json(m, p["out"])
    _write_sidecar(p["out"], "market metrics", p)
    return 0


def cmd_market_closed_form(args):
    spec = dict(MARKET_TEF_SPEC)
    spec["n-points"] = (int, 2000)
    p = resolve(args, _load_config(args), spec)
    cf = market.closed_form(_tef_params(p), a0=p["a0"])
    n_max = cf.n_e
    ns = np.unique(np.round(np.geomspace(1, max(n_max, 2), p["n-points"])).astype(np.int64))
    rows = []
    for n in ns:
        t = market.EULER_GAMMA + math.log(n)
        rows.append((int(n), t, cf.a_epoch(float(n)), cf.c_epoch(float(n))))
    if p["out"]:
        write_csv(p["out"], "n,t,a,c", rows)
    _write_sidecar(p["out"], "market closed-form", p)
    return 0


def cmd_market_simulate(args):
    spec = dict(MARKET_TEF_SPEC)
    spec.update({"max-events": (int, 200_000), "record-every": (int, 1),
                 "seed": (int, None), "offspring": (str, "poisson")})
    p = resolve(args, _load_config(args), spec)
    _seed_of(p)
    path = market.simulate_stpbp(_tef_params(p), a0=p["a0"],
                                 max_events=p["max-events"], seed=p["seed"],
                                 record_every=p["record-every"],
                                 offspring=p["offspring"])
    if p["out"]:
        rows = [(int(n), t, int(a), int(c)) for n, t, a, c
                in zip(path.epoch, path.tau, path.a, path.c)]
        write_csv(p["out"], "n,t,a,c", rows)
    _write_sidecar(p["out"], "market simulate", p)
    return 0


def cmd_market_propagate(args):
    spec = {"graph": (str, REQUIRED), "seeds": (str, None), "n-seeds": (int, 2),
            "rho": (float, 0.6), "seed": (int, None), "out": (str, None)}
    p = resolve(args, _load_config(args), spec)
    _seed_of(p)
    g = parse_graph(p["graph"])
    if p["seeds"]:
        seeds = [int(s) for s in p["seeds"].split(",")]
        log = market_graph.propagate_on_graph(g, seeds, p["rho"], p["seed"])
    else:
        rng = bp_core.make_rng(p["seed"])
        ids = rng.choice(g.n_nodes, size=p["n-seeds"], replace=False)
        log = market_graph.propagate_on_graph(g, [int(i) for i in ids], p["rho"],
                                              p["seed"], rng=rng, by_label=False)
    if p["out"]:
        rows = [(int(e), int(r), int(f), int(a), int(c)) for e, r, f, a, c
                in zip(log.epoch, log.reader, log.forwards, log.a, log.c)]
        write_csv(p["out"], "epoch,reader,forwards,a,c", rows)
    print(json.dumps({"reach": log.reach, "events": int(log.epoch[-1])}))
    _write_sidecar(p["out"], "market propagate", p)
    return 0


def cmd_market_fit(args):
    spec = {"graph": (str, REQUIRED), "rho": (float, 1.0),
            "bin-width": (int, 1000), "runs": (int, 100),
            "viral-threshold": (int, None), "seeds-per-run": (int, 2),
            "seed": (int, None), "out": (str, None)}
    p = resolve(args, _load_config(args), spec)
    _seed_of(p)
    g = parse_graph(p["graph"])
    fit = market_graph.estimate_tef(g, p["rho"], p["bin-width"], p["runs"],
                                    p["seed"], seeds_per_run=p["seeds-per-run"],
                                    viral_threshold=p["viral-threshold"])
    payload = {
        "degenerate": fit.degenerate,
        "m_bar": fit.m_bar_hat,
        "params": None if fit.params is None else {
            "m_bar": fit.params.m_bar, "kappa1": fit.params.kappa1,
            "kappa2": fit.params.kappa2, "a_break": fit.params.a_break},
        "table": [{"a": float(a), "m_hat": float(m), "transitions": float(w)}
                  for a, m, w in zip(fit.a_centers, fit.m_hat, fit.weights)],
    }
    _emit_json(payload, p["out"])
    _write_sidecar(p["out"], "market fit", p)
    return 0


# ---------------------------------------------------------------------------
# game

def _game_params(path):
    with open(path) as fh:
        blob = json.load(fh)
    return game.GameParams(**blob)


def cmd_game_design(args):
    p = resolve(args, _load_config(args), {"params": (str, REQUIRED), "out": (str, None)})
    design = game.design_ai_game(_game_params(p["params"]))
    _emit_json(design.to_dict(), p["out"])
    _write_sidecar(p["out"], "game design", p)
    return 0


def cmd_game_verify(args):
    p = resolve(args, _load_config(args), {"params": (str, REQUIRED), "out": (str, None)})
    params = _game_params(p["params"])
    design = game.design_ai_game(params)
    report = game.verify_equilibria(design, params)
    report["ne_list"] = [{"mu": list(d["mu"]), "ai": d["ai"]} for d in report["ne_list"]]
    _emit_json(report, p["out"])
    _write_sidecar(p["out"], "game verify", p)
    return 0


def cmd_game_simulate(args):
    spec = {"params": (str, REQUIRED), "actuality": (str, "F"),
            "k-max": (int, 100_000), "seed": (int, None),
            "record-every": (int, 100), "out": (str, None)}
    p = resolve(args, _load_config(args), spec)
    _seed_of(p)
    params = _game_params(p["params"])
    design = game.design_ai_game(params)
    betas = game.simulate_tagging_game(design.mu_eta(), design, params,
                                       p["actuality"], p["k-max"], p["seed"],
                                       record_every=p["record-every"])
    if p["out"]:
        ks = list(range(p["record-every"], p["k-max"] + 1, p["record-every"]))
        if not ks or ks[-1] != p["k-max"]:
            ks.append(p["k-max"])
        write_csv(p["out"], "k,beta", list(zip(ks, betas)))
    print(json.dumps({"terminal_beta": float(betas[-1]),
                      "predicted": game.beta_fixed_point(
                          design.mu_eta(), design.w, params, p["actuality"])}))
    _write_sidecar(p["out"], "game simulate", p)
    return 0


def cmd_game_study(args):
    spec = {"samples": (int, 10_000), "d": (float, 0.10), "seed": (int, None),
            "theta": (float, 0.75), "gamma-margin": (float, 1000.0),
            "out": (str, None)}
    p = resolve(args, _load_config(args), spec)
    _seed_of(p)
    res = game.random_study(p["samples"], p["d"], p["seed"], theta=p["theta"],
                            gamma_margin=p["gamma-margin"], verify=False,
                            collect_rows=True)
    if p["out"]:
        write_csv(p["out"], "sample,feasible,ai,degradation_pct", res["rows"])
    print(json.dumps({
        "feasible_fraction": res["feasible_fraction"],
        "second_ne_fraction": res["second_ne_fraction"],
        "small_degradation_fraction": res["small_degradation_fraction"]}))
    _write_sidecar(p["out"], "game study", p)
    return 0


# ---------------------------------------------------------------------------

def _add_flags(parser, spec):
    for name, (typ, default) in spec.items():
        flag = "--" + name
        if typ is bool:
            parser.add_argument(flag, dest=name.replace("-", "_"),
                                action=argparse.BooleanOptionalAction, default=None)
        else:
            parser.add_argument(flag, dest=name.replace("-", "_"), type=typ,
                                default=None,
                                required=False)
    parser.add_argument("--config", type=str, default=None,
                        help="JSON file with parameter values (flags win)")


_COMMANDS = {
    ("bp", "simulate"): (cmd_bp_simulate, BP_SIM_SPEC),
    ("bp", "ratios"): (cmd_bp_ratios, BP_RATIOS_SPEC),
    ("attack", "analyze"): (cmd_attack_analyze, ATTACK_SPEC),
    ("attack", "simulate"): (cmd_attack_simulate, ATTACK_SIM_SPEC),
    ("wm", "optimize"): (cmd_wm_design, WM_DESIGN_SPEC),
    ("wm", "design"): (cmd_wm_design, WM_DESIGN_SPEC),
    ("wm", "learn"): (cmd_wm_learn, WM_LEARN_SPEC),
    ("wm", "simulate"): (cmd_wm_simulate, WM_SIM_SPEC),
    ("market", "fit"): (cmd_market_fit,
                        {"graph": (str, REQUIRED), "rho": (float, 1.0),
                         "bin-width": (int, 1000), "runs": (int, 100),
                         "viral-threshold": (int, None), "seeds-per-run": (int, 2),
                         "seed": (int, None), "out": (str, None)}),
    ("market", "simulate"): (cmd_market_simulate, None),
    ("market", "closed-form"): (cmd_market_closed_form, None),
    ("market", "metrics"): (cmd_market_metrics, MARKET_TEF_SPEC),
    ("market", "propagate"): (cmd_market_propagate,
                              {"graph": (str, REQUIRED), "seeds": (str, None),
                               "n-seeds": (int, 2), "rho": (float, 0.6),
                               "seed": (int, None), "out": (str, None)}),
    ("game", "design"): (cmd_game_design, {"params": (str, REQUIRED), "out": (str, None)}),
    ("game", "verify"): (cmd_game_verify, {"params": (str, REQUIRED), "out": (str, None)}),
    ("game", "simulate"): (cmd_game_simulate,
                           {"params": (str, REQUIRED), "actuality": (str, "F"),
                            "k-max": (int, 100_000), "seed": (int, None),
                            "record-every": (int, 100), "out": (str, None)}),
    ("game", "study"): (cmd_game_study,
                        {"samples": (int, 10_000), "d": (float, 0.10),
                         "seed": (int, None), "theta": (float, 0.75),
                         "gamma-margin": (float, 1000.0), "out": (str, None)}),
}

_EXTRA_SPECS = {
    ("market", "simulate"): dict(MARKET_TEF_SPEC, **{
        "max-events": (int, 200_000), "record-every": (int, 1),
        "seed": (int, None), "offspring": (str, "poisson")}),
    ("market", "closed-form"): dict(MARKET_TEF_SPEC, **{"n-points": (int, 2000)}),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="bpviral",
                                     description=__doc__.splitlines()[0])
    top = parser.add_subparsers(dest="module", required=True)
    groups = {}
    for (mod, sub), (fn, spec) in _COMMANDS.items():
        if mod not in groups:
            gp = top.add_parser(mod)
            groups[mod] = gp.add_subparsers(dest="subcommand", required=True)
        sp = groups[mod].add_parser(sub)
        eff_spec = _EXTRA_SPECS.get((mod, sub), spec)
        _add_flags(sp, eff_spec)
        sp.set_defaults(_handler=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args._handler(args)
    except ParamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, game.GameVerificationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
