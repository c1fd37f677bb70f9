"""Command line runner: each subcommand writes a versioned CSV report with verdicts.

Reports start with ``# ipsdual-csv v1`` followed by the embedded run spec,
library version and seed, so ``ipsdual rerun --report FILE`` can reproduce them.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import closed_forms as cf
from . import exact, gdcp, mc, sir
from .duality import check_matrix_duality, check_sir_duality, duality_matrix
from .generators import (DualConfiguration, SirDualState, build_dcp, build_dual, build_gdcp,
                         fast_stirring_chain)
from .lattice import Configuration, DcpParams, GdcpParams, SirParams

SCHEMA = "# ipsdual-csv v1"
OUTPUT_ENV = "IPSDUAL_OUTPUT_DIR"
COMMANDS = ("duality-check", "stationary", "absorption", "correlate", "gdcp-profile",
            "gdcp-evolve", "fast-stirring", "sir-cluster", "simulate", "rerun")
PARAM_KEYS = ("alpha", "beta", "gamma", "delta", "lam", "diffusion", "mu1", "mu2",
              "beta_inf", "gamma_rec")


class SpecError(ValueError):
    """Invalid run spec (precondition failure)."""


class ToleranceBreach(RuntimeError):
    pass


@dataclass
class RunSpec:
    command: str
    model: str | None = None
    params: dict = field(default_factory=dict)
    N: int | None = None
    window: dict | None = None
    query: dict = field(default_factory=dict)
    t_grid: list | None = None
    tol: float | None = None
    seed: int = 0
    output: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunSpec":
        return cls(**json.loads(text))


@dataclass
class Report:
    header: list
    rows: list
    verdicts: list = field(default_factory=list)  # (name, status, detail)
    notes: list = field(default_factory=list)


# parsing helpers

def _ints(text):
    if text is None or text == "":
        return None
    return [int(v) for v in str(text).replace(" ", "").split(",") if v != ""]


def _floats(text):
    if text is None or text == "":
        return None
    return [float(v) for v in str(text).replace(" ", "").split(",") if v != ""]


def _word(text):
    """'1,0,1' or '101' -> (1, 0, 1)."""
    if text is None:
        return None
    s = str(text).replace(",", "").replace(" ", "")
    if not s or any(c not in "01" for c in s):
        raise SpecError(f"not a 0/1 word: {text!r}")
    return tuple(int(c) for c in s)


def _params(spec: RunSpec):
    p = spec.params
    try:
        if spec.model == "dcp":
            return DcpParams(**{k: p[k] for k in ("alpha", "beta", "gamma", "delta", "lam", "diffusion")})
        if spec.model == "gdcp":
            mu1 = p.get("mu1")
            if mu1 is None:
                mu1 = p["lam"] + p["mu2"]
            return GdcpParams(**{k: p[k] for k in ("alpha", "beta", "gamma", "delta", "lam", "diffusion", "mu2")},
                              mu1=mu1)
        if spec.model == "sir":
            return SirParams(p["beta_inf"], p["gamma_rec"])
    except (ValueError, TypeError, KeyError) as e:
        raise SpecError(str(e)) from e
    raise SpecError(f"model {spec.model!r} not valid here")


def _need_N(spec: RunSpec, max_N: int = 20) -> int:
    if spec.N is None or spec.N < 1:
        raise SpecError("--n must be a positive integer")
    if spec.N > max_N:
        raise SpecError(f"--n={spec.N} above the limit {max_N} for this command")
    return spec.N


def _word_str(c) -> str:
    return "".join(str(int(v)) for v in c)


def _random_params(model: str, rng: np.random.Generator):
    a, b, g, d, lam, D = rng.uniform(0.1, 2.0, 6)
    if model == "dcp":
        return DcpParams(a, b, g, d, lam, D)
    mu2 = rng.uniform(0.1, 2.0)
    lo, hi = max(0.0, mu2 - D), lam + mu2
    mu1 = rng.uniform(lo, hi)
    return GdcpParams(alpha=a, beta=b, gamma=g, delta=d, lam=lam, diffusion=D, mu1=mu1, mu2=mu2)


def _verdict(name, ok, detail):
    return (name, "PASS" if ok else "FAIL", detail)


# subcommands

def cmd_duality_check(spec: RunSpec) -> Report:
    tol = spec.tol if spec.tol is not None else (1e-13 if spec.model == "sir" else 1e-12)
    if spec.model == "sir":
        p = _params(spec)
        n_top = spec.N or 4
        rows = []
        for n in range(1, n_top + 1):
            for layer in ("G", "J"):
                res = check_sir_duality((-2, n + 1), 0, n, layer, p)
                rows.append([n, layer, 3 ** (n + 4), res])
        worst = max(r[-1] for r in rows)
        return Report(["n", "layer", "configurations", "residual"], rows,
                      [_verdict("sir-duality", worst < tol, f"max residual {worst:.3e} < {tol:.0e}")])
    if spec.model not in ("dcp", "gdcp"):
        raise SpecError("duality-check supports --model dcp, gdcp or sir")
    N = _need_N(spec, 8)
    draws = int(spec.query.get("draws") or 50)
    K = int(spec.query.get("sink_cap") or 4)
    rng = np.random.default_rng(spec.seed)
    rows = []
    for k in range(draws):
        p = _random_params(spec.model, rng)
        L = build_dcp(p, N) if spec.model == "dcp" else build_gdcp(p, N)
        Ld = build_dual(p, N, K)
        res = check_matrix_duality(L, Ld, duality_matrix(p, N, K))
        rows.append([k, N] + [getattr(p, n) for n in p.as_dict()] + [res])
    names = list(p.as_dict())
    worst = max(r[-1] for r in rows)
    return Report(["draw", "N"] + names + ["residual"], rows,
                  [_verdict("matrix-duality", worst < tol, f"max residual {worst:.3e} < {tol:.0e}")])


def cmd_stationary(spec: RunSpec) -> Report:
    p = _params(spec)
    N = _need_N(spec, 16)
    m = exact.stationary_for(p, N)
    closed = None
    if isinstance(p, DcpParams) and N <= 2:
        closed = cf.stationary_n1(p) if N == 1 else cf.stationary_n2(p)
    rows, worst = [], 0.0
    for s, q in zip(m.states, m.probs):
        c = closed.get(tuple(s)) if closed else None
        err = abs(q - c) if c is not None else None
        worst = max(worst, err or 0.0)
        rows.append([_word_str(s), q, "" if c is None else c, "" if err is None else err])
    verdicts = []
    if closed:
        tol = spec.tol or 1e-12
        verdicts.append(_verdict("closed-form", worst < tol, f"max abs error {worst:.3e} < {tol:.0e}"))
    notes = ["reducible: single closed class, Dirac answer"] if m.reducible else []
    return Report(["config", "probability", "closed_form", "abs_error"], rows, verdicts, notes)


def _absorption_closed(p, init, k):
    if not isinstance(p, DcpParams) or p.beta or p.delta:
        return None
    if init == (1,):
        return cf.absorption_n1(p)[k] if k <= 1 else 0.0
    if len(init) == 2 and any(init):
        j = {(1, 0): 0, (1, 1): 1, (0, 1): 2}[init]
        return cf.AbsorptionClosedFormN2.from_params(p).x(k)[j]
    return None


def cmd_absorption(spec: RunSpec) -> Report:
    p = _params(spec)
    init = _word(spec.query.get("initial"))
    if init is None:
        raise SpecError("--initial is required")
    if len(init) > 10:
        raise SpecError("--initial longer than 10 sites")
    K = int(spec.query.get("k_max") or 6)
    lin = exact.absorption_law(p, init, K, "linear")
    tr = exact.absorption_law(p, init, K, "transient")
    rows, worst, worst_cf = [], 0.0, 0.0
    for m_ in range(K + 1):
        for n_ in range(K + 1):
            a, b = lin.joint[m_, n_], tr.joint[m_, n_]
            c = _absorption_closed(p, init, m_) if n_ == 0 else None
            if c is not None:
                worst_cf = max(worst_cf, abs(a - c))
            worst = max(worst, abs(a - b))
            rows.append([m_, n_, a, b, abs(a - b), "" if c is None else c])
    tol = spec.tol or 1e-10
    verdicts = [_verdict("linear-vs-transient", worst < tol, f"max diff {worst:.3e} < {tol:.0e}")]
    if _absorption_closed(p, init, 0) is not None:
        verdicts.append(_verdict("closed-form", worst_cf < tol, f"max diff {worst_cf:.3e} < {tol:.0e}"))
    notes = [f"timing linear={lin.elapsed:.6f}s transient={tr.elapsed:.6f}s"]
    return Report(["m", "n", "linear", "transient", "abs_diff", "closed_form"], rows, verdicts, notes)


def cmd_correlate(spec: RunSpec) -> Report:
    p = _params(spec)
    N = _need_N(spec, 10)
    sites = _ints(spec.query.get("sites"))
    if not sites:
        raise SpecError("--sites is required")
    tol = spec.tol or 1e-10
    t0 = time.perf_counter()
    d = exact.correlation_direct(exact.stationary_for(p, N), sites)
    t_direct = time.perf_counter() - t0
    v = exact.correlation_via_duality(p, N, sites, tol)
    rows = [["direct", d.value, 0.0], ["duality", v.value, v.error_bound]]
    diff = abs(d.value - v.value)
    verdicts = [_verdict("direct-vs-duality", diff < 1e-8, f"diff {diff:.3e} < 1e-8")]
    reps = int(spec.query.get("replicas") or 0)
    if reps:
        model = "dcp" if isinstance(p, DcpParams) else "gdcp"
        T = mc.default_burn_in(model, p, N)
        idx = [x - 1 for x in sites]
        est = mc.estimate(lambda o: float(all(o.final[i] for i in idx)), model, p, (0,) * N, T,
                          reps, spec.seed, int(spec.query.get("workers") or 1))
        rows.append(["mc", est.mean, est.stderr])
        verdicts.append(_verdict("mc-3sigma", est.within(d.value),
                                 f"|{est.mean:.5f} - {d.value:.5f}| <= 3 * {est.stderr:.2e}"))
    notes = [f"timing direct={t_direct:.6f}s duality={v.info['elapsed']:.6f}s k_max={v.info['k_max']}"]
    return Report(["route", "value", "error"], rows, verdicts, notes)


def cmd_gdcp_profile(spec: RunSpec) -> Report:
    if spec.model != "gdcp":
        raise SpecError("gdcp-profile needs --model gdcp")
    p = _params(spec)
    if not p.annihilating:
        raise SpecError("gdcp-profile needs mu1 = lam + mu2 (omit --mu1 to set it)")
    N = _need_N(spec, 10 ** 6)
    form = gdcp.one_point_closed_form(p, N)
    wl, wr = p.weights()
    u_abs = v_abs = rho_st = None
    if N <= 10:
        u_abs, v_abs = np.zeros(N), np.zeros(N)
        for x in range(N):
            j = exact.absorption_law(p, tuple(int(y == x) for y in range(N)), 1).joint
            u_abs[x], v_abs[x] = j[1, 0], j[0, 1]
        rho_st = np.array([exact.correlation_direct(exact.stationary_for(p, N), (x + 1,)).value
                           for x in range(N)])
    dens = None
    reps = int(spec.query.get("replicas") or 0)
    if reps:
        if N > 10:
            raise SpecError("MC comparison limited to N <= 10")
        t_avg = float(spec.query.get("t_avg") or 20.0)
        dens = mc.long_run_density("gdcp", p, (0,) * N, t_avg, reps, spec.seed,
                                   workers=int(spec.query.get("workers") or 1))
    rows = []
    for x in range(N):
        row = [x + 1, form.u[x], form.v[x], form.rho[x]]
        row += ["", "", ""] if u_abs is None else [u_abs[x], v_abs[x], rho_st[x]]
        row += ["", ""] if dens is None else [dens[x].mean, dens[x].stderr]
        rows.append(row)
    verdicts = []
    tol = spec.tol or 1e-10
    if u_abs is not None:
        e = max(np.abs(form.u - u_abs).max(), np.abs(form.v - v_abs).max(), np.abs(form.rho - rho_st).max())
        verdicts.append(_verdict("closed-vs-exact", e < tol, f"max diff {e:.3e} < {tol:.0e}"))
    if dens is not None:
        ok = all(d.within(r) for d, r in zip(dens, form.rho))
        verdicts.append(_verdict("mc-3sigma", ok, "long-run density within 3 stderr at every site"))
    notes = [f"branch={form.branch} case={form.case}"]
    return Report(["x", "u", "v", "rho", "u_absorption", "v_absorption", "rho_stationary",
                   "mc_mean", "mc_stderr"], rows, verdicts, notes)


def cmd_gdcp_evolve(spec: RunSpec) -> Report:
    if spec.model != "gdcp":
        raise SpecError("gdcp-evolve needs --model gdcp")
    p = _params(spec)
    if not p.annihilating:
        raise SpecError("gdcp-evolve needs mu1 = lam + mu2 (omit --mu1 to set it)")
    init = _word(spec.query.get("initial")) if spec.query.get("initial") else None
    profile = _floats(spec.query.get("profile"))
    if (init is None) == (profile is None):
        raise SpecError("give exactly one of --initial (0/1 word) or --profile")
    prof0 = np.array(init if init is not None else profile, dtype=float)
    if np.any(prof0 < 0) or np.any(prof0 > 1):
        raise SpecError("profile entries must lie in [0, 1]")
    N = prof0.size
    times = spec.t_grid or [0.1, 1.0, 5.0]
    if any(t < 0 for t in times):
        raise SpecError("times must be >= 0")
    L = build_gdcp(p, N) if N <= 12 else None
    if L is not None:
        bits = np.array(L.states, dtype=float)
        law0 = np.prod(np.where(bits == 1, prof0, 1 - prof0), axis=1)
    reps = int(spec.query.get("replicas") or 0)
    if reps and init is None:
        raise SpecError("MC comparison needs a deterministic --initial word")
    rows, worst, mc_ok = [], 0.0, True
    for t in times:
        ode = gdcp.evolve_one_point(p, prof0, t).final
        ex = transient_profile = None
        if L is not None:
            transient_profile = bits.T @ exact.transient(L, law0, t)
            ex = transient_profile
            worst = max(worst, float(np.abs(ode - ex).max()))
        ests = None
        if reps:
            ests = mc.estimate_vector(lambda o: np.array(o.final, dtype=float), "gdcp", p, init, t, reps,
                                      spec.seed, int(spec.query.get("workers") or 1))
            mc_ok &= all(e.within(v) for e, v in zip(ests, ode))
        for x in range(N):
            rows.append([t, x + 1, ode[x], "" if ex is None else ex[x],
                         "" if ests is None else ests[x].mean, "" if ests is None else ests[x].stderr])
    tol = spec.tol or 1e-8
    verdicts = []
    if L is not None:
        verdicts.append(_verdict("ode-vs-transient", worst < tol, f"max diff {worst:.3e} < {tol:.0e}"))
    if reps:
        verdicts.append(_verdict("mc-3sigma", mc_ok, "MC profile within 3 stderr"))
    return Report(["t", "x", "ode", "exact", "mc_mean", "mc_stderr"], rows, verdicts)


def cmd_fast_stirring(spec: RunSpec) -> Report:
    if spec.model != "dcp":
        raise SpecError("fast-stirring needs --model dcp")
    p = _params(spec)
    N = _need_N(spec, 10 ** 4)
    conv = spec.query.get("convention") or "both"
    if conv not in ("paper", "corrected", "both"):
        raise SpecError("--convention must be paper, corrected or both")
    convs = ["paper", "corrected"] if conv == "both" else [conv]
    pis = {c: fast_stirring_chain(p, N, c).stationary() for c in convs}
    limit = np.array(cf.occupancy_n2_infinite(p)) if N == 2 else None
    d_large = float(spec.query.get("d_large") or 1e8)
    big = None
    if N <= 10:
        q = DcpParams(p.alpha, p.beta, p.gamma, p.delta, p.lam, d_large)
        m = exact.stationary_for(q, N)
        counts = np.array([sum(s) for s in m.states])
        big = np.bincount(counts, weights=m.probs, minlength=N + 1)
    rows = []
    for k in range(N + 1):
        rows.append([k] + [pis[c][k] for c in convs] + ["" if limit is None else limit[k]]
                    + ["" if big is None else big[k]])
    verdicts = []
    if "corrected" in pis:
        if limit is not None:
            e = float(np.abs(pis["corrected"] - limit).max())
            verdicts.append(_verdict("corrected-vs-limit", e < 1e-12, f"max diff {e:.3e} < 1e-12"))
        if big is not None:
            e = float(np.abs(pis["corrected"] - big).max())
            verdicts.append(_verdict("corrected-vs-large-D", e < 1e-6, f"max diff {e:.3e} < 1e-6 at D={d_large:g}"))
    if "paper" in pis:
        ref = limit if limit is not None else big
        if ref is not None:
            e = float(np.abs(pis["paper"] - ref).max())
            verdicts.append(("paper-deviation", "INFO", f"max deviation {e:.3e} from the exact limit"))
    return Report(["count"] + convs + ["limit_closed_form", "exact_large_D"], rows, verdicts)


def _sir_initial(spec: RunSpec):
    w = spec.window or {}
    fixture = spec.query.get("fixture")
    if fixture == "single-s":
        return sir.single_s_fixture(), "single-s"
    if fixture == "rsi":
        return sir.rsi_fixture(), "rsi"
    if fixture:
        raise SpecError("--fixture must be single-s or rsi")
    if w.get("states"):
        try:
            return sir.SirConfiguration(int(w.get("lo") or 0), w["states"], w.get("outside") or "R"), None
        except ValueError as e:
            raise SpecError(str(e)) from e
    law = _floats(spec.query.get("measure"))
    if law:
        try:
            return sir.ProductMeasure(tuple(law)), None
        except ValueError as e:
            raise SpecError(str(e)) from e
    raise SpecError("give --fixture, --states or --measure")


def cmd_sir_cluster(spec: RunSpec) -> Report:
    p = _params(spec)
    data, fixture = _sir_initial(spec)
    kind = spec.query.get("kind") or {"single-s": "G", "rsi": "J"}.get(fixture, "G")
    r = int(spec.query.get("r") if spec.query.get("r") is not None else 0)
    n = int(spec.query.get("n_cluster") or 1)
    if kind not in ("G", "J", "H") or n < 1:
        raise SpecError("--kind in G/J/H and --n-cluster >= 1")
    times = spec.t_grid or [1.0]
    tol = spec.tol or 1e-10
    fn = {"G": sir.g_cluster, "J": sir.j_cluster, "H": sir.h_cluster}[kind]
    reps = int(spec.query.get("replicas") or 0)
    rows, verdicts = [], []
    b, g = p.beta_inf, p.gamma_rec
    for t in times:
        if t < 0:
            raise SpecError("times must be >= 0")
        cv = fn(data, p, r, n, t, tol)
        rows.append([kind, r, n, t, cv.value, cv.truncation_error, "series"])
        oracle = None
        if fixture == "single-s" and kind == "G" and (r, n) == (0, 1):
            oracle = math.exp(-2 * (b + g) * t)
        if fixture == "rsi" and kind == "J" and (r, n) == (0, 1):
            oracle = math.exp(-(b + g) * t)
        if oracle is not None:
            rows.append([kind, r, n, t, oracle, 0.0, "closed-form"])
            e = abs(cv.value - oracle)
            verdicts.append(_verdict(f"series-vs-closed t={t:g}", e < 1e-12, f"diff {e:.3e} < 1e-12"))
        if reps:
            if not isinstance(data, sir.SirConfiguration):
                raise SpecError("MC comparison needs a concrete configuration")
            est = mc.estimate(mc.cluster_observable(kind, r, n), "sir", p, data, t, reps, spec.seed,
                              int(spec.query.get("workers") or 1))
            rows.append([kind, r, n, t, est.mean, est.stderr, "mc"])
            verdicts.append(_verdict(f"mc-3sigma t={t:g}", est.within(cv.value),
                                     f"|{est.mean:.5f} - {cv.value:.5f}| <= 3 * {est.stderr:.2e}"))
    return Report(["kind", "r", "n", "t", "value", "error", "route"], rows, verdicts)


def cmd_simulate(spec: RunSpec) -> Report:
    model = spec.model
    if model not in mc.MODELS:
        raise SpecError(f"--model must be one of {mc.MODELS}")
    base = model.replace("-dual", "")
    p = _params(RunSpec(spec.command, base, spec.params))
    reps = int(spec.query.get("replicas") or 1)
    until = bool(spec.query.get("until_extinct"))
    t_end = (spec.t_grid or [1.0])[-1]
    if base == "sir":
        if model == "sir":
            init, _ = _sir_initial(spec)
            if not isinstance(init, sir.SirConfiguration):
                raise SpecError("simulate needs a concrete SIR configuration")
        else:
            init = SirDualState(int(spec.query.get("r") or 0), int(spec.query.get("n_cluster") or 1),
                                spec.query.get("layer") or "G")
    else:
        init = _word(spec.query.get("initial"))
        if init is None:
            raise SpecError("--initial is required")
    if until and model not in ("dcp-dual", "gdcp-dual"):
        raise SpecError("--until-extinct applies to dcp-dual and gdcp-dual")
    rows = []
    for k in range(reps):
        if until:
            o = mc.simulate_dual_until_extinct(p, init, spec.seed, k)
        else:
            o = mc.simulate(model, p, init, t_end, spec.seed, k)
        f = o.final
        if isinstance(f, DualConfiguration):
            state = f"{f.left}|{_word_str(f.sites)}|{f.right}"
        elif isinstance(f, Configuration):
            state = _word_str(f)
        elif isinstance(f, sir.SirConfiguration):
            state = f"{f.lo}:{f.states}"
        else:
            state = "trap" if f.is_trap else f"{f.r}:{f.n}:{f.layer}"
        ab = o.absorbed or ("", "")
        rows.append([k, f"{o.stream[0]}:{o.stream[1]}", o.events, o.t, state, ab[0], ab[1],
                     "" if o.tau is None else o.tau, int(o.edge_touched)])
    return Report(["replica", "stream", "events", "t", "final", "absorbed_left", "absorbed_right",
                   "tau", "edge_touched"], rows)


HANDLERS = {
    "duality-check": cmd_duality_check, "stationary": cmd_stationary, "absorption": cmd_absorption,
    "correlate": cmd_correlate, "gdcp-profile": cmd_gdcp_profile, "gdcp-evolve": cmd_gdcp_evolve,
    "fast-stirring": cmd_fast_stirring, "sir-cluster": cmd_sir_cluster, "simulate": cmd_simulate,
}


# report io

def _output_path(spec: RunSpec) -> Path:
    if spec.output:
        return Path(spec.output)
    return Path(os.environ.get(OUTPUT_ENV, ".")) / f"{spec.command}.csv"


def write_report(path: Path, spec: RunSpec, rep: Report) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"{SCHEMA}\n# spec: {spec.to_json()}\n# version: {__version__}\n# seed: {spec.seed}\n")
        for note in rep.notes:
            fh.write(f"# note: {note}\n")
        w = csv.writer(fh)
        w.writerow(rep.header)
        for row in rep.rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        for name, status, detail in rep.verdicts:
            fh.write(f"# verdict: {name}: {status} ({detail})\n")


def read_report(path) -> tuple[RunSpec, list, list]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != SCHEMA:
        raise SpecError(f"{path} is not an {SCHEMA[2:]} report")
    spec = None
    body = []
    for ln in lines[1:]:
        if ln.startswith("# spec: "):
            spec = RunSpec.from_json(ln[len("# spec: "):])
        elif not ln.startswith("#"):
            body.append(ln)
    if spec is None:
        raise SpecError(f"{path} has no embedded spec")
    rows = list(csv.reader(body))
    return spec, rows[0], rows[1:]


def run(spec: RunSpec) -> int:
    """Dispatch, write the report, print verdict lines; returns the exit status."""
    rep = HANDLERS[spec.command](spec)
    path = _output_path(spec)
    write_report(path, spec, rep)
    for name, status, detail in rep.verdicts:
        print(f"{status} {spec.command} {name}: {detail}")
    print(f"report: {path}")
    failed = [v for v in rep.verdicts if v[1] == "FAIL"]
    if failed:
        raise ToleranceBreach("; ".join(f"{n}: {d}" for n, _, d in failed))
    return 0


def rerun(report: str, output: str | None) -> int:
    spec, header, rows = read_report(report)
    new = RunSpec(**{**asdict(spec), "output": output or str(Path(report).with_suffix(".rerun.csv"))})
    rep = HANDLERS[new.command](new)
    write_report(Path(new.output), new, rep)
    _, h2, rows2 = read_report(new.output)
    same = h2 == header and rows2 == rows
    print(f"{'PASS' if same else 'FAIL'} rerun {spec.command}: "
          f"{'identical' if same else 'differing'} numeric columns ({len(rows)} rows)")
    print(f"report: {new.output}")
    if not same:
        raise ToleranceBreach("rerun differs from the original report")
    return 0


# argument parsing

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ipsdual", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"ipsdual {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, model_choices, default_model):
        sp.add_argument("--config", help="INI file; [common] and [<command>] sections give defaults")
        sp.add_argument("--model", choices=model_choices, default=default_model)
        sp.add_argument("--n", type=int, dest="N")
        for k, d in (("alpha", 1.0), ("beta", 0.0), ("gamma", 1.0), ("delta", 0.0), ("lam", 1.0),
                     ("diffusion", 1.0), ("mu2", 0.5), ("beta-inf", 1.0), ("gamma-rec", 1.0)):
            sp.add_argument(f"--{k}", type=float, default=d)
        sp.add_argument("--mu1", type=float, default=None, help="defaults to lam + mu2")
        sp.add_argument("--tol", type=float)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--output", help=f"CSV path (default ${OUTPUT_ENV}/<command>.csv)")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--t", dest="t_grid", help="comma-separated times")

    lattice = ("dcp", "gdcp")
    sp = sub.add_parser("duality-check", help="residual of the duality relations")
    common(sp, ("dcp", "gdcp", "sir"), "dcp")
    sp.add_argument("--draws", type=int, default=50)
    sp.add_argument("--sink-cap", type=int, default=4)
    sp = sub.add_parser("stationary", help="exact stationary law")
    common(sp, lattice, "dcp")
    sp = sub.add_parser("absorption", help="absorbed-particle law of the dual")
    common(sp, lattice, "dcp")
    sp.add_argument("--initial", required=False)
    sp.add_argument("--k-max", type=int, default=6)
    sp = sub.add_parser("correlate", help="correlations: direct, duality, MC")
    common(sp, lattice, "dcp")
    sp.add_argument("--sites")
    sp.add_argument("--replicas", type=int, default=0)
    sp = sub.add_parser("gdcp-profile", help="stationary one-point function of the GDCP")
    common(sp, lattice, "gdcp")
    sp.add_argument("--replicas", type=int, default=0)
    sp.add_argument("--t-avg", type=float, default=20.0)
    sp = sub.add_parser("gdcp-evolve", help="time evolution of the GDCP one-point function")
    common(sp, lattice, "gdcp")
    sp.add_argument("--initial")
    sp.add_argument("--profile")
    sp.add_argument("--replicas", type=int, default=0)
    sp = sub.add_parser("fast-stirring", help="particle-number chain in the fast stirring limit")
    common(sp, ("dcp",), "dcp")
    sp.add_argument("--convention", choices=("paper", "corrected", "both"), default="both")
    sp.add_argument("--d-large", type=float, default=1e8)
    sp = sub.add_parser("sir-cluster", help="SIR cluster functions G, J, H")
    common(sp, ("sir",), "sir")
    sp.add_argument("--fixture", choices=("single-s", "rsi"))
    sp.add_argument("--states", help="S/I/R word on the window")
    sp.add_argument("--lo", type=int, default=0)
    sp.add_argument("--outside", choices=("S", "R"), default="R")
    sp.add_argument("--measure", help="pS,pI,pR of a translation-invariant product measure")
    sp.add_argument("--kind", choices=("G", "J", "H"))
    sp.add_argument("--r", type=int)
    sp.add_argument("--n-cluster", type=int, default=1)
    sp.add_argument("--replicas", type=int, default=0)
    sp = sub.add_parser("simulate", help="Gillespie trajectories")
    common(sp, mc.MODELS, "dcp")
    sp.add_argument("--initial")
    sp.add_argument("--states")
    sp.add_argument("--lo", type=int, default=0)
    sp.add_argument("--outside", choices=("S", "R"), default="R")
    sp.add_argument("--fixture", choices=("single-s", "rsi"))
    sp.add_argument("--r", type=int)
    sp.add_argument("--n-cluster", type=int, default=1)
    sp.add_argument("--layer", choices=("G", "J"), default="G")
    sp.add_argument("--replicas", type=int, default=1)
    sp.add_argument("--until-extinct", action="store_true")
    sp = sub.add_parser("rerun", help="re-run the spec embedded in a report and compare")
    sp.add_argument("--report", required=True)
    sp.add_argument("--output")
    return ap


def _config_defaults(path: str, command: str) -> dict:
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise SpecError(f"cannot read config file {path}")
    out = {}
    for sec in ("common", command):
        if cp.has_section(sec):
            for k, v in cp.items(sec):
                out[k.replace("-", "_")] = v
    return out


def parse_spec(argv) -> tuple[str, object]:
    ap = build_parser()
    ns = ap.parse_args(argv)
    if ns.command == "rerun":
        return "rerun", ns
    if ns.config:
        sp = ap._subparsers._group_actions[0].choices[ns.command]
        defaults = _config_defaults(ns.config, ns.command)
        if "n" in defaults:
            defaults["N"] = defaults.pop("n")
        known = {a.dest for a in sp._actions}
        unknown = set(defaults) - known
        if unknown:
            raise SpecError(f"unknown config keys: {sorted(unknown)}")
        sp.set_defaults(**defaults)
        ns = ap.parse_args(argv)
    return ns.command, namespace_to_spec(ns)


def namespace_to_spec(ns) -> RunSpec:
    d = vars(ns)
    params = {k: d[k] for k in PARAM_KEYS if k in d}
    query_keys = ("draws", "sink_cap", "initial", "k_max", "sites", "replicas", "t_avg", "profile",
                  "convention", "d_large", "fixture", "measure", "kind", "r", "n_cluster", "layer",
                  "until_extinct", "workers")
    query = {k: d[k] for k in query_keys if k in d and d[k] is not None}
    window = None
    if d.get("states"):
        window = {"lo": d.get("lo", 0), "states": d["states"], "outside": d.get("outside", "R")}
    t_grid = _floats(d.get("t_grid"))
    return RunSpec(ns.command, d.get("model"), params, d.get("N"), window, query, t_grid,
                   d.get("tol"), d.get("seed", 0), d.get("output"))


def _error(kind: str, message: str, command: str | None, code: int) -> int:
    print(json.dumps({"error": kind, "message": message, "command": command}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    command = None
    try:
        command, spec = parse_spec(argv)
        if command == "rerun":
            return rerun(spec.report, spec.output)
        return run(spec)
    except ToleranceBreach as e:
        return _error("tolerance", str(e), command, 1)
    except exact.TruncationError as e:
        return _error("truncation", str(e), command, 3)
    except mc.StepBudgetExceeded as e:
        return _error("budget", str(e), command, 3)
    except (SpecError, ValueError, TypeError, KeyError, OSError) as e:
        return _error("precondition", str(e), command, 2)


if __name__ == "__main__":
    sys.exit(main())
