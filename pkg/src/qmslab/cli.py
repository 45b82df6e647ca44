"""Command-line harness: run a check pipeline, write a deterministic manifest.

Every subcommand resolves an ExperimentConfig (file values overridden by
explicit flags), runs its pipeline, and writes into the output directory:

    manifest.json   canonical JSON, byte-identical across same-seed runs
    reports.json    full inequality reports keyed by id
    *.csv           tabular traces
    figures/*.png   rendered figures (unless --no-figures)
    timing.txt      wall-clock data, kept out of the manifest on purpose

Exit codes: 0 all hard checks passed, 1 at least one failed, 2 the input
was unusable. Reports whose name ends in "-diagnostic" are informational
and never affect the exit code.
"""

import argparse
import dataclasses
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import ConfigError, QmsLabError
from .operator_core import choi_matrix, dag, vec
from .lindblad import (check_detailed_balance, conditional_expectation_kms,
                       semigroup_superoperator)
from .entropy import (decay_trace, default_time_grid, entropy_production_direct,
                      entropy_production_fisher, estimate_clsi_witness,
                      estimate_mlsi)
from .holley_stroock import (check_entropy_comparison, check_ep_comparison,
                             check_hs_transfer, check_lsi_perturbation,
                             hs_factor_nonprimitive, hs_factor_primitive,
                             model_is_primitive)
from .sdpi import (alpha2_unital, build_unital_counterpart, channel_from_model,
                   check_sdpi_bound, check_sdpi_corollary, estimate_sdpi,
                   state_projection_superop)
from .stateprep import (build_graph_generator, build_history_model,
                        default_time_points, graph_heat_partner,
                        graph_hs_bound, run_preparation, run_stopping_time,
                        stopping_register_threshold)
from .thermal import (effective_low_energy_model, flagged_evolution,
                      ladder_model, t1_relaxation_check, thermal_hs_factor,
                      truncated_gibbs)
from . import modelfile, plots, sampling
from .reporting import (canonical_json, make_report, model_hash,
                        summarize_reports, write_csv, write_json)

MODEL_CHECK_TOL = 1e-8
CHOI_TOL = 1e-9


class RunContext:
    """Collects reports and artifacts for one subcommand invocation."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.out = cfg.out or f"qmslab-{cfg.command}-out"
        os.makedirs(self.out, exist_ok=True)
        self.reports = []
        self.ids = []
        self.artifacts = []
        self.extra = {}

    def add(self, report):
        rid = f"{len(self.reports):04d}-{report.name}"
        self.reports.append(report)
        self.ids.append(rid)
        return rid

    def add_all(self, reports):
        return [self.add(r) for r in reports]

    def artifact(self, relpath):
        self.artifacts.append(relpath)
        return os.path.join(self.out, relpath)

    def csv(self, name, columns, rows, comment=None):
        write_csv(self.artifact(name + ".csv"), columns, rows, comment=comment)

    def figure(self, fn, name, *args, **kwargs):
        if not self.cfg.figures:
            return None
        fig_dir = os.path.join(self.out, "figures")
        path = fn(fig_dir, name, *args, **kwargs)
        self.artifacts.append(os.path.join("figures", name + ".png"))
        return path

    def hard_reports(self):
        return [r for r in self.reports
                if not r.name.endswith("-diagnostic")]

    def finish(self, started):
        checks = [{"id": rid, "name": r.name, "pass": r.passed,
                   "slack": r.slack}
                  for rid, r in zip(self.ids, self.reports)]
        # the output location is not an experiment parameter; keeping it out
        # of the manifest makes same-seed runs byte-identical anywhere
        cfg_dict = self.cfg.as_dict()
        cfg_dict.pop("out")
        manifest = {
            "command": self.cfg.command,
            "code_version": __version__,
            "config": cfg_dict,
            "config_hash": model_hash(cfg_dict),
            "checks": checks,
            "summary": summarize_reports(self.hard_reports()),
            "n_diagnostics": len(self.reports) - len(self.hard_reports()),
            "artifacts": sorted(self.artifacts),
            "extra": self.extra,
        }
        write_json(os.path.join(self.out, "manifest.json"), manifest)
        write_json(os.path.join(self.out, "reports.json"),
                   {rid: r.as_dict()
                    for rid, r in zip(self.ids, self.reports)})
        # wall clock lives outside the manifest so reruns stay byte-identical
        with open(os.path.join(self.out, "timing.txt"), "w") as fh:
            fh.write(f"wall_seconds={time.time() - started:.3f}\n")
        return 0 if all(r.passed for r in self.hard_reports()) else 1


def _cptp_reports(model, times, tol=CHOI_TOL):
    """Complete positivity and trace preservation of e^{-t L_*}."""
    d = model.dim
    tr_vec = vec(np.eye(d)).conj()
    worst_eig = (np.inf, None)
    worst_tr = (-np.inf, None)
    for t in times:
        mat = semigroup_superoperator(model.schrodinger, t)
        C = choi_matrix(mat)
        lam = float(np.linalg.eigvalsh(0.5 * (C + dag(C))).min())
        dev = float(np.abs(tr_vec @ mat - tr_vec).max())
        if lam < worst_eig[0]:
            worst_eig = (lam, t)
        if dev > worst_tr[0]:
            worst_tr = (dev, t)
    yield make_report("cptp-choi-positive", -worst_eig[0], 0.0,
                      abs_tol=tol, rel_tol=0.0,
                      witness={"min_choi_eig": worst_eig[0],
                               "worst_time": float(worst_eig[1]),
                               "times": [float(t) for t in times]})
    yield make_report("cptp-trace-preserving", worst_tr[0], 0.0,
                      abs_tol=tol, rel_tol=0.0,
                      witness={"worst_time": float(worst_tr[1])})


def run_check_model(ctx):
    cfg = ctx.cfg
    model = modelfile.load_model(cfg.model)
    ctx.extra["model"] = {"dim": model.dim, "label": model.label,
                          "n_jumps": len(model.jumps.ops),
                          "bohr_freqs": [float(w) for w in model.bohr_freqs],
                          "spectral_gap": model.spectral_gap(),
                          "primitive": model_is_primitive(model)}
    ctx.add(check_detailed_balance(model.heisenberg, model.sigma.rho,
                                   tol=MODEL_CHECK_TOL))
    ls = model.schrodinger.matrix
    stat_dev = np.abs(ls @ vec(model.sigma.rho)).max() \
        / max(1.0, np.abs(ls).max())
    ctx.add(make_report("stationarity", float(stat_dev), 0.0,
                        abs_tol=MODEL_CHECK_TOL, rel_tol=0.0))
    gap = model.spectral_gap()
    ctx.add_all(_cptp_reports(model, np.geomspace(0.05, 5.0, 6) / gap))
    e_kernel = model.fixed_point(cfg.seed).E.matrix
    e_kms = conditional_expectation_kms(model).matrix
    dev = np.abs(e_kernel - e_kms).max() / max(1.0, np.abs(e_kms).max())
    ctx.add(make_report("conditional-expectation-routes", float(dev), 0.0,
                        abs_tol=MODEL_CHECK_TOL, rel_tol=0.0))
    worst = (-np.inf, None)
    for i in range(cfg.samples):
        rng = sampling.child_rng(cfg.seed, i)
        rho = sampling.random_full_rank_density(rng, model.dim)
        a = entropy_production_direct(model, rho)
        b = entropy_production_fisher(model, rho)
        rel = abs(a - b) / (1.0 + abs(a))
        if rel > worst[0]:
            worst = (rel, i)
    ctx.add(make_report("ep-route-agreement", worst[0], 0.0,
                        abs_tol=MODEL_CHECK_TOL, rel_tol=0.0,
                        witness={"n_samples": cfg.samples,
                                 "worst_sample": worst[1]}))


def _resolve_rho(spec, model):
    if spec is None or spec == "uniform":
        return np.eye(model.dim) / model.dim
    if spec == "basis0":
        rho = np.zeros((model.dim, model.dim), dtype=complex)
        rho[0, 0] = 1.0
        return rho
    if isinstance(spec, str):
        doc = modelfile.load_yaml(spec)
        if "state" not in doc:
            raise ConfigError(f"{spec}: missing top-level 'state' section")
        spec = doc["state"]
    return modelfile.sigma_from_config(spec, "state", None)


def run_decay(ctx):
    cfg = ctx.cfg
    model = modelfile.load_model(cfg.model)
    rho0 = _resolve_rho(cfg.rho, model)
    if rho0.shape != (model.dim, model.dim):
        raise ConfigError(f"state shape {rho0.shape} != model dim {model.dim}")
    if cfg.times is not None:
        grid = np.asarray([float(t) for t in cfg.times])
    else:
        grid = default_time_grid(model)
    trace = decay_trace(model, rho0, grid)
    ctx.csv("decay", ["t", "entropy", "ep"],
            list(zip(trace.times, trace.entropies, trace.eps)))
    rise = float(np.diff(trace.entropies).max()) if len(grid) > 1 else 0.0
    scale = max(1.0, float(trace.entropies.max()))
    ctx.add(make_report("decay-monotone", rise, 0.0,
                        abs_tol=cfg.tol_abs * scale, rel_tol=0.0,
                        witness={"n_times": len(grid),
                                 "initial_entropy": float(trace.entropies[0])}))
    ctx.add(make_report("ep-nonnegative", -float(trace.eps.min()), 0.0,
                        abs_tol=cfg.tol_abs, rel_tol=0.0))
    ctx.figure(plots.save_decay_curves, "decay", trace.times,
               {"relative entropy": trace.entropies,
                "entropy production": trace.eps},
               title=model.label or "decay")
    ctx.extra["decay"] = {"initial_entropy": float(trace.entropies[0]),
                          "final_entropy": float(trace.entropies[-1])}


def run_estimate(ctx):
    cfg = ctx.cfg
    kind = cfg.estimate
    if kind not in ("mlsi", "clsi", "sdpi", "alpha2"):
        raise ConfigError(f"unknown estimate kind '{kind}'")
    if kind in ("mlsi", "clsi"):
        model = modelfile.load_model(cfg.model)
        fn = estimate_mlsi if kind == "mlsi" else estimate_clsi_witness
        est = fn(model, n_samples=cfg.samples, seed=cfg.seed)
        ctx.add(make_report("estimate-positive", 0.0, est.value,
                            abs_tol=cfg.tol_abs, rel_tol=0.0,
                            witness={"kind": kind, "label": model.label}))
        if kind == "clsi":
            direct = estimate_mlsi(model, n_samples=cfg.samples, seed=cfg.seed)
            ctx.add(make_report("clsi-below-mlsi-diagnostic", est.value,
                                direct.value, abs_tol=1e-9, rel_tol=0.05,
                                witness={"mlsi": direct.value}))
    else:
        if cfg.channel is not None:
            channel = modelfile.load_channel(cfg.channel)
        elif cfg.model is not None and cfg.time is not None:
            model = modelfile.load_model(cfg.model)
            channel = channel_from_model(model, float(cfg.time))
        elif cfg.model is not None:
            # the positional file may itself be a channel file
            channel = modelfile.load_channel(cfg.model)
        else:
            raise ConfigError("sdpi/alpha2 need a channel file, "
                              "or a model file plus a time")
        if kind == "sdpi":
            e_star = state_projection_superop(channel.sigma.rho)
            est = estimate_sdpi(channel, e_star, n_samples=cfg.samples,
                                seed=cfg.seed)
            ctx.add(check_sdpi_bound(channel, n_samples=cfg.samples,
                                     seed=cfg.seed, abs_tol=cfg.tol_abs,
                                     rel_tol=cfg.tol_rel))
            ctx.add(make_report("sdpi-below-one", est.value, 1.0,
                                abs_tol=cfg.tol_abs, rel_tol=0.0))
        else:
            phi0 = build_unital_counterpart(channel)
            m0 = phi0.action.matrix
            est = alpha2_unital(np.eye(m0.shape[0]) - m0 @ m0,
                                n_samples=cfg.samples, seed=cfg.seed)
            ctx.add(check_sdpi_corollary(channel, n_samples=cfg.samples,
                                         seed=cfg.seed))
    write_json(ctx.artifact("estimate.json"),
               {"kind": kind, **est.as_dict()})
    if len(est.ratios):
        ctx.figure(plots.save_histogram, "ratios", np.asarray(est.ratios),
                   f"{kind} sampled ratio", vline=est.value)
    ctx.extra["estimate"] = {"kind": kind, "value": est.value,
                             "n_samples": est.n_samples}


def run_hs_verify(ctx):
    cfg = ctx.cfg
    model_sigma = modelfile.load_model(cfg.model)
    model_prime = modelfile.load_model(cfg.model_prime)
    n = cfg.samples
    ctx.add_all(check_entropy_comparison(model_sigma, model_prime,
                                         n_samples=n, seed=cfg.seed,
                                         abs_tol=cfg.tol_abs,
                                         rel_tol=cfg.tol_rel))
    ctx.add_all(check_ep_comparison(model_sigma, model_prime, n_samples=n,
                                    seed=cfg.seed, abs_tol=cfg.tol_abs,
                                    rel_tol=cfg.tol_rel))
    agg, _per_sample = check_lsi_perturbation(model_sigma, model_prime,
                                              n_samples=n, seed=cfg.seed)
    ctx.add(agg)
    factor = hs_factor_nonprimitive(model_sigma, model_prime)
    ctx.extra["factor_total"] = factor.total
    ctx.extra["factor_details"] = factor.details
    for model in (model_sigma, model_prime):
        if model_is_primitive(model):
            ctx.add_all(check_entropy_comparison(model, None, n_samples=n,
                                                 seed=cfg.seed,
                                                 abs_tol=cfg.tol_abs,
                                                 rel_tol=cfg.tol_rel))
            ctx.add_all(check_ep_comparison(model, None, n_samples=n,
                                            seed=cfg.seed,
                                            abs_tol=cfg.tol_abs,
                                            rel_tol=cfg.tol_rel))
    if model_is_primitive(model_sigma) and model_is_primitive(model_prime):
        est_sigma = estimate_mlsi(model_sigma, n_samples=n, seed=cfg.seed)
        est_prime = estimate_mlsi(model_prime, n_samples=n, seed=cfg.seed)
        ctx.add(check_hs_transfer(model_sigma, model_prime, est_sigma,
                                  est_prime))
        ctx.extra["estimates"] = {"sigma": est_sigma.value,
                                  "prime": est_prime.value}


def _graph_pipeline(ctx, scenario):
    cfg = ctx.cfg
    spec = scenario["spec"]
    sigma = scenario["sigma"]
    rule = scenario["degenerate_rule"]
    factor = graph_hs_bound(spec, sigma, rule)
    model = build_graph_generator(spec, sigma, rule)
    heat = graph_heat_partner(spec, sigma, rule)
    ctx.extra["graph"] = {"m": spec.m, "n_edges": len(spec.edges),
                          "factor_total": factor.total,
                          "factor_details": factor.details}
    if model_is_primitive(model):
        generic = hs_factor_primitive(model)
        ctx.add(make_report("graph-factor-consistency",
                            abs(factor.total - generic.total), 0.0,
                            abs_tol=1e-10 * (1.0 + generic.total),
                            rel_tol=0.0,
                            witness={"graph_total": factor.total,
                                     "generic_total": generic.total}))
    est = estimate_mlsi(model, n_samples=cfg.samples, seed=cfg.seed)
    est_heat = estimate_mlsi(heat, n_samples=cfg.samples, seed=cfg.seed)
    ctx.add(make_report("graph-transfer-diagnostic", est_heat.value,
                        factor.total * est.value, abs_tol=0.0, rel_tol=0.1,
                        witness={"est_sigma": est.value,
                                 "est_heat": est_heat.value,
                                 "total": factor.total}))
    ref = factor.details.get("complete_graph_reference")
    if ref is not None and abs(ref - 2.0 * spec.m) < 1e-12:
        # uniform complete graph: the sampled ratio never drops below 2m
        ctx.add(make_report("complete-graph-ratio", 2.0 * spec.m, est.value,
                            abs_tol=1e-6, rel_tol=0.0,
                            witness={"m": spec.m,
                                     "n_ratios": len(est.ratios)}))
    rng = sampling.child_rng(cfg.seed, 999)
    rho0 = sampling.random_full_rank_density(rng, spec.m)
    grid = default_time_grid(model, n=25)
    trace = decay_trace(model, rho0, grid)
    ctx.csv("graph_decay", ["t", "entropy", "ep"],
            list(zip(trace.times, trace.entropies, trace.eps)))
    ctx.figure(plots.save_decay_curves, "graph_decay", trace.times,
               {"relative entropy": trace.entropies}, title=model.label)
    ctx.extra["estimates"] = {"target": est.value, "heat": est_heat.value}


def _history_pipeline(ctx, scenario):
    cfg = ctx.cfg
    logical = scenario["logical"]
    hm = build_history_model(logical, scenario["unitaries"],
                             n_samples=max(40, cfg.samples // 2),
                             seed=cfg.seed)
    ctx.extra["history"] = {"T": hm.T, "kappa": hm.kappa,
                            "kappa_details": hm.kappa_details}
    s_grid = scenario["s_grid"]
    if s_grid is None:
        s_grid = default_time_points(hm.kappa, 10)
    X = np.eye(logical.dim) / logical.dim
    rows = []
    for s in s_grid:
        run = run_preparation(hm, X, float(s), scenario["input_mode"])
        ctx.add(run.report)
        ctx.add(run.decay_report)
        ctx.add(run.trace_report)
        rows.append((float(s), run.report.lhs, run.report.rhs,
                     run.success_prob))
    ctx.csv("preparation", ["s", "output_entropy", "bound", "success_prob"],
            rows)
    ctx.figure(plots.save_curve, "preparation", [r[0] for r in rows],
               [max(r[1], 1e-300) for r in rows], "s", "output entropy",
               extra=("bound", [r[2] for r in rows]), logy=True)
    s_mid = float(s_grid[len(s_grid) // 2])
    m_needed = int(np.ceil(stopping_register_threshold(hm.T, hm.kappa,
                                                       s_mid)))
    stop = run_stopping_time(hm, X, s_mid, max(1, m_needed))
    ctx.add(stop.report)
    ctx.add(stop.renormalized_report)
    ctx.extra["stopping"] = {"s": s_mid, "m": max(1, m_needed),
                             "failure_prob": stop.failure_prob}


def run_stateprep(ctx):
    scenario = modelfile.load_scenario(ctx.cfg.scenario)
    if scenario["kind"] == "graph":
        _graph_pipeline(ctx, scenario)
    elif scenario["kind"] == "history":
        _history_pipeline(ctx, scenario)
    else:
        raise ConfigError("stateprep needs a graph or history scenario")


def run_thermal(ctx):
    cfg = ctx.cfg
    scenario = modelfile.load_scenario(cfg.scenario)
    if scenario["kind"] != "gibbs":
        raise ConfigError("thermal needs a gibbs scenario")
    g = scenario["gibbs"]
    model = ladder_model(g, chi=scenario["chi"])
    factor = thermal_hs_factor(g)
    generic = hs_factor_primitive(model)
    ctx.add(make_report("thermal-factor-consistency",
                        abs(factor.total - generic.total), 0.0,
                        abs_tol=1e-10 * (1.0 + generic.total), rel_tol=0.0,
                        witness={"closed_form": factor.details,
                                 "generic": generic.details,
                                 "total": factor.total}))
    ctx.extra["gibbs"] = {"m": g.m, "beta": g.beta,
                          "energies": [float(e) for e in g.energies],
                          "factor_total": factor.total}
    rows = []
    dists = []
    for l in range(1, g.m + 1):
        _sig, bound, actual = truncated_gibbs(g, l)
        rows.append((l, float(g.energies[l - 1]), bound, actual))
        dists.append(actual)
        ctx.add(make_report("truncation-bound-diagnostic", actual, bound,
                            abs_tol=1e-12, rel_tol=0.0, witness={"l": l}))
    ctx.csv("truncation", ["l", "cutoff_energy", "bound", "actual"], rows)
    rise = float(np.diff(dists).max()) if len(dists) > 1 else 0.0
    ctx.add(make_report("truncation-monotone", rise, 0.0, abs_tol=1e-12,
                        rel_tol=0.0, witness={"distances": dists}))
    ctx.figure(plots.save_curve, "truncation", [r[0] for r in rows],
               [max(d, 1e-300) for d in dists], "cutoff index",
               "trace distance",
               extra=("first-order bound",
                      [max(r[2], 1e-300) for r in rows]), logy=True)
    if "cutoff_energy" in scenario:
        e0 = scenario["cutoff_energy"]
        t = scenario["time"]
        # start from the Gibbs state conditioned on the low-energy block
        p = g.probabilities * (np.asarray(g.energies) <= e0 + 1e-12)
        rho0 = np.diag(p / p.sum()).astype(complex)
        traj = flagged_evolution(model, g, e0, rho0, t,
                                 m_steps=scenario["m_steps"])
        ctx.csv("flagged", ["step", "keep_prob"],
                list(enumerate(traj.step_low_probs, start=1)))
        ctx.csv("flag_doubling", ["m", "p_low"], traj.details["doubling"])
        ctx.add(make_report("flag-marginalization",
                            traj.details["marginal_dev"], 0.0,
                            abs_tol=1e-8, rel_tol=0.0,
                            witness={"m_steps": traj.m_steps}))
        dbl = traj.details["doubling"]
        final_delta = abs(dbl[-1][1] - dbl[-2][1]) if len(dbl) > 1 else 0.0
        ctx.add(make_report("flag-probability-converged", final_delta, 1e-6,
                            abs_tol=0.0, rel_tol=0.0,
                            witness={"p_low_limit":
                                     traj.details["p_low_limit"],
                                     "converged": traj.details["converged"],
                                     "n_points": len(dbl)}))
        ctx.figure(plots.save_curve, "flag_doubling",
                   [float(m) for m, _ in dbl], [p for _, p in dbl],
                   "steps m", "all-low probability")
        effective, decay_report = effective_low_energy_model(
            model, g, e0, seed=cfg.seed)
        ctx.add(decay_report)
        ctx.extra["flagged"] = {"e0": e0, "t": t,
                                "p_low_limit": traj.details["p_low_limit"],
                                "effective_dim": effective.dim}
    if "t1" in scenario:
        ctx.add(t1_relaxation_check(scenario["t1"], scenario["t1_dim_b"],
                                    seed=cfg.seed))


RUNNERS = {
    "check-model": (run_check_model, "validate a detailed-balance model file"),
    "decay": (run_decay, "entropy decay trace with monotonicity checks"),
    "estimate": (run_estimate, "sample a decay or contraction constant"),
    "hs-verify": (run_hs_verify, "two-model perturbation comparison suite"),
    "stateprep": (run_stateprep, "graph or clock-register preparation runs"),
    "thermal": (run_thermal, "Gibbs ladder pipeline with low-energy flags"),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qmslab",
        description="numerical checks for detailed-balance quantum Markov "
                    "semigroups")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_fn, help_text) in RUNNERS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("inputs", nargs="*",
                       help="input files (model, channel or scenario)")
        p.add_argument("--config", help="experiment config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--tol-abs", type=float, dest="tol_abs")
        p.add_argument("--tol-rel", type=float, dest="tol_rel")
        p.add_argument("--out")
        p.add_argument("--workers", type=int)
        p.add_argument("--no-figures", action="store_true")
        if name == "decay":
            p.add_argument("--rho", help="initial state: uniform, basis0, "
                                         "or a state file")
            p.add_argument("--t-max", type=float, dest="t_max")
            p.add_argument("--n-times", type=int, dest="n_times")
        if name == "estimate":
            p.add_argument("--kind",
                           choices=("mlsi", "clsi", "sdpi", "alpha2"))
            p.add_argument("--time", type=float,
                           help="semigroup snapshot time for channel kinds")
    return parser


def _positional_fields(command, inputs, cfg_data):
    """Map positional input files onto the config fields each command uses."""
    slots = {"check-model": ["model"], "decay": ["model"],
             "estimate": ["model" if not cfg_data.get("channel") else
                          "channel"],
             "hs-verify": ["model", "model_prime"],
             "stateprep": ["scenario"], "thermal": ["scenario"]}[command]
    if len(inputs) > len(slots):
        raise ConfigError(f"{command} takes at most {len(slots)} "
                          "input file(s)")
    for slot, path in zip(slots, inputs):
        cfg_data[slot] = path
    return cfg_data


def resolve_config(args):
    data = {}
    if args.config:
        data = modelfile.load_yaml(args.config)
        if data.get("command") not in (None, args.command):
            raise ConfigError(
                f"config is for '{data.get('command')}', not '{args.command}'")
    data["command"] = args.command
    data = _positional_fields(args.command, args.inputs, data)
    for field in ("seed", "samples", "tol_abs", "tol_rel", "out", "workers"):
        val = getattr(args, field, None)
        if val is not None:
            data[field] = val
    if args.no_figures:
        data["figures"] = False
    if getattr(args, "rho", None) is not None:
        data["rho"] = args.rho
    if getattr(args, "kind", None) is not None:
        data["estimate"] = args.kind
    if getattr(args, "time", None) is not None:
        data["time"] = args.time
    cfg = modelfile.ExperimentConfig.from_dict(data)
    if args.command == "decay":
        if getattr(args, "n_times", None) is not None \
                and getattr(args, "t_max", None) is None:
            raise ConfigError("--n-times needs --t-max")
        if cfg.times is None and getattr(args, "t_max", None) is not None:
            n = max(2, args.n_times or 40)
            inner = np.geomspace(args.t_max / 1e4, args.t_max, n - 1)
            cfg.times = [0.0] + [float(t) for t in inner]
    for field, want in (("model", ("check-model", "decay")),
                        ("scenario", ("stateprep", "thermal")),
                        ("estimate", ("estimate",))):
        if args.command in want and getattr(cfg, field) is None:
            raise ConfigError(f"{args.command} needs '{field}' "
                              "(positional file or config field)")
    if args.command == "hs-verify" and (cfg.model is None
                                        or cfg.model_prime is None):
        raise ConfigError("hs-verify needs two model files")
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    started = time.time()
    try:
        cfg = resolve_config(args)
        ctx = RunContext(cfg)
        RUNNERS[args.command][0](ctx)
        code = ctx.finish(started)
    except (QmsLabError, OSError) as exc:
        print(f"qmslab: error: {exc}", file=sys.stderr)
        return 2
    summary = summarize_reports(ctx.hard_reports())
    print(f"qmslab {args.command}: {summary['n_pass']}/{summary['n_total']} "
          f"checks passed, worst slack {summary['worst_slack']:.3e}, "
          f"output in {ctx.out}")
    if code:
        for rid, r in zip(ctx.ids, ctx.reports):
            if not r.passed and not r.name.endswith("-diagnostic"):
                print(f"  FAIL {rid}: lhs={r.lhs:.6e} rhs={r.rhs:.6e} "
                      f"slack={r.slack:.3e}")
    return code


if __name__ == "__main__":
    sys.exit(main())
