"""Subcommand implementations: each takes a validated config and writes CSV/JSON files."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import criteria as crit
from .config import ExperimentConfig
from .diagnostics import (big_jump_params, integrated_ratio, lemma41_probe, lemma42_probe, lemma51_probe,
                          necessity_probe, srt_ratio)
from .dists import (LatticeLaw, UaoSpec, law_to_text, make_finite_law, make_half_counterexample,
                    make_pareto_lattice, make_smooth_family, make_twosided_counterexample, make_uao_family)
from .errors import ConfigError
from .montecarlo import mc_event_probability, mc_renewal_estimate, mc_tail_frequency
from .regvar import SlowlyVarying, TailIndexFunction
from .renewal import renewal_cached, renewal_measure_twosided, small_n_sums

SCHEMA_PATH = Path(__file__).with_name("schema") / "verdict.schema.json"


# -- output helpers -------------------------------------------------------------------------


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else None
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def verdict(probe: str, params: dict, values, trend=None) -> dict:
    return {"probe": probe, "params": params, "values": values, "trend": trend}


def out_dir(cfg: ExperimentConfig) -> Path:
    p = Path(cfg.run["out"])
    p.mkdir(parents=True, exist_ok=True)
    return p


# -- law construction ---------------------------------------------------------------------


def tail_function(cfg: ExperimentConfig) -> TailIndexFunction:
    law = cfg.law
    kind = law["L"]
    params = {"beta": law["L_beta"]} if kind == "log-power" else {}
    return TailIndexFunction(law["alpha"], SlowlyVarying(kind, params))


def law_from_config(cfg: ExperimentConfig) -> LatticeLaw:
    law = cfg.law
    fam = law["family"]
    if fam == "pareto":
        return make_pareto_lattice(tail_function(cfg), h=law["h"], K_table=law["K_table"])
    if fam == "smooth":
        return make_smooth_family(law["alpha"], law["eps"], h=law["h"], K_table=law["K_table"])
    if fam == "uao":
        if not law["z_seq"] or not law["eps_seq"]:
            raise ConfigError("[law] uao family needs z_seq and eps_seq")
        window = tuple(law["tail_window"]) if law["tail_window"] else None
        return make_uao_family(UaoSpec(tail_function(cfg), law["z_seq"], law["eps_seq"], h=law["h"],
                                       tail_window=window, K_table=law["K_table"]))
    if fam == "twosided":
        return make_twosided_counterexample(law["alpha"], grid_h=law["h"], n_max=law["n_max"] or 30,
                                            K_table=law["K_table"])
    if fam == "half":
        return make_half_counterexample(grid_h=law["h"], n_max=law["n_max"] or 40, K_table=law["K_table"])
    if fam == "finite":
        return make_finite_law(law["masses"], law["k_min"], law["h"])
    raise ConfigError(f"unknown family {fam!r}")


# -- subcommands ------------------------------------------------------------------------------


def cmd_dist_build(cfg: ExperimentConfig, F: LatticeLaw | None = None) -> dict:
    F = F or law_from_config(cfg)
    out = out_dir(cfg)
    (out / "law.txt").write_text(law_to_text(F))
    summary = F.summary()
    if "cluster_sizes" in F.meta:
        summary["cluster_count"] = len(F.meta["cluster_sizes"])
    write_json(out / "law.json", verdict("dist-build", {"family": F.family}, summary))
    return summary


def _ratio_points(F: LatticeLaw, K: int, count: int) -> np.ndarray:
    ks = np.unique(np.round(np.geomspace(1, K, count)).astype(np.int64))
    return ks[ks >= 1]


def cmd_renewal(cfg: ExperimentConfig, F: LatticeLaw | None = None) -> dict:
    F = F or law_from_config(cfg)
    out = out_dir(cfg)
    K = cfg.renewal["K"]
    if F.one_sided:
        table, hit = renewal_cached(F, K, cfg.renewal["method"], cfg.run["cache"])
    else:
        table, hit = renewal_measure_twosided(F, K, cfg.renewal["N_max"]), False
    ks = np.arange(K + 1)
    write_csv(out / "renewal.csv", ["k", "x", "u"], zip(ks, ks * F.h, table.u))
    pts = _ratio_points(F, K, cfg.renewal["ratio_points"])
    xs = pts * F.h
    loc = np.atleast_1d(srt_ratio(F, table, xs))
    integ = np.atleast_1d(integrated_ratio(F, table, xs))
    write_csv(out / "ratios.csv", ["x", "u", "srt_ratio", "integrated_ratio"],
              zip(xs, table.u[pts], loc, integ))
    lo = int(math.ceil(0.8 * K))
    band = np.arange(lo, K + 1) * F.h
    values = {"K": K, "cache_hit": hit, "srt_ratio_at_K": float(loc[-1]),
              "integrated_ratio_at_K": float(integ[-1]),
              "median_srt_ratio_top_band": float(np.median(srt_ratio(F, table, band))),
              "truncation_error": None if table.truncation_error is None else float(table.truncation_error.max()),
              "ledger": table.ledger}
    write_json(out / "renewal.json", verdict("renewal", {"K": K, "method": table.method}, values))
    return {"table": table, "x": xs, "srt": loc, "integrated": integ, **values}


def _criterion_grid(F, cfg, key, name):
    g = crit.evaluate_grid(F, key, cfg.grid["eta_list"], cfg.grid["x_list"],
                           T=cfg.criteria["T"] if key in ("chi", "ns_r") else None,
                           threads=cfg.run["threads"])
    g.criterion = name
    return g


def cmd_criteria(cfg: ExperimentConfig, F: LatticeLaw | None = None) -> dict:
    F = F or law_from_config(cfg)
    out = out_dir(cfg)
    results, grids = [], {}
    keys = {"ns-density": "ns_density", "ns-interval": "ns_interval", "ns-twosided": "ns_twosided",
            "chi": "chi"}
    for name in cfg.criteria["select"]:
        if name in keys:
            g = _criterion_grid(F, cfg, keys[name], name)
            g.to_csv(out / f"criteria-{name}.csv")
            side = g.sidecar()
            write_json(out / f"criteria-{name}.json",
                       verdict(name, {"eta_list": g.eta_list, "x_list": g.x_list, "T": g.T}, side, g.trend))
            grids[name] = g
            results.append(verdict(name, {"T": g.T}, side, g.trend))
        elif name == "doney":
            rep = crit.doney_sup(F, cfg.criteria["x_max"])
            results.append(verdict(name, {"x_max": cfg.criteria["x_max"]}, rep))
        elif name == "half":
            if F.A is None or abs(F.alpha - 0.5) > 1e-12:
                raise ConfigError("half criterion needs alpha = 1/2")
            rep = crit.half_condition(F.A, cfg.criteria["x_max"])
            write_csv(out / "criteria-half.csv", ["x", "Lstar_over_L"], zip(rep["x"], rep["ratio"]))
            results.append(verdict(name, {"x_max": cfg.criteria["x_max"]},
                                   {k: rep[k] for k in ("sup_ratio", "witness_x")}, rep["verdict"]))
        elif name == "smoothness":
            if F.alpha > 0.5:
                raise ConfigError("smoothness criterion needs alpha <= 1/2")
            xs = [x for x in cfg.grid["x_list"] if x <= 2 ** 20]
            rep = crit.smoothness_exponent(F, xs, cfg.criteria["eps"])
            results.append(verdict(name, {"eps": cfg.criteria["eps"]}, rep,
                                   "certified" if rep["certified"] else "not certified"))
    write_json(out / "verdicts.json", results)
    return {"verdicts": results, "grids": grids}


def cmd_probe(cfg: ExperimentConfig, F: LatticeLaw | None = None) -> dict:
    F = F or law_from_config(cfg)
    out = out_dir(cfg)
    p = cfg.probe
    deltas = cfg.grid["delta_list"]
    results = []
    for name in p["select"]:
        if name == "necessity":
            rep = necessity_probe(F, cfg.grid["x_list"], p["w"])
            ms = sorted(rep["series"])
            write_csv(out / "probe-necessity.csv", ["x"] + [f"m{m}" for m in ms],
                      zip(rep["x"], *[rep["series"][m] for m in ms]))
            results.append(verdict(name, {"w": p["w"]}, {f"m{m}": rep["series"][m] for m in ms},
                                   {f"m{m}": rep["trend"][m] for m in ms}))
        elif name == "small-n":
            vals = small_n_sums(F, p["x"], deltas)
            write_csv(out / "probe-small-n.csv", ["delta", "small_n_sum"], sorted(vals.items(), reverse=True))
            results.append(verdict(name, {"x": p["x"]}, {repr(d): v for d, v in vals.items()}))
        elif name in ("lemma41", "lemma42"):
            if name == "lemma41":
                vals = [lemma41_probe(F, d, p["x"], p["ell"], p["m"]) for d in deltas]
            else:
                vals = [lemma42_probe(F, d, p["x"], p["ell"]) for d in deltas]
            write_csv(out / f"probe-{name}.csv", ["delta", "ratio"], zip(deltas, vals))
            results.append(verdict(name, {"x": p["x"], "ell": p["ell"], "m": p["m"]},
                                   {"delta": deltas, "ratio": vals}))
        elif name == "lemma51":
            rep = lemma51_probe(F, [int(n) for n in p["n_list"]], p["z"])
            write_csv(out / "probe-lemma51.csv", ["n", "a_n_P"], zip(rep["n"], rep["scaled"]))
            results.append(verdict(name, {"z": p["z"]}, rep))
        elif name == "bigjump":
            bj = big_jump_params(F.alpha)
            xi = {int(n): bj.xi(float(F.A.inverse(float(n))), p["x"]) for n in p["n_list"]}
            results.append(verdict(name, {"x": p["x"]}, {"gamma": bj.gamma, "kappa": bj.kappa,
                                                          "J_alpha": bj.J_alpha, "xi": xi}))
        elif name == "llt":
            from .stable import StableDensity, llt_error
            phi = StableDensity(F.alpha, F.p, F.q)
            rows = [llt_error(F, int(n), phi=phi) for n in p["n_list"]]
            write_csv(out / "probe-llt.csv", ["n", "a_n", "stat", "stat_over_sup_phi"],
                      [(r["n"], r["a_n"], r["stat"], r["stat"] / r["sup_phi"]) for r in rows])
            results.append(verdict(name, {"n_list": p["n_list"]}, rows))
    write_json(out / "probes.json", results)
    return {"verdicts": results}


def cmd_mc(cfg: ExperimentConfig, F: LatticeLaw | None = None) -> dict:
    F = F or law_from_config(cfg)
    out = out_dir(cfg)
    m = cfg.mc
    seed, threads = cfg.run["seed"], cfg.run["threads"]
    if m["target"] == "renewal":
        est = mc_renewal_estimate(F, m["x"], m["w"], m["n_walks"], seed, m["batches"], threads)
    elif m["target"] == "event":
        est = mc_event_probability(F, m["n"], m["x"], m["n_walks"], seed, k=m["k"], xi=m["xi"],
                                   batches=m["batches"], threads=threads)
    else:
        est = mc_tail_frequency(F, m["x"], m["n_walks"], seed, m["batches"])
    rec = json.loads(est.to_json())
    write_csv(out / "mc.csv", ["target", "estimate", "stderr", "n_walks", "seed", "batches"],
              [(est.target, est.estimate, est.stderr, est.n_walks, est.seed, est.batches)])
    write_json(out / "mc.json", verdict("mc", {"target": m["target"]}, rec))
    return rec


def cmd_report(cfg: ExperimentConfig, svg: bool = False) -> dict:
    from . import plotting

    F = law_from_config(cfg)
    out = out_dir(cfg)
    summary = cmd_dist_build(cfg, F)
    figures = []
    result = {"law": summary}
    if F.one_sided:
        ren = cmd_renewal(cfg, F)
        figures.append(plotting.plot_ratios(ren["x"], ren["srt"], ren["integrated"], out / "fig-ratios", svg,
                                            title=f"{F.family}, alpha = {F.alpha:g}"))
        result["renewal"] = {k: v for k, v in ren.items() if k not in ("table", "x", "srt", "integrated")}
    crits = cmd_criteria(cfg, F)
    for name, g in crits["grids"].items():
        figures.append(plotting.plot_grid(g, out / f"fig-criteria-{name}", svg))
    result["verdicts"] = crits["verdicts"]
    if F.one_sided and "necessity" in cfg.probe["select"]:
        rep = necessity_probe(F, cfg.grid["x_list"], cfg.probe["w"])
        write_csv(out / "probe-necessity.csv", ["x"] + [f"m{m}" for m in sorted(rep["series"])],
                  zip(rep["x"], *[rep["series"][m] for m in sorted(rep["series"])]))
        figures.append(plotting.plot_series(rep["x"], {f"m = {m}": v for m, v in rep["series"].items()},
                                            out / "fig-necessity", svg, title="(x/A(x)) P(S_m in (x-w, x])"))
    result["figures"] = [p.name for p in figures]
    write_json(out / "report.json", verdict("report", {"svg": svg}, result))
    return result
