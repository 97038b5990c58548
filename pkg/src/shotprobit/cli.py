"""Command-line pipelines: explore, fit, evaluate, rate, simulate, phi-search.

Every command writes its outputs into ``--out`` together with ``manifest.txt``
listing the effective configuration, input and output SHA-256 digests and
timings. Outputs are staged and only moved into place when the command
succeeds. Exit codes: 0 success, 1 runtime or numerical failure, 2 input or
usage error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import os
import shutil
import sys
import tempfile
import time
from importlib import metadata

import numpy as np

from .diagnostics import DEFAULT_PERMS, join_count_test, ripley_k
from .exceptions import ChainError, DesignError, GeometryError, KernelError, SchemaError
from .gibbs import ChainConfig, PriorConfig, run_chain, summarize
from .glm import fit_glm, predict_glm
from .ingest import (
    POSITIONAL_COLUMNS, EncodedDesign, apply_exclusions, build_design, parse_shots, resolve_duplicates,
    write_rejects, write_shots,
)
from .kernel import build_kernel
from .predict import GridSpec, heatmap_grid, predict_many, write_heatmap_csv, write_pgm
from .ratings import (
    DEFAULT_MIN_SHOTS, RatingFitConfig, rank_players, rate_players, rating_histograms,
)
from .scoring import beta_curve, compare_models
from .selection import PhiSearchConfig, select_phi
from .synthetic import RECOVERY_COLUMNS, SyntheticSpec, generate

SUBSETS = {"headers": "headers", "others": "other_shots", "all": "all"}

DEFAULTS = {
    "seed": 0,
    "subset": "others",
    "phi": 0.1,
    "burnin": 10000,
    "samples": 500,
    "thin": 1,
    "prior_a": 100.0,
    "prior_b": 100.0,
    "grid": "0.05:1.0:0.05",
    "split": 0.30,
    "search_burnin": 2000,
    "search_samples": 200,
    "workers": 1,
    "duplicates_seed": 0,
    "opponent_default": "zero",
    "k_neighbors": None,
    "perms": DEFAULT_PERMS,
    "sims": 99,
    "radii": "1:20:1",
    "costs": "0.05:0.95:0.05",
    "min_shots": None,
    "n_shots": 800,
    "theta": ",".join(str(t) for t in SyntheticSpec().true_theta),
    "sigma2": 1.0,
    "process": "uniform_half",
    "heatmap_step": 1.0,
    "phi_search": False,
    "with_baseline": False,
    "players": "",
    "columns": "",
}
INT_KEYS = ("k_neighbors", "min_shots")


class UsageError(Exception):
    """Bad input or configuration; exit code 2."""


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def read_config(path) -> dict:
    """Keyed text file: ``key = value`` per line, ``#`` comments, dashes or underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _coerce(key, value):
    default = DEFAULTS.get(key)
    if value is None or not isinstance(value, str):
        return value
    try:
        if key in INT_KEYS:
            return int(value)
        if default is None:
            return value
        if isinstance(default, bool):
            return value.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except ValueError:
        raise UsageError(f"bad value for {key}: {value!r}") from None
    return value


def effective_config(args, keys) -> dict:
    """Flags override the config file, which overrides the built-in defaults."""
    file_cfg = read_config(args.config) if getattr(args, "config", None) else {}
    cfg = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
        elif key in file_cfg:
            cfg[key] = _coerce(key, file_cfg[key])
        else:
            cfg[key] = DEFAULTS.get(key)
    return cfg


def parse_range(text: str) -> tuple:
    """``start:stop:step`` (inclusive stop) or a comma list, as floats."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return tuple(round(start + k * step, 10) for k in range(n))
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"cannot parse range {text!r}") from None


# --------------------------------------------------------------------------
# output staging and manifest
# --------------------------------------------------------------------------

def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _version() -> str:
    try:
        return metadata.version("shotprobit")
    except metadata.PackageNotFoundError:
        return "unknown"


class Run:
    """Collects outputs in a staging directory and publishes them on success."""

    def __init__(self, command, out_dir, cfg, inputs):
        self.command = command
        self.out_dir = os.path.abspath(out_dir)
        self.cfg = cfg
        self.inputs = list(inputs)
        self.timings = {}
        self._t0 = time.perf_counter()
        parent = os.path.dirname(self.out_dir) or "."
        os.makedirs(parent, exist_ok=True)
        self.stage = tempfile.mkdtemp(prefix=".stage-", dir=parent)
        self.outputs = []

    def path(self, name):
        if name not in self.outputs:
            self.outputs.append(name)
        return os.path.join(self.stage, name)

    def timed(self, label, start):
        self.timings[label] = time.perf_counter() - start

    def write_csv(self, name, header, rows):
        with open(self.path(name), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])

    def write_keyed(self, name, items):
        with open(self.path(name), "w", encoding="utf-8") as fh:
            for key, value in items:
                fh.write(f"{key} = {_cell(value)}\n")

    def _manifest(self):
        lines = [f"command = {self.command}", f"version = {_version()}",
                 f"seed = {self.cfg.get('seed', '')}", "", "[config]"]
        lines += [f"{k} = {_cell(v)}" for k, v in sorted(self.cfg.items())]
        lines += ["", "[inputs]"]
        lines += [f"{os.path.basename(p)} = {_digest(p)}" for p in self.inputs]
        lines += ["", "[outputs]"]
        lines += [f"{n} = {_digest(os.path.join(self.stage, n))}" for n in sorted(self.outputs)]
        self.timings["total_seconds"] = time.perf_counter() - self._t0
        lines += ["", "[timings]"]
        lines += [f"{k} = {v:.3f}" for k, v in self.timings.items()]
        with open(os.path.join(self.stage, "manifest.txt"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    def commit(self):
        self._manifest()
        os.makedirs(self.out_dir, exist_ok=True)
        for name in self.outputs + ["manifest.txt"]:
            os.replace(os.path.join(self.stage, name), os.path.join(self.out_dir, name))
        shutil.rmtree(self.stage, ignore_errors=True)

    def abort(self):
        shutil.rmtree(self.stage, ignore_errors=True)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    if v is None:
        return ""
    if isinstance(v, (tuple, list)):
        return ",".join(_cell(x) for x in v)
    return str(v)


def manifest_digests(path) -> str:
    """Manifest text without the timings section, for reproducibility checks."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return text.split("[timings]", 1)[0]


# --------------------------------------------------------------------------
# shared loading
# --------------------------------------------------------------------------

def _require_file(path):
    if not os.path.isfile(path):
        raise UsageError(f"no such file: {path}")


def load_records(path, run: Run | None, dup_seed: int):
    """Parse, filter and de-duplicate a shot file; writes rejects/dropped reports."""
    _require_file(path)
    records, rejects = parse_shots(path)
    kept, dropped = apply_exclusions(records)
    kept = resolve_duplicates(kept, "random", seed=dup_seed)
    if run is not None:
        if rejects:
            write_rejects(rejects, run.path("rejects.csv"))
        if dropped:
            run.write_csv("dropped.csv", ["shot_id", "reason"],
                          [(r.shot_id, why) for r, why in dropped])
    return kept


def _subset_tag(name):
    if name not in SUBSETS:
        raise UsageError(f"unknown subset {name!r}; choose from {sorted(SUBSETS)}")
    return SUBSETS[name]


def _design(records, cfg):
    tag = _subset_tag(cfg["subset"])
    columns = [c.strip() for c in cfg["columns"].split(",")] if cfg["columns"] else None
    return build_design(records, tag, history=records, columns=columns,
                        opponent_default=cfg["opponent_default"])


def _prior(cfg):
    try:
        return PriorConfig(float(cfg["prior_a"]), float(cfg["prior_b"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write_design(run, design: EncodedDesign):
    header = ["shot_id", "match_id", "player_id", "x", "y", "outcome", *design.column_names]
    rows = (
        (design.shot_ids[i], design.match_ids[i], design.player_ids[i],
         design.coords[i, 0], design.coords[i, 1], int(design.Y[i]), *design.X[i])
        for i in range(design.n)
    )
    run.write_csv("design.csv", header, rows)


def read_design(path) -> EncodedDesign:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = tuple(header[6:])
    arr = np.array([[float(v) for v in r[3:]] for r in body]).reshape(len(body), -1)
    return EncodedDesign(
        X=arr[:, 3:], Y=arr[:, 2], coords=arr[:, :2], column_names=cols, subset_tag="",
        shot_ids=tuple(r[0] for r in body), match_ids=tuple(r[1] for r in body),
        player_ids=tuple(r[2] for r in body),
    )


def _search(design, cfg, prior):
    search = PhiSearchConfig(grid=parse_range(cfg["grid"]), split_fraction=float(cfg["split"]),
                             seed=cfg["seed"])
    chain = ChainConfig(cfg["search_burnin"], cfg["search_samples"], 1, cfg["seed"])
    return select_phi(design, prior, chain, search, workers=cfg["workers"])


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

EXPLORE_KEYS = ("seed", "k_neighbors", "perms", "sims", "radii", "duplicates_seed")


def cmd_explore(args):
    cfg = effective_config(args, EXPLORE_KEYS)
    run = Run("explore", args.out, cfg, [args.input])
    try:
        kept = load_records(args.input, run, cfg["duplicates_seed"])
        if len(kept) < 2:
            raise UsageError("need at least two usable shots")
        pts = np.array([[r.location.x, r.location.y] for r in kept])
        labels = np.array([r.outcome for r in kept])
        window = (pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max())
        t = time.perf_counter()
        kres = ripley_k(pts, window, parse_range(cfg["radii"]), cfg["sims"], cfg["seed"])
        run.timed("ripley_seconds", t)
        run.write_csv("kfunction.csv", ["radius", "k_hat", "k_theo", "lo", "hi"], kres.rows())
        t = time.perf_counter()
        jres = join_count_test(pts, labels, cfg["k_neighbors"], cfg["perms"], cfg["seed"])
        run.timed("joincount_seconds", t)
        rows = jres.rows() + [("unlike_overall", jres.counts[2], jres.null_mean[2],
                               jres.null_sd[2], jres.p_value)]
        run.write_csv("joincount.csv", ["statistic", "observed", "null_mean", "null_sd", "p_value"],
                      rows)
        run.write_keyed("joincount_meta.txt", [("k_neighbors", jres.k_neighbors),
                                               ("n_perms", jres.n_perms), ("n", len(kept))])
        run.commit()
    except BaseException:
        run.abort()
        raise


FIT_KEYS = ("seed", "subset", "columns", "phi", "phi_search", "grid", "split", "search_burnin",
            "search_samples", "burnin", "samples", "thin", "prior_a", "prior_b", "workers",
            "duplicates_seed", "opponent_default", "heatmap_step")


def cmd_fit(args):
    cfg = effective_config(args, FIT_KEYS)
    cfg["phi_search"] = bool(cfg["phi_search"])
    run = Run("fit", args.out, cfg, [args.input])
    try:
        kept = load_records(args.input, run, cfg["duplicates_seed"])
        design = _design(kept, cfg)
        prior = _prior(cfg)
        phi = float(cfg["phi"])
        if cfg["phi_search"]:
            t = time.perf_counter()
            res = _search(design, cfg, prior)
            run.timed("phi_search_seconds", t)
            run.write_csv("phi_search.csv", ["phi", "mse"], res.rows())
            phi = res.phi_star
        kernel = build_kernel(design.coords, phi)
        chain = ChainConfig(cfg["burnin"], cfg["samples"], cfg["thin"], cfg["seed"])
        t = time.perf_counter()
        draws = run_chain(design, kernel, prior, chain)
        run.timed("gibbs_seconds", t)

        summ = summarize(draws)
        run.write_csv("summary.csv", ["parameter", "mean", "sd", "lower", "upper"], summ.rows())
        header, table = draws.table()
        run.write_csv("draws.csv", header, table)
        run.write_csv("w_draws.csv", list(design.shot_ids), draws.w_draws)
        _write_design(run, design)
        run.write_keyed("fit.txt", [
            ("subset", design.subset_tag), ("phi", phi), ("n", design.n), ("p", design.p),
            ("columns", design.column_names), ("seed", cfg["seed"]),
            ("n_sweeps", draws.n_sweeps),
        ])

        t = time.perf_counter()
        step = float(cfg["heatmap_step"])
        # reference levels for every situational covariate
        baseline = {c: 0.0 for c in design.column_names if c not in POSITIONAL_COLUMNS}
        xs, ys, P = heatmap_grid(draws, kernel, GridSpec(step=step), baseline)
        run.timed("heatmap_seconds", t)
        write_heatmap_csv(xs, ys, P, run.path("heatmap.csv"))
        if args.pgm:
            write_pgm(P, run.path("heatmap.pgm"))
        run.commit()
    except BaseException:
        run.abort()
        raise


def _read_keyed(path):
    _require_file(path)
    return read_config(path)


def _read_matrix(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


def load_fit(fit_dir):
    """Rebuild ``(draws, kernel, train_design)`` from a fit directory."""
    from .gibbs import PosteriorDraws

    meta = _read_keyed(os.path.join(fit_dir, "fit.txt"))
    for name in ("draws.csv", "w_draws.csv", "design.csv"):
        _require_file(os.path.join(fit_dir, name))
    design = read_design(os.path.join(fit_dir, "design.csv"))
    design.subset_tag = meta["subset"]
    header, table = _read_matrix(os.path.join(fit_dir, "draws.csv"))
    _, W = _read_matrix(os.path.join(fit_dir, "w_draws.csv"))
    phi = float(meta["phi"])
    draws = PosteriorDraws(table[:, :-1], table[:, -1], W.reshape(table.shape[0], -1), None,
                           tuple(header[:-1]), meta["subset"], phi)
    return draws, build_kernel(design.coords, phi), design


EVAL_KEYS = ("seed", "costs", "duplicates_seed", "opponent_default", "with_baseline")


def cmd_evaluate(args):
    cfg = effective_config(args, EVAL_KEYS)
    cfg["with_baseline"] = bool(cfg["with_baseline"])
    inputs = [args.eval_csv] + [os.path.join(args.fit_dir, n) for n in
                                ("fit.txt", "draws.csv", "w_draws.csv", "design.csv")]
    for p in inputs:
        _require_file(p)
    run = Run("evaluate", args.out, cfg, inputs)
    try:
        draws, kernel, train = load_fit(args.fit_dir)
        records, rejects = parse_shots(args.eval_csv)
        if rejects:
            write_rejects(rejects, run.path("rejects.csv"))
        kept, _ = apply_exclusions(records)
        try:
            test = build_design(kept, train.subset_tag, history=kept, columns=draws.column_names,
                                opponent_default=cfg["opponent_default"])
        except DesignError as exc:
            raise UsageError(f"evaluation data: {exc}") from None
        p_sp = predict_many(draws, kernel, test.coords, test.X)
        inputs_ = {"spatial": {train.subset_tag: (test.Y, p_sp)}}
        curves = {"spatial": beta_curve(test.Y, p_sp, parse_range(cfg["costs"]))}
        if cfg["with_baseline"]:
            glm = fit_glm(train, "probit")
            p_gl = predict_glm(glm, test.X)
            inputs_["baseline"] = {train.subset_tag: (test.Y, p_gl)}
            curves["baseline"] = beta_curve(test.Y, p_gl, parse_range(cfg["costs"]))
            run.write_csv("baseline_coefficients.csv", ["parameter", "estimate", "se", "z", "p_value"],
                          zip(glm.column_names, glm.coefficients, glm.standard_errors,
                              glm.z_values, glm.p_values))
        rows = compare_models(inputs_)
        run.write_csv("scores.csv", rows[0], rows[1:])
        models = list(curves)
        cost_grid = curves[models[0]].cost_grid
        run.write_csv("beta_curve.csv", ["cost", *models],
                      ((c, *[curves[m].scores[i] for m in models]) for i, c in enumerate(cost_grid)))
        run.write_csv("predictions.csv", ["shot_id", "outcome", *models],
                      ((test.shot_ids[i], int(test.Y[i]), *[inputs_[m][train.subset_tag][1][i]
                                                            for m in models])
                       for i in range(test.n)))
        run.commit()
    except BaseException:
        run.abort()
        raise


RATE_KEYS = ("seed", "subset", "columns", "phi", "burnin", "samples", "thin", "prior_a", "prior_b",
             "workers", "min_shots", "duplicates_seed", "opponent_default", "players")


def cmd_rate(args):
    cfg = effective_config(args, RATE_KEYS)
    run = Run("rate", args.out, cfg, [args.input])
    try:
        kept = load_records(args.input, run, cfg["duplicates_seed"])
        design = _design(kept, cfg)
        fit_cfg = RatingFitConfig(float(cfg["phi"]), _prior(cfg),
                                  ChainConfig(cfg["burnin"], cfg["samples"], cfg["thin"], cfg["seed"]))
        players = None if not cfg["players"] else [p.strip() for p in cfg["players"].split(",")]
        t = time.perf_counter()
        ratings = rate_players(design, players, fit_cfg, workers=cfg["workers"])
        run.timed("rating_seconds", t)
        tag = design.subset_tag
        min_shots = cfg["min_shots"] if cfg["min_shots"] is not None else DEFAULT_MIN_SHOTS[tag]
        run.write_csv(f"ratings_{tag}.csv", ["player_id", "sp", "ps", "n_shots", "n_games"],
                      ((r.player_id, r.sp, r.ps, r.n_shots, r.n_games) for r in ratings))
        for measure in ("sp", "ps"):
            ranked = rank_players(ratings, measure, min_shots)
            run.write_csv(f"rankings_{measure}.csv", ["rank", "player_id", measure, "n_shots"],
                          ((i + 1, r.player_id, getattr(r, measure), r.n_shots)
                           for i, r in enumerate(ranked)))
        if ratings:
            for measure, hist in rating_histograms(ratings).items():
                run.write_csv(f"histogram_{measure}.csv", ["lower", "upper", "count"], hist.rows())
        run.commit()
    except BaseException:
        run.abort()
        raise


SIM_KEYS = ("seed", "n_shots", "phi", "sigma2", "theta", "process")


def cmd_simulate(args):
    cfg = effective_config(args, SIM_KEYS)
    try:
        theta = tuple(float(v) for v in str(cfg["theta"]).split(","))
        spec = SyntheticSpec(n_shots=int(cfg["n_shots"]), true_theta=theta,
                             columns=RECOVERY_COLUMNS, true_phi=float(cfg["phi"]),
                             true_sigma2=float(cfg["sigma2"]), location_process=cfg["process"],
                             seed=int(cfg["seed"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    run = Run("simulate", args.out, cfg, [])
    try:
        records, truth = generate(spec)
        write_shots(records, run.path("synthetic.csv"))
        eta = truth.X @ truth.theta
        run.write_csv("truth.csv", ["shot_id", "x", "y", "eta", "w", "e", "r", "p_true", "outcome"],
                      ((truth.shot_ids[i], truth.coords[i, 0], truth.coords[i, 1], eta[i],
                        truth.w[i], truth.e[i], truth.r[i], truth.p_true[i], records[i].outcome)
                       for i in range(len(records))))
        run.write_keyed("truth_parameters.txt",
                        [("columns", spec.columns), ("theta", theta), ("phi", spec.true_phi),
                         ("sigma2", spec.true_sigma2)])
        run.commit()
    except BaseException:
        run.abort()
        raise


SEARCH_KEYS = ("seed", "subset", "columns", "grid", "split", "search_burnin", "search_samples",
               "prior_a", "prior_b", "workers", "duplicates_seed", "opponent_default")


def cmd_phi_search(args):
    cfg = effective_config(args, SEARCH_KEYS)
    run = Run("phi-search", args.out, cfg, [args.input])
    try:
        kept = load_records(args.input, run, cfg["duplicates_seed"])
        design = _design(kept, cfg)
        res = _search(design, cfg, _prior(cfg))
        run.write_csv("phi_search.csv", ["phi", "mse"], res.rows())
        run.write_keyed("phi_star.txt", [("phi_star", res.phi_star)])
        run.commit()
    except BaseException:
        run.abort()
        raise


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _common(p):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="keyed text config file (key = value)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)


def _chain_flags(p):
    p.add_argument("--burnin", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--prior-a", dest="prior_a", type=float)
    p.add_argument("--prior-b", dest="prior_b", type=float)


def _data_flags(p):
    p.add_argument("--subset", choices=sorted(SUBSETS))
    p.add_argument("--duplicates-seed", dest="duplicates_seed", type=int)
    p.add_argument("--opponent-default", dest="opponent_default",
                   choices=("zero", "league_mean"))
    p.add_argument("--columns", help="comma-separated design columns (default: subset model)")


def _search_flags(p):
    p.add_argument("--grid", help=f"phi grid, start:stop:step (default {DEFAULTS['grid']})")
    p.add_argument("--split", type=float, help="validation fraction")
    p.add_argument("--search-burnin", dest="search_burnin", type=int)
    p.add_argument("--search-samples", dest="search_samples", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shotprobit", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explore", help="Ripley K and join-count diagnostics")
    p.add_argument("input")
    _common(p)
    p.add_argument("--k-neighbors", dest="k_neighbors", type=int)
    p.add_argument("--perms", type=int)
    p.add_argument("--sims", type=int)
    p.add_argument("--radii")
    p.add_argument("--duplicates-seed", dest="duplicates_seed", type=int)
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("fit", help="fit the spatial probit model")
    p.add_argument("input")
    _common(p)
    _data_flags(p)
    _chain_flags(p)
    _search_flags(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--phi", type=float)
    g.add_argument("--phi-search", dest="phi_search", action="store_const", const=True)
    p.add_argument("--heatmap-step", dest="heatmap_step", type=float)
    p.add_argument("--pgm", action="store_true", help="also write heatmap.pgm")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="score a fit on held-out shots")
    p.add_argument("fit_dir")
    p.add_argument("eval_csv")
    _common(p)
    p.add_argument("--with-baseline", dest="with_baseline", action="store_const", const=True)
    p.add_argument("--costs")
    p.add_argument("--opponent-default", dest="opponent_default", choices=("zero", "league_mean"))
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rate", help="leave-player-out SP and PS ratings")
    p.add_argument("input")
    _common(p)
    _data_flags(p)
    _chain_flags(p)
    p.add_argument("--phi", type=float)
    p.add_argument("--min-shots", dest="min_shots", type=int)
    p.add_argument("--players", help="comma-separated player ids")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("simulate", help="draw a synthetic shot data set")
    _common(p)
    p.add_argument("--n-shots", dest="n_shots", type=int)
    p.add_argument("--phi", type=float)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--theta", help="comma-separated coefficients for " + ",".join(RECOVERY_COLUMNS))
    p.add_argument("--process", choices=("uniform_half", "clustered", "grid"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("phi-search", help="hold-out search for the spatial decay")
    p.add_argument("input")
    _common(p)
    _data_flags(p)
    _search_flags(p)
    p.add_argument("--prior-a", dest="prior_a", type=float)
    p.add_argument("--prior-b", dest="prior_b", type=float)
    p.set_defaults(func=cmd_phi_search)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (UsageError, SchemaError, DesignError, GeometryError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ChainError, KernelError, RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
