"""Command-line front end.

Every subcommand takes ``--seed``, ``--out`` and ``--config``.  The config file
holds ``key = value`` lines whose keys are the long flag names (dashes or
underscores); a flag given on the command line wins over the file.  The output
directory defaults to ``$MEDIX_OUT`` and then ``./medix-out``.

Exit codes: 0 success, 2 configuration error, 3 failure inside a stage.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    BOUND_KINDS,
    BoundInputs,
    Scenario,
    default_epsilon,
    inlier_bound,
    inlier_bound_heavy_tail,
    monte_carlo_coverage,
    outlier_bound,
    write_coverage_csv,
)
from .data import IND, WildSet
from .detector import DetectionMetrics, auroc, fpr_at_tpr, write_metrics_csv
from .errors import ConfigError, MedixError
from .experiments import (
    EPS_GRID,
    K_FRACS,
    CompareParams,
    SweepParams,
    Synth2dParams,
    run_ewm_vs_gm,
    run_hyper_sweep,
    run_sweep,
    run_synth2d,
)
from .filter import FilterConfig, medix_filter, write_result
from .stats import GRADIENT_MAGIC, read_gradients, write_gradients_binary, write_gradients_csv
from .svg import plot_lines, plot_wild_scatter
from .synth import MixtureSpec, parse_vectors, read_config

OUT_ENV = "MEDIX_OUT"


class StageError(Exception):
    pass


@contextmanager
def stage(name: str):
    try:
        yield
    except (MedixError, OSError, ArithmeticError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise StageError(f"stage {name}: {exc}") from exc


# --- option tables ----------------------------------------------------------------


@dataclass(frozen=True)
class Opt:
    name: str
    type: type | callable
    default: object
    help: str = ""


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def _vectors(text: str) -> list[list[float]]:
    try:
        return parse_vectors(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _choice(*allowed):
    def parse(text: str) -> str:
        if text not in allowed:
            raise argparse.ArgumentTypeError(f"expected one of {', '.join(allowed)}, got {text!r}")
        return text
    parse.__name__ = "choice"
    return parse


_S2 = Synth2dParams()
_MIX = MixtureSpec()
_FILTER = FilterConfig()
_SWEEP = SweepParams()
_CMP = CompareParams()

FILTER_OPTS = [
    Opt("k", int, None, "rows removed per iteration"),
    Opt("eps_stop", float, _FILTER.eps_stop, "stopping tolerance"),
    Opt("T", int, _FILTER.T, "maximum iterations"),
    Opt("stop_rule", _choice("drop", "delta"), _FILTER.stop_rule, "drop | delta"),
]

MIXTURE_OPTS = [
    Opt("pi", float, None, "wild contamination (default: from the sample counts)"),
    Opt("n_per_class", int, _MIX.n_per_class, "samples per InD class in each split"),
    Opt("n_ood", int, _MIX.n_ood, "OOD samples in the wild and test splits"),
    Opt("class_means", _vectors, None, "InD means, e.g. '-2,0; 2,0; 0,3.46'"),
    Opt("ood_mean", _vectors, None, "OOD mean, e.g. '20,3.46'"),
    Opt("cov_scale", float, _MIX.cov_scale, "InD isotropic variance"),
    Opt("ood_cov_scale", float, _MIX.ood_cov_scale, "OOD isotropic variance"),
    Opt("k_frac", float, _S2.k_frac, "removal batch as a fraction of the wild size"),
    Opt("eps_stop", float, _S2.eps_stop, "stopping tolerance"),
    Opt("T", int, _S2.T, "maximum filter iterations"),
    Opt("epochs", int, _S2.epochs, "classifier and detector epochs"),
]

COMMANDS: dict[str, tuple[str, list[Opt]]] = {
    "synth2d": ("2-D Gaussian mixture, filter, detector, scatter plots", MIXTURE_OPTS),
    "sweep": ("deviation of the median as OOD rows are injected", [
        Opt("d", int, _SWEEP.d, "gradient dimension"),
        Opt("sigma", float, _SWEEP.sigma, "InD noise scale"),
        Opt("Delta", float, _SWEEP.Delta, "per-coordinate OOD shift"),
        Opt("m_in", int, _SWEEP.m_in, "InD rows"),
        Opt("steps", int, _SWEEP.n_steps, "number of injection levels"),
        Opt("max_ood", int, _SWEEP.max_ood, "largest OOD count"),
    ]),
    "bounds": ("error bounds table and optional Monte-Carlo coverage", [
        Opt("pi", float, 0.3, "contamination proportion"),
        Opt("m", int, 1000, "wild size"),
        Opt("d", int, 20, "gradient dimension"),
        Opt("sigma", float, 1.0, "InD noise scale"),
        Opt("sigma_out", float, 1.0, "OOD noise scale"),
        Opt("delta", float, 0.1, "failure probability"),
        Opt("Delta", float, 10.0, "per-coordinate separation"),
        Opt("eps_dev", float, None, "deviation tolerance (default: the tail-matching value)"),
        Opt("nu", int, 8, "Student-t degrees of freedom for the heavy-tail row"),
        Opt("coverage", _choice(*BOUND_KINDS), None, "run Monte-Carlo coverage for this bound"),
        Opt("trials", int, 200, "coverage trials"),
    ]),
    "ewm-vs-gm": ("element-wise vs geometric median as the filter aggregator", [
        Opt("d", int, _CMP.d, "gradient dimension"),
        Opt("Delta", float, _CMP.Delta, "per-coordinate OOD shift"),
        Opt("m_in", int, _CMP.m_in, "InD rows"),
        Opt("levels", _ints, _CMP.ood_levels, "OOD counts, comma separated"),
        Opt("k", int, _CMP.k, "rows removed per iteration"),
        Opt("eps_stop", float, _CMP.eps_stop, "stopping tolerance"),
        Opt("T", int, _CMP.T, "maximum iterations"),
    ]),
    "hyper-sweep": ("sensitivity of the synth2d detector to eps_stop and k", MIXTURE_OPTS[:7] + [
        Opt("eps_grid", _floats, EPS_GRID, "eps_stop values, comma separated"),
        Opt("k_fracs", _floats, K_FRACS, "batch fractions, comma separated"),
        Opt("T", int, _S2.T, "maximum filter iterations"),
        Opt("epochs", int, _S2.epochs, "classifier and detector epochs"),
    ]),
    "filter": ("run the filter on a gradient file", [
        Opt("gradients", str, None, "gradient matrix (CSV with g0,g1,... header or MDXG binary)"),
        Opt("ref", str, None, "reference gradient, same formats, one row"),
        Opt("aggregator", _choice("ewm", "gm"), "ewm", "ewm | gm"),
    ] + FILTER_OPTS),
    "metrics": ("FPR at 95% TPR and AUROC from two score files", [
        Opt("in_scores", str, None, "scores of InD samples, one per line"),
        Opt("out_scores", str, None, "scores of OOD samples, one per line"),
        Opt("tpr", float, 0.95, "target true-positive rate"),
    ]),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    common.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./medix-out)")
    common.add_argument("--config", default=None, help="key = value file; flags override it")
    common.add_argument("--workers", type=int, default=None, help="threads for parallel loops (default 1)")

    parser = argparse.ArgumentParser(prog="medix", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (help_text, opts) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        for o in opts:
            flag = "--" + o.name.replace("_", "-")
            default = "" if o.default is None else f" (default {_show(o.default)})"
            p.add_argument(flag, dest=o.name, type=o.type, default=None, help=o.help + default)
    return parser


def _show(v) -> str:
    return ",".join(map(str, v)) if isinstance(v, tuple) else str(v)


class Settings:
    """Flag values layered over the config file over the built-in defaults."""

    def __init__(self, args: argparse.Namespace, opts: list[Opt]):
        self.args = args
        self.opts = {o.name: o for o in opts}
        self.file: dict[str, str] = {}
        if args.config is not None:
            if not Path(args.config).is_file():
                raise ConfigError(f"config file not found: {args.config}")
            self.file = read_config(args.config)
        known = set(self.opts) | {"seed", "out", "workers"}
        lower = {k.lower(): k for k in known}
        for key in list(self.file):
            canon = key if key in known else lower.get(key.lower())
            if canon is None:
                raise ConfigError(f"unknown config key {key!r}")
            self.file[canon] = self.file.pop(key)

    def get(self, name: str, default=None):
        flag = getattr(self.args, name, None)
        if flag is not None:
            return flag
        if name in self.file:
            conv = self.opts[name].type if name in self.opts else int
            try:
                return conv(self.file[name])
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ConfigError(f"config key {name}: {exc}") from exc
        if name in self.opts and self.opts[name].default is not None:
            return self.opts[name].default
        return default

    @property
    def seed(self) -> int:
        seed = self.get("seed", 0)
        if seed < 0:
            raise ConfigError("seed must be non-negative")
        return seed

    @property
    def workers(self) -> int:
        w = self.get("workers", 1)
        if w < 1:
            raise ConfigError("workers must be at least 1")
        return w

    def out_dir(self) -> Path:
        out = self.args.out or self.file.get("out") or os.environ.get(OUT_ENV) or "medix-out"
        path = Path(out)
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {path}: {exc}") from exc
        if not os.access(path, os.W_OK):
            raise ConfigError(f"output directory not writable: {path}")
        return path

    def require_file(self, name: str) -> Path:
        value = self.get(name)
        if value is None:
            raise ConfigError(f"--{name.replace('_', '-')} is required")
        if not Path(value).is_file():
            raise ConfigError(f"input file not found: {value}")
        return Path(value)


def _positive(name: str, value, strict=True):
    if value is None or (value <= 0 if strict else value < 0):
        raise ConfigError(f"{name} must be {'positive' if strict else 'non-negative'}, got {value}")
    return value


def _write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# --- subcommands --------------------------------------------------------------------


def _synth2d_params(s: Settings) -> Synth2dParams:
    spec_kw = dict(
        n_per_class=_positive("n_per_class", s.get("n_per_class")),
        n_ood=_positive("n_ood", s.get("n_ood")),
        cov_scale=_positive("cov_scale", s.get("cov_scale"), strict=False),
        ood_cov_scale=_positive("ood_cov_scale", s.get("ood_cov_scale"), strict=False),
        seed=s.seed,
        pi=s.get("pi"),
    )
    if s.get("class_means") is not None:
        spec_kw["class_means"] = s.get("class_means")
    if s.get("ood_mean") is not None:
        om = s.get("ood_mean")
        if len(om) != 1:
            raise ConfigError("ood_mean takes a single vector")
        spec_kw["ood_mean"] = om[0]
    if spec_kw["pi"] is not None and not 0 <= spec_kw["pi"] <= 1:
        raise ConfigError("pi must lie in [0, 1]")
    spec = MixtureSpec(**spec_kw)
    try:
        spec.validate()
    except MedixError as exc:
        raise ConfigError(str(exc)) from exc
    if len(spec.class_means[0]) != 2:
        raise ConfigError("synth2d draws 2-D data; means must have two coordinates")
    k_frac = s.get("k_frac", _S2.k_frac)
    if not 0 < k_frac < 1:
        raise ConfigError("k_frac must lie in (0, 1)")
    epochs = _positive("epochs", s.get("epochs"))
    return Synth2dParams(spec=spec, k_frac=k_frac, eps_stop=_positive("eps_stop", s.get("eps_stop", _S2.eps_stop)),
                         T=_positive("T", s.get("T", _S2.T)), stop_rule=s.get("stop_rule", _S2.stop_rule),
                         epochs=epochs, det_epochs=epochs, workers=s.workers)


def cmd_synth2d(s: Settings) -> int:
    params = _synth2d_params(s)
    out = s.out_dir()
    with stage("synth2d"):
        run = run_synth2d(params)
    with stage("write"):
        write_metrics_csv(out / "synth2d_metrics.csv", run.metrics)
        write_result(out / "synth2d_filter.json", out / "synth2d_trace.csv", run.result)
        flagged = np.zeros(len(run.wild), dtype=int)
        flagged[run.result.outlier_ids] = 1
        rows = [[int(i), float(x[0]), float(x[1]), int(o), int(f)]
                for i, x, o, f in zip(run.wild.ids, run.wild.features, run.wild.origin, flagged)]
        _write_rows(out / "synth2d_points.csv", ["id", "x0", "x1", "__origin", "flagged"], rows)
        plot_wild_scatter(out / "synth2d_points.csv", out / "synth2d_truth.svg", "origin", "wild data: ground truth")
        plot_wild_scatter(out / "synth2d_points.csv", out / "synth2d_flagged.svg", "flagged", "wild data: flagged")
    print(run.metrics.table())
    print(f"flagged  {len(run.result.outlier_ids)} of {len(run.wild)} (stop: {run.result.stop_reason})")
    if run.detector is None:
        print("note: no rows flagged; detector not trained")
    return 0


def cmd_sweep(s: Settings) -> int:
    p = SweepParams(d=_positive("d", s.get("d")), sigma=_positive("sigma", s.get("sigma"), strict=False),
                    Delta=s.get("Delta"), m_in=_positive("m_in", s.get("m_in")),
                    n_steps=_positive("steps", s.get("steps")),
                    max_ood=_positive("max_ood", s.get("max_ood")), seed=s.seed)
    out = s.out_dir()
    with stage("sweep"):
        series, rho = run_sweep(p)
    with stage("write"):
        _write_rows(out / "sweep.csv", ["n_ood", "deviation"], [[n, v] for n, v in series])
        _write_rows(out / "sweep_summary.csv", ["spearman"], [[rho]])
        plot_lines(out / "sweep.csv", out / "sweep.svg", "n_ood", "deviation", None,
                   "median deviation vs injected OOD")
    for n, v in series:
        print(f"{n:>6}  {v:.6f}")
    print(f"spearman {rho:.4f}")
    return 0


BOUND_HEADER = ["bound", "pi", "m", "m_in", "m_out", "d", "eps_dev", "value", "vacuous", "contamination"]


def cmd_bounds(s: Settings) -> int:
    pi, m, d = s.get("pi"), s.get("m"), s.get("d")
    sigma, nu = s.get("sigma"), s.get("nu")
    if not 0 < pi < 1:
        raise ConfigError("pi must lie in (0, 1)")
    _positive("m", m)
    _positive("d", d)
    _positive("sigma", sigma, strict=False)
    base = BoundInputs(sigma=sigma, sigma_out=s.get("sigma_out"), pi=pi, m=m, d=d,
                       delta=s.get("delta"), Delta=s.get("Delta"))
    try:
        base.check()
    except MedixError as exc:
        raise ConfigError(str(exc)) from exc
    eps = s.get("eps_dev")
    eps_sub = eps if eps is not None else default_epsilon(sigma, d, base.m_in)
    eps_heavy = eps if eps is not None else 2.0 * sigma
    mu4_heavy = 3.0 * (nu - 2) / (nu - 4) * sigma**4 if nu > 4 else math.inf

    def inputs(e, mu4=3.0 * sigma**4):
        return BoundInputs(**{**base.__dict__, "eps_dev": e, "mu4": mu4})

    rows = []
    for label, fn, e, mu4 in (
        ("inlier", inlier_bound, eps_sub, 3.0 * sigma**4),
        ("inlier_proof", lambda i: inlier_bound(i, form="proof"), eps_sub, 3.0 * sigma**4),
        ("outlier", outlier_bound, eps_sub, 3.0 * sigma**4),
        (f"heavy_tail_t{nu}", inlier_bound_heavy_tail, eps_heavy, mu4_heavy),
    ):
        try:
            b = fn(inputs(e, mu4))
            rows.append([label, pi, m, base.m_in, base.m_out, d, e, b.value, int(b.vacuous),
                         b.terms.get("contamination")])
        except MedixError as exc:
            rows.append([label, pi, m, base.m_in, base.m_out, d, e, None, None, None])
            print(f"{label}: not applicable ({exc})", file=sys.stderr)
    out = s.out_dir()
    with stage("write"):
        _write_rows(out / "bounds.csv", BOUND_HEADER, rows)
    print(f"{'bound':<16}{'eps_dev':>10}{'value':>12}{'vacuous':>9}{'contam.':>10}")
    for r in rows:
        val = "n/a" if r[7] is None else f"{r[7]:.6f}"
        vac = "" if r[8] is None else ("yes" if r[8] else "no")
        con = "" if r[9] is None else f"{r[9]:.4f}"
        print(f"{r[0]:<16}{r[6]:>10.4f}{val:>12}{vac:>9}{con:>10}")

    kind = s.get("coverage")
    if kind is not None:
        trials = _positive("trials", s.get("trials"))
        sc = Scenario(pi=pi, m=m, d=d, sigma=sigma, Delta=s.get("Delta"), delta=s.get("delta"),
                      tail="student_t" if kind == "heavy_tail" else "gaussian", nu=nu, eps_dev=eps)
        with stage(f"coverage {kind}"):
            rep = monte_carlo_coverage(sc, kind, trials, seed=s.seed, workers=s.workers)
            write_coverage_csv(out / f"coverage_{kind}.csv", rep)
        verdict = "ok" if rep.passed else "below threshold"
        print(f"coverage {kind}: {rep.coverage:.3f} over {trials} trials "
              f"(threshold {rep.threshold:.3f}, {verdict})")
    return 0


def cmd_ewm_vs_gm(s: Settings) -> int:
    levels = s.get("levels")
    if not levels or any(v < 0 for v in levels):
        raise ConfigError("levels must be non-negative counts")
    p = CompareParams(d=_positive("d", s.get("d")), Delta=s.get("Delta"), m_in=_positive("m_in", s.get("m_in")),
                      ood_levels=tuple(levels), k=_positive("k", s.get("k")),
                      eps_stop=_positive("eps_stop", s.get("eps_stop")), T=_positive("T", s.get("T")), seed=s.seed)
    out = s.out_dir()
    with stage("ewm-vs-gm"):
        rows = run_ewm_vs_gm(p)
    header = ["n_ood", "aggregator", "d_0", "removed", "ood_removed", "err_in"]
    with stage("write"):
        _write_rows(out / "ewm_vs_gm.csv", header, [[r[h] for h in header] for r in rows])
        plot_lines(out / "ewm_vs_gm.csv", out / "ewm_vs_gm.svg", "n_ood", "ood_removed", "aggregator",
                   "OOD removal by aggregator")
        plot_lines(out / "ewm_vs_gm.csv", out / "ewm_vs_gm_deviation.svg", "n_ood", "d_0", "aggregator",
                   "initial deviation by aggregator")
    print(f"{'n_ood':>6} {'agg':>4} {'d_0':>10} {'removed':>8} {'ood_rm':>7}")
    for r in rows:
        print(f"{r['n_ood']:>6} {r['aggregator']:>4} {r['d_0']:>10.4f} {r['removed']:>8} {r['ood_removed']:>7.3f}")
    return 0


def cmd_hyper_sweep(s: Settings) -> int:
    base = _synth2d_params(s)
    eps_grid, k_fracs = s.get("eps_grid"), s.get("k_fracs")
    if not eps_grid or not k_fracs:
        raise ConfigError("eps_grid and k_fracs must be non-empty")
    try:
        # validate before any training starts
        run_hyper_sweep(base, eps_grid=eps_grid, k_fracs=k_fracs, dry_run=True)
    except MedixError as exc:
        raise ConfigError(str(exc)) from exc
    out = s.out_dir()
    with stage("hyper-sweep"):
        rows = run_hyper_sweep(base, eps_grid=eps_grid, k_fracs=k_fracs)
    header = ["k_frac", "eps_stop", "k", "fpr95", "auroc", "err_in", "err_out"]
    with stage("write"):
        _write_rows(out / "hyper_sweep.csv", header, [[r[h] for h in header] for r in rows])
    for r in rows:
        print("  ".join(f"{h}={_cell(r[h]) or 'undefined'}" for h in header))
    fprs = [r["fpr95"] for r in rows if r["fpr95"] is not None]
    if fprs:
        print(f"fpr95 spread {max(fprs) - min(fprs):.4f}")
    return 0


def cmd_filter(s: Settings) -> int:
    gpath, rpath = s.require_file("gradients"), s.require_file("ref")
    with stage("read"):
        G = read_gradients(gpath)
        ref = read_gradients(rpath)
    if ref.shape[0] != 1:
        raise ConfigError(f"reference file must hold one row, found {ref.shape[0]}")
    k = s.get("k") or max(1, G.shape[0] // 20)
    cfg = FilterConfig(eps_stop=s.get("eps_stop"), k=k, T=s.get("T"), stop_rule=s.get("stop_rule"),
                       aggregator=s.get("aggregator"), workers=s.workers)
    try:
        cfg.validate(G.shape[0])
    except MedixError as exc:
        raise ConfigError(str(exc)) from exc
    out = s.out_dir()
    with stage("filter"):
        res = medix_filter(G, ref[0], cfg)
    with stage("write"):
        write_result(out / "filter_result.json", out / "filter_trace.csv", res, cfg)
        binary = gpath.read_bytes()[:4] == GRADIENT_MAGIC
        surv = G[res.survivor_ids]
        if binary:
            write_gradients_binary(out / "survivors.mdxg", surv)
        elif len(surv):
            write_gradients_csv(out / "survivors.csv", surv)
    print(f"flagged {len(res.outlier_ids)} of {G.shape[0]} rows in {res.n_iter} iterations "
          f"(stop: {res.stop_reason})")
    return 0


def _read_scores(path: Path) -> np.ndarray:
    vals = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                vals.append(float(line.split(",")[0]))
            except ValueError:
                if lineno == 1:  # header
                    continue
                raise MedixError(f"{path}:{lineno}: not a number: {line!r}")
    return np.array(vals)


def cmd_metrics(s: Settings) -> int:
    pin, pout = s.require_file("in_scores"), s.require_file("out_scores")
    tpr = s.get("tpr")
    if not 0 < tpr <= 1:
        raise ConfigError("tpr must lie in (0, 1]")
    out = s.out_dir()
    with stage("read"):
        a, b = _read_scores(pin), _read_scores(pout)
    with stage("metrics"):
        m = DetectionMetrics(fpr_at_tpr(a, b, tpr), auroc(a, b), None, None, None, tpr=tpr)
    with stage("write"):
        write_metrics_csv(out / "metrics.csv", m)
    print(m.table())
    return 0


HANDLERS = {
    "synth2d": cmd_synth2d,
    "sweep": cmd_sweep,
    "bounds": cmd_bounds,
    "ewm-vs-gm": cmd_ewm_vs_gm,
    "hyper-sweep": cmd_hyper_sweep,
    "filter": cmd_filter,
    "metrics": cmd_metrics,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = Settings(args, COMMANDS[args.command][1])
        return HANDLERS[args.command](settings)
    except ConfigError as exc:
        print(f"medix: config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"medix: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
