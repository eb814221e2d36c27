"""Command-line front end.

Three subcommands: ``linreg-influence`` (exact regression influence table),
``glmm-influence`` (leave-one-site-out survey analysis), and ``calibrate``
(simulation check of the EVOIR distribution).  Options may come from a
config file (INI-style sections of key = value pairs) and/or flags; flags
win.  Exit codes: 0 success, 1 usage or config error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import calibrate as calibrate_mod
from . import glmm, linreg, report
from .mc import MetaModelConfig
from .oracle import ConjugateModel

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Resolved settings for one command invocation."""

    data: str | None = None
    seed: int = 0
    out_dir: str = "."
    estimator: str = "knn"
    format: str = "csv"
    intercept: bool = True
    precision: int = 3
    # glmm sampler settings
    n_iter: int = 30000
    n_burn: int = 10000
    thin: int = 5
    chains: int = 4
    prior_var: float = 100.0
    # meta-model settings
    n_outer: int = 2000
    n_inner: int = 500
    k_neighbors: int | None = None
    replicates: int = 10
    flag_top: int = 3
    # calibrate settings
    replications: int = 5000
    p_dim: int = 1
    ks_level: float = 0.01
    prior_mean: float = 0.0
    prior_variance: float = 1.0
    obs_var: float = 1.0
    n1: int = 1
    n2: int = 1

    def validate(self):
        if self.estimator not in ("naive", "knn"):
            raise ConfigError(f"estimator must be naive or knn, "
                              f"got {self.estimator!r}")
        if self.format not in ("csv", "text", "svg"):
            raise ConfigError(f"format must be csv, text, or svg, "
                              f"got {self.format!r}")
        for name in ("n_iter", "n_burn", "thin", "chains", "n_outer",
                     "n_inner", "replicates", "precision", "p_dim", "n2"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.replications < 1:
            raise ConfigError("replications must be positive")
        if self.n_iter <= self.n_burn:
            raise ConfigError("n_iter must exceed n_burn")
        if not 0 < self.ks_level < 1:
            raise ConfigError("ks_level must be in (0, 1)")
        if self.prior_variance <= 0 or self.obs_var <= 0:
            raise ConfigError("variances must be positive")


_BOOL_FIELDS = {"intercept"}


def _coerce(name: str, value: str):
    hints = {f.name: f.type for f in fields(RunConfig)}
    if name not in hints:
        raise ConfigError(f"unknown config key {name!r}")
    if name in _BOOL_FIELDS:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean {name!r} = {value!r}")
    text = hints[name]
    try:
        if "int" in text:
            return int(value)
        if "float" in text:
            return float(value)
    except ValueError:
        raise ConfigError(f"cannot parse {name!r} = {value!r}") from None
    return value


def load_config_file(path) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    out = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            out[key.replace("-", "_")] = _coerce(key.replace("-", "_"),
                                                 value)
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        for key, value in load_config_file(args.config).items():
            setattr(cfg, key, value)
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(cfg, f.name, value)
    cfg.validate()
    return cfg


def _write(out_dir: Path, name: str, text: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text)


def run_linreg_influence(cfg: RunConfig) -> int:
    if not cfg.data:
        raise ConfigError("linreg-influence requires --data")
    data = report.load_regression_csv(cfg.data, add_intercept=cfg.intercept)
    fitted = linreg.fit(data)
    records = linreg.influence_table(data)
    cooks = [linreg.cooks_distance(data, i, fitted)
             for i in range(data.n)]
    out = Path(cfg.out_dir)
    _write(out, "influence_table.csv",
           report.linreg_table_csv(records, cooks, cfg.precision))
    _write(out, "influence_table.txt",
           report.linreg_table_text(records, cooks, cfg.precision))
    _write(out, "plot_data.csv", report.plot_data_csv(records))
    if cfg.format == "svg":
        _write(out, "plot.svg", report.plot_svg(records))
    return EXIT_OK


def run_glmm_influence(cfg: RunConfig) -> int:
    if not cfg.data:
        raise ConfigError("glmm-influence requires --data")
    data = report.load_clinics_csv(cfg.data)
    sites = {o.site for o in data}
    if len(sites) < 2:
        raise report.DataFormatError(
            "need at least 2 sites for leave-one-site-out analysis")
    basis = glmm.spline_design(sorted({o.year for o in data}))
    settings = glmm.McmcSettings(n_iter=cfg.n_iter, n_burn=cfg.n_burn,
                                 thin=cfg.thin, n_chains=cfg.chains,
                                 prior_var=cfg.prior_var)
    mm = MetaModelConfig(n_outer=cfg.n_outer, n_inner=cfg.n_inner,
                         k_neighbors=cfg.k_neighbors,
                         n_replicates=cfg.replicates)
    records, diagnostics = glmm.site_influence(
        data, basis, seed=cfg.seed, config=mm, settings=settings,
        estimator=cfg.estimator)
    regions = {o.site: o.region for o in data}
    out = Path(cfg.out_dir)
    _write(out, "influence_table.csv",
           report.glmm_table_csv(records, regions))
    _write(out, "influence_table.txt",
           report.glmm_table_text(records, regions))
    _write(out, "plot_data.csv",
           report.plot_data_csv(records, n_flagged=cfg.flag_top))
    _write(out, "diagnostics.txt", _diagnostics_text(diagnostics))
    if cfg.format == "svg":
        _write(out, "plot.svg",
               report.plot_svg(records, n_flagged=cfg.flag_top))
    return EXIT_OK


def _diagnostics_text(diagnostics: dict) -> str:
    lines = ["MCMC diagnostics (per run)"]
    for run in sorted(diagnostics, key=lambda k: (k != "full", k)):
        d = diagnostics[run]
        acc = ", ".join(f"{k}={v:.3f}" for k, v in sorted(
            d["acceptance"].items()))
        rhat = ", ".join(f"{k}={v:.3f}" for k, v in sorted(
            d["rhat"].items()))
        lines.append(f"{run}: acceptance [{acc}] split-Rhat [{rhat}]")
    return "\n".join(lines) + "\n"


def run_calibrate(cfg: RunConfig) -> int:
    model = ConjugateModel(prior_mean=cfg.prior_mean,
                           prior_var=cfg.prior_variance,
                           obs_var=cfg.obs_var, n1=cfg.n1, n2=cfg.n2)
    rep = calibrate_mod.run_calibration(model, cfg.replications, cfg.seed,
                                        p_dim=cfg.p_dim,
                                        ks_level=cfg.ks_level)
    _write(Path(cfg.out_dir), "calibration_report.txt", rep.as_text())
    sys.stdout.write(rep.as_text())
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--data", help="input dataset (CSV)")
    sub.add_argument("--config", help="config file (INI key=value sections)")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--out-dir", dest="out_dir", default=None)
    sub.add_argument("--estimator", choices=["naive", "knn"], default=None)
    sub.add_argument("--format", choices=["csv", "text", "svg"],
                     default=None)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="voi",
                     description="value-of-information influence diagnostics")
    subs = parser.add_subparsers(dest="command", required=True)

    lin = subs.add_parser("linreg-influence",
                          help="exact influence table for a linear model")
    _add_common(lin)
    lin.add_argument("--no-intercept", dest="intercept",
                     action="store_false", default=None)
    lin.add_argument("--precision", type=int, default=None)

    gl = subs.add_parser("glmm-influence",
                         help="leave-one-site-out influence for survey data")
    _add_common(gl)
    for name in ("n-iter", "n-burn", "thin", "chains", "n-outer", "n-inner",
                 "k-neighbors", "replicates", "flag-top"):
        gl.add_argument(f"--{name}", dest=name.replace("-", "_"), type=int,
                        default=None)
    gl.add_argument("--prior-var", dest="prior_var", type=float,
                    default=None)

    cal = subs.add_parser("calibrate",
                          help="simulation check of the EVOIR distribution")
    _add_common(cal)
    cal.add_argument("--replications", type=int, default=None)
    cal.add_argument("--p-dim", dest="p_dim", type=int, default=None)
    cal.add_argument("--ks-level", dest="ks_level", type=float, default=None)
    cal.add_argument("--prior-mean", dest="prior_mean", type=float,
                     default=None)
    cal.add_argument("--prior-variance", dest="prior_variance", type=float,
                     default=None)
    cal.add_argument("--obs-var", dest="obs_var", type=float, default=None)
    cal.add_argument("--n1", type=int, default=None)
    cal.add_argument("--n2", type=int, default=None)
    return parser


_COMMANDS = {
    "linreg-influence": run_linreg_influence,
    "glmm-influence": run_glmm_influence,
    "calibrate": run_calibrate,
}


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_USAGE
    except (report.DataFormatError, FileNotFoundError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA
    except (linreg.RankDeficientError, np.linalg.LinAlgError,
            FloatingPointError, ValueError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
