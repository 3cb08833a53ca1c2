"""Command-line surface: config parsing, subcommands, file persistence.

Subcommands: simulate, build-lut, fidelity, threshold, sweep, plot-data,
inspect-channel, validate-layout.  All outputs are plain delimited text
whose headers echo the effective configuration, so every file suffices
to re-run the command that produced it.  Worker count comes from the
SURFACE17_WORKERS environment variable.

Exit codes: 0 success, 2 argument/validation error, 3 domain failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from dataclasses import dataclass, fields

from . import decoders as dec
from . import experiment as exp
from .channels import (NoiseParams, QuantumChannel, channel_dump, gate_noise_channel,
                       idle_channel, validate_noise_ordering)
from .layout import build_surface17, check_commutation, validate_schedule
from .pauli_mc import JointCounts
from .trajectories import TrajectoryConfig

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_IO = 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    p: float = 0.0
    m: float = 0.0
    g: float = 0.0
    t1_ratio: float = 1e4
    t_ratio: float = 1e-3
    seed: int = 2024
    samples: int | None = None
    mode: str = "pauli"
    decoder: str = "lut"
    basis: str = "z"
    variant: str = "fig1a"
    stabilizers: str = "all8"
    out: str | None = None
    grid: tuple[float, ...] = ()
    figure: str = "fig3"
    g_lo: float = 0.0
    g_hi: float = 0.02
    resolution: float = exp.DEFAULT_RESOLUTION
    alpha: float = exp.DEFAULT_ALPHA
    delta: float = exp.DEFAULT_DELTA
    bootstrap: int = exp.DEFAULT_BOOTSTRAP
    allow_d_gt_g: bool = False

    @property
    def n_samples(self) -> int:
        if self.samples is not None:
            return self.samples
        return exp.DEFAULT_SAMPLES[self.mode]

    def noise_params(self) -> NoiseParams:
        try:
            return NoiseParams(self.p, self.m, self.g, self.t1_ratio, self.t_ratio)
        except ValueError as err:
            raise ConfigError(str(err)) from err

    def layout(self):
        return build_surface17(self.variant, self.stabilizers)

    def bases(self) -> tuple[str, ...]:
        return ("Z", "X") if self.basis == "both" else (self.basis.upper(),)

    def echo(self) -> dict:
        keys = ("p", "m", "g", "t1_ratio", "t_ratio", "seed", "mode", "decoder",
                "basis", "variant", "stabilizers", "resolution", "alpha", "delta",
                "bootstrap")
        out = {k: getattr(self, k) for k in keys}
        out["samples"] = self.n_samples
        if self.grid:
            out["grid"] = ",".join(f"{v:g}" for v in self.grid)
            out["figure"] = self.figure
        return out


_FIELD_PARSERS = {
    "p": float, "m": float, "g": float, "t1_ratio": float, "t_ratio": float,
    "seed": int, "samples": int, "mode": str, "decoder": str, "basis": str,
    "variant": str, "stabilizers": str, "out": str, "figure": str,
    "g_lo": float, "g_hi": float, "resolution": float, "alpha": float,
    "delta": float, "bootstrap": int,
    "allow_d_gt_g": lambda s: s.lower() in ("1", "true", "yes"),
    "grid": lambda s: tuple(float(v) for v in s.replace(",", " ").split()),
}

_CHOICES = {
    "mode": ("pauli", "general"),
    "decoder": ("lut", "ts"),
    "basis": ("z", "x", "both"),
    "variant": ("fig1a", "fig1b"),
    "stabilizers": ("all8", "relevant4", "bulk4"),
    "figure": ("fig3", "fig4", "fig5"),
}


def parse_config_file(path: str) -> dict:
    """Parse 'key = value' lines; '#' starts a comment."""
    values: dict = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        parser = _FIELD_PARSERS.get(key)
        if parser is None:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = parser(val)
        except ValueError as err:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {err}") from err
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    """File values first, then flag overrides; validate everything."""
    values: dict = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    config = RunConfig(**values)
    validate_config(config)
    return config


def validate_config(config: RunConfig) -> None:
    for key, choices in _CHOICES.items():
        if getattr(config, key) not in choices:
            raise ConfigError(f"{key} must be one of {choices}, got "
                              f"{getattr(config, key)!r}")
    config.noise_params()  # raises ConfigError on invalid probabilities
    if config.samples is not None and config.samples < 1:
        raise ConfigError("samples must be >= 1")


def require_noise_ordering(config: RunConfig) -> None:
    """Reject point simulations where idle noise exceeds gate noise,
    unless explicitly overridden."""
    report = validate_noise_ordering(config.noise_params())
    if not report and not config.allow_d_gt_g:
        raise ConfigError("idle noise exceeds gate noise (d > g): "
                          + "; ".join(report.failures)
                          + "; set allow_d_gt_g = true to override")


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".surface17-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: str | None) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommand implementations.


def cmd_simulate(config: RunConfig) -> int:
    if config.basis == "both":
        raise ConfigError("simulate writes one counts file; pick basis z or x")
    require_noise_ordering(config)
    layout = config.layout()
    params = config.noise_params()
    counts = exp.simulate_counts(layout, params, config.bases()[0], config.mode,
                                 config.n_samples, config.seed)
    counts.meta.update({f"config_{k}": str(v) for k, v in config.echo().items()})
    _emit(counts.to_text(), config.out)
    return EXIT_OK


def cmd_build_lut(config: RunConfig, counts_path: str) -> int:
    counts = JointCounts.from_text(_read(counts_path))
    lut = dec.build_lut(counts)
    _emit(lut.to_text(), config.out)
    return EXIT_OK


def cmd_fidelity(config: RunConfig, counts_path: str | None) -> int:
    if counts_path:
        counts = JointCounts.from_text(_read(counts_path))
        layout = config.layout()
        f2 = (dec.lut_fidelity(counts) if config.decoder == "lut"
              else dec.ts_fidelity(counts, layout))
        f1 = dec.lut_fidelity(dec.marginalize_to_final_round(counts))
        text = (f"# surface17 fidelity from {counts_path}\n"
                f"basis f_code2 f_code1 decoder\n"
                f"{counts.basis} {f2:.10g} {f1:.10g} {config.decoder}\n")
        _emit(text, config.out)
        return EXIT_OK
    require_noise_ordering(config)
    layout = config.layout()
    result = exp.evaluate_point(layout, config.noise_params(), config.mode,
                                config.decoder, config.n_samples, config.seed,
                                alpha=config.alpha, delta=config.delta,
                                n_bootstrap=config.bootstrap)
    text = exp.format_table(exp.result_rows(result), config.echo())
    _emit(text, config.out)
    return EXIT_OK


def cmd_threshold(config: RunConfig) -> int:
    if config.p != config.m:
        raise ConfigError("threshold search assumes p = m")
    layout = config.layout()
    search = exp.SearchConfig(g_lo=config.g_lo, g_hi=config.g_hi,
                              resolution=config.resolution,
                              n_samples=config.n_samples, seed=config.seed,
                              alpha=config.alpha, delta=config.delta,
                              n_bootstrap=config.bootstrap)
    point = exp.threshold_search(layout, config.p, config.noise_params(),
                                 config.mode, config.decoder, search)
    if point.result_at_threshold is not None:
        rows = exp.result_rows(point.result_at_threshold, g_star=point.g_star)
    else:
        rows = [{"p": config.p, "m": config.p, "g": None,
                 "t1_ratio": config.t1_ratio, "t_ratio": config.t_ratio,
                 "channel_mode": config.mode, "decoder": config.decoder,
                 "basis": "min", "g_star": None, "n_samples": config.n_samples,
                 "seed": config.seed, "failed_criterion": point.note}]
    meta = dict(config.echo(), note=point.note or "ok", iterations=point.iterations)
    _emit(exp.format_table(rows, meta), config.out)
    return EXIT_OK


def cmd_sweep(config: RunConfig) -> int:
    if not config.grid:
        raise ConfigError("sweep requires a nonempty grid")
    layout = config.layout()
    params = config.noise_params()
    search = exp.SearchConfig(g_lo=config.g_lo, g_hi=config.g_hi,
                              resolution=config.resolution,
                              n_samples=config.n_samples, seed=config.seed,
                              alpha=config.alpha, delta=config.delta,
                              n_bootstrap=config.bootstrap)
    rows: list[dict] = []
    if config.figure in ("fig3", "fig4"):
        points = exp.sweep_threshold(layout, list(config.grid), params,
                                     config.mode, config.decoder, search)
        for point in points:
            if point.result_at_threshold is not None:
                rows.extend(exp.result_rows(point.result_at_threshold,
                                            g_star=point.g_star))
            else:
                rows.append({"p": point.p_equals_m, "m": point.p_equals_m,
                             "t1_ratio": config.t1_ratio, "t_ratio": config.t_ratio,
                             "channel_mode": config.mode, "decoder": config.decoder,
                             "basis": "min", "g_star": None,
                             "n_samples": config.n_samples, "seed": config.seed,
                             "failed_criterion": point.note})
    else:  # fig5: p = m = g, both decoders on shared counts
        for row in exp.sweep_equal_noise(layout, list(config.grid), params,
                                         config.mode, search):
            if row.lut is None:
                rows.append({"p": row.value, "m": row.value, "g": row.value,
                             "channel_mode": config.mode, "decoder": "lut",
                             "basis": "min", "failed_criterion": row.note})
                continue
            rows.extend(exp.result_rows(row.lut))
            ts_rows = exp.result_rows(row.ts)
            ci = row.f_ts_ci or (None, None)
            for r in ts_rows:
                if r["basis"] == "min":
                    r["f_ratio"] = row.f_ts
                    r["f_ratio_lo"], r["f_ratio_hi"] = ci
            rows.extend(ts_rows)
    _emit(exp.format_table(rows, config.echo()), config.out)
    return EXIT_OK


def cmd_plot_data(config: RunConfig, table_path: str) -> int:
    rows = exp.parse_table(_read(table_path))
    mins = [r for r in rows if r.get("basis") == "min"]
    lines = [f"# surface17 plot data {config.figure}"]
    if config.figure == "fig3":
        lines.append("x_p_equals_m y_g_star")
        for r in mins:
            if r.get("g_star", "NA") != "NA":
                lines.append(f"{r['p']} {r['g_star']}")
    elif config.figure == "fig4":
        lines.append("x_p_equals_m y_f_ratio y_lo y_hi")
        for r in mins:
            if r.get("g_star", "NA") != "NA" and r.get("f_ratio", "NA") != "NA":
                lines.append(f"{r['p']} {r['f_ratio']} {r['f_ratio_lo']} {r['f_ratio_hi']}")
    else:  # fig5
        lines.append("series x_noise y_f_ratio y_lo y_hi")
        for r in mins:
            if r.get("f_ratio", "NA") != "NA":
                lines.append(f"{r['decoder']} {r['p']} {r['f_ratio']} "
                             f"{r['f_ratio_lo']} {r['f_ratio_hi']}")
    _emit("\n".join(lines) + "\n", config.out)
    return EXIT_OK


def cmd_inspect_channel(config: RunConfig, which: str) -> int:
    params = config.noise_params()
    if config.mode == "general":
        channels = {"idle": lambda: idle_channel(params),
                    "gate": lambda: gate_noise_channel(params),
                    "prep": lambda: QuantumChannel.prep_or_meas_flips(params.p),
                    "meas": lambda: QuantumChannel.prep_or_meas_flips(params.m)}
    else:
        cfg = TrajectoryConfig.pauli(params)
        channels = {"idle": lambda: cfg.idle, "gate": lambda: cfg.gate_noise,
                    "prep": lambda: cfg.prep, "meas": lambda: cfg.meas}
    if which not in channels:
        raise ConfigError(f"channel must be one of {sorted(channels)}")
    _emit(channel_dump(channels[which]()), config.out)
    return EXIT_OK


def cmd_validate_layout(config: RunConfig) -> int:
    layout = config.layout()
    comm = check_commutation(layout)
    sched = validate_schedule(layout)
    lines = [layout.dump()]
    lines.append(f"commutation: {'pass' if comm else 'FAIL'}")
    lines.extend(f"  {f}" for f in comm.failures)
    lines.append(f"schedule: {'pass' if sched else 'FAIL'}")
    lines.extend(f"  {f}" for f in sched.failures)
    _emit("\n".join(lines) + "\n", config.out)
    return EXIT_OK if (comm and sched) else EXIT_DOMAIN


def _read(path: str) -> str:
    with open(path) as fh:
        return fh.read()


# ---------------------------------------------------------------------------
# Argument parsing.


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--samples", type=int)
    parser.add_argument("--mode", choices=_CHOICES["mode"])
    parser.add_argument("--decoder", choices=_CHOICES["decoder"])
    parser.add_argument("--basis", choices=_CHOICES["basis"])
    parser.add_argument("--variant", choices=_CHOICES["variant"])
    parser.add_argument("--stabilizers", choices=_CHOICES["stabilizers"])
    parser.add_argument("--out", help="output path (stdout if omitted)")
    parser.add_argument("--p", type=float)
    parser.add_argument("--m", type=float)
    parser.add_argument("--g", type=float)
    parser.add_argument("--t1-ratio", dest="t1_ratio", type=float)
    parser.add_argument("--t-ratio", dest="t_ratio", type=float)
    parser.add_argument("--g-lo", dest="g_lo", type=float)
    parser.add_argument("--g-hi", dest="g_hi", type=float)
    parser.add_argument("--resolution", type=float)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--bootstrap", type=int)
    parser.add_argument("--grid", type=_FIELD_PARSERS["grid"])
    parser.add_argument("--figure", choices=_CHOICES["figure"])
    parser.add_argument("--allow-d-gt-g", dest="allow_d_gt_g",
                        action="store_const", const=True)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="surface17",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "threshold", "sweep", "validate-layout"):
        _add_common(sub.add_parser(name))
    p = sub.add_parser("build-lut")
    _add_common(p)
    p.add_argument("--counts", required=True, help="joint counts file")
    p = sub.add_parser("fidelity")
    _add_common(p)
    p.add_argument("--counts", help="evaluate a counts file instead of simulating")
    p = sub.add_parser("plot-data")
    _add_common(p)
    p.add_argument("--table", required=True, help="results table file")
    p = sub.add_parser("inspect-channel")
    _add_common(p)
    p.add_argument("--channel", required=True,
                   help="one of idle, gate, prep, meas")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        config = build_config(args)
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "build-lut":
            return cmd_build_lut(config, args.counts)
        if args.command == "fidelity":
            return cmd_fidelity(config, args.counts)
        if args.command == "threshold":
            return cmd_threshold(config)
        if args.command == "sweep":
            return cmd_sweep(config)
        if args.command == "plot-data":
            return cmd_plot_data(config, args.table)
        if args.command == "inspect-channel":
            return cmd_inspect_channel(config, args.channel)
        if args.command == "validate-layout":
            return cmd_validate_layout(config)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as err:
        print(f"io error: {err}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, RuntimeError) as err:
        print(f"domain error: {err}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
