"""Command line front end.

    setpart8d verify-formats
    setpart8d sweep --axis power|reach --formats PB-5B8D,PDM-BPSK --config run.json --out results/
    setpart8d validate-channel

Exit codes: 0 success, 1 constraint or validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .channel import LinkConfig, SpanParams
from .formats import (
    REPORT_HEADER,
    ConventionError,
    FormatKind,
    build_format,
    find_convention,
    fit_overhead,
    format_report,
    qpsk8d_symbols,
    search_partition,
)
from .geom8d import Constellation, PartitionClass, classify, is_symmetric
from .montecarlo import (
    THREADS_ENV,
    Axis,
    SimConfig,
    SweepResult,
    sweep_power,
    sweep_reach,
    sweep_reach_km,
    sweeps_to_csv,
)

log = logging.getLogger("setpart8d")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

SEEDING = "numpy SeedSequence(seed, spawn_key=(r // reuse_propagation, 0, channel)) for data, (r, 1) for noise"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Flat run configuration; every key is optional and falls back to these defaults."""

    format: str = "PDM-QPSK"
    baud_hz: float = 32e9
    sps: int = 64
    rolloff: float = 0.1
    rrc_span: int = 64
    channels: int = 5
    grid_hz: float = 37.5e9
    seq_log2: int = 16
    training_symbols: int = 1024
    spans: int = 60
    span_km: float = 75.0
    alpha_db_km: float = 0.2
    d_ps_nm_km: float = 4.0
    gamma_w_km: float = 1.3
    step_km: float = 0.5
    nf_db: float = 7.0
    power_dbm: float = -7.0
    powers_dbm: tuple = tuple(float(p) for p in range(-11, -2))
    span_counts: tuple = tuple(range(10, 100, 10))
    seed: int = 1
    realization_cap: int = 64
    reuse_propagation: int = 1
    min_errors: int = 400

    def sim_config(self, kind: FormatKind) -> SimConfig:
        span = SpanParams(
            length_km=self.span_km,
            alpha_db_km=self.alpha_db_km,
            d_ps_nm_km=self.d_ps_nm_km,
            gamma_w_km=self.gamma_w_km,
            step_km=self.step_km,
        )
        return SimConfig(
            format=kind,
            baud=self.baud_hz,
            sps=self.sps,
            rolloff=self.rolloff,
            rrc_span=self.rrc_span,
            channels=self.channels,
            grid_hz=self.grid_hz,
            seq_log2=self.seq_log2,
            training_symbols=self.training_symbols,
            link=LinkConfig(spans=self.spans, span=span, nf_db=self.nf_db),
            power_dbm=self.power_dbm,
            seed=self.seed,
            realization_cap=self.realization_cap,
            reuse_propagation=self.reuse_propagation,
            min_errors=self.min_errors,
        )


def parse_config(text: str) -> RunConfig:
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<root>: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError("<root>: expected a flat key/value object")
    known = {f.name: f for f in fields(RunConfig)}
    defaults = RunConfig()
    values = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"{key}: unknown key")
        default = getattr(defaults, key)
        values[key] = _coerce(key, value, default)
    try:
        cfg = RunConfig(**values)
        FormatKind.parse(cfg.format)
        cfg.sim_config(FormatKind.parse(cfg.format))
    except ValueError as exc:
        raise ConfigError(f"<root>: {exc}") from exc
    return cfg


def _coerce(key: str, value, default):
    if isinstance(default, tuple):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{key}: expected a non-empty list")
        kind = type(default[0])
        return tuple(_coerce(f"{key}[{i}]", v, kind()) for i, v in enumerate(value))
    if isinstance(default, bool) or isinstance(value, bool):
        raise ConfigError(f"{key}: booleans are not accepted")
    if isinstance(default, int):
        if not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer")
        return value
    if isinstance(default, float):
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{key}: expected a number")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{key}: expected a string")
    return value


def serialize_config(cfg: RunConfig) -> str:
    d = asdict(cfg)
    d = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
    return json.dumps(d, indent=2, sort_keys=True) + "\n"


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"<file>: cannot read {path} ({exc})") from exc
    return parse_config(text)


# --- verify-formats --------------------------------------------------------

VERIFIED_KINDS = (FormatKind.PDM_BPSK, FormatKind.PB_5B8D, FormatKind.PA_7B8D, FormatKind.PDM_QPSK)


def constraint_failures(formats: dict[FormatKind, Constellation]) -> list[str]:
    """Violations of the set-partition constraints among built formats."""
    out = []
    full = {c: 0 for c in PartitionClass}
    for s in qpsk8d_symbols():
        full[classify(s)] += 1
    if [full[c] for c in PartitionClass] != [64, 128, 64]:
        out.append(f"full PDM-QPSK census {full} != PB=64 PA=128 PI=64")
    pb = formats[FormatKind.PB_5B8D]
    if len(pb) != 32 or pb.class_census[PartitionClass.PB] != 32:
        out.append("PB-5B8D is not 32 PB symbols")
    if not is_symmetric(pb):
        out.append("PB-5B8D neighbor profiles differ")
    pa = formats[FormatKind.PA_7B8D]
    if [pa.class_census[c] for c in PartitionClass] != [64, 64, 0]:
        out.append("PA-7B8D census is not PB=64 PA=64 PI=0")
    if abs(pa.dmin_sq - formats[FormatKind.PDM_QPSK].dmin_sq) > 1e-9:
        out.append("PA-7B8D dmin^2 differs from PDM-QPSK")
    return out


def _tamper(c: Constellation) -> Constellation:
    """Swap one symbol for a PI symbol (test hook for the constraint detector)."""
    pi = next(s for s in qpsk8d_symbols() if classify(s) is PartitionClass.PI and s.label not in c.label_index)
    syms = list(c.symbols)
    syms[0] = pi
    words = list(c.info_words)
    return Constellation(c.name, tuple(syms), c.info_bits, tuple(words))


def cmd_verify_formats(tamper: bool = False, out=None) -> int:
    out = out or sys.stdout
    try:
        convs = find_convention()
    except ConventionError as exc:
        print(f"{exc}; falling back to searched constellations", file=out)
        print(REPORT_HEADER, file=out)
        for bits in (5, 7):
            c, rep = search_partition(bits)
            print(rep.row(), file=out)
            for pos, expr in fit_overhead(c).items():
                print(f"    label bit b{pos} = {expr}", file=out)
        return EXIT_FAIL
    print(f"label conventions satisfying both overhead formulas: {len(convs)} of 6144", file=out)
    print(f"using {convs[0].describe()}", file=out)
    formats = {k: build_format(k, convs[0]) for k in VERIFIED_KINDS}
    if tamper:
        formats[FormatKind.PB_5B8D] = _tamper(formats[FormatKind.PB_5B8D])
    print(REPORT_HEADER, file=out)
    for k in VERIFIED_KINDS:
        print(format_report(formats[k]).row(), file=out)
    failures = constraint_failures(formats)
    for f in failures:
        print(f"FAIL: {f}", file=out)
    print("all constraints hold" if not failures else f"{len(failures)} constraint(s) violated", file=out)
    return EXIT_FAIL if failures else EXIT_OK


# --- sweep ------------------------------------------------------------------

GAIN_PAIRS = ((FormatKind.PB_5B8D, FormatKind.PDM_BPSK), (FormatKind.PA_7B8D, FormatKind.PDM_QPSK))
MINUS = "−"


def gain_label(a: FormatKind, b: FormatKind) -> str:
    return f"{a.value} {MINUS} {b.value}"


def _write_plots(sweeps: Sequence[SweepResult], axis: Axis, out_dir: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "setpart8d"
    xlabel = "launch power per channel (dBm)" if axis is Axis.POWER_DBM else "distance (km)"

    def xs(s: SweepResult):
        return s.values() if axis is Axis.POWER_DBM else s.distances_km()

    paths = []
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for s in sweeps:
        ax.plot(xs(s), s.q2(), marker="o", label=s.format.value)
    if axis is Axis.SPANS:
        ax.axhline(4.9, color="gray", ls="--", lw=0.8, label="4.9 dB threshold")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("Q$^2$ (dB)")
    ax.grid(alpha=0.3)
    ax.legend()
    p = out_dir / f"q2_{axis.value}.svg"
    fig.savefig(p, format="svg", metadata={"Date": None})
    plt.close(fig)
    paths.append(p)

    by_kind = {s.format: s for s in sweeps}
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for a, b in GAIN_PAIRS:
        if a in by_kind and b in by_kind:
            qa, qb = by_kind[a].q2(), by_kind[b].q2()
            # gain is undefined where either point is error-free
            g = np.where(np.isfinite(qa) & np.isfinite(qb), qa - np.where(np.isfinite(qb), qb, 0.0), np.nan)
            ax.plot(xs(by_kind[a]), g, marker="o", label=gain_label(a, b))
    ax.set_xlabel(xlabel)
    ax.set_ylabel("Q$^2$ gain (dB)")
    ax.grid(alpha=0.3)
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    p = out_dir / f"gain_{axis.value}.svg"
    fig.savefig(p, format="svg", metadata={"Date": None})
    plt.close(fig)
    paths.append(p)
    return paths


def reach_summary(sweeps: Sequence[SweepResult]) -> dict[str, Optional[float]]:
    out = {}
    for s in sweeps:
        try:
            out[s.format.value] = sweep_reach_km(s)
        except ValueError:
            out[s.format.value] = None
    return out


def run_sweeps(cfg: RunConfig, axis: Axis, kinds: Sequence[FormatKind]) -> list[SweepResult]:
    sweeps = []
    for k in kinds:
        sim = cfg.sim_config(k)
        log.info("sweeping %s over %s", k.value, axis.value)
        if axis is Axis.POWER_DBM:
            sweeps.append(sweep_power(sim, cfg.powers_dbm))
        else:
            sweeps.append(sweep_reach(sim, cfg.span_counts))
    return sweeps


def cmd_sweep(
    config_path: Optional[str],
    axis: str,
    formats: Sequence[str],
    out_dir: str,
    argv: Sequence[str] = (),
) -> int:
    try:
        cfg = load_config(config_path)
        ax = {"power": Axis.POWER_DBM, "reach": Axis.SPANS}[axis]
        kinds = [FormatKind.parse(f) for f in formats] if formats else [FormatKind.parse(cfg.format)]
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"sweep_{ax.value}.csv"
    sweeps = []
    for k in kinds:
        sweeps.extend(run_sweeps(cfg, ax, [k]))
        csv_path.write_text(sweeps_to_csv(sweeps))  # completed formats survive an interrupted run
    plots = _write_plots(sweeps, ax, out)
    manifest = {
        "tool": "setpart8d",
        "version": __version__,
        "command": ["setpart8d", *argv] if argv else ["setpart8d", "sweep", "--axis", axis],
        "config_path": config_path,
        "output_dir": str(out),
        "master_seed": cfg.seed,
        "seeding": SEEDING,
        "resolved_config": json.loads(serialize_config(cfg)),
        "sim_configs": {s.format.value: s.config.snapshot() for s in sweeps},
        "outputs": [csv_path.name, *(p.name for p in plots)],
    }
    if ax is Axis.SPANS:
        manifest["reach_km_at_4.9dB"] = reach_summary(sweeps)
    (out / f"manifest_{ax.value}.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(csv_path)
    return EXIT_OK


# --- validate-channel -----------------------------------------------------


def cmd_validate_channel(out=None) -> int:
    out = out or sys.stdout
    from .validation import run_all

    checks = run_all()
    for c in checks:
        print(c.line(), file=out)
    ok = all(c.passed for c in checks)
    print("all channel checks passed" if ok else "channel validation FAILED", file=out)
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="setpart8d", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify-formats", help="check the constellation constraints")
    v.add_argument("--tamper", action="store_true", help=argparse.SUPPRESS)

    s = sub.add_parser("sweep", help=f"Q^2 sweeps; {THREADS_ENV}=n runs points in n processes")
    s.add_argument("--axis", choices=("power", "reach"), required=True)
    s.add_argument("--formats", default="", help="comma separated, e.g. PB-5B8D,PDM-BPSK")
    s.add_argument("--config", default=None, help="flat JSON config file")
    s.add_argument("--out", default="results")

    sub.add_parser("validate-channel", help="analytic SSFM / noise / equalizer checks")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    if args.command == "verify-formats":
        return cmd_verify_formats(tamper=args.tamper)
    if args.command == "sweep":
        formats = [f for f in args.formats.split(",") if f.strip()]
        return cmd_sweep(args.config, args.axis, formats, args.out, argv)
    return cmd_validate_channel()


if __name__ == "__main__":
    sys.exit(main())
