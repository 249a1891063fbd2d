"""Command-line front end: sweeps, single points, channel validation, plots.

Subcommands:

  sweep <config.json>        run a QBER sweep, write the CSV (and plot data)
  single <config.json> --state H --p 0.25
                             one point, analytic + Monte Carlo, to stdout
  validate-channel           check the wave-plate sandwich against the exact
                             bit-flip channel, analytically and by sampling
  plotdata <csv> --out base  re-derive gnuplot blocks and an SVG from a CSV

Configs are a single JSON object and unknown keys are errors, so a typo
cannot silently run a different experiment.  CSV output is versioned,
carries the master seed and a hash of the config, and is written atomically;
rerunning the same config reproduces the file byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, fields

import numpy as np

from .montecarlo import SeedPolicy, run_trials, wilson_interval
from .noise import (
    BellDiagonalSource,
    CalibrationError,
    PauliChannel,
    WaveplateSandwich,
    calibrate_from_visibilities,
    choi_matrix,
    sandwich_as_channel,
    trace_distance,
)
from .protocol import (
    CHANNEL_KINDS,
    PipelineConfig,
    SixState,
    calibrate_parity_visibility,
    run_analytic,
    run_direct_baseline,
)

CSV_VERSION = "parity-reject-csv v1"
AVG_LABEL = "AVG"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CALIBRATION = 3
EXIT_NUMERICAL = 4


class ConfigError(Exception):
    """The run configuration is malformed or inconsistent."""


class NumericalError(Exception):
    """A numerical validation gate failed."""


# ---------------------------------------------------------------------------
# configuration

_TOP_KEYS = {"inputs", "sweep", "pipeline", "trials_per_point", "master_seed",
             "outputs"}
_SWEEP_KEYS = {"p_values", "theta_values"}
_PIPELINE_KEYS = {"source_visibilities", "encoded_visibility_target",
                  "parity_visibility", "herald_input", "use_minus_branches",
                  "phase_error_mode", "channel"}
_SOURCE_KEYS = {"hv", "pm"}
_OUTPUT_KEYS = {"csv_path", "plotdata_path"}


def _reject_unknown(section: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where}; "
                          f"allowed: {sorted(allowed)}")


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


@dataclass(frozen=True)
class SweepConfig:
    inputs: tuple[SixState, ...]
    points: tuple[tuple[float, float], ...]   # (theta_deg, flip probability)
    pipeline: PipelineConfig
    trials_per_point: int
    master_seed: int
    csv_path: str
    plotdata_path: str | None
    config_hash: str


def config_hash(raw: dict) -> str:
    """Hash of the canonical JSON form, for provenance comments in outputs."""
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _parse_pipeline(section: dict) -> PipelineConfig:
    _reject_unknown(section, _PIPELINE_KEYS, "pipeline")
    source = None
    if "source_visibilities" in section:
        vis = section["source_visibilities"]
        _require(isinstance(vis, dict), "source_visibilities must be an object")
        _reject_unknown(vis, _SOURCE_KEYS, "pipeline.source_visibilities")
        _require(set(vis) == _SOURCE_KEYS,
                 "source_visibilities needs both 'hv' and 'pm'")
        source = calibrate_from_visibilities(float(vis["hv"]), float(vis["pm"]))
    herald_input = bool(section.get("herald_input", False))
    ancilla = source if source is not None else BellDiagonalSource.ideal()
    herald = None
    if herald_input:
        herald = source if source is not None else BellDiagonalSource.ideal()

    has_target = "encoded_visibility_target" in section
    has_v = "parity_visibility" in section
    _require(not (has_target and has_v),
             "give either encoded_visibility_target or parity_visibility, not both")
    if has_target:
        target = float(section["encoded_visibility_target"])
        herald_for_cal = herald if herald is not None else BellDiagonalSource.ideal()
        v = calibrate_parity_visibility(ancilla, herald_for_cal, target)
    elif has_v:
        v = float(section["parity_visibility"])
        _require(0.0 <= v <= 1.0, f"parity_visibility {v} outside [0, 1]")
    else:
        v = 1.0

    channel = section.get("channel", "bitflip")
    _require(channel in CHANNEL_KINDS,
             f"channel {channel!r} not one of {list(CHANNEL_KINDS)}")
    return PipelineConfig(
        ancilla=ancilla,
        herald=herald,
        parity_visibility=v,
        channel_kind=channel,
        use_minus_branches=bool(section.get("use_minus_branches", True)),
        phase_error_mode=bool(section.get("phase_error_mode", False)),
    )


def _parse_points(section: dict) -> tuple[tuple[float, float], ...]:
    _reject_unknown(section, _SWEEP_KEYS, "sweep")
    keys = [k for k in ("p_values", "theta_values") if k in section]
    _require(len(keys) == 1, "sweep needs exactly one of p_values or theta_values")
    values = section[keys[0]]
    _require(isinstance(values, list) and values, f"sweep.{keys[0]} must be a non-empty list")
    points = []
    for raw in values:
        _require(isinstance(raw, (int, float)) and not isinstance(raw, bool),
                 f"sweep value {raw!r} is not a number")
        x = float(raw)
        if keys[0] == "p_values":
            _require(0.0 <= x <= 1.0, f"flip probability {x} outside [0, 1]")
            theta = WaveplateSandwich.for_flip_probability(x).theta_deg
            points.append((theta, x))
        else:
            _require(0.0 <= x <= 45.0, f"plate angle {x} outside [0, 45]")
            points.append((x, WaveplateSandwich(x).flip_probability))
    return tuple(points)


def load_config(path: str) -> SweepConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path!r} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path!r} is not valid JSON: {exc}") from None
    _require(isinstance(raw, dict), "config must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")
    for key in ("sweep", "outputs"):
        _require(key in raw, f"config is missing required section {key!r}")
        _require(isinstance(raw[key], dict), f"config section {key!r} must be an object")

    labels = raw.get("inputs", [s.value for s in SixState])
    _require(isinstance(labels, list) and labels, "inputs must be a non-empty list")
    _require(len(set(labels)) == len(labels), f"duplicate input states in {labels}")
    try:
        inputs = tuple(SixState.coerce(lab) for lab in labels)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    pipeline = _parse_pipeline(raw.get("pipeline", {}))
    points = _parse_points(raw["sweep"])

    trials = raw.get("trials_per_point", 100_000)
    _require(isinstance(trials, int) and not isinstance(trials, bool) and trials > 0,
             f"trials_per_point must be a positive integer, got {trials!r}")
    seed = raw.get("master_seed", 0)
    _require(isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0,
             f"master_seed must be a non-negative integer, got {seed!r}")

    outputs = raw["outputs"]
    _reject_unknown(outputs, _OUTPUT_KEYS, "outputs")
    _require("csv_path" in outputs, "outputs.csv_path is required")
    csv_path = str(outputs["csv_path"])
    plot_path = outputs.get("plotdata_path")
    return SweepConfig(inputs, points, pipeline, trials, seed, csv_path,
                       None if plot_path is None else str(plot_path),
                       config_hash(raw))


def make_noise(kind: str, p: float):
    """The sampled channel object for a configured channel kind."""
    if kind == "sandwich":
        return WaveplateSandwich.for_flip_probability(p)
    if kind == "bitflip":
        return PauliChannel.bit_flip(p)
    if kind == "phaseflip":
        return PauliChannel.phase_flip(p)
    raise ConfigError(f"unknown channel kind {kind!r}")


# ---------------------------------------------------------------------------
# sweep rows and CSV round trip

def _fmt(x: float) -> str:
    return f"{x:.12g}"


@dataclass(frozen=True)
class SweepRow:
    """One (state, noise point) record; field order is the CSV column order."""

    state: str
    basis: str
    theta_deg: float
    p: float
    e0_analytic: float
    e1_analytic: float
    e1_mc: float
    ci_low: float
    ci_high: float
    yield_analytic: float
    yield_mc: float
    n_accepted: int
    n_trials: int

    def as_strings(self) -> list[str]:
        out = []
        for f in fields(self):
            val = getattr(self, f.name)
            out.append(_fmt(val) if f.type == "float" else str(val))
        return out


CSV_COLUMNS = tuple(f.name for f in fields(SweepRow))


def write_sweep_csv(path: str, rows, seed: int, cfg_hash: str) -> None:
    """Versioned, seeded, atomically replaced; reruns are byte-identical."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".sweep-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# {CSV_VERSION}\n")
            fh.write(f"# seed = {seed}\n")
            fh.write(f"# config-hash = {cfg_hash}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                writer.writerow(row.as_strings())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_sweep_csv(path: str) -> tuple[list[SweepRow], dict]:
    meta: dict = {}
    rows: list[SweepRow] = []
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline().strip()
        if first != f"# {CSV_VERSION}":
            raise ConfigError(f"{path!r} is not a {CSV_VERSION} file (got {first!r})")
        data_lines = []
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    meta[key.strip()] = val.strip()
                continue
            if line:
                data_lines.append(line)
    if not data_lines:
        raise ConfigError(f"{path!r} contains no data rows")
    reader = csv.reader(data_lines)
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise ConfigError(f"{path!r} has unexpected columns {header}")
    for parts in reader:
        if len(parts) != len(CSV_COLUMNS):
            raise ConfigError(f"malformed row {parts} in {path!r}")
        kwargs = {}
        for f, text in zip(fields(SweepRow), parts):
            if f.type == "float":
                kwargs[f.name] = float(text)
            elif f.type == "int":
                kwargs[f.name] = int(text)
            else:
                kwargs[f.name] = text
        rows.append(SweepRow(**kwargs))
    return rows, meta


# ---------------------------------------------------------------------------
# commands

def _state_rows(cfg: SweepConfig, theta: float, p: float,
                policy: SeedPolicy) -> list[SweepRow]:
    noise = make_noise(cfg.pipeline.channel_kind, p)
    rows = []
    error_counts = []
    for s in cfg.inputs:
        outcome = run_analytic(cfg.pipeline, s, p)
        baseline = run_direct_baseline(s, p, cfg.pipeline.channel_kind)
        stats = run_trials(cfg.pipeline, s, noise, cfg.trials_per_point, policy)
        error_counts.append(stats.n_errors)
        rows.append(SweepRow(
            state=s.value, basis=s.basis, theta_deg=theta, p=p,
            e0_analytic=baseline, e1_analytic=outcome.qber,
            e1_mc=stats.qber_hat, ci_low=stats.ci_low, ci_high=stats.ci_high,
            yield_analytic=outcome.total_yield, yield_mc=stats.yield_hat,
            n_accepted=stats.n_accepted, n_trials=stats.n_trials))
    if len(cfg.inputs) == len(SixState):
        rows.append(_average_row(rows, error_counts, theta, p))
    return rows


def _average_row(rows: list[SweepRow], error_counts: list[int],
                 theta: float, p: float) -> SweepRow:
    """Unweighted six-state mean; the interval pools the raw counts."""
    e1_mc = float(np.mean([r.e1_mc for r in rows]))
    n_accepted = sum(r.n_accepted for r in rows)
    n_trials = sum(r.n_trials for r in rows)
    n_errors = sum(error_counts)
    if n_accepted:
        lo, hi = wilson_interval(n_errors, n_accepted)
    else:
        lo = hi = float("nan")
    return SweepRow(
        state=AVG_LABEL, basis="ALL", theta_deg=theta, p=p,
        e0_analytic=float(np.mean([r.e0_analytic for r in rows])),
        e1_analytic=float(np.mean([r.e1_analytic for r in rows])),
        e1_mc=e1_mc, ci_low=lo, ci_high=hi,
        yield_analytic=float(np.mean([r.yield_analytic for r in rows])),
        yield_mc=n_accepted / n_trials if n_trials else 0.0,
        n_accepted=n_accepted, n_trials=n_trials)


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    policy = SeedPolicy(cfg.master_seed)
    rows: list[SweepRow] = []
    for theta, p in cfg.points:
        rows.extend(_state_rows(cfg, theta, p, policy))
    write_sweep_csv(cfg.csv_path, rows, cfg.master_seed, cfg.config_hash)
    print(f"wrote {len(rows)} rows to {cfg.csv_path}")
    if cfg.plotdata_path is not None:
        dat, svg = write_plotdata(rows, cfg.plotdata_path)
        print(f"wrote {dat} and {svg}")
    return EXIT_OK


def cmd_single(args) -> int:
    cfg = load_config(args.config)
    try:
        state = SixState.coerce(args.state)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    p = float(args.p)
    _require(0.0 <= p <= 1.0, f"--p {p} outside [0, 1]")
    outcome = run_analytic(cfg.pipeline, state, p)
    baseline = run_direct_baseline(state, p, cfg.pipeline.channel_kind)
    noise = make_noise(cfg.pipeline.channel_kind, p)
    policy = SeedPolicy(cfg.master_seed)
    stats = run_trials(cfg.pipeline, state, noise, cfg.trials_per_point, policy)
    print(f"state {state.value} ({state.basis} basis), flip probability {_fmt(p)}")
    print(f"  direct baseline QBER   {_fmt(baseline)}")
    print(f"  decoded QBER analytic  {_fmt(outcome.qber)}")
    print(f"  decoded QBER sampled   {_fmt(stats.qber_hat)}  "
          f"95% CI [{_fmt(stats.ci_low)}, {_fmt(stats.ci_high)}]")
    print(f"  yield analytic         {_fmt(outcome.total_yield)}")
    print(f"  yield sampled          {_fmt(stats.yield_hat)}  "
          f"({stats.n_accepted} of {stats.n_trials} trials)")
    return EXIT_OK


def cmd_validate_channel(args) -> int:
    try:
        thetas = [float(x) for x in args.theta.split(",") if x.strip() != ""]
    except ValueError:
        raise ConfigError(f"--theta {args.theta!r} is not a comma-separated "
                          "list of angles") from None
    _require(bool(thetas), "--theta list is empty")
    for t in thetas:
        _require(0.0 <= t <= 45.0, f"plate angle {t} outside [0, 45]")
    n = int(args.trials)
    _require(n > 0, "--trials must be positive")
    policy = SeedPolicy(int(args.seed))
    failures = []
    print(f"{'theta':>7} {'p=sin^2(2t)':>13} {'choi dist':>10} "
          f"{'flip freq':>11} {'sigmas':>7}   95% CI")
    for theta in thetas:
        sandwich = WaveplateSandwich(theta)
        p = sandwich.flip_probability
        dist = trace_distance(choi_matrix(sandwich.kraus()),
                              choi_matrix(sandwich_as_channel(sandwich).kraus()))
        # empirical: draw the plate sign, then the flip, for H-polarized input
        p_plus = abs(sandwich.unitary(+1).array[1, 0]) ** 2
        p_minus = abs(sandwich.unitary(-1).array[1, 0]) ** 2
        u = policy.uniforms(f"validate|{theta:.17g}", 0, n, width=2)
        flips = np.where(u[:, 0] < 0.5, u[:, 1] < p_plus, u[:, 1] < p_minus)
        k = int(np.count_nonzero(flips))
        sigma = math.sqrt(n * p * (1.0 - p))
        pulls = abs(k - n * p) / sigma if sigma > 0 else (0.0 if k in (0, n) else math.inf)
        lo, hi = wilson_interval(k, n)
        ok = dist < 1e-9 and pulls <= 5.0
        if not ok:
            failures.append(theta)
        print(f"{theta:7.2f} {p:13.10f} {dist:10.2e} {k / n:11.8f} "
              f"{pulls:7.2f}   [{lo:.8f}, {hi:.8f}]{'' if ok else '  FAIL'}")
    if failures:
        raise NumericalError(
            f"sandwich-vs-bit-flip validation failed at theta={failures}")
    print(f"all {len(thetas)} angles consistent "
          f"(Choi distance < 1e-9, sampled frequency within 5 sigma, n={n})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# plot data

_PANEL_STATES = ("V", "-", "L", AVG_LABEL)
_PANEL_TITLES = {"V": "V input (H/V basis)", "-": "− input (± basis)",
                 "L": "L input (R/L basis)", AVG_LABEL: "six-state mean"}


def write_plotdata(rows: list[SweepRow], base: str) -> tuple[str, str]:
    """Emit `base`.dat (gnuplot blocks per state) and `base`.svg."""
    directory = os.path.dirname(os.path.abspath(base))
    os.makedirs(directory, exist_ok=True)
    by_state: dict[str, list[SweepRow]] = {}
    for row in rows:
        by_state.setdefault(row.state, []).append(row)
    for group in by_state.values():
        group.sort(key=lambda r: r.p)

    dat_path = base + ".dat"
    blocks = []
    for index, (state, group) in enumerate(by_state.items()):
        lines = [f"# block {index}: state = {state}",
                 "# p  e0_analytic  e1_analytic  e1_mc  ci_low  ci_high  "
                 "yield_analytic  yield_mc"]
        for r in group:
            lines.append("  ".join(_fmt(x) for x in (
                r.p, r.e0_analytic, r.e1_analytic, r.e1_mc,
                r.ci_low, r.ci_high, r.yield_analytic, r.yield_mc)))
        blocks.append("\n".join(lines))
    with open(dat_path, "w", encoding="utf-8") as fh:
        fh.write(f"# {CSV_VERSION} plot blocks\n")
        fh.write("\n\n\n".join(blocks))
        fh.write("\n")

    svg_path = base + ".svg"
    _write_svg(by_state, svg_path)
    return dat_path, svg_path


def _write_svg(by_state: dict[str, list[SweepRow]], path: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with plt.rc_context({"svg.hashsalt": "parity-reject"}):
        fig, axes = plt.subplots(2, 2, figsize=(9.0, 7.0), sharex=True)
        for ax, state in zip(axes.ravel(), _PANEL_STATES):
            ax.set_title(_PANEL_TITLES[state], fontsize=10)
            group = by_state.get(state)
            if not group:
                ax.text(0.5, 0.5, "no data", ha="center", va="center",
                        transform=ax.transAxes)
                continue
            ps = np.array([r.p for r in group])
            ax.plot(ps, [r.e0_analytic for r in group], ls=":", color="gray",
                    label="direct")
            ax.plot(ps, [r.e1_analytic for r in group], ls="-", color="C0",
                    label="decoded, exact")
            good = [r for r in group if not math.isnan(r.e1_mc)]
            if good:
                gp = np.array([r.p for r in good])
                mc = np.array([r.e1_mc for r in good])
                err = np.array([[max(0.0, r.e1_mc - r.ci_low) for r in good],
                                [max(0.0, r.ci_high - r.e1_mc) for r in good]])
                ax.errorbar(gp, mc, yerr=err, fmt="o", ms=3.5, color="C3",
                            capsize=2, lw=1, label="decoded, sampled")
            ax.grid(alpha=0.3)
        for ax in axes[1]:
            ax.set_xlabel("flip probability p")
        for ax in axes[:, 0]:
            ax.set_ylabel("error rate")
        axes[0, 0].legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def cmd_plotdata(args) -> int:
    rows, _meta = read_sweep_csv(args.csv)
    dat, svg = write_plotdata(rows, args.out)
    print(f"wrote {dat} and {svg}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="parityreject",
        description="Two-photon parity-check error rejection: sweeps, "
                    "channel validation and plot data.")
    sub = ap.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="run a configured QBER sweep to CSV")
    sw.add_argument("config", help="JSON config file")

    si = sub.add_parser("single", help="one (state, p) point to stdout")
    si.add_argument("config", help="JSON config file")
    si.add_argument("--state", required=True,
                    help="input state label: H, V, +, -, R or L")
    si.add_argument("--p", required=True, type=float, help="flip probability")

    vc = sub.add_parser("validate-channel",
                        help="compare the wave-plate sandwich to the exact "
                             "bit-flip channel")
    vc.add_argument("--theta", default="0,5,10,15,20,25,30,35,40,45",
                    help="comma-separated plate angles in degrees")
    vc.add_argument("--trials", type=int, default=1_000_000,
                    help="samples per angle (default 1000000)")
    vc.add_argument("--seed", type=int, default=20260818)

    pd = sub.add_parser("plotdata", help="gnuplot blocks + SVG from a sweep CSV")
    pd.add_argument("csv", help="sweep CSV produced by this tool")
    pd.add_argument("--out", required=True,
                    help="output basename; writes <out>.dat and <out>.svg")
    return ap


_COMMANDS = {
    "sweep": cmd_sweep,
    "single": cmd_single,
    "validate-channel": cmd_validate_channel,
    "plotdata": cmd_plotdata,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationError as exc:
        print(f"calibration error: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except NumericalError as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
