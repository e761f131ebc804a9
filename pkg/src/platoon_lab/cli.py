"""``platoon-lab`` command-line front end.

Configuration is a flat ``key = value`` file with ``#`` comments. Exit codes:
0 success, 1 input error, 2 property failure, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from platoon_lab.design import (
    DesignSpec,
    feasible_region,
    heuristic_search,
    minimize_headway,
    region_is_feasible,
    write_design_trace_csv,
)
from platoon_lab.errors import DivergenceError, PlatoonLabError
from platoon_lab.freqdomain import (
    GridSpec,
    build_polys,
    check_w_conditions,
    hinf_norm,
    is_internally_stable,
    w_coefficients,
    write_bode_csv,
)
from platoon_lab.model import DisturbanceSpec, PlatoonConfig, gains_from_b
from platoon_lab.sim import (
    Scenario,
    convergence_order,
    integrate,
    stability_report,
    write_trace_csv,
)
from platoon_lab.topology import build_mpf

EXIT_OK, EXIT_INPUT, EXIT_PROPERTY, EXIT_DIVERGED = 0, 1, 2, 3

INT_KEYS = {"N", "r", "k_max", "points_per_decade", "record_every", "trace_stride",
            "alpha_steps", "b_steps", "max_rounds"}
FLOAT_KEYS = {
    "tau", "h", "D", "v0", "d", "b", "alpha",
    "dist_amplitude", "dist_omega", "dist_start",
    "t_end", "dt", "epsilon", "delta_rel",
    "h_bar", "tol", "omega0", "omega1", "omega_min", "omega_max",
    "alpha_min", "alpha_max", "b_min", "b_max",
}
BOOL_KEYS = {"disturbance"}
KNOWN_KEYS = INT_KEYS | FLOAT_KEYS | BOOL_KEYS

REQUIRED = {
    "simulate": {"tau", "b", "alpha"},
    "analyze": {"tau", "b", "alpha", "h"},
    "design": {"tau", "h"},
    "min-headway": {"tau", "h_bar"},
    "region": {"tau", "h", "alpha_min", "alpha_max", "b_min", "b_max"},
}


class ConfigError(PlatoonLabError, ValueError):
    pass


def fmt(x) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


def parse_config(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in INT_KEYS:
                out[key] = int(value)
            elif key in FLOAT_KEYS:
                out[key] = float(value)
            else:
                low = value.lower()
                if low not in {"true", "false", "on", "off", "yes", "no", "1", "0"}:
                    raise ValueError(value)
                out[key] = low in {"true", "on", "yes", "1"}
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {value!r} for {key!r}") from None
    return out


@dataclass
class RunConfig:
    values: dict
    out_dir: Path
    allow_unstable: bool = False

    def get(self, key, default=None):
        return self.values.get(key, default)

    def require(self, subcommand: str):
        missing = sorted(REQUIRED[subcommand] - self.values.keys())
        if missing:
            raise ConfigError(f"{subcommand}: missing required key(s) {', '.join(missing)}")

    def platoon(self) -> PlatoonConfig:
        dist = None
        if self.get("disturbance", True):
            dist = DisturbanceSpec(
                amplitude=self.get("dist_amplitude", 10.0),
                angular_frequency=self.get("dist_omega", 1.0),
                start_time=self.get("dist_start", 60.0),
            )
        return PlatoonConfig(
            N=self.get("N", 7),
            tau=self.values["tau"],
            h=self.get("h", 0.6),
            D=self.get("D", 5.0),
            r=self.get("r", 3),
            v0=self.get("v0", 20.0),
            d=self.get("d", 5.0),
            disturbance=dist,
        )

    def grid(self) -> GridSpec:
        return GridSpec(
            omega_min=self.get("omega_min", 1e-3),
            omega_max=self.get("omega_max", self.get("omega1", 1e3)),
            points_per_decade=self.get("points_per_decade", 400),
        )

    def design_spec(self, h_bar: float) -> DesignSpec:
        return DesignSpec(
            r_bar=self.get("r", 3),
            h_bar=h_bar,
            tau=self.values["tau"],
            omega0=self.get("omega0", 100.0),
            omega1=self.get("omega1", 1000.0),
            k_max=self.get("k_max", 100),
            tol=self.get("tol", 0.001),
            omega_min=self.get("omega_min", 1e-3),
            points_per_decade=self.get("points_per_decade", 400),
            max_rounds=self.get("max_rounds", 200),
        )


def _write_report(rc: RunConfig, lines: list[str]) -> None:
    text = "\n".join(lines) + "\n"
    (rc.out_dir / "report.txt").write_text(text)
    sys.stdout.write(text)


def cmd_simulate(rc: RunConfig) -> int:
    rc.require("simulate")
    cfg = rc.platoon()
    gains = gains_from_b(rc.values["b"], rc.values["alpha"], cfg.tau)
    scenario = Scenario(
        config=cfg,
        gains=gains,
        t_end=rc.get("t_end", 120.0),
        dt=rc.get("dt", 1e-3),
    )
    internal = is_internally_stable(gains, scenario.topology, cfg.tau)
    lines = [
        "command: simulate",
        f"b: {fmt(gains.b)}",
        f"alpha: {fmt(gains.alpha)}",
        f"internally_stable: {fmt(internal.stable)}",
    ]
    if not internal.stable and not rc.allow_unstable:
        lines.append("status: gains fail the internal-stability check (use --allow-unstable)")
        _write_report(rc, lines)
        return EXIT_PROPERTY
    try:
        trace = integrate(scenario, allow_unstable=True, record_every=rc.get("record_every", 1))
    except DivergenceError as exc:
        lines += ["status: diverged", f"first_bad_time: {fmt(exc.time)}"]
        _write_report(rc, lines)
        return EXIT_DIVERGED
    write_trace_csv(rc.out_dir / "trace.csv", trace, stride=rc.get("trace_stride", 10))
    rep = stability_report(
        trace,
        epsilon=rc.get("epsilon", 0.01),
        delta_rel=rc.get("delta_rel", 1e-3),
    )
    lines += [
        f"converged: {fmt(rep.converged)}",
        f"string_stable_empirical: {fmt(rep.string_stable_empirical)}",
        "settle_times: " + " ".join(fmt(t) for t in rep.settle_times),
        "peak_errors: " + " ".join(fmt(p) for p in rep.peak_errors),
    ]
    if rep.converged and rep.settled_before_disturbance:
        lines.append("convergence_order: " + " ".join(map(str, convergence_order(rep))))
    ok = rep.converged and rep.string_stable_empirical
    lines.append(f"status: {'ok' if ok else 'stability check failed'}")
    _write_report(rc, lines)
    return EXIT_OK if ok else EXIT_PROPERTY


def cmd_analyze(rc: RunConfig) -> int:
    rc.require("analyze")
    tau, h, r = rc.values["tau"], rc.values["h"], rc.get("r", 3)
    gains = gains_from_b(rc.values["b"], rc.values["alpha"], tau)
    resp = hinf_norm(build_polys(gains, r, h, tau), rc.grid())
    write_bode_csv(rc.out_dir / "bode.csv", resp)
    w = w_coefficients(gains, r, h, tau)
    wrep = check_w_conditions(w, rc.get("omega0", 100.0))
    internal = is_internally_stable(gains, build_mpf(rc.get("N", 7), r), tau)
    lines = [
        "command: analyze",
        f"b: {fmt(gains.b)}",
        f"alpha: {fmt(gains.alpha)}",
        f"h: {fmt(h)}",
        f"hinf: {fmt(resp.hinf)}",
        f"argmax_omega: {fmt(resp.argmax_omega)}",
        f"string_stable: {fmt(resp.string_stable)}",
        f"internally_stable: {fmt(internal.stable)}",
    ]
    lines += [f"{k}: {fmt(getattr(w, k))}" for k in ("W2", "W4", "W6", "W8", "W10")]
    lines += [
        f"omega0: {fmt(w.omega0)}",
        f"advisory_W2_negative: {fmt(not wrep.W2_ok)}",
        f"advisory_W4_negative: {fmt(not wrep.W4_ok)}",
        f"advisory_W6_negative: {fmt(not wrep.W6_ok)}",
        f"advisory_W8_band_violated: {fmt(not wrep.W8_band_ok)}",
        f"w_conditions_satisfied: {fmt(wrep.satisfied)}",
    ]
    ok = resp.string_stable and internal.stable
    _write_report(rc, lines)
    return EXIT_OK if ok else EXIT_PROPERTY


def _design_lines(result, header: str) -> list[str]:
    lines = [
        header,
        f"feasible: {fmt(result.feasible)}",
        f"alpha: {fmt(result.alpha)}",
        f"b: {fmt(result.b)}",
        f"h: {fmt(result.h)}",
        f"k_max: {fmt(result.k_max)}",
    ]
    if result.verification is not None:
        lines.append(f"hinf: {fmt(result.verification.hinf)}")
    if result.bisection_trace:
        lines.append("bisection_trace: " + " ".join(fmt(h) for h in result.bisection_trace))
    if result.w_report is not None:
        lines.append(f"w_conditions_satisfied: {fmt(result.w_report.satisfied)}")
    if result.note:
        lines.append(f"note: {result.note}")
    return lines


def cmd_design(rc: RunConfig) -> int:
    rc.require("design")
    h = rc.values["h"]
    spec = rc.design_spec(max(h, rc.get("h_bar", h)))
    result = heuristic_search(h, spec.r_bar, spec.tau, spec)
    _write_report(rc, _design_lines(result, "command: design"))
    return EXIT_OK if result.feasible else EXIT_PROPERTY


def cmd_min_headway(rc: RunConfig) -> int:
    rc.require("min-headway")
    spec = rc.design_spec(rc.values["h_bar"])
    result = minimize_headway(spec)
    write_design_trace_csv(rc.out_dir / "design_trace.csv", result)
    lines = _design_lines(result, "command: min-headway")
    if result.degenerate:
        lines.append("status: degenerate (tol >= h_bar, nothing to bisect)")
    _write_report(rc, lines)
    return EXIT_OK if result.feasible and not result.degenerate else EXIT_PROPERTY


def cmd_region(rc: RunConfig) -> int:
    rc.require("region")
    tau, h, r = rc.values["tau"], rc.values["h"], rc.get("r", 3)
    alphas = np.linspace(rc.values["alpha_min"], rc.values["alpha_max"], rc.get("alpha_steps", 20))
    bs = np.linspace(rc.values["b_min"], rc.values["b_max"], rc.get("b_steps", 20))
    hinf = feasible_region(h, r, tau, alphas, bs, rc.grid())
    ok = region_is_feasible(hinf)
    with open(rc.out_dir / "region.csv", "w") as fh:
        fh.write("alpha,b,hinf,feasible\n")
        for i, a in enumerate(alphas):
            for j, b in enumerate(bs):
                val = "" if math.isnan(hinf[i, j]) else fmt(hinf[i, j])
                fh.write(f"{fmt(a)},{fmt(b)},{val},{int(ok[i, j])}\n")
    lines = [
        "command: region",
        f"h: {fmt(h)}",
        f"cells: {ok.size}",
        f"feasible_cells: {int(ok.sum())}",
    ]
    _write_report(rc, lines)
    return EXIT_OK if ok.any() else EXIT_PROPERTY


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "design": cmd_design,
    "min-headway": cmd_min_headway,
    "region": cmd_region,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="platoon-lab")
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, type=Path)
    parser.add_argument("--out", type=Path, default=Path("."))
    parser.add_argument("--allow-unstable", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        values = parse_config(args.config.read_text())
        args.out.mkdir(parents=True, exist_ok=True)
        rc = RunConfig(values=values, out_dir=args.out, allow_unstable=args.allow_unstable)
        return COMMANDS[args.subcommand](rc)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
