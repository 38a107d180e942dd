"""Configuration-driven command line: run experiments, evaluate bounds.

Scenario files are flat INI text.  All randomness flows from the single
`seed` key (overridable with --seed), so a rerun with the same file and
flags reproduces output byte for byte.

Exit codes: 0 success, 2 configuration or validation error, 3 invariant
violation during a run.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional

from . import bounds, sim_engine
from .bounds import EpsilonSet, SystemParams
from .errors import ConfigError, InvariantViolation
from .sim_engine import Scenario

_SCHEMA = {
    "system": {"n", "clen", "xlen", "beta", "vlen", "lambda"},
    "repairer": {"kind", "variant", "eps", "eps_c", "eps_d", "r", "period",
                 "step_duration"},
    "codec": {"backend"},
    "run": {"failures", "trials", "seed", "peak_window", "assert_every",
            "fault_injection"},
    "output": {"csv", "summary", "trace"},
}


@dataclass(frozen=True)
class OutputSpec:
    csv: str = "results.csv"
    summary: str = "summary.jsonl"
    trace: bool = False


def _key_lines(text: str) -> dict:
    """Map (section, key) and ("[section]", name) to 1-based line numbers."""
    found = {}
    section = None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            found.setdefault(("[section]", section), i)
            continue
        cut = min((p for p in (line.find("="), line.find(":")) if p >= 0),
                  default=-1)
        if cut > 0 and section is not None:
            found.setdefault((section, line[:cut].strip().lower()), i)
    return found


def _reject_unknown(cp: configparser.ConfigParser, lines: dict,
                    path: str) -> None:
    problems = []
    for section in cp.sections():
        s = section.lower()
        if s not in _SCHEMA:
            n = lines.get(("[section]", s), "?")
            problems.append(f"{path}:{n}: unknown section [{section}]")
            continue
        for key in cp.options(section):
            if key not in _SCHEMA[s]:
                n = lines.get((s, key), "?")
                problems.append(f"{path}:{n}: unknown key '{key}' in "
                                f"[{section}]")
    if problems:
        raise ConfigError("; ".join(problems))


def load_scenario(path) -> tuple:
    """Parse and validate a scenario file; returns (Scenario, OutputSpec)."""
    text = Path(path).read_text()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string(text, source=str(path))
    lines = _key_lines(text)
    _reject_unknown(cp, lines, str(path))

    if not cp.has_section("system"):
        raise ConfigError(f"{path}: missing [system] section")
    N = cp.getint("system", "n")
    clen = cp.getint("system", "clen")
    vlen = cp.getint("system", "vlen", fallback=0)
    lam = cp.getfloat("system", "lambda", fallback=0.0)

    has_x = cp.has_option("system", "xlen")
    has_b = cp.has_option("system", "beta")
    if has_x and has_b:
        raise ConfigError(
            f"{path}: [system] must give exactly one of 'xlen' and 'beta' "
            f"(xlen at line {lines.get(('system', 'xlen'), '?')}, "
            f"beta at line {lines.get(('system', 'beta'), '?')})")
    if not has_x and not has_b:
        raise ConfigError(f"{path}: [system] needs 'xlen' or 'beta'")
    if has_x:
        xlen = cp.getint("system", "xlen")
    else:
        beta = cp.getfloat("system", "beta")
        if not 0.0 < beta < 1.0:
            raise ConfigError(f"{path}: beta must be in (0, 1)")
        xlen = round((1.0 - beta) * N) * clen
    sp = SystemParams(N=N, clen=clen, xlen=xlen, vlen=vlen, lam=lam)

    kind = cp.get("repairer", "kind", fallback="liquid")
    variant = cp.get("repairer", "variant", fallback="periodic")
    eps = EpsilonSet(cp.getfloat("repairer", "eps_c", fallback=0.1),
                     cp.getfloat("repairer", "eps_d", fallback=0.1),
                     cp.getfloat("repairer", "eps", fallback=0.1))
    r = (cp.getint("repairer", "r")
         if cp.has_option("repairer", "r") else None)
    period = cp.getfloat("repairer", "period", fallback=1.0)
    step_dur = (cp.getfloat("repairer", "step_duration")
                if cp.has_option("repairer", "step_duration") else None)

    backend = cp.get("codec", "backend", fallback="auto")

    failures = cp.getint("run", "failures", fallback=0)
    trials = cp.getint("run", "trials", fallback=1)
    seed = cp.getint("run", "seed", fallback=0)
    peak = (cp.getfloat("run", "peak_window")
            if cp.has_option("run", "peak_window") else None)
    assert_every = cp.getint("run", "assert_every", fallback=1)
    fault = cp.getboolean("run", "fault_injection", fallback=False)

    out = OutputSpec(
        csv=cp.get("output", "csv", fallback="results.csv"),
        summary=cp.get("output", "summary", fallback="summary.jsonl"),
        trace=cp.getboolean("output", "trace", fallback=False))

    scenario = Scenario(sysParams=sp, repairer=kind, variant=variant,
                        codecBackend=backend, eps=eps, failureCount=failures,
                        trials=trials, seed=seed, peakWindow=peak,
                        period=period, advancedR=r, stepDuration=step_dur,
                        assertEvery=assert_every, collectTrace=out.trace,
                        faultInjection=fault)
    return scenario, out


def dump_config(scenario: Scenario, out: OutputSpec) -> str:
    """Canonical scenario text; load_scenario on it reproduces the inputs."""
    sp = scenario.sysParams
    lines = [
        "[system]",
        f"N = {sp.N}",
        f"clen = {sp.clen}",
        f"xlen = {sp.xlen}",
        f"vlen = {sp.vlen}",
        f"lambda = {sp.lam!r}",
        "",
        "[repairer]",
        f"kind = {scenario.repairer}",
        f"variant = {scenario.variant}",
        f"eps_c = {scenario.eps.epsC!r}",
        f"eps_d = {scenario.eps.epsD!r}",
        f"eps = {scenario.eps.eps!r}",
        f"period = {scenario.period!r}",
    ]
    if scenario.advancedR is not None:
        lines.append(f"r = {scenario.advancedR}")
    if scenario.stepDuration is not None:
        lines.append(f"step_duration = {scenario.stepDuration!r}")
    lines += [
        "",
        "[codec]",
        f"backend = {scenario.codecBackend}",
        "",
        "[run]",
        f"failures = {scenario.failureCount}",
        f"trials = {scenario.trials}",
        f"seed = {scenario.seed}",
        f"assert_every = {scenario.assertEvery}",
        f"fault_injection = {str(scenario.faultInjection).lower()}",
    ]
    if scenario.peakWindow is not None:
        lines.append(f"peak_window = {scenario.peakWindow!r}")
    lines += [
        "",
        "[output]",
        f"csv = {out.csv}",
        f"summary = {out.summary}",
        f"trace = {str(out.trace).lower()}",
        "",
    ]
    return "\n".join(lines)


def _write_trace(path, results) -> None:
    with open(path, "w") as fh:
        fh.write("trial,time,event,counter,bits_read,bits_written\n")
        for res in results:
            for t, kind, counter, br, bw in res.perStepTrace or ():
                fh.write(f"{res.trial},{t!r},{kind},{counter},{br},{bw}\n")


def cmd_run(args) -> int:
    scenario, out = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    if args.trials is not None:
        scenario = replace(scenario, trials=args.trials)
    if args.dump_config:
        sys.stdout.write(dump_config(scenario, out))
        return 0

    report = sim_engine.run_experiment(scenario, jobs=args.jobs)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / out.csv
    sim_engine.write_csv(csv_path, report.results)
    sim_engine.write_summary(outdir / out.summary, report)
    if out.trace:
        _write_trace(outdir / "trace.csv", report.results)
    print(f"trials={len(report.results)} "
          f"unrecoverable_fraction={report.unrecoverableFraction!r} "
          f"csv={csv_path}")
    return 0


def _beta_sweep(arg: str) -> int:
    betas = [float(x) for x in arg.split(",") if x.strip()]
    if not betas:
        raise ConfigError("empty sweep list")
    print(f"{'beta':>10} {'readRatio':>14} {'limit 1/(2b)':>14}")
    rows = []
    for b in betas:
        if not 0.0 < b < 0.5:
            raise ConfigError(f"sweep beta {b} outside (0, 0.5)")
        ratio = (1.0 - b) / bounds.lni(2.0 * b)
        rows.append({"beta": b, "readRatio": ratio, "limit": 1.0 / (2.0 * b)})
        print(f"{b:>10.4g} {ratio:>14.6g} {1.0 / (2.0 * b):>14.6g}")
    print(json.dumps({"sweep": rows}, sort_keys=True))
    return 0


def cmd_bounds(args) -> int:
    if args.sweep_beta:
        return _beta_sweep(args.sweep_beta)
    if args.beta is None:
        raise ConfigError("--beta is required (or use --sweep-beta)")
    sys_p, phase = bounds.phase_from_overhead(args.N, args.clen, args.beta,
                                              vlen=args.vlen, lam=args.lam)
    eps = EpsilonSet(args.eps_c, args.eps_d, args.eps)
    rep = bounds.poisson_bounds(sys_p, phase, eps)

    d = asdict(rep)
    d["gammaTableLen"] = len(d.pop("gammaTable"))
    table = {"N": sys_p.N, "clen": sys_p.clen, "xlen": sys_p.xlen,
             "olen": phase.olen, "F": phase.F, "betaPrime": phase.betaPrime,
             "M": phase.M, **d}
    for name, value in table.items():
        print(f"{name:<22} {value!r}")
    print(json.dumps(sim_engine.json_safe(table), sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liquidsim",
        description="Repair-traffic simulator and bound calculator for "
                    "erasure-coded storage under random node failures.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("--scenario", required=True, help="scenario file path")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    p_run.add_argument("--trials", type=int, default=None,
                       help="override the trial count")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--jobs", type=int, default=1,
                       help="worker processes for trials")
    p_run.add_argument("--dump-config", action="store_true",
                       help="echo the parsed scenario and exit")
    p_run.set_defaults(func=cmd_run)

    p_b = sub.add_parser("bounds", help="evaluate the bound report")
    p_b.add_argument("--N", type=int, default=100)
    p_b.add_argument("--clen", type=int, default=10 ** 6)
    p_b.add_argument("--beta", type=float, default=None)
    p_b.add_argument("--vlen", type=int, default=0)
    p_b.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p_b.add_argument("--eps-c", dest="eps_c", type=float, default=0.1)
    p_b.add_argument("--eps-d", dest="eps_d", type=float, default=0.1)
    p_b.add_argument("--eps", type=float, default=0.1)
    p_b.add_argument("--sweep-beta", default=None,
                     help="comma-separated beta' list; prints the "
                          "read-ratio table instead of a full report")
    p_b.set_defaults(func=cmd_bounds)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, configparser.Error, OSError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except InvariantViolation as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
