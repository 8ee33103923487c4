"""``simulate``: run protocols from the command line and emit JSON or CSV."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import experiments as ex
from .qcore import InvariantViolation, SimulationError, basis_state, fully_mixed, superpose
from .sequences import SequenceVariant, parse_sequence

FORMATS = ("json", "csv")
SWEEPABLE = {"p": float, "cycles": int, "steps": int}


@dataclass(frozen=True)
class RunConfig:
    protocol: str
    p: float | None = None
    cycles: int | None = None
    steps: int | None = None
    beta_grid: tuple[float, ...] | None = None
    blue: bool = True
    red_schedule: tuple[int, ...] | None = None
    sign: int = 1
    shots: int = 0
    seed: int = ex.DEFAULT_SEED
    format: str = "json"
    output: str | None = None
    path: str = "sequence"
    qnd_input: str = "1111"
    sequence_file: str | None = None
    order: str = "product"

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.shots < 0:
            raise ValueError("shots must be >= 0")
        if self.format not in FORMATS:
            raise ValueError(f"unsupported format {self.format!r}")

    def value(self, name: str):
        v = getattr(self, name)
        return PROTOCOLS[self.protocol].defaults.get(name) if v is None else v


@dataclass(frozen=True)
class Protocol:
    run: Callable[[RunConfig], ex.ExperimentRecord]
    defaults: dict = field(default_factory=dict)
    help: str = ""


def _sampling(cfg: RunConfig) -> dict:
    return {"path": cfg.path, "shots": cfg.shots, "seed": cfg.seed}


def _qnd_state(label: str):
    named = {
        "ghz": superpose((1, "0000"), (1, "1111")),
        "ghz-": superpose((1, "0000"), (-1, "1111")),
        "eigen-": superpose((1, "0011"), (-1, "1100")),
    }
    if label == "mixed":
        return fully_mixed(4)
    if label in named:
        return named[label]
    if re.fullmatch(r"[01]{4}", label):
        return basis_state(label)
    raise ValueError(f"unknown QND input {label!r}; use a 4-bit label, mixed, ghz, ghz- or eigen-")


def _run_custom(cfg: RunConfig) -> ex.ExperimentRecord:
    if not cfg.sequence_file:
        raise ValueError("custom protocol needs --sequence-file")
    text = Path(cfg.sequence_file).read_text("utf-8")
    circ = parse_sequence(text, order=cfg.order).with_variant(
        SequenceVariant(cfg.blue, sign=cfg.sign, p=cfg.value("p"))
    )
    return ex.run_custom(circ, shots=cfg.shots, seed=cfg.seed, source=Path(cfg.sequence_file).name)


def _with_qnd_input(rec: ex.ExperimentRecord, label: str) -> ex.ExperimentRecord:
    rec.metadata["input"] = label
    return rec


PROTOCOLS: dict[str, Protocol] = {
    "bell-cooling": Protocol(
        lambda c: ex.run_bell_cooling(c.value("p"), c.value("cycles"), **_sampling(c)),
        {"p": 1.0, "cycles": 1},
        "two-qubit cooling into Psi-",
    ),
    "ghz-pumping": Protocol(
        lambda c: ex.run_ghz_pumping(SequenceVariant(c.blue, sign=c.sign), **_sampling(c)),
        {},
        "four stabilizer pumping steps from the fully mixed state",
    ),
    "anyon-pushing": Protocol(
        lambda c: ex.run_anyon_pushing(**_sampling(c)),
        {},
        "GHZ pumping steps applied to |0111>",
    ),
    "excited-pumping": Protocol(
        lambda c: ex.run_excited_pumping(**_sampling(c)),
        {},
        "pumping into (|0010> - |1101>)/sqrt2",
    ),
    "repeated-x-pumping": Protocol(
        lambda c: ex.run_repeated_x_pumping(
            c.value("p"), c.value("steps"), c.red_schedule, **_sampling(c)
        ),
        {"p": 0.5, "steps": 5},
        "repeated X1X2X3X4 pumping from |1111>",
    ),
    "four-body": Protocol(
        lambda c: ex.run_four_body(c.value("beta_grid"), path=c.path),
        {"beta_grid": tuple(np.linspace(0, math.pi, 11))},
        "coherent exp(-i beta/2 X1X2X3X4) on |1111>",
    ),
    "qnd": Protocol(
        lambda c: _with_qnd_input(ex.run_qnd(_qnd_state(c.qnd_input), path=c.path).to_record(), c.qnd_input),
        {},
        "QND measurement of X1X2X3X4",
    ),
    "bell-master-equation": Protocol(
        lambda c: ex.run_bell_master_equation(c.value("p"), c.value("cycles")),
        {"p": 0.01, "cycles": 500},
        "small-p Bell cooling next to the matched Lindblad evolution",
    ),
    "custom": Protocol(_run_custom, {"p": 1.0}, "run --sequence-file on a fully mixed register"),
}


# -- output -----------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, tuples to lists, -0.0 to 0.0."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) + 0.0
    return obj


def _validate(data: dict) -> None:
    if set(data) != {"protocol", "metadata", "steps"}:
        raise InvariantViolation(f"record keys {sorted(data)} do not match the output schema")
    allowed = {"label", "expectations", "populations", "fidelity", "counts"}
    for s in data["steps"]:
        if not {"label", "expectations", "populations", "fidelity"} <= set(s) <= allowed:
            raise InvariantViolation(f"step keys {sorted(s)} do not match the output schema")
    ex.ExperimentRecord.from_dict(data).validate()


def _flatten(step: dict) -> dict[str, object]:
    row = {"label": step["label"], "fidelity": step["fidelity"]}
    for k, v in step["expectations"].items():
        row[f"expectation.{k}"] = v
    for k, v in step["populations"].items():
        row[f"population.{k}"] = v
    for basis, counts in (step.get("counts") or {}).items():
        for bits, c in counts.items():
            row[f"counts.{basis}.{bits}"] = c
    return row


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v + 0.0, ".12g")
    return str(v)


def _csv(rows: list[dict]) -> bytes:
    columns = sorted({k for r in rows for k in r})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue().encode("utf-8")


def emit(record: ex.ExperimentRecord, format: str) -> bytes:
    """Serialize a record; the schema is validated first."""
    if format not in FORMATS:
        raise ValueError(f"unsupported format {format!r}")
    data = _clean(record.to_dict())
    _validate(data)
    if format == "json":
        return (json.dumps(data, indent=2, ensure_ascii=False, allow_nan=False) + "\n").encode("utf-8")
    return _csv([_flatten(s) for s in data["steps"]])


def emit_sweep(param: str, values: list, records: list[ex.ExperimentRecord], format: str) -> bytes:
    if format not in FORMATS:
        raise ValueError(f"unsupported format {format!r}")
    datas = [_clean(r.to_dict()) for r in records]
    for d in datas:
        _validate(d)
    if format == "json":
        out = {"sweep": {"parameter": param, "values": _clean(values)}, "records": datas}
        return (json.dumps(out, indent=2, ensure_ascii=False, allow_nan=False) + "\n").encode("utf-8")
    rows = []
    for v, d in zip(values, datas):
        for s in d["steps"]:
            rows.append({f"sweep.{param}": v, **_flatten(s)})
    return _csv(rows)


def record_from_json(raw: bytes | str) -> ex.ExperimentRecord:
    return ex.ExperimentRecord.from_dict(json.loads(raw))


# -- argument parsing -------------------------------------------------------------

_NUMBER = re.compile(r"^([+-]?)(\d*\.?\d*(?:e[+-]?\d+)?)?\s*\*?\s*(pi|π)?(?:/(\d+(?:\.\d*)?))?$")


def parse_number(text: str) -> float:
    """Float with optional pi factor: ``0.3``, ``pi``, ``-pi/2``, ``2pi``, ``0.5*pi``."""
    s = text.strip().lower()
    m = _NUMBER.match(s)
    if not s or not m or not (m[2] or m[3]):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    value = float(m[2]) if m[2] else 1.0
    if m[3]:
        value *= math.pi
    if m[4]:
        value /= float(m[4])
    return -value if m[1] == "-" else value


def parse_grid(text: str) -> tuple[float, ...]:
    """``start:stop:count`` inclusive grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must be start:stop:count, got {text!r}")
    try:
        n = int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid count must be an integer, got {parts[2]!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("grid count must be positive")
    return tuple(float(v) for v in np.linspace(parse_number(parts[0]), parse_number(parts[1]), n))


def parse_sweep(text: str) -> tuple[str, list]:
    name, _, grid = text.partition("=")
    if name not in SWEEPABLE:
        raise argparse.ArgumentTypeError(f"can only sweep {sorted(SWEEPABLE)}, got {name!r}")
    cast = SWEEPABLE[name]
    values = [cast(round(v)) if cast is int else v for v in parse_grid(grid)]
    return name, values


def parse_schedule(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"red schedule must be comma-separated qubits, got {text!r}") from None


def _sign(text: str) -> int:
    if text in ("+1", "1", "+"):
        return 1
    if text in ("-1", "-"):
        return -1
    raise argparse.ArgumentTypeError("sign must be +1 or -1")


def default_seed() -> int:
    env = os.environ.get("SIM_SEED")
    if env is None:
        return ex.DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise ValueError(f"SIM_SEED must be an integer, got {env!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="simulate",
        description="Ideal simulations of dissipative stabilizer pumping in a trapped-ion register.",
    )
    ap.add_argument("protocol", choices=sorted(PROTOCOLS), help="protocol to run")
    ap.add_argument("--p", type=parse_number, help="pump probability")
    ap.add_argument("--cycles", type=int, help="Bell cooling cycles")
    ap.add_argument("--steps", type=int, help="repeated pumping steps")
    ap.add_argument("--beta-grid", type=parse_grid, help="start:stop:count, pi allowed")
    ap.add_argument("--blue", action=argparse.BooleanOptionalAction, default=True,
                    help="keep the optional rotations of the GHZ sequences")
    ap.add_argument("--red-schedule", type=parse_schedule, help="e.g. 4,3,2,1,1")
    ap.add_argument("--sign", type=_sign, default=1, help="+1 or -1 (flips red light shifts)")
    ap.add_argument("--shots", type=int, default=0, help="0 = exact expectations only")
    ap.add_argument("--seed", type=int, help="RNG seed (default: $SIM_SEED or built-in)")
    ap.add_argument("--format", choices=FORMATS, default="json")
    ap.add_argument("--output", help="file to write instead of stdout")
    ap.add_argument("--analytic", action="store_true", help="use closed-form channels")
    ap.add_argument("--input", dest="qnd_input", default="1111",
                    help="QND input: 4-bit label, mixed, ghz, ghz- or eigen-")
    ap.add_argument("--sequence-file", help="pulse listing for the custom protocol")
    ap.add_argument("--order", choices=("product", "listing"), default="product",
                    help="reading order of --sequence-file")
    ap.add_argument("--sweep", type=parse_sweep, help="e.g. p=0.1:1:10")
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        protocol=args.protocol,
        p=args.p,
        cycles=args.cycles,
        steps=args.steps,
        beta_grid=args.beta_grid,
        blue=args.blue,
        red_schedule=args.red_schedule,
        sign=args.sign,
        shots=args.shots,
        seed=default_seed() if args.seed is None else args.seed,
        format=args.format,
        output=args.output,
        path="analytic" if args.analytic else "sequence",
        qnd_input=args.qnd_input,
        sequence_file=args.sequence_file,
        order=args.order,
    )


def run(cfg: RunConfig) -> ex.ExperimentRecord:
    return PROTOCOLS[cfg.protocol].run(cfg)


def run_sweep(cfg: RunConfig, param: str, values: list, workers: int | None = None) -> list[ex.ExperimentRecord]:
    """Runs may finish in any order; results are returned in parameter order."""
    configs = [replace(cfg, **{param: v}) for v in values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, configs))


def _write(data: bytes, output: str | None) -> None:
    if output is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(output).write_bytes(data)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(args)
        if args.sweep:
            param, values = args.sweep
            data = emit_sweep(param, values, run_sweep(cfg, param, values), cfg.format)
        else:
            data = emit(run(cfg), cfg.format)
        _write(data, cfg.output)
    except InvariantViolation as exc:
        print(f"simulate: invariant violation: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, SimulationError) as exc:
        print(f"simulate: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
