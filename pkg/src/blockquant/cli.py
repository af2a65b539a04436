"""``blockquant`` command line.

Every subcommand writes plot-ready CSV (header line, 12 significant digits,
LF newlines) and a JSON run manifest ``<output stem>.manifest.json`` beside
the output.  ``--output -`` streams CSV to stdout and skips the manifest.

Exit status: 0 on success, 2 on usage errors, 1 on runtime failures.
"""
import argparse
from dataclasses import asdict, dataclass, field
import hashlib
import json
import math
from pathlib import Path
import sys
import tempfile

import numpy as np

from . import __version__
from ._accel import resolve_backend
from .bounds import BoundQuery, evaluate
from .extreme import ribbon
from .formats import BlockFormatSpec, Format, alpha_for, quantize_tensor
from .montecarlo import sweep_pair
from .quadrature import QuadratureError
from .rebac import DEFAULT_GRID, rebac_curve
from .tensorio import (
    TensorFormatError,
    WeightTensor,
    analyze_layer_pair,
    load_tensor,
    save_tensor,
    synthetic_layer_pair,
)

EXIT_USAGE = 2
EXIT_RUNTIME = 1


class UsageError(Exception):
    pass


# --- formatting -------------------------------------------------------------

def fmt_value(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return "%.12g" % v


def render_csv(header, rows, trailer=()):
    lines = [",".join(header)]
    lines += [",".join(fmt_value(v) for v in row) for row in rows]
    lines += list(trailer)
    return "\n".join(lines) + "\n"


def to_db(v):
    return 10.0 * math.log10(v) if v > 0 else -math.inf


def parse_int_list(text):
    """``"8,16,32"`` or ``"8,16,...,4096"``; ``...`` continues the last two
    values geometrically when that lands on the end value, else arithmetically."""
    items = [s.strip() for s in text.split(",") if s.strip()]
    out = []
    i = 0
    while i < len(items):
        if items[i] not in ("...", ".."):
            out.append(int(items[i]))
            i += 1
            continue
        if len(out) < 2 or i + 1 >= len(items):
            raise ValueError(f"'...' needs two leading values and an end value in {text!r}")
        a, b, end = out[-2], out[-1], int(items[i + 1])
        ratio = b // a if a > 0 and b > a and b % a == 0 else 0
        fill = []
        if ratio > 1:
            v = b * ratio
            while v <= end:
                fill.append(v)
                v *= ratio
        if not fill or fill[-1] != end:
            step = b - a
            if step <= 0 or (end - b) % step or end <= b:
                raise ValueError(f"cannot extend {a},{b} to {end} in {text!r}")
            fill = list(range(b + step, end + 1, step))
        out.extend(fill)
        i += 2
    if not out:
        raise ValueError("empty list")
    return out


# --- manifest ---------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    argv: list
    params: dict
    seed: int | None
    version: str
    backend: str
    outputs: dict = field(default_factory=dict)
    cwd: str = "."

    def write(self, path):
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path):
        return cls(**json.loads(Path(path).read_text()))


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_path(output):
    p = Path(output)
    return p.with_name(p.stem + ".manifest.json")


class Sink:
    """Collects files written by a subcommand."""

    def __init__(self, output):
        self.output = output
        self.files = []

    @property
    def to_stdout(self):
        return self.output == "-"

    def write_text(self, text, path=None):
        path = self.output if path is None else path
        if path == "-":
            sys.stdout.write(text)
            return
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
        self.files.append(Path(path))

    def add(self, path):
        self.files.append(Path(path))


# --- subcommands --------------------------------------------------------------

def _usage(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_bounds(args, sink):
    queries = [
        _usage(BoundQuery, args.format, args.regime, n, args.precision,
               args.precision2 or args.precision, args.sigma, args.normalized)
        for n in args.block_sizes
    ]
    rows = []
    for q in queries:
        v = evaluate(q)
        rows.append((q.n, to_db(v) if args.db else v))
    sink.write_text(render_csv(["n", "bound_db" if args.db else "bound"], rows))


def cmd_simulate(args, sink):
    p2 = args.precision2 or args.precision
    _usage(alpha_for, args.precision)
    _usage(alpha_for, p2)
    if args.trials < 2:
        raise UsageError("--trials must be at least 2")
    if not args.sigma > 0:
        raise UsageError("--sigma must be positive")
    if min(args.block_sizes) < 1:
        raise UsageError("block sizes must be positive")
    res = sweep_pair(args.block_sizes, [args.precision], args.sigma, args.trials,
                     args.seed, p2=p2)[Format.parse(args.format)]
    rows = []
    for r in res:
        var, se = r.variance, r.std_error
        if args.normalized:
            var, se = var / r.n, se / r.n
        if args.db:
            rows.append((r.n, to_db(var), 10.0 / math.log(10.0) * se / var))
        else:
            rows.append((r.n, var, se))
    header = ["n", "variance_db", "stderr_db"] if args.db else ["n", "variance", "stderr"]
    sink.write_text(render_csv(header, rows))


def cmd_ribbon(args, sink):
    _usage(alpha_for, args.precision)
    if not args.sigma > 0:
        raise UsageError("--sigma must be positive")
    if min(args.block_sizes) < (1 if args.mode == "numeric" else 2):
        raise UsageError(f"block sizes too small for mode {args.mode}")
    rows = ribbon(args.block_sizes, args.precision, args.sigma, args.mode)
    sink.write_text(render_csv(["n", "mean", "sd"], rows))


def cmd_rebac(args, sink):
    _usage(alpha_for, args.precision)
    if min(args.block_sizes) < 2:
        raise UsageError("block sizes must be >= 2")
    if args.mode == "empirical" and args.trials < 2:
        raise UsageError("--trials must be at least 2")
    curve = rebac_curve(args.block_sizes, args.precision, args.sigma, args.mode,
                        args.trials, args.seed)
    if curve.rel_errors is None:
        header, rows = ["n", "rho"], curve.rows
    else:
        header = ["n", "rho", "rel_stderr"]
        rows = [(n, r, e) for (n, r), e in zip(curve.rows, curve.rel_errors)]
    sink.write_text(render_csv(header, rows, [f"# argmin_n,{curve.argmin_n}"]))


_ANALYZE_COLUMNS = ["layer", "n", "p", "samples", "sigma_a", "sigma_b", "var_sbfp",
                    "var_bfp", "rel_stderr", "bound_sbfp", "bound_bfp", "rho"]


def cmd_analyze(args, sink):
    _usage(alpha_for, args.precision)
    if len(args.weights_a) != len(args.weights_b):
        raise UsageError("--weights-a and --weights-b must be given the same number of times")
    if min(args.block_sizes) < 2:
        raise UsageError("block sizes must be >= 2")
    rows = []
    for fa, fb in zip(args.weights_a, args.weights_b):
        a = load_tensor(fa, args.tensor_format)
        b = load_tensor(fb, args.tensor_format)
        for n in args.block_sizes:
            r = analyze_layer_pair(a, b, n, args.precision, center=args.center, layer=a.name)
            vs, vb, bs, bb = r.var_sbfp, r.var_bfp, r.bound_sbfp, r.bound_bfp
            if args.db:
                vs, vb, bs, bb = map(to_db, (vs, vb, bs, bb))
            rows.append((r.layer, r.n, r.p, r.samples, r.sigma_a, r.sigma_b,
                         vs, vb, r.rel_std_error, bs, bb, r.rho))
    header = list(_ANALYZE_COLUMNS)
    if args.db:
        header = [h + "_db" if h.startswith(("var_", "bound_")) else h for h in header]
    sink.write_text(render_csv(header, rows))


def cmd_quantize(args, sink):
    spec = _usage(BlockFormatSpec, Format.parse(args.format), args.block_size, args.precision)
    if sink.to_stdout:
        raise UsageError("quantize writes a tensor file; --output cannot be '-'")
    t = load_tensor(args.input, args.tensor_format)
    q = quantize_tensor(t.values, args.axis, spec)
    recon = q.dequantize()
    save_tensor(WeightTensor(t.name, recon), args.output, args.tensor_format)
    sink.add(args.output)
    x = np.asarray(t.values, dtype=np.float64)
    err = recon - x
    mse = float(np.mean(err * err))
    power = float(np.mean(x * x))
    rows = [
        ("blocks", int(q.scales.size)),
        ("max_abs_error", float(np.max(np.abs(err)))),
        ("mse", mse),
        ("sqnr_db", to_db(power / mse) if mse > 0 else math.inf),
    ]
    summary = render_csv(["metric", "value"], rows)
    sys.stdout.write(summary)
    if args.summary:
        sink.write_text(summary, args.summary)


def cmd_synth(args, sink):
    if args.layers < 1 or args.rows < 1 or args.inner < 1:
        raise UsageError("--layers, --rows and --inner must be positive")
    if not args.sigma > 0:
        raise UsageError("--sigma must be positive")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for layer in range(args.layers):
        a, b = synthetic_layer_pair(layer, args.seed, args.rows, args.inner, args.sigma)
        fa, fb = out / f"layer{layer:02d}_a.bin", out / f"layer{layer:02d}_b.bin"
        save_tensor(a, fa)
        save_tensor(b, fb)
        sink.add(fa)
        sink.add(fb)
        rows.append((layer, fa.name, fb.name))
    sink.write_text(render_csv(["layer", "weights_a", "weights_b"], rows))


# --- parser -------------------------------------------------------------------

def _int_list(text):
    try:
        return parse_int_list(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser():
    parser = argparse.ArgumentParser(
        prog="blockquant",
        description="Block floating-point quantization error analysis.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_output):
        p.add_argument("-o", "--output", default=default_output,
                       help="output path ('-' for stdout, no manifest)")
        p.add_argument("--db", action="store_true", help="report variances as 10*log10")

    fmt = dict(choices=[f.value for f in Format], required=True)

    p = sub.add_parser("quantize", help="tensor codec round trip with error summary")
    p.add_argument("--format", **fmt)
    p.add_argument("--precision", type=int, required=True)
    p.add_argument("--block-size", type=int, required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="dequantized tensor path")
    p.add_argument("--axis", choices=["cols", "rows"], default="cols")
    p.add_argument("--tensor-format", choices=["rawbin", "csv"])
    p.add_argument("--summary", help="also write the error summary CSV here")
    p.set_defaults(func=cmd_quantize, db=False)

    p = sub.add_parser("bounds", help="variance bounds over block sizes")
    p.add_argument("--regime", choices=["asymptotic", "highdim"], required=True)
    p.add_argument("--format", **fmt)
    p.add_argument("--precision", type=int, required=True)
    p.add_argument("--precision2", type=int)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--block-sizes", type=_int_list, required=True)
    p.add_argument("--normalized", action="store_true")
    common(p, "bounds.csv")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="Monte Carlo error variance")
    p.add_argument("--format", **fmt)
    p.add_argument("--precision", type=int, required=True)
    p.add_argument("--precision2", type=int)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--block-sizes", type=_int_list, required=True)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalized", action="store_true")
    common(p, "simulate.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ribbon", help="mean and sd of the block max over alpha")
    p.add_argument("--precision", type=int, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--block-sizes", type=_int_list, required=True)
    p.add_argument("--mode", choices=["numeric", "asymptotic"], default="numeric")
    common(p, "ribbon.csv")
    p.set_defaults(func=cmd_ribbon)

    p = sub.add_parser("rebac", help="BFP/SBFP variance ratio and best block size")
    p.add_argument("--precision", type=int, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--block-sizes", type=_int_list, default=list(DEFAULT_GRID))
    p.add_argument("--mode", choices=["theoretical", "empirical"], default="theoretical")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    common(p, "rebac.csv")
    p.set_defaults(func=cmd_rebac)

    p = sub.add_parser("analyze", help="per-layer errors on weight tensor pairs")
    p.add_argument("--weights-a", action="append", required=True)
    p.add_argument("--weights-b", action="append", required=True)
    p.add_argument("--precision", type=int, required=True)
    p.add_argument("--block-sizes", type=_int_list, required=True)
    p.add_argument("--center", action="store_true")
    p.add_argument("--tensor-format", choices=["rawbin", "csv"])
    common(p, "analyze.csv")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="write synthetic Gaussian layer pairs (rawbin)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--layers", type=int, default=48)
    p.add_argument("--rows", type=int, default=1600)
    p.add_argument("--inner", type=int, default=6400)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default=None, help="index CSV (default: OUT_DIR/index.csv)")
    p.set_defaults(func=cmd_synth, db=False)

    p = sub.add_parser("replay", help="re-run a manifest and compare output checksums")
    p.add_argument("manifest")
    p.set_defaults(func=None)
    return parser


_SKIP_PARAMS = {"func", "output"}


def _execute(args, argv):
    if args.command == "synth" and args.output is None:
        args.output = str(Path(args.out_dir) / "index.csv")
    sink = Sink(args.output)
    args.func(args, sink)
    if sink.to_stdout or not sink.files:
        return sink
    params = {k: v for k, v in vars(args).items() if k not in _SKIP_PARAMS}
    manifest = RunManifest(
        command=args.command,
        argv=list(argv),
        params=params,
        seed=getattr(args, "seed", None),
        version=__version__,
        backend=resolve_backend(),
        outputs={f.name: sha256_file(f) for f in sink.files},
        cwd=str(Path.cwd()),
    )
    manifest.write(manifest_path(args.output))
    return sink


def replay(manifest_file):
    """Re-run ``manifest_file`` in a scratch directory; returns mismatched outputs."""
    m = RunManifest.read(manifest_file)
    args = build_parser().parse_args(m.argv)
    base = Path(m.cwd)
    for key in ("weights_a", "weights_b"):
        if getattr(args, key, None):
            setattr(args, key, [str(base / f) for f in getattr(args, key)])
    if getattr(args, "input", None):
        args.input = str(base / args.input)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        if args.command == "synth":
            index = Path(args.output).name if args.output else "index.csv"
            args.out_dir, args.output = str(tmp), str(tmp / index)
        else:
            args.output = str(tmp / Path(args.output).name)
        if getattr(args, "summary", None):
            args.summary = str(tmp / Path(args.summary).name)
        sink = _execute(args, m.argv)
        got = {f.name: sha256_file(f) for f in sink.files}
    return sorted(k for k in m.outputs if got.get(k) != m.outputs[k])


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if args.command == "replay":
            bad = replay(args.manifest)
            if bad:
                print("checksum mismatch: " + ", ".join(bad), file=sys.stderr)
                return EXIT_RUNTIME
            print("all outputs reproduced")
            return 0
        _execute(args, argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"blockquant {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TensorFormatError, OSError, ValueError, QuadratureError) as exc:
        print(f"blockquant {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
