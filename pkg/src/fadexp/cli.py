"""Command-line front end: CSV/JSON tables of MMSE, MI, Mellin values,
expansions and power allocations.

snr in dB means snr = 10^(snr_db / 10). Exit codes: 0 success, 2 bad
configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import canonical, expansions, mellin, powalloc, reference
from .constellations import parse_input
from .errors import ConvergenceError, DomainError, FadexpError, OverflowSignal, UnsupportedError
from .fading import parse_fading

__all__ = ["main", "build_parser", "parse_range"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
DEFAULT_FADING = "rayleigh:sigma=sqrt(1/2)"


class ConfigError(FadexpError):
    pass


def parse_range(text: str):
    """``lo:hi:step`` (inclusive), ``lo:hi`` (step 1), a single value, or a comma list."""
    text = str(text).strip()
    try:
        if "," in text:
            vals = [float(v) for v in text.split(",") if v.strip()]
        elif ":" in text:
            parts = [float(v) for v in text.split(":")]
            if len(parts) == 2:
                parts.append(1.0)
            if len(parts) != 3:
                raise ValueError(text)
            lo, hi, step = parts
            if not step > 0:
                raise ConfigError("range step must be positive")
            if hi < lo:
                raise ConfigError("range is empty")
            n = int(math.floor((hi - lo) / step + 1e-9)) + 1
            vals = [lo + i * step for i in range(n)]
        else:
            vals = [float(text)]
    except ValueError as exc:
        raise ConfigError(f"bad range {text!r}") from exc
    if not vals or not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"bad range {text!r}")
    return vals


def _db(x):
    return 10.0 ** (x / 10.0)


def _pmap(fn, items):
    workers = reference.worker_count()
    items = list(items)
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# --- commands ---------------------------------------------------------------------------

def cmd_mmse(args):
    c = parse_input(args.input)
    model = parse_fading(args.fading)
    cv = canonical.curve(c)

    def row(db):
        s = _db(db)
        quad = reference.avg_mmse_quad(model, c, s, tol=args.tol)
        out = {"snr_db": db, "canonical": float(cv.mmse(s)), "average_quad": quad.value}
        if args.samples > 0:
            mc = reference.avg_mmse_mc(model, c, s, args.samples, args.seed, workers=1)
            out.update(average_mc=mc.value, mc_stderr=mc.est_abs_error)
        return out

    return _pmap(row, parse_range(args.snr_db))


def cmd_mi(args):
    c = parse_input(args.input)
    model = parse_fading(args.fading)
    cv = canonical.curve(c)

    def row(db):
        s = _db(db)
        quad = reference.avg_mi_quad(model, c, s, tol=args.tol)
        out = {"snr_db": db, "canonical": float(cv.mutual_information(s)), "average_quad": quad.value}
        if args.samples > 0:
            mc = reference.avg_mi_mc(model, c, s, args.samples, args.seed, workers=1)
            out.update(average_mc=mc.value, mc_stderr=mc.est_abs_error)
        return out

    return _pmap(row, parse_range(args.snr_db))


def cmd_mellin(args):
    c = parse_input(args.input)

    def row(z):
        mv = mellin.mellin_mmse(c, z)
        return {"z": z, "value": mv.value, "method": mv.method.value, "est_rel_error": mv.est_rel_error}

    return _pmap(row, parse_range(args.z))


def cmd_table1(args):
    rows = []
    for name, z, value, method, err, ref, dev in mellin.table1():
        rows.append({"input": name, "z": z, "value": value, "method": method, "est_rel_error": err,
                     "reference": "-" if ref is None else ref, "rel_dev": "-" if dev is None else dev})
    return rows


def _build_expansion(args, c, model, regime=None, quantity=None):
    regime = regime or args.regime
    quantity = quantity or args.quantity
    M = args.terms
    if regime == "low":
        M = M or expansions.DEFAULT_LOW_TERMS
        fn = expansions.low_snr_avg_mmse if quantity == "mmse" else expansions.low_snr_avg_mi
        return fn(model, c, M)
    M = M or expansions.DEFAULT_HIGH_TERMS
    if c.is_discrete:
        fn = expansions.high_snr_avg_mmse_discrete if quantity == "mmse" else expansions.high_snr_avg_mi_discrete
        return fn(model, c, M)
    if quantity != "mmse":
        raise UnsupportedError("high-snr MI expansions are provided for discrete inputs")
    return expansions.high_snr_avg_mmse_continuous(model, c, M)


def cmd_expand(args):
    c = parse_input(args.input)
    model = parse_fading(args.fading)
    e = _build_expansion(args, c, model)
    if args.format == "json":
        return e.to_dict()
    return [{"coeff": t.coeff, "snr_pow": t.snr_pow, "log_pow": t.log_pow} for t in e.terms]


def _compare(args, regime):
    c = parse_input(args.input)
    model = parse_fading(args.fading)
    e = _build_expansion(args, c, model, regime=regime)
    M = e.n_terms
    parts = [e.truncate(k) for k in range(1, M + 1)]

    def row(db):
        s = _db(db)
        if args.quantity == "mmse":
            oracle = reference.avg_mmse_quad(model, c, s, tol=args.tol).value
        else:
            oracle = reference.avg_mi_quad(model, c, s, tol=args.tol).value
        out = {"snr_db": db, "oracle": oracle}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", expansions.ExpansionRangeWarning)
            vals = [expansions.evaluate(p, s) for p in parts]
        for k, v in enumerate(vals, 1):
            out[f"expansion_{k}term"] = v
        for k, v in enumerate(vals, 1):
            out[f"rel_err_{k}term"] = abs(v - oracle) / abs(oracle) if oracle else math.inf
        return out

    return _pmap(row, parse_range(args.snr_db))


def cmd_compare(args):
    return _compare(args, args.regime)


def cmd_lowsnr(args):
    return _compare(args, "low")


def _bank(args):
    if not args.bank:
        raise ConfigError("--bank is required")
    named = {"rayleigh-pair": powalloc.rayleigh_pair_bank, "ricean-pair": powalloc.ricean_pair_bank}
    if args.bank in named:
        return named[args.bank]()
    try:
        return powalloc.load_bank(args.bank)
    except OSError as exc:
        raise ConfigError(f"cannot read bank file: {exc}") from exc


def cmd_powalloc(args):
    bank = _bank(args)
    rows = []
    for db in parse_range(args.snr_db):
        s = _db(db)
        ex = powalloc.exact_allocation(bank, s)
        asym = powalloc.asymptotic_allocation(bank, s)
        row = {"snr_db": db}
        for i, p in enumerate(ex.p, 1):
            row[f"p_exact_{i}"] = p
        for i, p in enumerate(asym.p, 1):
            row[f"p_asym_{i}"] = p
        row.update(lambda_exact=ex.lam, lambda_asym=asym.lam, capacity_exact=ex.capacity,
                   capacity_asym=asym.capacity, kkt_residual=ex.kkt_residual)
        rows.append(row)
    return rows


def cmd_rates(args):
    c = parse_input(args.input)
    model = parse_fading(args.fading)
    rng = parse_range(args.snr_db)
    lo, hi = min(rng), max(rng)
    quantity = "mi_gap" if args.quantity == "mi" else "mmse"
    slope = expansions.decay_rate(model, c, lo, hi, quantity=quantity)
    return [{"quantity": quantity, "snr_db_lo": lo, "snr_db_hi": hi, "rate": slope}]


COMMANDS = {
    "mmse": (cmd_mmse, "canonical and average MMSE (quadrature and Monte Carlo)"),
    "mi": (cmd_mi, "canonical and average mutual information"),
    "mellin": (cmd_mellin, "Mellin transform M[mmse; 1+z] of the canonical MMSE"),
    "table1": (cmd_table1, "Mellin grid for 4-PAM, 16-QAM, 8-PAM, 64-QAM with reference values"),
    "expand": (cmd_expand, "asymptotic expansion terms"),
    "compare": (cmd_compare, "expansions with 1..M terms against the quadrature oracle"),
    "lowsnr": (cmd_lowsnr, "low-snr expansions against the oracle"),
    "powalloc": (cmd_powalloc, "exact and asymptotic power allocation for a channel bank"),
    "rates": (cmd_rates, "fitted high-snr decay rate of the average MMSE or MI gap"),
}


# --- output --------------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def render(result, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(result, indent=2, default=float) + "\n"
    rows = result if isinstance(result, list) else [result]
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0].keys())
    writer.writerow(header)
    for r in rows:
        writer.writerow([_fmt(r.get(k, "")) for k in header])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fadexp",
        description="MMSE, mutual information and their asymptotics over fading channels. "
                    "snr_db values are converted with snr = 10^(snr_db/10).")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--input", default="qpsk", help="qpsk, 16qam, 8-pam, gaussian, infpsk, ... or a JSON file")
        p.add_argument("--fading", default=DEFAULT_FADING,
                       help="e.g. rayleigh:sigma=0.7071, ricean:mu=sqrt(0.9),sigma=1/(2*sqrt(5)), nakagami:mu=0.5,w=1")
        p.add_argument("--bank", default=None, help="bank JSON file, or rayleigh-pair / ricean-pair")
        p.add_argument("--snr-db", default="0:40:5", help="lo:hi:step (inclusive) or comma list, in dB")
        p.add_argument("--z", default="0.5:3:0.5", help="Mellin abscissae, same syntax as --snr-db")
        p.add_argument("--terms", type=int, default=0, help="expansion terms (default 4 high, 3 low)")
        p.add_argument("--regime", choices=("high", "low"), default="high")
        p.add_argument("--quantity", choices=("mmse", "mi"), default="mmse")
        p.add_argument("--samples", type=int, default=100_000, help="Monte-Carlo draws (0 disables)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=1e-10, help="relative quadrature tolerance")
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def _glue_negative_ranges(argv):
    """Let ``--snr-db -30:-10:5`` through argparse, which would read it as a flag."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok in ("--snr-db", "--z"):
            nxt = next(it, None)
            if nxt is not None and (nxt[1:2].isdigit() or nxt[1:2] == ".") and nxt.startswith("-"):
                out.append(f"{tok}={nxt}")
                continue
            out.append(tok)
            if nxt is not None:
                out.append(nxt)
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_glue_negative_ranges(argv))
    fn = COMMANDS[args.command][0]
    if not args.tol > 0:
        return _fail(EXIT_CONFIG, "ConfigError", "--tol must be positive")
    try:
        result = fn(args)
        text = render(result, args.format)
    except (ConvergenceError, OverflowSignal, ArithmeticError) as exc:
        return _fail(EXIT_NUMERIC, type(exc).__name__, str(exc))
    except (ConfigError, DomainError, UnsupportedError, ValueError, OSError) as exc:
        return _fail(EXIT_CONFIG, type(exc).__name__, str(exc))
    if args.out == "-":
        sys.stdout.write(text)
    else:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            return _fail(EXIT_CONFIG, "OSError", str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
