"""Command-line interface: ``emlb run | sweep | analyze | dispersion | check``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, experiments, models
from .errors import BlowUpError, ConfigError, EMLBError
from .fields import Grid, PhysicalParams, curl, div, from_spectral, grad, to_spectral
from .integrators import filter_bank, run
from .io import emit_report, load_manifest, load_series, write_json, write_meta, write_series
from .littlewood_paley import (
    BesovSpec,
    CheminLernerSpec,
    bernstein_verify,
    chemin_lerner_norm,
    decompose,
    norm_report,
    parse_exponent,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_CHECK = 3

log = logging.getLogger("emlb")


class _Parser(argparse.ArgumentParser):
    """Argument parser that exits with the configuration-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--threads", type=int, default=None, help="FFT threads (default: $EMLB_THREADS or 1)")
    p.add_argument("--output", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="random seed (unsigned 64-bit)")
    p.add_argument("--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="emlb", description="Pseudo-spectral Euler-Maxwell simulator and Besov diagnostics")
    parser.add_argument("--version", action="version", version=f"emlb {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("run", parents=[common], help="integrate a single configuration")
    p.add_argument("config")
    p = sub.add_parser("sweep", parents=[common], help="singular-limit ladder sweep")
    p.add_argument("config")
    p = sub.add_parser("analyze", parents=[common], help="Besov / Chemin-Lerner norms of stored snapshots")
    p.add_argument("directory")
    p.add_argument("--norm", required=True, help="s,p,r (p and r may be 'inf')")
    p.add_argument("--chemin-lerner", dest="chemin_lerner", default=None, help="time exponent rho")
    p = sub.add_parser("dispersion", parents=[common], help="measured vs symbol linear rates")
    p.add_argument("config")
    sub.add_parser("check", parents=[common], help="built-in self-test")
    return parser


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get("EMLB_THREADS")
        try:
            n = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"EMLB_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise ConfigError("--threads must be >= 1")
    return n


def _seed(args, manifest_seed: int) -> int:
    seed = manifest_seed if args.seed is None else args.seed
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    return seed


def _out_dir(args, manifest, default: str) -> Path:
    return Path(args.output or (manifest.output if manifest is not None and manifest.output else default))


def cmd_run(args) -> int:
    threads = _threads(args)
    manifest = load_manifest(args.config)
    seed = _seed(args, manifest.seed)
    cfg = manifest.run_config(workers=threads)
    out = _out_dir(args, manifest, "emlb_run")
    try:
        series = run(cfg, seed=seed)
    except BlowUpError as exc:
        if exc.series is not None and exc.series.snapshots:
            write_series(exc.series, out, cfg.grid, cfg.params)
        print(f"blow-up: {exc} (worst mode {exc.worst_mode})", file=sys.stderr)
        return EXIT_NUMERICAL
    write_series(series, out, cfg.grid, cfg.params)
    mon = experiments.constraint_monitor(series)
    write_json(out / "constraints.json", mon)
    write_json(out / "config.json", manifest.to_dict())
    write_meta(out, manifest.to_dict(), seed, threads)
    print(f"run complete: {len(series.times)} snapshots, {series.meta['steps']} steps -> {out}")
    print(f"max gauss residual {mon['max_gauss']:.3e}, max div B {mon['max_divB']:.3e}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    threads = _threads(args)
    manifest = load_manifest(args.config)
    seed = _seed(args, manifest.seed)
    if manifest.sweep is None:
        raise ConfigError("sweep manifest needs a 'sweep' section {kind, ladder}")
    sw = manifest.sweep
    kind = experiments.LimitKind(sw.get("kind", "relaxation"), sw.get("ladder", [0.5, 0.25, 0.125, 0.0625]))
    base = manifest.run_config(workers=threads)
    report = experiments.limit_sweep(
        kind,
        base,
        seed=seed,
        n_samples=int(sw.get("n_samples", 20)),
        delta=float(sw.get("delta", 0.5)),
        workers=threads,
    )
    out = _out_dir(args, manifest, "emlb_sweep")
    emit_report(report, out, name="limit_report", manifest=manifest.to_dict(), seed=seed, threads=threads)
    for rec in report.records:
        print(f"param={rec['param']:<10g} err_n={rec['err_n']:.3e} err_u={rec['err_u']:.3e} "
              f"err_gradB={rec['err_gradB']:.3e} err_weightedE={rec['err_weightedE']:.3e}")
    print("fitted order: " + ", ".join(f"{k}={v:.3f}" for k, v in report.orders.items()))
    return EXIT_OK


def _parse_norm(text: str) -> BesovSpec:
    parts = [t.strip() for t in text.split(",")]
    if len(parts) != 3:
        raise ConfigError("--norm expects three comma-separated values s,p,r")
    try:
        return BesovSpec(float(parts[0]), parse_exponent(parts[1]), parse_exponent(parts[2]))
    except ValueError as exc:
        raise ConfigError(f"invalid --norm {text!r}: {exc}") from None


def cmd_analyze(args) -> int:
    threads = _threads(args)
    spec = _parse_norm(args.norm)
    grid, params, times, states = load_series(args.directory, workers=threads)
    bank = filter_bank(grid)
    bbar = np.asarray(params.b_bar).reshape((3,) + (1,) * grid.dim)

    def fields_of(st):
        return {"n": st.n - params.n_bar, "u": st.u, "E": st.e_field, "B": st.b_field - bbar}

    result = {"spec": spec.to_dict(), "times": times}
    if args.chemin_lerner is None:
        result["snapshots"] = [
            {"time": t, "fields": {k: norm_report(v, spec, bank) for k, v in fields_of(st).items()}}
            for t, st in zip(times, states)
        ]
    else:
        rho = parse_exponent(args.chemin_lerner)
        cl = CheminLernerSpec(rho, spec)
        per = {}
        for name in ("n", "u", "E", "B"):
            per[name] = chemin_lerner_norm((times, [fields_of(st)[name] for st in states]), cl, bank)
        result["chemin_lerner"] = {"spec": cl.to_dict(), "fields": per, "total": sum(per.values())}
    out = Path(args.output) if args.output else None
    if out is not None:
        write_json(out / "analysis.json", result)
        write_meta(out, {"analyze": str(args.directory), "norm": args.norm, "chemin_lerner": args.chemin_lerner}, args.seed or 0, threads)
    if args.chemin_lerner is None:
        for snap in result["snapshots"]:
            vals = " ".join(f"{k}={v['value']:.6e}" for k, v in snap["fields"].items())
            print(f"t={snap['time']:.6g} {vals}")
    else:
        vals = " ".join(f"{k}={v:.6e}" for k, v in result["chemin_lerner"]["fields"].items())
        print(f"chemin-lerner rho={args.chemin_lerner}: {vals}")
    return EXIT_OK


def cmd_dispersion(args) -> int:
    threads = _threads(args)
    manifest = load_manifest(args.config)
    seed = _seed(args, manifest.seed)
    cfg = manifest.run_config(workers=threads)
    spec = manifest.dispersion or {}
    modes = spec.get("modes", [[1] + [0] * (cfg.grid.dim - 1)])
    results = experiments.dispersion_test(
        cfg.params,
        modes,
        grid=cfg.grid,
        amplitude=float(spec.get("amplitude", 1e-7)),
        n_samples=int(spec.get("n_samples", 8)),
        seed=seed,
    )
    out = _out_dir(args, manifest, "emlb_dispersion")
    emit_report({"modes": results}, out, name="dispersion", manifest=manifest.to_dict(), seed=seed, threads=threads)
    worst = 0.0
    for r in results:
        worst = max(worst, r["max_rel_err"])
        flag = " (degenerate fit)" if r["degenerate_fit"] else ""
        print(f"k={r['k']}: max_rel_err={r['max_rel_err']:.3e}{flag}")
    print(f"worst relative error {worst:.3e}")
    return EXIT_OK


def self_check(threads: int = 1) -> list:
    """Quick internal consistency tests; returns ``(name, passed, detail)`` triples."""
    results = []
    rng = np.random.default_rng(12345)

    def record(name, value, limit):
        results.append((name, bool(value <= limit), f"{value:.3e} <= {limit:.0e}"))

    g = Grid(2, 128, workers=threads)
    bank = filter_bank(g)
    record("partition of unity", bank.partition_residual(), 1e-12)

    g64 = Grid(2, 64, workers=threads)
    bank64 = filter_bank(g64)
    f = rng.standard_normal(g64.shape)
    rt = from_spectral(g64, to_spectral(g64, f))
    record("transform round trip", float(np.max(np.abs(rt - f)) / np.max(np.abs(f))), 1e-13)
    fh = to_spectral(g64, f)
    parseval = abs(g64.cell_volume * float(np.sum(f * f)) - g64.volume * float(np.sum(g64.hermitian_weights * np.abs(fh) ** 2)))
    record("Parseval identity", parseval / (g64.cell_volume * float(np.sum(f * f))), 1e-12)
    v = rng.standard_normal((3,) + g64.shape)
    v /= np.max(np.abs(v))
    record("div(curl v) = 0", float(np.max(np.abs(div(g64, curl(g64, v))))), 1e-12)
    s = rng.standard_normal(g64.shape)
    s /= np.max(np.abs(s))
    record("curl(grad f) = 0", float(np.max(np.abs(curl(g64, grad(g64, s))))), 1e-12)

    band = from_spectral(g64, np.where(g64.dealias_mask, fh, 0.0))
    rec = decompose(band, bank64).reconstruct()
    record("LP reconstruction", float(np.max(np.abs(rec - band)) / np.max(np.abs(band))), 1e-12)

    x = g64.coordinates()
    worst = 0.0
    for q in range(0, 4):
        single = np.broadcast_to(np.cos(2 ** q * x[0]), g64.shape)
        worst = max(worst, abs(bernstein_verify(single, q, bank64)["ratio"] - 1.0))
    record("Bernstein single mode", worst, 1e-12)
    ratios = []
    for q in range(0, bank64.q_max + 1):
        rf = from_spectral(g64, bank64.symbol(q) * to_spectral(g64, rng.standard_normal(g64.shape)))
        ratios.append(bernstein_verify(rf, q, bank64)["ratio"])
    outside = max(max(0.0, 0.75 - min(ratios)), max(0.0, max(ratios) - 8.0 / 3.0))
    record("Bernstein bracket [3/4, 8/3]", outside, 0.0)

    params = PhysicalParams()
    xi = rng.standard_normal((100, 2))
    xi /= np.linalg.norm(xi, axis=1, keepdims=True)
    record("Kawashima identity", max(models.kawashima_identity_residual(z, params) for z in xi), 1e-13)
    k_skew = max(float(np.max(np.abs(models.kawashima_K(z) + models.kawashima_K(z).T))) for z in xi)
    record("Kawashima skew-symmetry", k_skew, 0.0)
    eig = models.symbol_eigenvalues((1.0, 0.0, 0.0), params)
    record("symbol dissipativity", max(0.0, float(np.max(eig.real))), 1e-12)
    return results


def cmd_check(args) -> int:
    threads = _threads(args)
    results = self_check(threads)
    failed = 0
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name} ({detail})")
        failed += not ok
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "analyze": cmd_analyze,
    "dispersion": cmd_dispersion,
    "check": cmd_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (EMLBError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
