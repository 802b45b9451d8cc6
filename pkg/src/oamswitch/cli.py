"""Command-line runner: fringe scans, estimation campaigns, scaling, traces.

Every subcommand loads one JSON experiment file (``--config``) or a packaged
preset (``--preset``), runs the corresponding simulation, and writes results
into the output directory in the formats the config requests.  CSV carries
full-precision floats; JSON mirrors the numbers plus a hash of the physics
configuration, so identical settings always produce byte-identical files
regardless of worker count.  ``--check`` additionally gates the run on the
documented result thresholds and exits with status 4 when one is violated.

Exit codes: 0 success, 2 configuration problem, 3 numerical failure,
4 threshold violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ExperimentConfig,
    config_hash,
    load_preset,
    preset_names,
    resolve_output_dir,
)
from .errors import ConfigError, ToolkitError
from .hilbert import default_window
from .metrology import (
    fisher_report,
    multipass_generator_sd,
    qfi_from_sd,
    resource_count,
    switch_generator_sd,
)
from .montecarlo import Calibration, fit_fringe, run_campaign, scaling_study
from .switch import (
    SwitchParams,
    analytic_reference_states,
    fringe_probability,
    run_roundtrip,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CHECK = 4

TRACE_FIDELITY_FLOOR = 1.0 - 1e-9
FRINGE_FREQ_TOLERANCE = 1e-3  # relative, on noisy sweeps
SCALING_SLOPE_TOLERANCE = 0.05
GENERATOR_TOLERANCE = 1e-4


def _g17(x) -> str:
    return "" if x is None else f"{float(x):.17g}"


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _metadata(cfg: ExperimentConfig, command: str) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config_hash": config_hash(cfg),
        "config": cfg.physics_dict(),
    }


def _rad_deg_arcsec(rad: float) -> dict:
    return {
        "rad": float(rad),
        "deg": float(np.degrees(rad)),
        "arcsec": float(np.degrees(rad) * 3600.0),
    }


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "oamswitch"
    return plt


def _save_svg(fig, path: Path) -> None:
    # suppress the creation timestamp so reruns are comparable
    fig.savefig(path, format="svg", metadata={"Date": None})


def _apply_efficiency(p: float, efficiency: float) -> float:
    if efficiency == 1.0:
        return p
    return efficiency * p / (efficiency * p + (1.0 - p))


# ---------------------------------------------------------------------------
# subcommands


def cmd_fringe(cfg: ExperimentConfig, outdir: Path, check: bool) -> int:
    """Scan the fringe, sample detection noise per point, fit the model.

    Rotation-stage jitter and calibration drift are estimation-campaign
    nuisances and do not enter a sweep; only contrast, detector imbalance and
    shot noise shape the sampled points.
    """
    thetas = cfg.sweep_angles()
    train = cfg.train()
    noise = cfg.noise_model()
    probe = cfg.probe_dist()
    extent = max(abs(int(k)) for k in probe)
    window = default_window(cfg.l, extent=extent)
    base = SwitchParams(m=cfg.m, l=cfg.l, theta=0.0, phi0=cfg.resolved_phi0(0.0))

    p_ideal = np.array(
        [
            fringe_probability(base.with_theta(th), train, probe, window)
            for th in thetas
        ]
    )
    repeats = cfg.trials
    means = np.empty_like(p_ideal)
    sems = np.empty_like(p_ideal)
    totals = np.empty(len(thetas))
    for i, p in enumerate(p_ideal):
        center = 0.5 + noise.visibility * (float(p) - 0.5)
        center = _apply_efficiency(center, noise.efficiency)
        rng = np.random.default_rng([cfg.seed, i])
        counts = rng.binomial(cfg.nu, center, size=repeats)
        frac = counts / cfg.nu
        means[i] = frac.mean()
        sems[i] = frac.std(ddof=1) / np.sqrt(repeats) if repeats > 1 else 0.0
        totals[i] = counts.sum()

    fit = fit_fringe(thetas, totals, repeats * cfg.nu, base)
    curve = fit.model(thetas)
    nominal = float(base.fringe_rate)
    rel_dev = abs(fit.freq - nominal) / nominal

    if "csv" in cfg.output.formats:
        rows = [
            [_g17(th), _g17(pi), _g17(mu), _g17(se), _g17(fc)]
            for th, pi, mu, se, fc in zip(thetas, p_ideal, means, sems, curve)
        ]
        _write_csv(
            outdir / "fringe.csv",
            ["theta_rad", "p_ideal", "p_noisy_mean", "p_noisy_sem", "fit_curve"],
            rows,
        )
    if "json" in cfg.output.formats:
        payload = _metadata(cfg, "fringe")
        payload.update(
            {
                "points": len(thetas),
                "nu_per_point": int(repeats) * int(cfg.nu),
                "nominal_frequency": nominal,
                "fit": fit.to_dict(),
                "frequency_rel_dev": float(rel_dev),
            }
        )
        _write_json(outdir / "fringe.json", payload)
    if "svg" in cfg.output.formats:
        plt = _pyplot()
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        ax.errorbar(thetas, means, yerr=sems, fmt=".", ms=3, label="sampled")
        ax.plot(thetas, curve, "-", lw=1, label="fit")
        ax.plot(thetas, p_ideal, "--", lw=0.8, label="noiseless")
        ax.set_xlabel("rotation angle (rad)")
        ax.set_ylabel("vertical-port probability")
        ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        _save_svg(fig, outdir / "fringe.svg")
        plt.close(fig)

    print(
        f"fringe m={cfg.m} l={cfg.l}: fitted frequency {fit.freq:.6g} "
        f"(nominal {nominal:.6g}, relative deviation {rel_dev:.3g}), "
        f"visibility {fit.visibility:.4f}"
    )
    if check and rel_dev > FRINGE_FREQ_TOLERANCE:
        print(
            f"check failed: fitted frequency deviates {rel_dev:.3g} > "
            f"{FRINGE_FREQ_TOLERANCE:g} relative",
            file=sys.stderr,
        )
        return EXIT_CHECK
    return EXIT_OK


def cmd_estimate(cfg: ExperimentConfig, outdir: Path, check: bool) -> int:
    """Run one estimation campaign at the configured true angle."""
    params = cfg.params()
    noise = cfg.noise_model()
    cal = Calibration(phi0=params.phi0, visibility=noise.visibility, theta_ref=params.theta)
    report = run_campaign(
        params,
        cfg.nu,
        cfg.trials,
        noise=noise,
        calibration=cal,
        seed=cfg.seed,
        workers=cfg.workers,
    )

    if "csv" in cfg.output.formats:
        rows = [
            [
                str(r.index),
                _g17(r.jitter),
                _g17(r.drift),
                _g17(r.p_true),
                str(r.count),
                _g17(r.p_hat),
                _g17(r.theta_hat),
                _g17(r.error),
            ]
            for r in report.results
        ]
        _write_csv(
            outdir / "estimate.csv",
            [
                "trial",
                "jitter_rad",
                "drift_rad",
                "p_true",
                "count",
                "p_hat",
                "theta_hat_rad",
                "error_rad",
            ],
            rows,
        )
    if "json" in cfg.output.formats:
        payload = _metadata(cfg, "estimate")
        payload.update(report.to_dict())
        payload["theta_true_units"] = _rad_deg_arcsec(params.theta)
        if report.rmse is not None:
            payload["rmse_units"] = _rad_deg_arcsec(report.rmse)
            payload["crb_units"] = _rad_deg_arcsec(report.crb_rad)
        _write_json(outdir / "estimate.json", payload)

    tt = _rad_deg_arcsec(params.theta)
    print(f"operating point    m={cfg.m} l={cfg.l} 4ml={params.fringe_rate}")
    print(
        f"theta_true         {tt['rad']:.6g} rad | {tt['deg']:.6g} deg | "
        f"{tt['arcsec']:.6g} arcsec"
    )
    print(f"probes / trials    {cfg.nu} / {cfg.trials}")
    if report.insufficient_trials:
        print("rmse               undefined (needs at least 2 trials)")
        if report.theta_mean is not None:
            print(f"theta_hat          {report.theta_mean:.6g} rad (single trial)")
        return EXIT_OK
    ra = _rad_deg_arcsec(report.rmse)
    ca = _rad_deg_arcsec(report.crb_rad)
    print(f"theta_hat mean     {report.theta_mean:.6g} rad")
    print(f"rmse               {ra['rad']:.6g} rad | {ra['arcsec']:.6g} arcsec")
    print(f"rmse * sqrt(nu)    {report.rmse_sqrt_nu:.6g} rad")
    print(f"crb                {ca['rad']:.6g} rad | {ca['arcsec']:.6g} arcsec")
    print(f"gap                {report.gap:.4g}")
    print(
        f"enhancement        {report.ideal_enhancement:.6g} ideal | "
        f"{report.practical_enhancement:.6g} practical"
    )
    yn = "yes" if report.hup_satisfied else "NO"
    print(f"hup product        {report.hup_product:.4g} (>= 0.49: {yn})")

    if check and not report.hup_satisfied:
        print(
            f"check failed: uncertainty product {report.hup_product:.4g} fell below 0.49",
            file=sys.stderr,
        )
        return EXIT_CHECK
    return EXIT_OK


def cmd_scaling(cfg: ExperimentConfig, outdir: Path, check: bool) -> int:
    """Campaigns over the configured (m, l) ladder plus the log-log regression."""
    if not cfg.pairs:
        raise ConfigError("pairs: missing (the scaling command needs an [m, l] ladder)")
    theta = cfg.theta_true.radians if cfg.theta_true is not None else 0.0
    report = scaling_study(
        cfg.pairs,
        cfg.nu,
        cfg.trials,
        theta=theta,
        noise_for_pair=lambda m, l: cfg.noise.resolve(m, l, cfg.nu),
        seed=cfg.seed,
        workers=cfg.workers,
    )

    if "csv" in cfg.output.formats:
        rows = [
            [
                _g17(4 * p.ml),
                _g17(p.rmse_sqrt_nu),
                _g17(1.0 / (4.0 * p.ml)),
                _g17(p.gap),
            ]
            for p in report.points
        ]
        _write_csv(outdir / "scaling.csv", ["fourml", "rmse_norm", "crb", "gap"], rows)
    if "json" in cfg.output.formats:
        payload = _metadata(cfg, "scaling")
        payload.update(report.to_dict())
        payload["expected_slope"] = -1.0
        _write_json(outdir / "scaling.json", payload)
    if "svg" in cfg.output.formats:
        plt = _pyplot()
        fig, ax = plt.subplots(figsize=(5.0, 4.0))
        fourml = np.array([4 * p.ml for p in report.points], dtype=float)
        norm = np.array([p.rmse_sqrt_nu for p in report.points])
        ax.loglog(fourml, norm, "ko", ms=4, label="campaigns")
        xs = np.array([fourml.min(), fourml.max()])
        ax.loglog(
            xs,
            np.exp(report.intercept) * (xs / 4.0) ** report.slope,
            "-",
            lw=1,
            label=f"fit, slope {report.slope:.3f}",
        )
        ax.loglog(xs, 1.0 / xs, "r--", lw=1, label="sampling floor")
        ax.set_xlabel("fringe rate 4ml")
        ax.set_ylabel("rmse * sqrt(nu) (rad)")
        ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        _save_svg(fig, outdir / "scaling.svg")
        plt.close(fig)

    print(
        f"scaling over {len(report.points)} settings: slope {report.slope:.4f} "
        f"(expected -1), intercept {report.intercept:.4f}"
    )
    if check and abs(report.slope + 1.0) > SCALING_SLOPE_TOLERANCE:
        print(
            f"check failed: slope {report.slope:.4f} deviates from -1 by more than "
            f"{SCALING_SLOPE_TOLERANCE}",
            file=sys.stderr,
        )
        return EXIT_CHECK
    return EXIT_OK


def cmd_trace(cfg: ExperimentConfig, outdir: Path, check: bool) -> int:
    """Run the pipeline stage by stage and gate fidelity against closed forms.

    The fidelity floor is always enforced; ``--check`` adds nothing here.
    """
    params = cfg.params()
    train = cfg.train()
    probe = cfg.probe_dist()
    extent = max(abs(int(k)) for k in probe)
    window = default_window(cfg.l, extent=extent)
    trace = run_roundtrip(params, train, input_dist=probe, window=window)
    refs = analytic_reference_states(
        params, window, input_dist=probe, compensation_on=train.compensation_on
    )
    fids = trace.fidelities(refs)
    ordered = [(name, float(fids[name])) for name in trace.names if name in fids]
    min_fid = min(f for _, f in ordered)
    flagged = [name for name, f in ordered if f < TRACE_FIDELITY_FLOOR]

    if "json" in cfg.output.formats:
        payload = _metadata(cfg, "trace")
        payload.update(
            {
                "stages": [{"name": n, "fidelity": f} for n, f in ordered],
                "threshold": TRACE_FIDELITY_FLOOR,
                "min_fidelity": float(min_fid),
                "flagged": flagged,
            }
        )
        _write_json(outdir / "trace.json", payload)

    for name, f in ordered:
        marker = "" if f >= TRACE_FIDELITY_FLOOR else "   <- below threshold"
        print(f"{name:14s} fidelity {f:.12f}{marker}")
    if flagged:
        print(
            f"trace check failed: {len(flagged)} stage(s) below {TRACE_FIDELITY_FLOOR}: "
            f"{', '.join(flagged)}",
            file=sys.stderr,
        )
        return EXIT_CHECK
    return EXIT_OK


def cmd_qfi(cfg: ExperimentConfig, outdir: Path, check: bool) -> int:
    """Generator spreads and information budget for the configured probe."""
    probe = cfg.probe_dist()
    sw = switch_generator_sd(cfg.m, cfg.l, probe_dist=probe)
    mp = multipass_generator_sd(cfg.m, probe_dist=probe)
    noise = cfg.noise_model()
    fisher = fisher_report(cfg.m, cfg.l, cfg.nu, visibility=noise.visibility)

    multipass = mp.to_dict()
    if mp.oam_sd > 0.0:
        multipass["note"] = (
            "this spread lives in coherences between distant OAM orders; reading "
            "it out needs a mode-resolving interferometric measurement, not the "
            "two-port intensity detection used by the switch readout"
        )

    payload = _metadata(cfg, "qfi")
    payload.update(
        {
            "switch": sw.to_dict(),
            "multipass": multipass,
            "fisher": fisher.to_dict(),
            "qfi": {
                "switch": float(qfi_from_sd(sw.exact_sd)),
                "multipass": float(qfi_from_sd(mp.exact_sd)),
            },
            "resources": resource_count(cfg.m, cfg.l),
        }
    )

    campaign = outdir / "estimate.json"
    hup = None
    if campaign.is_file():
        data = json.loads(campaign.read_text())
        if data.get("hup_product") is not None:
            hup = {
                "product": data["hup_product"],
                "satisfied": data["hup_satisfied"],
                "source": campaign.name,
            }
    payload["hup"] = hup

    if "json" in cfg.output.formats:
        _write_json(outdir / "qfi.json", payload)

    print(
        f"switch spread      {sw.numeric_sd:.6g} numeric | {sw.exact_sd:.6g} exact "
        f"| {sw.triangle_sd:.6g} budget"
    )
    print(f"baseline spread    {mp.numeric_sd:.6g} numeric | {mp.exact_sd:.6g} exact")
    print(f"per-photon fi      {fisher.fi_single:.6g} (visibility {fisher.visibility:g})")
    print(f"crb                {fisher.crb_rad:.6g} rad for nu={cfg.nu}")
    print(f"elements           {payload['resources']}")
    if hup is not None:
        yn = "yes" if hup["satisfied"] else "NO"
        print(f"hup product        {hup['product']:.4g} (>= 0.49: {yn}, from {hup['source']})")

    if check:
        problems = []
        if sw.exact_rel_dev > GENERATOR_TOLERANCE:
            problems.append(
                f"switch spread deviates {sw.exact_rel_dev:.3g} from its closed form"
            )
        if mp.exact_rel_dev > GENERATOR_TOLERANCE:
            problems.append(
                f"baseline spread deviates {mp.exact_rel_dev:.3g} from its closed form"
            )
        if hup is not None and not hup["satisfied"]:
            problems.append("stored campaign violates the uncertainty floor")
        if problems:
            for p in problems:
                print(f"check failed: {p}", file=sys.stderr)
            return EXIT_CHECK
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument surface


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.preset:
        cfg = load_preset(args.preset)
    else:
        cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be nonnegative, got {args.seed}")
        cfg = replace(cfg, seed=args.seed)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oamswitch",
        description="Rotation-sensor simulator: fringes, estimation campaigns, bounds.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="path to a JSON experiment file")
    src.add_argument("--preset", help="name of a packaged configuration (see 'presets')")
    common.add_argument("--out", help="output directory (overrides config and environment)")
    common.add_argument("--seed", type=int, help="override the campaign seed")
    common.add_argument("--workers", type=int, help="override the worker count")
    common.add_argument(
        "--check",
        action="store_true",
        help="verify documented result thresholds; exit 4 on violation",
    )

    handlers = {
        "fringe": (cmd_fringe, "scan the fringe, sample it, fit the model"),
        "estimate": (cmd_estimate, "run an estimation campaign at a fixed angle"),
        "scaling": (cmd_scaling, "precision-versus-(m*l) regression over a ladder"),
        "trace": (cmd_trace, "stage-by-stage pipeline states against closed forms"),
        "qfi": (cmd_qfi, "generator spreads and Fisher-information budget"),
    }
    for name, (fn, help_text) in handlers.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(handler=fn)

    lister = sub.add_parser("presets", help="list packaged configuration names")
    lister.set_defaults(handler=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.subcommand == "presets":
        for name in preset_names():
            print(name)
        return EXIT_OK
    try:
        cfg = _load_config(args)
        outdir = Path(args.out) if args.out else resolve_output_dir(cfg)
        outdir.mkdir(parents=True, exist_ok=True)
        return args.handler(cfg, outdir, args.check)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
