"""Command-line harness that regenerates every figure-level dataset.

Subcommands (all deterministic given config + seed; re-runs are
byte-identical):

    zpp-scan         zero-photon probability vs absorption, QAS vs CAS
    cas-variance     intensity-estimator variance vs absorption or photon number
    bayes-run        seeded Bayesian Monte Carlo rounds (trajectories + summary)
    fi-scan          Fisher information of on-off / full counting vs the quantum bound
    precision-vs-na  per-photon-number precision of the four read-out strategies
    selftest         cross-formalism, normalization, inequality, and golden checks

Outputs are plot-ready CSV or JSON files with the effective configuration
echoed into every header. Flags override config-file values, which override
defaults. The only environment coupling is QAS_SIM_WORKERS (worker count for
the Bayesian rounds); results do not depend on it.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, estimation, gaussian_core, measurement, sampling
from .gaussian_core import SqueezeParams
from .measurement import PipelineConfig
from .outcomes import pair_distribution_from_csv, pair_distribution_to_csv

SCHEMA_VERSION = 1

#: CSV/JSON cell used where the intensity estimator is undefined (n_a = n_th).
SINGULAR_SENTINEL = "singular"


@dataclass
class RunConfig:
    """Flat, file-round-trippable configuration of every subcommand."""

    n_a: float = 1.0
    n_th: float = 1.0
    eta_s: float = 1.0
    eta_i: float = 1.0
    dark_p: float = 0.0
    opa_r: float | None = None
    opa_phase: float | None = None
    alpha_true: float = 0.1
    alpha_min: float = 0.0
    alpha_max: float = 1.0
    alpha_points: int = 101
    fi_alpha_points: int = 25
    precision_alpha: float = 0.01
    na_min: float = 0.1
    na_max: float = 4.0
    na_points: int = 13
    steps: int = 10_000
    rounds: int = 100
    seed: int = 20240809
    sampler: str = "direct"
    out: str = "out"
    format: str = "csv"

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {_format_value(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line {lineno} is not 'key = value': {raw!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in fields:
                raise ValueError(f"unknown config key {key!r} on line {lineno}")
            kwargs[key] = _parse_value(value, fields[key].type)
        return cls(**kwargs)

    def pipeline(self) -> PipelineConfig:
        opa = None
        if self.opa_r is not None or self.opa_phase is not None:
            r = self.opa_r if self.opa_r is not None else SqueezeParams.from_mean_photons(self.n_a).r
            phase = self.opa_phase if self.opa_phase is not None else math.pi
            opa = SqueezeParams(r=r, phase=phase)
        return PipelineConfig(
            n_a=self.n_a,
            n_th=self.n_th,
            opa=opa,
            eta_s=self.eta_s,
            eta_i=self.eta_i,
            dark_p=self.dark_p,
        )


def _format_value(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(text: str, annotation: str):
    if text == "auto":
        return None
    if "int" in str(annotation):
        return int(text)
    if "float" in str(annotation):
        return float(text)
    return text


# ---------------------------------------------------------------------------
# Deterministic file writers
# ---------------------------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if value is None:
        return SINGULAR_SENTINEL
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _jsonable(value):
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    return value


def write_table(
    path: Path,
    columns: list[tuple[str, list]],
    metadata: dict,
    fmt: str,
) -> Path:
    """Write named columns with a metadata header; full round-trip precision."""
    path = path.with_suffix(".csv" if fmt == "csv" else ".json")
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        lines = [f"# {k} = {_format_value(_jsonable(v))}" for k, v in metadata.items()]
        lines.append(",".join(name for name, _ in columns))
        n_rows = len(columns[0][1])
        for i in range(n_rows):
            lines.append(",".join(_cell(values[i]) for _, values in columns))
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "json":
        doc = {
            "metadata": {k: _jsonable(v) for k, v in metadata.items()},
            "columns": {
                name: [None if isinstance(v, str) and v == SINGULAR_SENTINEL else _jsonable(v) for v in values]
                for name, values in columns
            },
        }
        path.write_text(json.dumps(doc, indent=2) + "\n")
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    return path


def _metadata(cfg: RunConfig, command: str) -> dict:
    meta = {"schema_version": SCHEMA_VERSION, "tool_version": __version__, "command": command}
    for f in dataclasses.fields(cfg):
        meta[f.name] = getattr(cfg, f.name)
    return meta


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_zpp_scan(cfg: RunConfig) -> list[Path]:
    pipeline = cfg.pipeline()
    alphas = np.linspace(cfg.alpha_min, cfg.alpha_max, cfg.alpha_points)
    zpp_qas = [measurement.zpp(pipeline, float(a)) for a in alphas]
    zpp_cas = [measurement.cas_zpp(cfg.n_a, float(a), cfg.n_th) for a in alphas]
    path = write_table(
        Path(cfg.out) / "zpp_scan",
        [("alpha", list(alphas)), ("zpp_qas", zpp_qas), ("zpp_cas", zpp_cas)],
        _metadata(cfg, "zpp-scan"),
        cfg.format,
    )
    return [path]


def cmd_cas_variance(cfg: RunConfig, sweep: str = "alpha") -> list[Path]:
    if sweep == "alpha":
        xs = np.linspace(cfg.alpha_min, cfg.alpha_max, cfg.alpha_points)
        rows = [
            (float(x), _cas_variance_or_sentinel(cfg.n_a, float(x), cfg.n_th),
             estimation.shot_noise_limit(float(x), cfg.n_a))
            for x in xs
        ]
        x_name = "alpha"
    elif sweep == "n_a":
        xs = np.logspace(math.log10(cfg.na_min), math.log10(cfg.na_max), cfg.na_points)
        rows = [
            (float(x), _cas_variance_or_sentinel(float(x), cfg.precision_alpha, cfg.n_th),
             estimation.shot_noise_limit(cfg.precision_alpha, float(x)))
            for x in xs
        ]
        x_name = "n_a"
    else:
        raise ValueError(f"sweep must be 'alpha' or 'n_a', got {sweep!r}")
    path = write_table(
        Path(cfg.out) / "cas_variance",
        [
            (x_name, [r[0] for r in rows]),
            ("cas_variance", [r[1] for r in rows]),
            ("shot_noise_limit", [r[2] for r in rows]),
        ],
        {**_metadata(cfg, "cas-variance"), "sweep": sweep},
        cfg.format,
    )
    return [path]


def _cas_variance_or_sentinel(n_a: float, alpha: float, n_th: float):
    try:
        return estimation.cas_variance(n_a, alpha, n_th)
    except Exception:
        return SINGULAR_SENTINEL


def cmd_bayes_run(cfg: RunConfig) -> list[Path]:
    pipeline = cfg.pipeline()
    workers = int(os.environ.get("QAS_SIM_WORKERS", "1"))
    if workers > 1:
        grid = np.linspace(0.0, 1.0, estimation.DEFAULT_GRID_POINTS)
        log_like = sampling._log_likelihood_table(pipeline, grid)
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            trajectories = list(
                pool.map(
                    lambda k: sampling.run_round(
                        pipeline,
                        cfg.alpha_true,
                        cfg.steps,
                        sampling.RngStream(seed=cfg.seed, stream_id=k),
                        sampler=cfg.sampler,
                        log_like=log_like,
                        grid=grid,
                    ),
                    range(cfg.rounds),
                )
            )
    else:
        trajectories = sampling.run_experiment(
            pipeline, cfg.alpha_true, cfg.steps, cfg.rounds, base_seed=cfg.seed, sampler=cfg.sampler
        )

    rounds_col, m_col, mean_col, var_col = [], [], [], []
    for k, traj in enumerate(trajectories):
        for m, a_hat, v_hat in traj.records:
            rounds_col.append(k)
            m_col.append(int(m))
            mean_col.append(a_hat)
            var_col.append(v_hat)
    traj_path = write_table(
        Path(cfg.out) / "bayes_trajectories",
        [
            ("round", rounds_col),
            ("m", m_col),
            ("alpha_hat", mean_col),
            ("var_hat", var_col),
        ],
        _metadata(cfg, "bayes-run"),
        cfg.format,
    )

    fi = estimation.onoff_fisher_information(pipeline, cfg.alpha_true)
    schedule = sampling.checkpoint_schedule(cfg.steps)
    by_m = {int(m): [] for m in schedule}
    for traj in trajectories:
        for m, a_hat, v_hat in traj.records:
            by_m[int(m)].append((a_hat, v_hat))
    summary = {
        "metadata": {
            **{k: _jsonable(v) for k, v in _metadata(cfg, "bayes-run").items()},
            "fi_onoff_at_alpha_true": fi,
        },
        "columns": {
            "m": [int(m) for m in schedule],
            "alpha_hat_mean": [float(np.mean([r[0] for r in by_m[int(m)]])) for m in schedule],
            "alpha_hat_var": [float(np.var([r[0] for r in by_m[int(m)]])) for m in schedule],
            "var_hat_mean": [float(np.mean([r[1] for r in by_m[int(m)]])) for m in schedule],
            "crb": [estimation.cramer_rao(int(m), fi) if m > 0 else None for m in schedule],
        },
    }
    summary_path = Path(cfg.out) / "bayes_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    return [traj_path, summary_path]


def cmd_fi_scan(cfg: RunConfig) -> list[Path]:
    pipeline = cfg.pipeline()
    lo = max(cfg.alpha_min, 0.01)
    hi = min(cfg.alpha_max, 0.99)
    alphas = np.linspace(lo, hi, cfg.fi_alpha_points)
    fi_onoff, fi_full, qfi = [], [], []
    for a in alphas:
        a = float(a)
        fi_onoff.append(estimation.onoff_fisher_information(pipeline, a))
        fi_full.append(estimation.qas_full_counting_fisher_information(pipeline, a))
        qfi.append(estimation.qfi_closed_form(cfg.n_a, cfg.n_th, a))
    path = write_table(
        Path(cfg.out) / "fi_scan",
        [
            ("alpha", list(alphas)),
            ("fi_onoff", fi_onoff),
            ("fi_fullcount", fi_full),
            ("qfi", qfi),
        ],
        _metadata(cfg, "fi-scan"),
        cfg.format,
    )
    return [path]


def cmd_precision_vs_na(cfg: RunConfig) -> list[Path]:
    alpha = cfg.precision_alpha
    nas = np.logspace(math.log10(cfg.na_min), math.log10(cfg.na_max), cfg.na_points)
    qas_onoff, qas_full, cas_intensity, cas_full = [], [], [], []
    for n_a in nas:
        n_a = float(n_a)
        pipe = dataclasses.replace(cfg.pipeline(), n_a=n_a, opa=None)
        qas_onoff.append(1.0 / estimation.onoff_fisher_information(pipe, alpha))
        qas_full.append(1.0 / estimation.qas_full_counting_fisher_information(pipe, alpha))
        cas_intensity.append(_cas_variance_or_sentinel(n_a, alpha, cfg.n_th))
        cas_full.append(
            1.0 / estimation.cas_full_counting_fisher_information(n_a, alpha, cfg.n_th)
        )
    reference = dataclasses.replace(cfg.pipeline(), n_a=1.0, opa=None)
    target = 1.0 / estimation.onoff_fisher_information(reference, alpha)
    crossover = estimation.cas_crossover_photon_number(target, alpha, cfg.n_th)
    meta = {
        **_metadata(cfg, "precision-vs-na"),
        "precision_definition": (
            "variance per single measurement: 1/F for counting read-outs, "
            "error-propagated variance for the intensity read-out"
        ),
        "qas_onoff_precision_at_na1": target,
        "crossover_na": crossover,
    }
    path = write_table(
        Path(cfg.out) / "precision_vs_na",
        [
            ("n_a", list(nas)),
            ("qas_onoff", qas_onoff),
            ("qas_fullcount", qas_full),
            ("cas_intensity", cas_intensity),
            ("cas_fullcount", cas_full),
        ],
        meta,
        cfg.format,
    )
    return [path]


# ---------------------------------------------------------------------------
# Self test
# ---------------------------------------------------------------------------


def _suite_cross_formalism() -> dict:
    worst = 0.0
    for n_a, n_th in [(1.0, 1.0), (0.5, 2.0)]:
        pipe = PipelineConfig(n_a=n_a, n_th=n_th)
        for alpha in (0.0, 0.1, 0.5, 0.9, 1.0):
            # Signal-idler state after the sample channel: full moments.
            table = measurement.qas_post_loss_distribution(pipe, alpha, 84, 84)
            gauss = measurement.qas_post_loss_state(pipe, alpha)
            for mode in (0, 1):
                marg = table.sum(axis=1 - mode)
                n = np.arange(len(marg))
                mean_f = float(n @ marg)
                var_f = float(n**2 @ marg - mean_f**2)
                worst = max(worst, abs(mean_f - gaussian_core.mean_photon(gauss, mode)))
                worst = max(
                    worst, abs(var_f - gaussian_core.photon_number_variance(gauss, mode))
                )
            # Detector-end zero-photon probability, both routes.
            worst = max(
                worst,
                abs(measurement.qas_zpp_fock(pipe, alpha, 84, 84) - measurement.zpp(pipe, alpha)),
            )
        # Detector-end moments at one moderate absorption (tight cutoffs).
        table = measurement.qas_full_distribution(pipe, 0.3, tail_tol=1e-13).pair_table()
        gauss = measurement.qas_output_state(pipe, 0.3)
        for mode in (0, 1):
            marg = table.sum(axis=1 - mode)
            n = np.arange(len(marg))
            mean_f = float(n @ marg)
            var_f = float(n**2 @ marg - mean_f**2)
            worst = max(worst, abs(mean_f - gaussian_core.mean_photon(gauss, mode)))
            worst = max(
                worst, abs(var_f - gaussian_core.photon_number_variance(gauss, mode))
            )
    return {"passed": bool(worst <= 1e-8), "max_deviation": worst}


def _suite_normalization() -> dict:
    worst = 0.0
    pipe = PipelineConfig()
    for alpha in np.linspace(0.0, 1.0, 11):
        probs = measurement.onoff_probs(pipe, float(alpha)).as_array()
        worst = max(worst, abs(probs.sum() - 1.0), float(-probs.min()))
    dist = measurement.qas_full_distribution(pipe, 0.3)
    worst = max(worst, abs(dist.total() - 1.0))
    return {"passed": bool(worst <= 1e-9), "max_deviation": worst}


def _suite_information_inequality() -> dict:
    pipe = PipelineConfig()
    worst_slack = 0.0
    for alpha in (0.05, 0.1, 0.3):
        fo = estimation.onoff_fisher_information(pipe, alpha)
        ff = estimation.qas_full_counting_fisher_information(pipe, alpha)
        qf = estimation.qfi_closed_form(1.0, 1.0, alpha)
        worst_slack = max(worst_slack, fo - ff, ff - qf)
    return {"passed": bool(worst_slack <= 1e-6), "max_deviation": worst_slack}


def _suite_golden(golden_dir=None) -> dict:
    if golden_dir is None:
        golden_dir = resources.files("qas_sim") / "golden"
    report = {"passed": True, "max_deviation": 0.0, "files": []}
    joint_file = golden_dir / "qas_joint_na1_nth1_alpha0.1.csv"
    golden = pair_distribution_from_csv(joint_file.read_text())
    golden_table = golden.pair_table()
    fresh = measurement.qas_full_distribution(
        PipelineConfig(), 0.1, out_dim=golden_table.shape[0], tail_tol=1e-10
    ).pair_table()
    dev = float(np.abs(golden_table - fresh).max())
    report["max_deviation"] = dev
    if dev > 1e-8:
        report["passed"] = False
        report["files"].append(str(joint_file))

    pinned = json.loads((golden_dir / "pinned.json").read_text())
    pipe = PipelineConfig()
    recomputed = {
        "zpp_alpha0.1": measurement.zpp(pipe, 0.1),
        "onoff_alpha0.1": list(measurement.onoff_probs(pipe, 0.1).as_array()),
        "fi_onoff_alpha0.01": estimation.onoff_fisher_information(pipe, 0.01),
        "fi_onoff_alpha0.1": estimation.onoff_fisher_information(pipe, 0.1),
        "fi_ratio_alpha0.01": (
            estimation.onoff_fisher_information(pipe, 0.01)
            / estimation.qfi_closed_form(1.0, 1.0, 0.01)
        ),
        "crossover_na": estimation.cas_crossover_photon_number(
            1.0 / estimation.onoff_fisher_information(pipe, 0.01), 0.01, 1.0
        ),
        "cas_variance_na1_alpha0.01_nth0.2": estimation.cas_variance(1.0, 0.01, 0.2),
    }
    for key, value in recomputed.items():
        expected = pinned[key]
        dev = float(np.max(np.abs(np.asarray(value) - np.asarray(expected))))
        rel = dev / max(1.0, float(np.max(np.abs(np.asarray(expected)))))
        report["max_deviation"] = max(report["max_deviation"], rel)
        if rel > 1e-6:
            report["passed"] = False
            report["files"].append(f"pinned.json:{key}")
    return report


def cmd_selftest(cfg: RunConfig) -> int:
    suites = {
        "cross_formalism": _suite_cross_formalism,
        "normalization": _suite_normalization,
        "information_inequality": _suite_information_inequality,
        "golden_regression": _suite_golden,
    }
    report = {"suites": {}, "passed": True}
    for name, fn in suites.items():
        result = fn()
        report["suites"][name] = result
        report["passed"] = report["passed"] and result["passed"]
    print(json.dumps(report, indent=2))
    return 0 if report["passed"] else 1


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="flat key = value config file")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=str, default=None, help="output directory")
    common.add_argument("--format", choices=["csv", "json"], default=None)
    common.add_argument("--sampler", choices=["direct", "metropolis"], default=None)
    common.add_argument("--rounds", type=int, default=None)
    common.add_argument("--steps", type=int, default=None)

    parser = argparse.ArgumentParser(prog="qas-sim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("zpp-scan", parents=[common])
    cas = sub.add_parser("cas-variance", parents=[common])
    cas.add_argument("--sweep", choices=["alpha", "n_a"], default="alpha")
    sub.add_parser("bayes-run", parents=[common])
    sub.add_parser("fi-scan", parents=[common])
    sub.add_parser("precision-vs-na", parents=[common])
    sub.add_parser("selftest", parents=[common])
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, overridden by the config file, overridden by flags."""
    cfg = RunConfig()
    if args.config is not None:
        cfg = RunConfig.from_text(Path(args.config).read_text())
    overrides = {}
    for key in ("seed", "out", "format", "sampler", "rounds", "steps"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return dataclasses.replace(cfg, **overrides)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    cfg = load_config(args)
    if args.command == "zpp-scan":
        cmd_zpp_scan(cfg)
    elif args.command == "cas-variance":
        cmd_cas_variance(cfg, sweep=args.sweep)
    elif args.command == "bayes-run":
        cmd_bayes_run(cfg)
    elif args.command == "fi-scan":
        cmd_fi_scan(cfg)
    elif args.command == "precision-vs-na":
        cmd_precision_vs_na(cfg)
    elif args.command == "selftest":
        return cmd_selftest(cfg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
