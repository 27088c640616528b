"""End-to-end acceptance gate.

Each test exercises one acceptance criterion at its stated tolerance and
runtime budget and prints one PASS line when it holds. Golden values cited
here were pinned by the Fock-oracle run (scripts/regenerate_golden.py) before
the estimators were wired up.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from qas_sim import cli, estimation, fock_core, gaussian_core, measurement, sampling
from qas_sim.cli import RunConfig
from qas_sim.gaussian_core import SqueezeParams
from qas_sim.measurement import PipelineConfig

GOLDEN_FI_RATIO_001 = 0.9383254209906433
GOLDEN_CROSSOVER_NA = 384.8441231196805

ALPHA_GRID_21 = np.linspace(0.0, 1.0, 21)
SOURCE_GRID = [0.0, 0.5, 1.0, 2.0]


class Budget:
    def __init__(self, seconds: float):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.monotonic() - self.start
        if exc == (None, None, None):
            assert self.elapsed < self.seconds, (
                f"runtime {self.elapsed:.1f}s exceeds budget {self.seconds}s"
            )


def test_criterion_01_tmsv_statistics():
    with Budget(1.0) as budget:
        table = fock_core.joint_number_distribution(fock_core.tmsv_fock(1.0, 36)).pair_table()
        for n in range(6):
            assert table[n, n] == pytest.approx(0.5 ** (n + 1), abs=1e-10)
        off_diagonal = table - np.diag(np.diag(table))
        assert np.abs(off_diagonal).max() <= 1e-10
    print(f"\nACCEPTANCE 1 PASS - source statistics exact ({budget.elapsed:.2f}s)")


def test_criterion_02_zpp_anchor():
    with Budget(10.0) as budget:
        state = fock_core.tmsv_fock(1.0, 40)
        params = SqueezeParams.from_mean_photons(1.0).inverse()
        out = fock_core.apply_two_mode_squeeze_fock(state, 0, 1, params, tail_tol=1e-7)
        assert out.probabilities()[0, 0] == pytest.approx(1.0, abs=1e-8)

        cfg = PipelineConfig()
        zpp_values = [measurement.zpp(cfg, float(a)) for a in np.linspace(0.0, 0.2, 21)]
        assert zpp_values[0] == pytest.approx(1.0, abs=1e-8)
        assert all(b < a for a, b in zip(zpp_values, zpp_values[1:]))
    print(f"\nACCEPTANCE 2 PASS - zero-photon anchor and monotonicity ({budget.elapsed:.2f}s)")


def test_criterion_03_qfi_closed_form():
    cfg = PipelineConfig()
    with Budget(120.0) as budget:
        worst = 0.0
        for alpha in (0.05, 0.1, 0.25, 0.5, 0.75, 0.95):
            closed = estimation.qfi_closed_form(1.0, 1.0, alpha)
            numeric = estimation.qfi_numeric(cfg, alpha)
            rel = abs(numeric - closed) / closed
            worst = max(worst, rel)
            assert rel <= 1e-2, f"alpha={alpha}: {numeric} vs {closed}"
    print(f"\nACCEPTANCE 3 PASS - quantum bound verified to {worst:.2e} rel ({budget.elapsed:.2f}s)")


def test_criterion_04_shot_noise_reduction():
    with Budget(1.0) as budget:
        for n_a in (0.5, 1.0, 10.0):
            for alpha in np.arange(0.01, 1.0, 0.01):
                got = estimation.cas_variance(n_a, float(alpha), 0.0)
                assert got == pytest.approx(
                    estimation.shot_noise_limit(float(alpha), n_a), abs=1e-10
                )
    print(f"\nACCEPTANCE 4 PASS - noiseless intensity variance at shot noise ({budget.elapsed:.2f}s)")


def test_criterion_05_information_inequalities():
    cfg = PipelineConfig()
    with Budget(120.0) as budget:
        for alpha in (0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.5, 0.7):
            fi_onoff = estimation.onoff_fisher_information(cfg, alpha)
            fi_full = estimation.qas_full_counting_fisher_information(cfg, alpha)
            qfi = estimation.qfi_closed_form(1.0, 1.0, alpha)
            assert fi_onoff - fi_full >= -1e-6 or fi_onoff <= fi_full + 1e-6
            assert fi_onoff <= fi_full + 1e-6
            assert fi_full <= qfi + 1e-6

        ratios = [
            estimation.onoff_fisher_information(cfg, a) / estimation.qfi_closed_form(1.0, 1.0, a)
            for a in (0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3)
        ]
        # Non-decreasing as absorption decreases over (0, 0.3].
        assert all(r_small >= r_large - 1e-9 for r_small, r_large in zip(ratios, ratios[1:]))
        assert ratios[0] == pytest.approx(GOLDEN_FI_RATIO_001, rel=1e-9)
    print(f"\nACCEPTANCE 5 PASS - information ordering and pinned ratio ({budget.elapsed:.2f}s)")


def test_criterion_06_bayesian_convergence():
    cfg = PipelineConfig()
    with Budget(60.0) as budget:
        trajectories = sampling.run_experiment(
            cfg, alpha_true=0.1, M=10_000, rounds=100, base_seed=20240809
        )
        finals = np.array([t.final() for t in trajectories])
        mean = finals[:, 0].mean()
        stderr = finals[:, 0].std(ddof=1) / np.sqrt(100)
        assert abs(mean - 0.1) <= 3.0 * stderr

        fi = estimation.onoff_fisher_information(cfg, 0.1)
        crb = estimation.cramer_rao(10_000, fi)
        within = np.sum((finals[:, 1] >= crb / 2.0) & (finals[:, 1] <= crb * 2.0))
        assert within >= 90
    print(
        f"\nACCEPTANCE 6 PASS - mean {mean:.5f} (3SE {3*stderr:.5f}), "
        f"{within}/100 rounds within 2x CRB ({budget.elapsed:.2f}s)"
    )


def test_criterion_07_sampler_equivalence():
    from scipy import stats

    cfg = PipelineConfig()
    with Budget(10.0) as budget:
        probs = measurement.onoff_probs(cfg, 0.1)
        chain = sampling.metropolis_chain(probs, sampling.RngStream(101), 100_000, burn_in=1000)
        counts_chain = np.bincount(chain, minlength=4)
        _, p_theory = stats.chisquare(counts_chain, probs.as_array() * chain.size)
        assert p_theory > 1e-4

        direct = sampling.categorical_draws(probs, sampling.RngStream(102), 100_000)
        counts_direct = np.bincount(direct, minlength=4)
        _, p_direct = stats.chisquare(counts_direct, probs.as_array() * direct.size)
        assert p_direct > 1e-4

        _, p_two_sample, _, _ = stats.chi2_contingency(np.stack([counts_chain, counts_direct]))
        assert p_two_sample > 1e-4
    print(
        f"\nACCEPTANCE 7 PASS - GOF p-values {p_theory:.3f}/{p_direct:.3f}, "
        f"two-sample {p_two_sample:.3f} ({budget.elapsed:.2f}s)"
    )


def test_criterion_08_several_hundred_photon_crossover():
    cfg = PipelineConfig()
    with Budget(120.0) as budget:
        target = 1.0 / estimation.onoff_fisher_information(cfg, 0.01)
        crossover = estimation.cas_crossover_photon_number(target, 0.01, 1.0)
        assert crossover >= 100.0
        assert crossover == pytest.approx(GOLDEN_CROSSOVER_NA, rel=1e-9)
    print(f"\nACCEPTANCE 8 PASS - crossover at n_a = {crossover:.1f} ({budget.elapsed:.2f}s)")


def test_criterion_09_cross_formalism_oracle_suite():
    worst = 0.0
    with Budget(120.0) as budget:
        # Post-loss signal/idler states: moments and vacuum probability on
        # the full grid, with cutoffs shared across source settings so the
        # beam-splitter blocks are reused at each absorption value.
        C = F = 80
        for alpha in ALPHA_GRID_21:
            for n_a in SOURCE_GRID:
                for n_th in SOURCE_GRID:
                    pipe = PipelineConfig(n_a=n_a, n_th=n_th)
                    table = measurement.qas_post_loss_distribution(pipe, float(alpha), C, F)
                    gauss = measurement.qas_post_loss_state(pipe, float(alpha))
                    n1 = np.arange(table.shape[0])
                    n2 = np.arange(table.shape[1])
                    for mode, n_vals, marg in (
                        (0, n1, table.sum(axis=1)),
                        (1, n2, table.sum(axis=0)),
                    ):
                        mean = float(n_vals @ marg)
                        var = float(n_vals**2 @ marg - mean**2)
                        worst = max(worst, abs(mean - gaussian_core.mean_photon(gauss, mode)))
                        worst = max(
                            worst,
                            abs(var - gaussian_core.photon_number_variance(gauss, mode)),
                        )
                    worst = max(
                        worst, abs(table[0, 0] - gaussian_core.vacuum_probability(gauss))
                    )
                    # Detector-end zero-photon probability, Fock vs Gaussian.
                    worst = max(
                        worst,
                        abs(
                            measurement.qas_zpp_fock(pipe, float(alpha), C, F)
                            - measurement.zpp(pipe, float(alpha))
                        ),
                    )
        assert worst <= 1e-8, f"post-loss/ZPP deviation {worst:.2e}"

        # Detector-end moments at spot checks across the grid corners.
        for n_a, n_th, alpha in (
            (1.0, 1.0, 0.1),
            (1.0, 1.0, 0.5),
            (1.0, 1.0, 1.0),
            (0.5, 2.0, 0.3),
            (2.0, 1.0, 0.25),
            (2.0, 2.0, 0.5),
            (0.0, 1.0, 0.5),
            (1.0, 0.0, 0.7),
        ):
            pipe = PipelineConfig(n_a=n_a, n_th=n_th)
            table = measurement.qas_full_distribution(pipe, alpha, tail_tol=1e-13).pair_table()
            gauss = measurement.qas_output_state(pipe, alpha)
            for mode, marg in ((0, table.sum(axis=1)), (1, table.sum(axis=0))):
                n = np.arange(len(marg))
                mean = float(n @ marg)
                var = float(n**2 @ marg - mean**2)
                worst = max(worst, abs(mean - gaussian_core.mean_photon(gauss, mode)))
                worst = max(
                    worst, abs(var - gaussian_core.photon_number_variance(gauss, mode))
                )
        assert worst <= 1e-8, f"detector-end deviation {worst:.2e}"

        # Coherent-probe chain: moments and zero-count probability.
        for n_a in SOURCE_GRID:
            for n_th in SOURCE_GRID:
                for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
                    mean_g, var_g = measurement.cas_intensity_stats(n_a, alpha, n_th)
                    dist = measurement.cas_full_distribution(n_a, alpha, n_th)
                    n = np.arange(len(dist.probs))
                    mean_f = float(n @ dist.probs)
                    var_f = float(n**2 @ dist.probs - mean_f**2)
                    worst = max(worst, abs(mean_f - mean_g), abs(var_f - var_g))
                    worst = max(
                        worst,
                        abs(float(dist.probs[0]) - measurement.cas_zpp(n_a, alpha, n_th)),
                    )
        assert worst <= 1e-8, f"coherent-chain deviation {worst:.2e}"
    print(f"\nACCEPTANCE 9 PASS - worst cross-formalism deviation {worst:.2e} ({budget.elapsed:.2f}s)")


def test_criterion_10_cli_determinism(tmp_path):
    base = dict(
        alpha_points=7,
        fi_alpha_points=3,
        na_points=3,
        na_min=0.5,
        na_max=2.0,
        rounds=3,
        steps=64,
        seed=20240809,
    )
    commands = {
        "zpp-scan": cli.cmd_zpp_scan,
        "cas-variance": cli.cmd_cas_variance,
        "bayes-run": cli.cmd_bayes_run,
        "fi-scan": cli.cmd_fi_scan,
        "precision-vs-na": cli.cmd_precision_vs_na,
    }
    for name, command in commands.items():
        cfg = RunConfig(out=str(tmp_path / name), **base)
        first = [p.read_bytes() for p in command(cfg)]
        second = [p.read_bytes() for p in command(cfg)]
        assert first == second, f"{name}: rerun produced different bytes"
    print("\nACCEPTANCE 10 PASS - byte-identical reruns for all subcommands")


def test_selftest_command_exits_clean(capsys):
    status = cli.cmd_selftest(RunConfig())
    report = json.loads(capsys.readouterr().out)
    assert status == 0
    assert report["passed"]
    assert set(report["suites"]) == {
        "cross_formalism",
        "normalization",
        "information_inequality",
        "golden_regression",
    }
    for suite in report["suites"].values():
        assert "max_deviation" in suite
