#!/usr/bin/env python3
"""Regenerate the golden regression data shipped inside the package.

The joint counting table comes from the Fock oracle; the pinned scalars are
the reference observables the selftest and the regression tests compare
against. Rerunning this script must reproduce the committed files exactly
(everything here is deterministic).
"""

import json
from pathlib import Path

from qas_sim import estimation, measurement
from qas_sim.measurement import PipelineConfig
from qas_sim.outcomes import pair_distribution_to_csv

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "src" / "qas_sim" / "golden"


def main() -> None:
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    pipe = PipelineConfig()

    dist = measurement.qas_full_distribution(pipe, 0.1, tail_tol=1e-10)
    (GOLDEN_DIR / "qas_joint_na1_nth1_alpha0.1.csv").write_text(
        "# joint counting table, n_a = 1, n_th = 1, alpha = 0.1, ideal pipeline\n"
        + pair_distribution_to_csv(dist)
    )

    fi_001 = estimation.onoff_fisher_information(pipe, 0.01)
    pinned = {
        "zpp_alpha0.1": measurement.zpp(pipe, 0.1),
        "onoff_alpha0.1": [float(x) for x in measurement.onoff_probs(pipe, 0.1).as_array()],
        "fi_onoff_alpha0.01": fi_001,
        "fi_onoff_alpha0.1": estimation.onoff_fisher_information(pipe, 0.1),
        "fi_ratio_alpha0.01": fi_001 / estimation.qfi_closed_form(1.0, 1.0, 0.01),
        "crossover_na": estimation.cas_crossover_photon_number(1.0 / fi_001, 0.01, 1.0),
        "cas_variance_na1_alpha0.01_nth0.2": estimation.cas_variance(1.0, 0.01, 0.2),
        "qfi_reduced_alpha0.1": estimation.qfi_numeric_reduced(PipelineConfig(), 0.1),
        "qas_fullcount_fi_alpha0.1": estimation.qas_full_counting_fisher_information(pipe, 0.1),
    }
    (GOLDEN_DIR / "pinned.json").write_text(json.dumps(pinned, indent=2) + "\n")
    for key, value in pinned.items():
        print(f"{key}: {value}")


if __name__ == "__main__":
    main()
