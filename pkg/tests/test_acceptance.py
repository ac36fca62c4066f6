"""Exit criteria. Each test records one PASS/FAIL line for the summary."""

import time
from dataclasses import replace

import numpy as np
import pytest

from dpsqkd import harness, jones
from dpsqkd.harness import DriftConfig, ExperimentConfig, ServoConfig
from dpsqkd.optics import PhasePattern, TimeBinState, build_scheme, probe_alice_backward

from conftest import ACCEPTANCE_LINES
from oracles import PLAIN_MIRROR_MEAN_VISIBILITY, plain_mirror_visibility, servo_qber

FRAMES = 100_000


def record(n, name, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {n}. {name}: {detail}")
    assert ok, detail


def test_1_three_pulse_efficiency():
    t = time.perf_counter()
    st = harness.run_experiment(ExperimentConfig(scheme="single:3", frames=FRAMES, seed=101))
    elapsed = time.perf_counter() - t
    ok = abs(st.efficiency - 2 / 3) <= 0.01 and elapsed < 30
    record(1, "3-pulse efficiency 2/3 +/- 0.01", ok,
           f"efficiency={st.efficiency:.5f} qber={st.qber} in {elapsed:.1f}s")


@pytest.mark.parametrize("label, expected", [
    ("series:2", 0.75), ("series:3", 0.875), ("parallel:3", 0.75), ("series:4", 0.9375),
])
def test_2_efficiency_scaling(label, expected):
    st = harness.run_experiment(ExperimentConfig(scheme=label, frames=FRAMES, seed=102))
    assert build_scheme(label).predicted_efficiency == expected
    record(2, f"efficiency {label} = {expected} +/- 0.01",
           abs(st.efficiency - expected) <= 0.01, f"measured={st.efficiency:.5f}")


def test_3_pmd_immunity():
    st = harness.run_experiment(ExperimentConfig(frames=10_000, seed=103,
                                                 fresh_random_optics=True))
    ok = st.qber == 0.0 and st.min_visibility >= 1 - 1e-9
    record(3, "PMD immunity, fresh Haar Q/A_n/B per frame", ok,
           f"qber={st.qber} min_visibility={st.min_visibility:.15f}")


def test_4_cosine_law():
    rng = np.random.default_rng(104)
    grid = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    worst = 0.0
    for _ in range(3):
        dalpha, dbeta = rng.uniform(-np.pi, np.pi, 2)
        worst = max(worst, harness.cosine_sweep(grid, dalpha, dbeta, rng).max_residual)
    record(4, "cosine law, 64-point sweep x 3", worst <= 1e-9, f"max residual={worst:.2e}")


def test_5_faraday_theorem():
    rng = np.random.default_rng(105)
    a = rng.normal(size=(1000, 2, 2)) + 1j * rng.normal(size=(1000, 2, 2))
    a[:500] *= rng.uniform(0.1, 3.0, size=(500, 2, 1))  # non-unitary rows
    a[500:] = jones.haar_su2(rng, 500) * np.exp(1j * rng.uniform(0, 6, (500, 1, 1)))
    m = jones.faraday_mirror()
    err = np.abs(np.swapaxes(a, 1, 2) @ m @ a - jones.det(a)[:, None, None] * m).max()
    record(5, "transpose(A) M A = det(A) M", err <= 1e-12, f"max entry error={err:.2e}")


def test_6_mirror_ablation():
    oracle = plain_mirror_visibility(5_000, seed=1)
    assert abs(oracle - PLAIN_MIRROR_MEAN_VISIBILITY) <= 0.02
    cfg = ExperimentConfig(frames=10_000, seed=106, fresh_random_optics=True)
    faraday, plain = harness.ablate_mirrors(cfg)
    ok = (plain.mean_visibility < faraday.mean_visibility
          and abs(plain.mean_visibility - PLAIN_MIRROR_MEAN_VISIBILITY) <= 0.05)
    record(6, "plain-mirror ablation", ok,
           f"plain={plain.mean_visibility:.4f} (oracle {PLAIN_MIRROR_MEAN_VISIBILITY} +/- 0.05) "
           f"faraday={faraday.mean_visibility:.12f}")


def test_7_servo_closed_loop():
    assert servo_qber(10_000, 0.05, 0.5, "quadrature", seed=3) <= 0.02
    assert servo_qber(10_000, 0.05, 0.5, "off", seed=3) >= 0.2
    base = ExperimentConfig(frames=10_000, seed=107, drift=DriftConfig(0.0, 0.05))
    on = harness.run_experiment(replace(base, servo=ServoConfig(enabled=True)))
    off = harness.run_experiment(base)
    ok = on.qber <= 0.02 and off.qber >= 0.2
    record(7, "servo closed loop, sigmaPhase 0.05/frame", ok,
           f"qber on={on.qber:.4f} (<= 0.02) off={off.qber:.4f} (>= 0.2)")


def test_8_isolator_blocks_backward_probe():
    rng = np.random.default_rng(108)
    stations = harness.Link.initial(ExperimentConfig()).resampled(rng).stations
    worst = 0.0
    for _ in range(100):
        probe = TimeBinState(rng.normal(size=(6, 2)) * rng.uniform(0.1, 100))
        pattern = PhasePattern.from_bits(rng.integers(0, 2, 3))
        worst = max(worst, probe_alice_backward(probe, stations, pattern).norm())
    record(8, "isolator blocks backward probes", worst == 0.0, f"max returned norm={worst}")


def test_9_determinism():
    cfg = ExperimentConfig(frames=3_000, seed=109, fresh_random_optics=True,
                           drift=DriftConfig(0.02, 0.02))
    serial = harness.render([harness.run_experiment(cfg, workers=1)]).encode()
    again = harness.render([harness.run_experiment(cfg, workers=1)]).encode()
    parallel = harness.render([harness.run_experiment(cfg, workers=3)]).encode()
    record(9, "byte-identical CSV, serial and parallel", serial == again == parallel,
           f"{len(serial)} bytes")
