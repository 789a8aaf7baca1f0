import numpy as np
import pytest

from seqdiqkd.attacks import SequentialAttackParams, collective_chsh, collective_qber, optimal_chsh
from seqdiqkd.errors import DomainError, UndefinedEstimateError
from seqdiqkd.keyrate import sequential_qber
from seqdiqkd.protocol import (
    RECORD_FIELDS,
    SimulationConfig,
    analytic_estimates,
    eve_guess_accuracy,
    eve_key_rounds,
    joint_outcome_table,
    run_simulation,
    sift_and_estimate,
)

SEQ = SequentialAttackParams.optimal(0.6, 0.3)


def seq_config(rounds=50_000, seed=0, **kw):
    return SimulationConfig(rounds, seed, "sequential", sequential=SEQ, **kw)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(rounds=0),
            dict(rounds=10, seed=-1),
            dict(rounds=10, attack="coherent"),
            dict(rounds=10, attack="sequential"),
            dict(rounds=10, alpha=1.5),
            dict(rounds=10, base_qber=0.7),
            dict(rounds=10, spot_check_fraction=0.0),
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(DomainError):
            SimulationConfig(**kwargs)

    def test_sequential_defaults_to_tilted_settings(self):
        a1 = seq_config().alice_settings[1]
        assert a1.bloch[0] == pytest.approx(np.sin(SEQ.theta))


class TestJointTable:
    @pytest.mark.parametrize(
        "config",
        [
            SimulationConfig(10),
            SimulationConfig(10, attack="collective", alpha=0.3),
            seq_config(10),
            SimulationConfig(10, attack="sequential", sequential=SequentialAttackParams(0.7, 0.6, 0.4, 0.3)),
        ],
    )
    def test_chain_order_invariant(self, config):
        np.testing.assert_allclose(joint_outcome_table(config, "AEB"), joint_outcome_table(config, "EBA"), atol=1e-14)

    def test_normalised_per_setting(self):
        t = joint_outcome_table(seq_config(10))
        np.testing.assert_allclose(t.sum(axis=(3, 4, 5)), 1.0, atol=1e-12)

    def test_bad_chain(self):
        with pytest.raises(DomainError):
            joint_outcome_table(SimulationConfig(10), "BAE")

    def test_analytic_matches_closed_forms(self):
        s, q = analytic_estimates(seq_config(10))
        assert s == pytest.approx(optimal_chsh(0.6, 0.3), abs=1e-12)
        assert q == pytest.approx(sequential_qber(0.6, 0.3), abs=1e-12)
        s, q = analytic_estimates(SimulationConfig(10, attack="collective", alpha=0.3))
        assert s == pytest.approx(collective_chsh(0.3), abs=1e-12)
        assert q == pytest.approx(collective_qber(0.3), abs=1e-12)

    def test_injected_qber(self):
        _, q = analytic_estimates(seq_config(10, base_qber=0.02))
        assert q == pytest.approx(sequential_qber(0.6, 0.3, 0.02), abs=1e-12)


class TestSampling:
    def test_deterministic(self):
        a, _ = run_simulation(seq_config(20_000, seed=5))
        b, _ = run_simulation(seq_config(20_000, seed=5))
        assert a.to_text() == b.to_text()
        c, _ = run_simulation(seq_config(20_000, seed=6))
        assert a.digest() != c.digest()

    def test_chunking_and_workers_do_not_matter(self):
        cfg = seq_config(30_001, seed=9)
        ref = run_simulation(cfg)[0].digest()
        assert run_simulation(cfg, chunk_size=1000)[0].digest() == ref
        assert run_simulation(cfg, chunk_size=777, workers=4)[0].digest() == ref

    def test_sampling_order_is_distribution_invariant(self):
        cfg = seq_config(200_000, seed=2)
        _, r0 = run_simulation(cfg, order=(0, 1, 2))
        _, r1 = run_simulation(cfg, order=(2, 1, 0))
        se = np.hypot(r0.chsh_se, r1.chsh_se)
        assert abs(r0.chsh - r1.chsh) < 4 * se
        assert abs(r0.qber - r1.qber) < 4 * np.hypot(r0.qber_se, r1.qber_se)

    @pytest.mark.parametrize(
        "config",
        [
            SimulationConfig(100_000, seed=1),
            SimulationConfig(100_000, seed=1, attack="collective", alpha=0.3),
            seq_config(100_000, seed=1),
            seq_config(100_000, seed=1, base_qber=0.03),
        ],
    )
    def test_estimates_within_four_sigma(self, config):
        _, report = run_simulation(config)
        zs, zq = report.z_scores(*analytic_estimates(config))
        assert abs(zs) < 4
        assert abs(zq) < 4 or report.qber == 0

    def test_setting_frequencies(self):
        rec, report = run_simulation(seq_config(60_000, seed=3))
        assert np.mean(rec.x == 0) == pytest.approx(1 / 3, abs=0.01)
        assert np.mean(rec.e == 1) == pytest.approx(0.6, abs=0.01)
        assert np.mean(rec.spot) == pytest.approx(0.25, abs=0.01)
        assert report.sifted_key_length == int(np.sum(~rec.spot & (rec.x == 0) & (rec.y == 1)))


class TestRecords:
    def test_text_layout(self):
        rec, _ = run_simulation(SimulationConfig(5, seed=0))
        lines = rec.to_text().splitlines()
        assert lines[0] == ",".join(RECORD_FIELDS)
        assert len(lines) == 6
        assert lines[1].split(",")[3] == ""

    def test_record_access(self):
        rec, _ = run_simulation(seq_config(10))
        r = rec[-1]
        assert r.index == 9 and r.eve_setting in (1, 2)
        assert len(list(rec)) == 10
        with pytest.raises(ValueError):
            rec.x[0] = 0

    @pytest.mark.parametrize("config", [seq_config(3000, seed=8), SimulationConfig(3000, seed=8)])
    def test_text_matches_per_record_formatting(self, config):
        rec, _ = run_simulation(config)

        def cell(v):
            return "" if v is None else str(int(v))

        expected = [",".join(cell(v) for v in r) for r in rec]
        assert rec.to_text().splitlines()[1:] == expected

    def test_write(self, tmp_path):
        rec, _ = run_simulation(seq_config(100))
        rec.write(tmp_path / "r.csv")
        assert (tmp_path / "r.csv").read_text() == rec.to_text()


class TestEstimation:
    def test_single_round_gives_nan(self):
        _, report = run_simulation(SimulationConfig(1))
        assert np.isnan(report.chsh) and np.isnan(report.chsh_se)

    def test_strict_raises_on_empty_cells(self):
        rec, _ = run_simulation(SimulationConfig(1))
        with pytest.raises(UndefinedEstimateError):
            sift_and_estimate(rec)

    def test_noiseless_key_agrees(self):
        _, report = run_simulation(SimulationConfig(20_000, seed=4))
        assert report.qber == 0
        assert report.qber_se > 0
        assert np.array_equal(report.raw_key_alice, report.raw_key_bob)

    def test_eve_reads_key_on_sharp_rounds(self):
        rec, _ = run_simulation(seq_config(20_000, seed=4))
        assert eve_key_rounds(rec).sum() > 0
        assert eve_guess_accuracy(rec) == 1.0

    def test_eve_data_required(self):
        rec, _ = run_simulation(SimulationConfig(100))
        with pytest.raises(UndefinedEstimateError):
            eve_guess_accuracy(rec)
