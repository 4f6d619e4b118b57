import json
import math

import numpy as np
import pytest

from tdbilliards.errors import (
    MismatchedScattererCount,
    OverlappingScatterers,
    SceneParseError,
)
from tdbilliards.geometry import (
    Configuration,
    Disk,
    HorizonSpec,
    Scene,
    admissibility,
    config_distance,
    dump_scene,
    escape_time,
    horizon_check,
    load_scene,
    tau_min,
)

from conftest import brute_force_tau_min


def two_disk_config():
    return Configuration(
        (Disk((0.25, 0.25), 0.2), Disk((0.75, 0.75), 0.2))
    )


class TestTauMin:
    def test_two_disks_frozen(self):
        cfg = two_disk_config()
        expected = math.sqrt(0.5) - 0.4
        assert tau_min(cfg) == pytest.approx(expected, abs=1e-12)
        assert tau_min(cfg) == pytest.approx(brute_force_tau_min(cfg), abs=1e-12)

    def test_single_disk_self_distance(self):
        cfg = Configuration((Disk((0.5, 0.5), 0.2),))
        assert tau_min(cfg) == pytest.approx(0.6, abs=1e-12)

    def test_translation_invariance(self):
        cfg = two_disk_config()
        shifted = cfg.translated((0.321, 0.7654))
        assert tau_min(shifted) == pytest.approx(tau_min(cfg), abs=1e-12)

    def test_relabeling_invariance(self):
        cfg = two_disk_config()
        swapped = Configuration(cfg.disks[::-1])
        assert tau_min(swapped) == pytest.approx(tau_min(cfg), abs=1e-15)

    def test_shipped_scenes_against_oracle(self, triple, two_disks):
        for scene in (triple, two_disks):
            assert tau_min(scene.config) == pytest.approx(
                brute_force_tau_min(scene.config), abs=1e-12
            )

    def test_overlap_raises(self):
        with pytest.raises(OverlappingScatterers):
            Configuration((Disk((0.3, 0.3), 0.2), Disk((0.4, 0.4), 0.2)))


def chord_oracle(R, beta, n_angles=720, n_dirs=720):
    """Longest straight segment in the annulus, by grid maximization."""
    best = 0.0
    for a in np.linspace(0, 2 * math.pi, n_angles, endpoint=False):
        q = np.array([R * math.cos(a), R * math.sin(a)])
        for b in np.linspace(0, math.pi, n_dirs, endpoint=False):
            v = np.array([math.cos(b), math.sin(b)])
            # must not re-enter the inner disk
            tperp = -(q @ v)
            if 0 < tperp and np.hypot(*(q + tperp * v)) < R:
                continue
            # exit from the outer circle
            bq = 2 * (q @ v)
            c = q @ q - (R + beta) ** 2
            t = (-bq + math.sqrt(bq * bq - 4 * c)) / 2
            best = max(best, t)
    return best


class TestEscapeTime:
    def test_closed_form_frozen(self):
        cfg = Configuration((Disk((0.5, 0.5), 0.2),))
        assert escape_time(cfg, 0.05) == pytest.approx(0.15, abs=1e-12)

    def test_matches_chord_oracle(self):
        cfg = Configuration((Disk((0.5, 0.5), 0.2),))
        assert escape_time(cfg, 0.05) == pytest.approx(
            chord_oracle(0.2, 0.05), rel=1e-4
        )

    def test_beta_zero_limit(self):
        cfg = Configuration((Disk((0.5, 0.5), 0.2),))
        assert escape_time(cfg, 0.0) == 0.0
        assert escape_time(cfg, 1e-9) < 1e-4

    def test_larger_disk_dominates(self):
        cfg = Configuration((Disk((0.2, 0.2), 0.1), Disk((0.7, 0.7), 0.2)))
        solo = Configuration((Disk((0.7, 0.7), 0.2),))
        assert escape_time(cfg, 0.05) == escape_time(solo, 0.05)

    def test_monotone_in_beta(self):
        cfg = Configuration((Disk((0.5, 0.5), 0.2),))
        vals = [escape_time(cfg, b) for b in (0.01, 0.02, 0.05, 0.1)]
        assert all(a < b for a, b in zip(vals, vals[1:]))


class TestHorizon:
    def test_single_disk_fails_with_axis_witness(self):
        cfg = Configuration((Disk((0.5, 0.5), 0.2),))
        ok, witness, margin = horizon_check(
            cfg, HorizonSpec(2.0, 0.05), resolution=1 / 32
        )
        assert not ok
        (bx, by), ang = witness
        # the witness segment misses the disk entirely: check against the
        # closed-form distance from the ray to every lattice copy
        v = np.array([math.cos(ang), math.sin(ang)])
        for mx in range(-4, 5):
            for my in range(-4, 5):
                c = np.array([0.5 + mx, 0.5 + my])
                rel = c - np.array([bx, by])
                t = rel @ v
                if 0 < t < 2.0:
                    assert np.linalg.norm(rel - t * v) > 0.2 - 1e-9

    def test_triple_scene_passes(self, triple):
        ok, witness, margin = horizon_check(
            triple.config, triple.horizon, resolution=1 / 128
        )
        assert ok and witness is None
        assert margin > 0.3

    def test_two_disk_scene_fails(self, two_disks):
        ok, witness, _ = horizon_check(
            two_disks.config, two_disks.horizon, resolution=1 / 64
        )
        assert not ok and witness is not None

    def test_phi_at_right_angle_impossible(self, triple):
        ok, witness, _ = horizon_check(
            triple.config, HorizonSpec(2.5, math.pi / 2 - 1e-12), resolution=1 / 16
        )
        assert not ok


class TestAdmissibility:
    def test_identity_pair(self, triple):
        rep = admissibility(
            triple.config, triple.config, triple.beta, triple.horizon
        )
        assert rep.admissible
        assert rep.escape_time < rep.tau_min - rep.beta
        assert rep.flight_bounds == (
            pytest.approx(tau_min(triple.config) / 2),
            triple.horizon.t,
        )

    def test_small_shift_admissible(self):
        cfg = two_disk_config()
        beta = 0.02
        disks = list(cfg.disks)
        disks[1] = Disk((0.76, 0.75), 0.2)
        target = Configuration(tuple(disks))
        rep = admissibility(cfg, target, beta, HorizonSpec(2.0, 0.05))
        assert rep.admissible

    def test_shift_beyond_beta_rejected(self):
        cfg = two_disk_config()
        beta = 0.02
        disks = list(cfg.disks)
        disks[1] = Disk((0.75 + 2 * beta, 0.75), 0.2)
        target = Configuration(tuple(disks))
        rep = admissibility(cfg, target, beta, HorizonSpec(2.0, 0.05))
        assert not rep.admissible and not rep.containment_ok
        assert rep.worst_disk == 1

    def test_mismatched_count(self, triple):
        cfg = two_disk_config()
        with pytest.raises(MismatchedScattererCount):
            admissibility(triple.config, cfg, 0.01, triple.horizon)


class TestConfigDistance:
    def test_identity(self, triple):
        assert config_distance(triple.config, triple.config) == 0.0

    def test_single_shift(self):
        a = two_disk_config()
        disks = list(a.disks)
        disks[0] = Disk((0.26, 0.25), 0.2)
        b = Configuration(tuple(disks))
        assert config_distance(a, b) == pytest.approx(0.01, abs=1e-12)

    def test_torus_wrap(self):
        a = Configuration((Disk((0.99, 0.5), 0.2),))
        b = Configuration((Disk((0.01, 0.5), 0.2),))
        assert config_distance(a, b) == pytest.approx(0.02, abs=1e-12)

    def test_metric_axioms_random_triples(self):
        rng = np.random.default_rng(5)

        def rand_config():
            return Configuration(
                (
                    Disk((rng.uniform(), rng.uniform()), 0.05,
                         rng.uniform(0, 2 * math.pi)),
                )
            )

        for _ in range(60):
            a, b, c = rand_config(), rand_config(), rand_config()
            dab = config_distance(a, b)
            dba = config_distance(b, a)
            assert dab == pytest.approx(dba, abs=1e-14)
            assert dab >= 0
            assert config_distance(a, a) == 0
            assert dab <= config_distance(a, c) + config_distance(c, b) + 1e-12


class TestSceneIO:
    def test_roundtrip(self, tmp_path, triple):
        p = tmp_path / "scene.json"
        dump_scene(triple, p)
        back = load_scene(p)
        assert config_distance(back.config, triple.config) == 0.0
        assert back.horizon == triple.horizon
        assert back.beta == triple.beta

    def test_parse_errors(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(SceneParseError):
            load_scene(p)
        p.write_text(json.dumps({"disks": []}))
        with pytest.raises(SceneParseError):
            load_scene(p)
