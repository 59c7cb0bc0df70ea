import json

import numpy as np
import pytest

from ddh2mor import (
    FormatError,
    FreqSample,
    ImpulseData,
    InsufficientData,
    NoiseSpec,
    Rom,
    SingularE,
    Trajectory,
    TrajectorySet,
    generate_trajectories,
    impulse_from_system,
    init_data_bt,
    init_dmdc,
    init_loewner,
    load_frequency_samples,
    load_impulse_data,
    make_stable,
    markov_parameters,
    sample_frequency_data,
    save_frequency_samples,
    save_impulse_data,
    transfer_eval,
)
from helpers import random_rom, random_system, rel_max_err

UNIT_CIRCLE_PROBES = np.exp(1j * np.linspace(0.1, 2 * np.pi - 0.1, 16))


def transfer_mismatch(a, b, points=UNIT_CIRCLE_PROBES):
    worst = 0.0
    for z in points:
        Ha = transfer_eval(a, z)
        Hb = transfer_eval(b, z)
        worst = max(worst, np.abs(Ha - Hb).max() / max(1.0, np.abs(Hb).max()))
    return worst


# -------------------------------------------------------------- make_stable


def test_make_stable_leaves_good_rom_untouched():
    rom = Rom(np.diag([0.5, -0.3]), np.ones((2, 1)), np.ones((1, 2)))
    assert make_stable(rom) is rom


def test_make_stable_rescales_unstable_spectrum():
    rom = Rom(np.diag([1.5, 0.5]), np.ones((2, 1)), np.ones((1, 2)))
    out = make_stable(rom)
    assert out.satisfies_spectral_bounds()
    assert np.max(out.eig_moduli()) == pytest.approx(0.99, rel=1e-10)
    # pure rescaling keeps directions and the other matrices
    np.testing.assert_allclose(out.Ahat, rom.Ahat * (0.99 / 1.5), atol=1e-14)
    np.testing.assert_array_equal(out.Bhat, rom.Bhat)
    np.testing.assert_array_equal(out.Chat, rom.Chat)


def test_make_stable_shifts_vanishing_modes():
    rom = Rom(np.zeros((2, 2)), np.ones((2, 1)), np.ones((1, 2)))
    out = make_stable(rom)
    np.testing.assert_allclose(out.Ahat, 1e-6 * np.eye(2), atol=1e-18)
    assert out.satisfies_spectral_bounds()


def test_make_stable_handles_both_defects_at_once():
    rom = Rom(np.diag([2.0, 0.0]), np.ones((2, 1)), np.ones((1, 2)))
    out = make_stable(rom)
    assert out.satisfies_spectral_bounds()


def test_make_stable_boundary_radius_counts_as_unstable():
    rom = Rom(np.array([[1.0]]), np.ones((1, 1)), np.ones((1, 1)))
    out = make_stable(rom)
    assert out.Ahat[0, 0] == pytest.approx(0.99)


# --------------------------------------------------------------------- DMDc


def test_dmdc_recovers_full_order_transfer():
    sys = random_system(np.random.default_rng(0), 4, 2)
    trajs = generate_trajectories(sys, 20, 6, NoiseSpec(seed=1))
    rom = init_dmdc(trajs, 4)
    assert transfer_mismatch(rom, sys) < 1e-6


def test_dmdc_reduced_order_shapes_and_annulus():
    sys = random_system(np.random.default_rng(2), 8, 2)
    trajs = generate_trajectories(sys, 30, 8, NoiseSpec(seed=3))
    rom = init_dmdc(trajs, 3)
    assert (rom.r, rom.m, rom.p) == (3, 2, 8)
    assert rom.satisfies_spectral_bounds()


def test_dmdc_rejects_rank_deficient_snapshots():
    zero = Trajectory(np.zeros((4, 3)), np.zeros((3, 1)))
    with pytest.raises(InsufficientData):
        init_dmdc(TrajectorySet((zero,)), 1)


# ------------------------------------------------------------------ Loewner


def test_loewner_interpolates_sampled_transfer():
    true = random_rom(np.random.default_rng(4), 3, 2, 2)
    left, right = sample_frequency_data(true, 8, 8, seed=5)
    rom = init_loewner(left, right, 3)
    for s in left + right:
        err = np.abs(transfer_eval(rom, s.z) - s.value).max()
        assert err < 1e-8 * max(1.0, np.abs(s.value).max())


def test_loewner_real_sample_points():
    true = Rom(np.array([[0.5]]), np.array([[1.0]]), np.array([[1.0]]))
    def sample(z, side):
        return FreqSample(z, transfer_eval(true, z), side)
    left = [sample(1.2, "left"), sample(1.4, "left")]
    right = [sample(1.6, "right"), sample(1.8, "right")]
    rom = init_loewner(left, right, 1)
    for s in left + right:
        assert np.abs(transfer_eval(rom, s.z) - s.value).max() < 1e-8


def test_loewner_missing_conjugate_partner():
    true = random_rom(np.random.default_rng(6), 2, 1, 1)
    left, right = sample_frequency_data(true, 4, 4, seed=7)
    with pytest.raises(ValueError):
        init_loewner(left[:-1], right, 2)


def test_loewner_conjugate_value_mismatch():
    true = random_rom(np.random.default_rng(8), 2, 1, 1)
    left, right = sample_frequency_data(true, 4, 4, seed=9)
    broken = list(left)
    broken[1] = FreqSample(left[1].z, left[1].value + 0.5, "left")
    with pytest.raises(ValueError):
        init_loewner(broken, right, 2)


def test_loewner_coincident_points_rejected():
    true = random_rom(np.random.default_rng(10), 2, 1, 1)
    left, _ = sample_frequency_data(true, 4, 4, seed=11)
    clash = [FreqSample(s.z, s.value, "right") for s in left]
    with pytest.raises(ValueError):
        init_loewner(left, clash, 2)


def test_loewner_order_beyond_data_rank():
    true = random_rom(np.random.default_rng(12), 2, 1, 1)
    left, right = sample_frequency_data(true, 6, 6, seed=13)
    with pytest.raises(SingularE):
        init_loewner(left, right, 5)


def test_loewner_empty_side_rejected():
    with pytest.raises(ValueError):
        init_loewner([], [], 1)


# ---------------------------------------------------------- Hankel realizer


def test_data_bt_reproduces_markov_parameters():
    true = random_rom(np.random.default_rng(14), 3, 2, 2)
    imp = impulse_from_system(true, 10)
    rom = init_data_bt(imp, 3)
    got = markov_parameters(rom, 10)
    assert rel_max_err(got, imp.markov) < 1e-8


def test_data_bt_dimensions():
    true = random_rom(np.random.default_rng(15), 4, 3, 2)
    rom = init_data_bt(impulse_from_system(true, 12), 2)
    assert (rom.r, rom.m, rom.p) == (2, 3, 2)
    assert rom.satisfies_spectral_bounds()


def test_data_bt_order_beyond_hankel_rank():
    true = random_rom(np.random.default_rng(16), 2, 1, 1)
    with pytest.raises(InsufficientData):
        init_data_bt(impulse_from_system(true, 10), 4)


def test_data_bt_needs_two_parameters():
    with pytest.raises(InsufficientData):
        init_data_bt(ImpulseData(np.ones((1, 1, 1))), 1)


def test_data_bt_zero_impulse_rejected():
    with pytest.raises(InsufficientData):
        init_data_bt(ImpulseData(np.zeros((6, 2, 2))), 1)


# ------------------------------------------------------------ harness data


def test_sample_frequency_data_layout():
    sys = random_system(np.random.default_rng(17), 5, 2)
    left, right = sample_frequency_data(sys, 6, 4, seed=18)
    assert len(left) == 6 and len(right) == 4
    assert all(s.side == "left" for s in left)
    assert all(s.side == "right" for s in right)
    for group in (left, right):
        zs = [s.z for s in group]
        for s in group:
            assert any(abs(z - s.z.conjugate()) < 1e-14 for z in zs)
            assert abs(abs(s.z) - 1.0) < 1e-12
            np.testing.assert_allclose(s.value, transfer_eval(sys, s.z), atol=1e-12)


def test_sample_frequency_data_deterministic_and_validated():
    sys = random_system(np.random.default_rng(19), 3, 1)
    a = sample_frequency_data(sys, 4, 4, seed=20)
    b = sample_frequency_data(sys, 4, 4, seed=20)
    assert [s.z for s in a[0]] == [s.z for s in b[0]]
    with pytest.raises(ValueError):
        sample_frequency_data(sys, 3, 4, seed=0)


def test_impulse_from_system_matches_markov():
    sys = random_system(np.random.default_rng(21), 4, 2)
    imp = impulse_from_system(sys, 7)
    np.testing.assert_array_equal(imp.markov, markov_parameters(sys, 7))
    assert imp.T == 7


# ------------------------------------------------------------------- files


def test_frequency_samples_roundtrip(tmp_path):
    sys = random_system(np.random.default_rng(22), 4, 2)
    left, right = sample_frequency_data(sys, 4, 6, seed=23)
    path = tmp_path / "samples.json"
    save_frequency_samples(left, right, path)
    left2, right2 = load_frequency_samples(path)
    assert len(left2) == 4 and len(right2) == 6
    for a, b in zip(left + right, left2 + right2):
        assert a.z == b.z and a.side == b.side
        np.testing.assert_array_equal(a.value, b.value)
    rom = init_loewner(left2, right2, 3)
    assert rom.satisfies_spectral_bounds()


def test_impulse_roundtrip(tmp_path):
    sys = random_system(np.random.default_rng(24), 3, 2)
    imp = impulse_from_system(sys, 5)
    path = tmp_path / "impulse.json"
    save_impulse_data(imp, path)
    again = load_impulse_data(path)
    np.testing.assert_array_equal(again.markov, imp.markov)


def test_frequency_loader_rejects_bad_payloads(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{broken")
    with pytest.raises(FormatError):
        load_frequency_samples(path)
    path.write_text(json.dumps({"left": []}))
    with pytest.raises(FormatError):
        load_frequency_samples(path)
    path.write_text(json.dumps({"left": [{"value": [[1.0]]}],
                                "right": [{"z": {"re": 1.0}, "value": [[1.0]]}]}))
    with pytest.raises(FormatError):
        load_frequency_samples(path)
    path.write_text(json.dumps({"left": [{"z": "one", "value": [[1.0]]}],
                                "right": [{"z": {"re": 1.0}, "value": [[1.0]]}]}))
    with pytest.raises(FormatError):
        load_frequency_samples(path)


def test_impulse_loader_rejects_bad_payloads(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("not json at all")
    with pytest.raises(FormatError):
        load_impulse_data(path)
    path.write_text(json.dumps({}))
    with pytest.raises(FormatError):
        load_impulse_data(path)
    path.write_text(json.dumps(
        {"markov": [[[{"re": 1.0, "im": 0.5}]]]}))
    with pytest.raises(FormatError):
        load_impulse_data(path)


def test_freq_sample_validation():
    with pytest.raises(ValueError):
        FreqSample(1.0 + 0.5j, np.ones((1, 1)), "middle")
