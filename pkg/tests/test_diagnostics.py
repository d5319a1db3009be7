"""Functionals of the vorticity: energy, Casimirs, entropy, L^p norms."""

import io
import math

import numpy as np
import pytest

from vortlab.diagnostics import (
    DiagnosticsRecord,
    DiagnosticsStream,
    casimir,
    energy,
    entropy_two_level,
    lp_norm,
    two_level_entropy_density,
)
from vortlab.spectral import Lattice, SpectralField, linf_norm, random_smooth_field


def random_field(lat, seed, norm=1.0, band=4):
    rng = np.random.default_rng(seed)
    return random_smooth_field(lat, rng.standard_normal, band=band, l2_norm=norm)


class TestEnergy:
    def test_unit_pair(self):
        lat = Lattice(n=8)
        f = SpectralField.zeros(lat)
        f.add_pair((1, 0), 1.0)  # what at +/-(1,0) both 1
        assert energy(f) == pytest.approx(1.0)

    def test_zero(self):
        assert energy(SpectralField.zeros(Lattice(n=8))) == 0.0

    def test_poincare(self):
        lat = Lattice(n=16)
        for seed in range(4):
            f = random_field(lat, seed)
            assert energy(f) <= 0.5 * f.l2_sq() + 1e-14

    def test_tail_bound_under_truncation(self):
        lat = Lattice(n=32)
        f = random_field(lat, 9, band=9)
        K = 4
        trunc = SpectralField(lat, f.coeffs * (lat.ksq <= K**2))
        tail = float(np.sum(lat.mode_weight * (lat.ksq > K**2) * np.abs(f.coeffs) ** 2))
        assert abs(energy(f) - energy(trunc)) <= tail / K**2 + 1e-15


class TestCasimir:
    def test_square_matches_l2(self):
        lat = Lattice(n=16)
        f = random_field(lat, 1)
        assert casimir(f, lambda s: s**2) == pytest.approx(f.l2_sq(), abs=1e-10)

    def test_mean_zero(self):
        lat = Lattice(n=16)
        f = random_field(lat, 2)
        assert abs(casimir(f, lambda s: s)) < 1e-13

    def test_quartic_of_cosine(self):
        lat = Lattice(n=16)
        f = SpectralField.from_modes(lat, {(1, 0): 0.5})  # cos(x1)
        assert casimir(f, lambda s: s**4) == pytest.approx(3.0 / 8.0, abs=1e-12)

    def test_translation_invariance(self):
        lat = Lattice(n=16)
        f = random_field(lat, 3)
        # shift by a grid offset via the spectral phase factor
        shift = 2.0 * np.pi * 3 / lat.n
        phase = np.exp(1j * (lat.k1 * shift + lat.k2 * 0.0))
        g = SpectralField(lat, f.coeffs * phase)
        F = lambda s: np.cosh(np.clip(s, -20, 20))
        assert casimir(g, F) == pytest.approx(casimir(f, F), rel=1e-12)


class TestEntropy:
    def test_zero_field(self):
        lat = Lattice(n=8)
        assert entropy_two_level(SpectralField.zeros(lat)) == pytest.approx(math.log(2.0))

    def test_out_of_range_absent(self):
        lat = Lattice(n=8)
        f = SpectralField.from_modes(lat, {(1, 0): 0.75})  # 1.5 cos(x1)
        assert entropy_two_level(f) is None

    def test_monotone_in_scale_and_matches_quadrature(self):
        lat = Lattice(n=32)
        values = []
        for a in (0.25, 0.5, 0.75):
            f = SpectralField.from_modes(lat, {(1, 0): a / 2})  # a cos(x1)
            got = entropy_two_level(f)
            # independent oracle: dense 1d trapezoid over one period
            t = np.linspace(0.0, 2.0 * np.pi, 20001)
            expect = np.trapezoid(two_level_entropy_density(a * np.cos(t)), t) / (2.0 * np.pi)
            assert got == pytest.approx(expect, abs=1e-8)
            assert 0.0 < got < math.log(2.0)
            values.append(got)
        assert values[0] > values[1] > values[2]

    def test_boundary_value_is_zero(self):
        assert two_level_entropy_density(np.array([1.0, -1.0])) == pytest.approx([0.0, 0.0])


class TestLpNorm:
    def test_p2_matches_spectral(self):
        lat = Lattice(n=16)
        f = random_field(lat, 4)
        assert lp_norm(f, 2) == pytest.approx(math.sqrt(f.l2_sq()), abs=1e-10)

    def test_zero(self):
        assert lp_norm(SpectralField.zeros(Lattice(n=8)), 3) == 0.0

    def test_monotone_towards_linf(self):
        lat = Lattice(n=16)
        f = SpectralField.from_modes(lat, {(1, 0): 0.5})
        sup = linf_norm(f)
        prev = 0.0
        for p in (2, 4, 8, 16, 32, 64, 128):
            val = lp_norm(f, p)
            assert val >= prev - 1e-12
            assert val <= sup + 1e-12
            prev = val
        assert prev == pytest.approx(sup, rel=0.05)

    def test_monotone_in_p_random(self):
        lat = Lattice(n=16)
        for seed in range(3):
            f = random_field(lat, seed)
            assert lp_norm(f, 2) <= lp_norm(f, 4) + 1e-12 <= lp_norm(f, 6) + 2e-12

    def test_rejects_small_p(self):
        with pytest.raises(ValueError):
            lp_norm(SpectralField.zeros(Lattice(n=8)), 0.5)


class TestRecordAndStream:
    def test_measure_and_validate(self):
        lat = Lattice(n=16)
        f = random_field(lat, 5)
        rec = DiagnosticsRecord.measure(1.5, f, p_values=(2, 4),
                                        casimir_fns={"quartic": lambda s: s**4})
        rec.validate()
        assert rec.t == 1.5
        assert rec.l2_sq <= rec.linf**2 + 1e-12
        assert set(rec.lp) == {2, 4}
        assert "quartic" in rec.casimirs

    def test_validate_rejects_norm_violation(self):
        rec = DiagnosticsRecord(t=0, l2_sq=2.0, h1_sq=1.0, linf=1.0, energy=0.5)
        with pytest.raises(ValueError):
            rec.validate()

    def test_csv_stream_header_and_absent_entropy(self):
        lat = Lattice(n=8)
        buf = io.StringIO()
        stream = DiagnosticsStream(buf, p_values=(2,), casimir_labels=("quartic",))
        f = SpectralField.from_modes(lat, {(1, 0): 0.75})
        rec = DiagnosticsRecord.measure(0.25, f, p_values=(2,),
                                        casimir_fns={"quartic": lambda s: s**4})
        stream.append(rec)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "t,l2_sq,h1_sq,linf,energy,entropy2,lp_2,casimir_quartic"
        cells = lines[1].split(",")
        assert cells[5] == ""  # entropy absent for |w| > 1
        assert float(cells[0]) == 0.25
