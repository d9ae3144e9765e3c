import io

import numpy as np
import pytest

import exlab.excursions as exc
from exlab.paths import (
    SamplePath,
    brownian_ensemble,
    reflect_skorokhod,
    reflect_values,
    sample_brownian,
)


def path(values, dt=1.0, kind="derived"):
    return SamplePath(dt=dt, values=np.asarray(values, dtype=float), kind=kind)


class TestZeroSet:
    def test_all_zero(self):
        assert list(exc.zero_set(path([0, 0, 0]))) == [0, 1, 2]

    def test_literal_scan(self):
        assert list(exc.zero_set(path([0, 1, 0, 2]), tol=0.0)) == [0, 2]

    def test_tolerance_superset_and_count_stability(self):
        dt = 1e-5
        B = sample_brownian(314, 1.0, dt)
        Y, _ = reflect_skorokhod(B)
        strict = set(exc.zero_set(Y, 0.0))
        loose_tol = np.sqrt(dt) * 1e-2
        loose = set(exc.zero_set(Y, loose_tol))
        assert strict <= loose
        delta_min = 100 * dt
        n_strict = sum(1 for g, d in exc.excursion_intervals(Y, 0.0, delta_min)[0])
        n_loose = sum(1 for g, d in exc.excursion_intervals(Y, loose_tol, delta_min)[0])
        assert abs(n_loose - n_strict) / n_strict < 0.05


class TestExcursionIntervals:
    def test_direct_scan(self):
        ivs, dropped = exc.excursion_intervals(path([0, 1, 0, 2, 0]))
        assert ivs == [(0.0, 2.0), (2.0, 4.0)]
        assert dropped == 0

    def test_identically_zero(self):
        assert exc.excursion_intervals(path([0, 0, 0]))[0] == []

    def test_delta_min_discards_and_counts(self):
        ivs, dropped = exc.excursion_intervals(path([0, 1, 0, 2, 2, 2, 0]), delta_min=3.0)
        assert ivs == [(2.0, 6.0)]
        assert dropped == 1

    def test_open_trailing_interval(self):
        ivs, _ = exc.excursion_intervals(path([0, 1, 2, 3]))
        assert ivs == [(0.0, 3.0)]

    def test_disjoint_and_maximal(self):
        B = sample_brownian(55, 1.0, 1e-3)
        Y, _ = reflect_skorokhod(B)
        ivs, _ = exc.excursion_intervals(Y)
        for (g1, d1), (g2, d2) in zip(ivs, ivs[1:]):
            assert d1 <= g2  # disjoint
        # maximality: endpoints are zeros, interiors are not
        for g, d in ivs:
            gi, di = int(round(g / Y.dt)), int(round(d / Y.dt))
            assert Y.values[gi] == 0.0
            assert np.all(Y.values[gi + 1 : di] > 0.0)

    def test_discarded_mass_bound(self):
        # empirical, seeded: short-excursion time lost to the cutoff stays
        # under 2% of the horizon for reflecting paths at dt = 1e-5 (the lost
        # time scales with the realized local time, so average a fixed batch)
        dt = 1e-5
        rows, _ = reflect_values(brownian_ensemble(2024, 10, 1.0, dt))
        dropped = [exc.labeled_runs(y, dt, delta_min=100 * dt).dropped_time for y in rows]
        assert np.mean(dropped) < 0.02


class TestEpochPartition:
    def grid(self):
        # zero set at times {0, 0.5, 2.5, 3.0} on a dt = 0.25 grid
        y = np.ones(13)
        y[[0, 2, 10, 12]] = 0.0
        return path(y, dt=0.25)

    def test_hand_enumeration_unit_one(self):
        Y = self.grid()
        xi = exc.epoch_partition(Y, exc.zero_set(Y))
        assert list(xi) == [0.0, 2.5]  # final epoch open

    def test_no_zero_after_start(self):
        Y = path([0, 1, 2, 3])
        assert list(exc.epoch_partition(Y, exc.zero_set(Y))) == [0.0]

    def test_configurable_unit(self):
        Y = self.grid()
        xi = exc.epoch_partition(Y, exc.zero_set(Y), unit=0.5)
        assert list(xi) == [0.0, 0.5, 2.5, 3.0]

    def test_requires_zero_start(self):
        Y = path([1, 0, 1])
        with pytest.raises(ValueError):
            exc.epoch_partition(Y, exc.zero_set(Y))


class TestOrderExcursions:
    def test_hand_enumeration(self):
        # zero set {0, 0.5, 2.5}: epoch 1 holds lengths 0.5 and 2.0
        ivs = [(0.0, 0.5), (0.5, 2.5)]
        idx = exc.order_excursions(ivs, np.array([0.0, 2.5]))
        by_key = idx.by_key()
        assert (by_key[(1, 1)].g, by_key[(1, 1)].d) == (0.5, 2.5)
        assert (by_key[(1, 2)].g, by_key[(1, 2)].d) == (0.0, 0.5)

    def test_tie_breaks_to_smaller_left_endpoint(self):
        ivs = [(0.6, 0.9), (0.1, 0.4)]
        idx = exc.order_excursions(ivs, np.array([0.0]))
        by_key = idx.by_key()
        assert by_key[(1, 1)].g == 0.1
        assert by_key[(1, 2)].g == 0.6

    def test_single_interval(self):
        idx = exc.order_excursions([(0.2, 0.7)], np.array([0.0]))
        assert idx.intervals[0].key() == (1, 1)

    def test_straddling_boundary_is_inconsistent(self):
        with pytest.raises(exc.InternalInconsistencyError):
            exc.order_excursions([(0.5, 1.5)], np.array([0.0, 1.0]))

    def test_rank_order_is_strict_total_order(self):
        B = sample_brownian(99, 2.0, 1e-3)
        Y, _ = reflect_skorokhod(B)
        idx = exc.extract_indexing(Y, delta_min=0.0)
        ivs = idx.intervals
        # pairwise: within an epoch, rank order coincides with
        # (length desc, left endpoint asc); across epochs, position order
        for i in range(len(ivs)):
            for j in range(i + 1, len(ivs)):
                u, v = ivs[i], ivs[j]
                if u.epoch == v.epoch:
                    precedes = (u.length, -u.g) > (v.length, -v.g)
                    assert (u.rank < v.rank) == precedes
                    assert u.rank != v.rank
                else:
                    assert (u.epoch < v.epoch) == (u.g < v.g)


class TestStraddling:
    def make(self):
        # zero set {0, 0.5, 2.5} on dt = 0.25
        y = np.ones(11)
        y[[0, 2, 10]] = 0.0
        Y = path(y, dt=0.25)
        return Y, exc.extract_indexing(Y)

    def test_zero_time_returns_empty(self):
        Y, idx = self.make()
        assert exc.straddling(Y, idx, 0.5) is None

    def test_hand_enumeration(self):
        Y, idx = self.make()
        e = exc.straddling(Y, idx, 1.0)
        assert (e.interval.g, e.interval.d) == (0.5, 2.5)
        assert e.samples[0] == 0.0 and e.samples[-1] == 0.0

    def test_left_endpoint_excluded(self):
        Y, idx = self.make()
        assert exc.straddling(Y, idx, 0.5) is None  # g of the long interval


def triangle_excursion(length, peak, dt=0.25, g=0.0, sign=None):
    n = int(round(length / dt))
    half = n // 2
    up = np.linspace(0.0, peak, half + 1)
    down = np.linspace(peak, 0.0, n - half + 1)[1:]
    samples = np.concatenate([up, down])
    iv = exc.ExcursionInterval(g=g, d=g + length, epoch=1, rank=1)
    return exc.Excursion(interval=iv, samples=samples, dt=dt, sign=sign)


class TestScaleExcursion:
    def test_positive_scaling(self):
        e = triangle_excursion(4.0, 2.0, dt=0.5)
        scaled = exc.scale_excursion(e, 2.0, -1.0)
        assert scaled.length == pytest.approx(1.0)
        assert scaled.samples.max() == pytest.approx(1.0)  # peak halved

    def test_unit_negative_unchanged(self):
        e = triangle_excursion(2.0, 1.0, sign=-1)
        e = exc.Excursion(interval=e.interval, samples=-e.samples, dt=e.dt, sign=-1)
        scaled = exc.scale_excursion(e, 1.0, -1.0)
        assert scaled.length == pytest.approx(2.0)
        assert np.max(np.abs(scaled.samples)) == pytest.approx(1.0)

    def test_order_reversal_witness(self):
        # lengths 3.0 (positive) and 1.0 (negative) swap order under (2, -1)
        pos = triangle_excursion(3.0, 1.0)
        neg = triangle_excursion(1.0, 0.5, sign=-1)
        s_pos = exc.scale_excursion(pos, 2.0, -1.0)
        s_neg = exc.scale_excursion(neg, 2.0, -1.0)
        assert s_pos.length == pytest.approx(0.75)
        assert s_neg.length == pytest.approx(1.0)
        assert pos.length > neg.length and s_pos.length < s_neg.length

    def test_mixed_sign_rejected(self):
        e = triangle_excursion(2.0, 1.0)
        samples = e.samples.copy()
        samples[1] = -samples[1]
        mixed = exc.Excursion(interval=e.interval, samples=samples, dt=e.dt)
        with pytest.raises(ValueError):
            exc.scale_excursion(mixed, 2.0, -1.0)


class TestItoMcKeanLabels:
    def test_probe_sequence_prefix(self):
        gen = exc.dyadic_probes()
        got = [next(gen) for _ in range(11)]
        assert got == [1, 0.5, 1.5, 2, 0.25, 0.75, 1.25, 1.75, 2.25, 2.75, 3]

    def test_hand_walk(self):
        labels, unlabeled = exc.label_ito_mckean([(0.3, 1.2), (1.5, 1.8)])
        assert labels[(0.3, 1.2)] == 1
        assert labels[(1.5, 1.8)] == 2
        assert unlabeled == 0

    def test_single_interval_containing_one(self):
        labels, _ = exc.label_ito_mckean([(0.9, 1.1)])
        assert labels[(0.9, 1.1)] == 1

    def test_unlabeled_below_resolution(self):
        labels, unlabeled = exc.label_ito_mckean([(0.06, 0.2)], min_spacing=0.5)
        assert labels == {}
        assert unlabeled == 1


class TestBlumenthalLabels:
    def test_hand_bucketing(self):
        labels = exc.label_blumenthal([(0.0, 2.0), (2.0, 2.7), (3.0, 3.6)])
        assert labels[(0.0, 2.0)] == (1, 1)
        assert labels[(2.0, 2.7)] == (2, 1)
        assert labels[(3.0, 3.6)] == (2, 2)

    def test_empty(self):
        assert exc.label_blumenthal([]) == {}

    def test_left_open_boundary(self):
        # length exactly 1/2 misses bucket 2 = (1/2, 1] and lands in bucket 3
        labels = exc.label_blumenthal([(0.0, 0.5)])
        assert labels[(0.0, 0.5)][0] == 3


class TestRelabel:
    def test_identity(self):
        labels = {(0.0, 1.5): (1, 1), (2.0, 2.2): (5, 1)}
        assert exc.relabel(labels, labels) == {(1, 1): (1, 1), (5, 1): (5, 1)}

    def test_epoch_vs_blumenthal_hand_case(self):
        # zero set {0, 0.6, 2.5}: lengths 0.6 and 1.9
        ivs = [(0.0, 0.6), (0.6, 2.5)]
        idx = exc.order_excursions(ivs, np.array([0.0, 2.5]))
        epoch_labels = {(iv.g, iv.d): iv.key() for iv in idx.intervals}
        bl = exc.label_blumenthal(ivs)
        conv = exc.relabel(epoch_labels, bl)
        assert conv[(1, 1)] == (1, 1)  # the 1.9-long interval
        assert conv[(1, 2)] == (2, 1)  # 0.6 lies in (1/2, 1]

    def test_mismatched_sets_rejected(self):
        with pytest.raises(ValueError):
            exc.relabel({(0.0, 1.0): 1}, {(0.0, 2.0): 1})

    def test_transport_preserves_multiset(self):
        B = sample_brownian(7, 1.0, 1e-3)
        Y, _ = reflect_skorokhod(B)
        idx = exc.extract_indexing(Y)
        ivs = [(iv.g, iv.d) for iv in idx.intervals]
        signs = {iv: (1 if i % 3 else -1) for i, iv in enumerate(ivs)}
        bl = exc.label_blumenthal(ivs)
        transported = {bl[iv]: signs[iv] for iv in ivs}
        assert sorted(transported.values()) == sorted(signs.values())


class TestSerializationStability:
    def test_json_round_trip_idempotent(self):
        B = sample_brownian(123, 1.0, 1e-3)
        Y, _ = reflect_skorokhod(B)
        idx = exc.extract_indexing(Y, delta_min=0.01)
        text = exc.indexing_to_json(idx)
        idx2 = exc.indexing_from_json(text)
        assert idx2.ref() == idx.ref()
        assert exc.indexing_to_json(idx2) == text
        # re-ordering the reloaded intervals is a no-op
        ivs = [(iv.g, iv.d) for iv in idx2.intervals]
        re_ordered = exc.order_excursions(ivs, idx2.xi)
        assert {iv.key(): (iv.g, iv.d) for iv in re_ordered.intervals} == \
               {iv.key(): (iv.g, iv.d) for iv in idx2.intervals}

    def test_csv_export_columns(self):
        B = sample_brownian(5, 0.5, 1e-2)
        Y, _ = reflect_skorokhod(B)
        idx = exc.extract_indexing(Y)
        buf = io.StringIO()
        exc.indexing_to_csv(idx, buf)
        header = buf.getvalue().splitlines()[0]
        assert header == "g,d,epoch,rank,length"
